mod common;

use cbert_core::corpus::Label;
use cbert_core::encoder::EncoderOutput;
use cbert_core::heads::*;
use cbert_core::nn::Mode;
use cbert_core::tensor::Tensor;
use cbert_core::tokenizer::TokenSpan;
use cbert_core::training::binary_loss;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    assert_eq!(shape.iter().product::<usize>(), data.len());
    Tensor {
        shape: shape.to_vec(),
        data: data.to_vec(),
    }
}

fn enc_from_rows(rows: &[Vec<f64>]) -> EncoderOutput {
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    EncoderOutput {
        h_cls: rows[0].clone(),
        hidden: t(&[rows.len(), d], &flat),
    }
}

// Straight-line helpers that deliberately avoid the crate's tensor kernels.
fn oracle_affine(w: &Tensor, x: &[f64], b: &Tensor) -> Vec<f64> {
    let (rows, cols) = (w.shape[0], w.shape[1]);
    let mut y = Vec::new();
    for r in 0..rows {
        let mut acc = b.data[r];
        for c in 0..cols {
            acc += w.data[r * cols + c] * x[c];
        }
        y.push(acc);
    }
    y
}

fn oracle_softmax2(h: &[f64]) -> [f64; 2] {
    let a = h[0].exp();
    let b = h[1].exp();
    [a / (a + b), b / (a + b)]
}

fn oracle_event_head(enc: &EncoderOutput, c1: &[f64], c2: &[f64], p: &EventParams) -> [f64; 2] {
    let t0: Vec<f64> = enc.h_cls.iter().map(|x| x.tanh()).collect();
    let mut cat = oracle_affine(&p.w0, &t0, &p.b0);
    cat.extend(oracle_affine(&p.w1, c1, &p.b1));
    cat.extend(oracle_affine(&p.w2, c2, &p.b2));
    oracle_softmax2(&oracle_affine(&p.w3, &cat, &p.b3))
}

fn close(a: [f64; 2], b: [f64; 2], tol: f64) {
    for i in 0..2 {
        assert!((a[i] - b[i]).abs() < tol, "{a:?} vs {b:?}");
    }
}

#[test]
fn cbert_d2_matches_hand_oracle() {
    let enc = enc_from_rows(&[vec![0.3, -1.2], vec![0.9, 0.1]]);
    let p = CbertParams {
        w0: t(&[2, 2], &[0.5, -0.25, 1.5, 0.75]),
        b0: t(&[2], &[0.1, -0.2]),
        w1: t(&[2, 2], &[1.0, -2.0, 0.5, 0.25]),
        b1: t(&[2], &[0.05, -0.05]),
    };
    // Written out by hand: H0' = W0 tanh(H0) + b0, h'' = W1 H0' + b1.
    let (a, b) = (0.3f64.tanh(), (-1.2f64).tanh());
    let h0 = [0.5 * a - 0.25 * b + 0.1, 1.5 * a + 0.75 * b - 0.2];
    let h = [1.0 * h0[0] - 2.0 * h0[1] + 0.05, 0.5 * h0[0] + 0.25 * h0[1] - 0.05];
    let denom = h[0].exp() + h[1].exp();
    let want = [h[0].exp() / denom, h[1].exp() / denom];
    let got = cbert_forward(&enc, &p, Mode::Eval, 0.4).unwrap();
    close(got, want, 1e-12);
}

fn fixed_event_params(d: usize, seed: u64) -> EventParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EventParams {
        w0: Tensor::normal(&[d, d], 0.7, &mut rng),
        b0: Tensor::normal(&[d], 0.3, &mut rng),
        w1: Tensor::normal(&[d, d], 0.7, &mut rng),
        b1: Tensor::normal(&[d], 0.3, &mut rng),
        w2: Tensor::normal(&[d, d], 0.7, &mut rng),
        b2: Tensor::normal(&[d], 0.3, &mut rng),
        w3: Tensor::normal(&[2, 3 * d], 0.7, &mut rng),
        b3: Tensor::normal(&[2], 0.3, &mut rng),
    }
}

fn random_enc(seq: usize, d: usize, seed: u64) -> EncoderOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = Tensor::normal(&[seq, d], 1.0, &mut rng);
    EncoderOutput {
        h_cls: hidden.row(0).to_vec(),
        hidden,
    }
}

#[test]
fn event_aware_d4_matches_oracle() {
    let d = 4;
    let enc = random_enc(9, d, 3);
    let p = fixed_event_params(d, 4);
    let (e1, e2) = (TokenSpan::new(2, 4), TokenSpan::new(6, 7));
    let mean_tanh = |s: TokenSpan| -> Vec<f64> {
        (0..d)
            .map(|c| (s.start..=s.end).map(|r| enc.row(r)[c].tanh()).sum::<f64>() / (s.end - s.start + 1) as f64)
            .collect()
    };
    let want = oracle_event_head(&enc, &mean_tanh(e1), &mean_tanh(e2), &p);
    let got = event_aware_forward(&enc, e1, e2, &p, Mode::Eval, 0.4).unwrap();
    close(got, want, 1e-12);
}

#[test]
fn masked_d4_matches_oracle() {
    let d = 4;
    let enc = random_enc(7, d, 5);
    let p = fixed_event_params(d, 6);
    let c1: Vec<f64> = enc.row(2).iter().map(|x| x.tanh()).collect();
    let c2: Vec<f64> = enc.row(5).iter().map(|x| x.tanh()).collect();
    let want = oracle_event_head(&enc, &c1, &c2, &p);
    let got = masked_event_forward(&enc, 2, 5, &p, Mode::Eval, 0.4).unwrap();
    close(got, want, 1e-12);
}

#[test]
fn event_context_three_tokens_brute_force() {
    let enc = random_enc(6, 5, 8);
    let got = event_context(&enc, TokenSpan::new(1, 3)).unwrap();
    for c in 0..5 {
        let want = (enc.row(1)[c].tanh() + enc.row(2)[c].tanh() + enc.row(3)[c].tanh()) / 3.0;
        assert!((got[c] - want).abs() < 1e-12);
    }
    let single = event_context(&enc, TokenSpan::new(4, 4)).unwrap();
    let direct: Vec<f64> = enc.row(4).iter().map(|x| x.tanh()).collect();
    assert_eq!(single, direct);
}

#[test]
fn event_context_of_repeated_state_equals_single() {
    let row = vec![0.4, -0.8, 1.3];
    let enc = enc_from_rows(&[vec![0.0; 3], row.clone(), row.clone()]);
    let one = event_context(&enc, TokenSpan::new(1, 1)).unwrap();
    let two = event_context(&enc, TokenSpan::new(1, 2)).unwrap();
    for (a, b) in one.iter().zip(&two) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn eval_probabilities_are_normalized() {
    let d = 8;
    for seed in 0..50 {
        let enc = random_enc(10, d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let mut ps = Vec::new();
        if let HeadParams::Cbert(p) = HeadParams::init(HeadKind::Cbert, d, &mut rng) {
            ps.push(cbert_forward(&enc, &p, Mode::Eval, 0.4).unwrap());
        }
        let ep = fixed_event_params(d, seed);
        ps.push(event_aware_forward(&enc, TokenSpan::new(1, 3), TokenSpan::new(5, 8), &ep, Mode::Eval, 0.4).unwrap());
        ps.push(masked_event_forward(&enc, 2, 6, &ep, Mode::Eval, 0.4).unwrap());
        for p in ps {
            assert!(p[0] >= 0.0 && p[1] >= 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn train_mode_dropout_changes_outputs_but_eval_does_not() {
    let d = 8;
    let enc = random_enc(6, d, 1);
    let p = fixed_event_params(d, 2);
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    let a = masked_event_forward(&enc, 1, 4, &p, Mode::train(&mut r1), 0.4).unwrap();
    let b = masked_event_forward(&enc, 1, 4, &p, Mode::train(&mut r2), 0.4).unwrap();
    assert_ne!(a, b);
    let e = masked_event_forward(&enc, 1, 4, &p, Mode::Eval, 0.4).unwrap();
    assert_eq!(e, masked_event_forward(&enc, 1, 4, &p, Mode::Eval, 0.9).unwrap());
}

// ---- gradients of the heads alone ----

fn head_loss(params: &HeadParams, enc: &EncoderOutput, spans: (TokenSpan, TokenSpan), label: Label) -> f64 {
    let p = match params {
        HeadParams::Cbert(p) => cbert_forward(enc, p, Mode::Eval, 0.0),
        HeadParams::Event(p) => event_aware_forward(enc, spans.0, spans.1, p, Mode::Eval, 0.0),
        HeadParams::Masked(p) => masked_event_forward(enc, spans.0.start, spans.1.start, p, Mode::Eval, 0.0),
    }
    .unwrap();
    binary_loss(p, label).value
}

fn head_cache(params: &HeadParams, enc: &EncoderOutput, spans: (TokenSpan, TokenSpan)) -> HeadCache {
    match params {
        HeadParams::Cbert(p) => cbert_forward_cached(enc, p, Mode::Eval, 0.0),
        HeadParams::Event(p) => event_aware_forward_cached(enc, spans.0, spans.1, p, Mode::Eval, 0.0),
        HeadParams::Masked(p) => masked_event_forward_cached(enc, spans.0.start, spans.1.start, p, Mode::Eval, 0.0),
    }
    .unwrap()
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

#[test]
fn head_gradients_match_finite_differences() {
    let d = 8;
    let h = 1e-4;
    for kind in [HeadKind::Cbert, HeadKind::Event, HeadKind::Masked] {
        let enc = random_enc(9, d, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut params = HeadParams::init(kind, d, &mut rng);
        for (_, t) in params.tensors_mut() {
            *t = Tensor::normal(&t.shape.clone(), 0.5, &mut rng);
        }
        let spans = match kind {
            HeadKind::Event => (TokenSpan::new(2, 4), TokenSpan::new(6, 7)),
            _ => (TokenSpan::new(3, 3), TokenSpan::new(6, 6)),
        };
        for label in [Label::CauseEffect, Label::Other] {
            let cache = head_cache(&params, &enc, spans);
            let mut d_logits = cache.probs;
            d_logits[label.index()] -= 1.0;
            let mut grads = params.zeros_like();
            let mut d_hidden = vec![0.0; enc.hidden.data.len()];
            head_backward(&params, &enc, &cache, &d_logits, &mut grads, &mut d_hidden);

            let mut worst: f64 = 0.0;
            let mut probe = params.clone();
            let n = probe.tensors().len();
            for ti in 0..n {
                let len = probe.tensors()[ti].1.len();
                for i in 0..len {
                    let orig = probe.tensors()[ti].1.data[i];
                    probe.tensors_mut()[ti].1.data[i] = orig + h;
                    let up = head_loss(&probe, &enc, spans, label);
                    probe.tensors_mut()[ti].1.data[i] = orig - h;
                    let down = head_loss(&probe, &enc, spans, label);
                    probe.tensors_mut()[ti].1.data[i] = orig;
                    worst = worst.max(rel(grads.tensors()[ti].1.data[i], (up - down) / (2.0 * h)));
                }
            }
            // Input gradient, with h_cls tied to hidden row 0.
            for i in 0..d_hidden.len() {
                let mut shifted = enc.clone();
                shifted.hidden.data[i] += h;
                shifted.h_cls = shifted.hidden.row(0).to_vec();
                let up = head_loss(&params, &shifted, spans, label);
                shifted.hidden.data[i] -= 2.0 * h;
                shifted.h_cls = shifted.hidden.row(0).to_vec();
                let down = head_loss(&params, &shifted, spans, label);
                worst = worst.max(rel(d_hidden[i], (up - down) / (2.0 * h)));
            }
            assert!(worst < 1e-4, "{kind} {label}: worst relative error {worst:e}");
        }
    }
}

#[test]
fn loss_gradient_wrt_logits_is_p_minus_onehot() {
    let h = 1e-5;
    for logits in [[0.3, -1.1], [2.0, 2.0], [-4.0, 3.5]] {
        for label in [Label::CauseEffect, Label::Other] {
            let loss = |z: [f64; 2]| binary_loss(oracle_softmax2(&z), label).value;
            let p = oracle_softmax2(&logits);
            for k in 0..2 {
                let mut up = logits;
                up[k] += h;
                let mut down = logits;
                down[k] -= h;
                let numeric = (loss(up) - loss(down)) / (2.0 * h);
                let analytic = p[k] - if k == label.index() { 1.0 } else { 0.0 };
                assert!((numeric - analytic).abs() < 1e-8, "{numeric} vs {analytic}");
            }
        }
    }
}
