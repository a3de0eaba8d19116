//! Test-only oracles: central finite differences and fixtures.
#![allow(dead_code)]

pub mod checks;

use cbert_core::corpus::{generate_synthetic, mask_events, MarkedSentence};
use cbert_core::encoder::EncoderConfig;
use cbert_core::heads::HeadKind;
use cbert_core::model::Model;
use cbert_core::nn::Mode;
use cbert_core::tensor::Tensor;
use cbert_core::tokenizer::{build_vocab, encode_all, ExampleRecord, Vocab};
use cbert_core::training::binary_loss;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Eval-mode loss computed straight from the forward pass.
pub fn eval_loss(model: &Model, r: &ExampleRecord) -> f64 {
    binary_loss(model.predict_proba(r).unwrap(), r.label).value
}

/// Worst relative error between analytic and central-difference gradients
/// over every scalar parameter: `|a - n| / max(|a|, |n|, floor)`.
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

pub fn grad_check(model: &Model, r: &ExampleRecord, step: f64, floor: f64) -> GradCheck {
    let mut grads = model.zero_gradients();
    model.accumulate_gradients(r, Mode::Eval, &mut grads).unwrap();
    let analytic: Vec<(String, Tensor)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.clone()))
        .collect();

    let mut probe = model.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (ti, (name, a)) in analytic.iter().enumerate() {
        for i in 0..a.len() {
            let orig = probe.tensors()[ti].1.data[i];
            probe.tensors_mut()[ti].1.data[i] = orig + step;
            let plus = eval_loss(&probe, r);
            probe.tensors_mut()[ti].1.data[i] = orig - step;
            let minus = eval_loss(&probe, r);
            probe.tensors_mut()[ti].1.data[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let an = a.data[i];
            let rel = (an - numeric).abs() / an.abs().max(numeric.abs()).max(floor);
            out.checked += 1;
            if rel > out.max_rel_error {
                out.max_rel_error = rel;
                out.worst = format!("{name}[{i}]: analytic {an:e} numeric {numeric:e}");
            }
        }
    }
    out
}

/// Adds N(0, std²) noise to every parameter so gradients are far from zero.
pub fn jitter(model: &mut Model, std: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, std).unwrap();
    for (_, t) in model.tensors_mut() {
        for x in t.data.iter_mut() {
            *x += dist.sample(&mut rng);
        }
    }
}

pub struct Fixture {
    pub corpus: Vec<MarkedSentence>,
    pub vocab: Vocab,
    pub marked: Vec<ExampleRecord>,
    pub masked: Vec<ExampleRecord>,
}

pub fn synthetic_fixture(n_per_class: usize, seed: u64, max_seq_len: usize) -> Fixture {
    let corpus = generate_synthetic(n_per_class, seed);
    let vocab = build_vocab(&corpus, 200).unwrap();
    let marked = encode_all(&corpus, &vocab, max_seq_len).unwrap();
    let masked_s: Vec<MarkedSentence> = corpus.iter().map(mask_events).collect();
    let masked = encode_all(&masked_s, &vocab, max_seq_len).unwrap();
    Fixture {
        corpus,
        vocab,
        marked,
        masked,
    }
}

pub fn tiny_config(vocab_size: usize, d: usize, layers: usize, heads: usize, max_seq_len: usize) -> EncoderConfig {
    EncoderConfig {
        layers,
        attention_heads: heads,
        hidden_dim: d,
        ffn_dim: 2 * d,
        max_seq_len,
        dropout_rate: 0.1,
        vocab_size,
        seed: 7,
    }
}

pub fn model_for(kind: HeadKind, cfg: EncoderConfig) -> Model {
    Model::new(cfg, kind, 0.4).unwrap()
}
