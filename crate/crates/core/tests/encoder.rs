mod common;

use cbert_core::encoder::{encoder_forward, EncoderConfig, EncoderParams};
use cbert_core::heads::HeadKind;
use cbert_core::model::Model;
use cbert_core::nn::Mode;
use common::checks::*;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg16() -> EncoderConfig {
    EncoderConfig {
        layers: 2,
        attention_heads: 4,
        hidden_dim: 16,
        ffn_dim: 32,
        max_seq_len: 20,
        dropout_rate: 0.1,
        vocab_size: 50,
        seed: 3,
    }
}

#[test]
fn pad_tail_content_does_not_leak() {
    let diff = pad_tail_max_diff(&cfg16(), 20, 9);
    assert!(diff < 1e-10, "max diff {diff:e}");
}

#[test]
fn prefix_only_encoding_matches_padded_encoding() {
    let fx = synthetic_fixture(4, 2, 20);
    let model = Model::new(tiny_config(fx.vocab.len(), 16, 2, 4, 20), HeadKind::Event, 0.4).unwrap();
    for r in &fx.marked {
        let (full, _) = encoder_forward(&model.encoder, &model.encoder_config, &r.token_ids, &r.attention_mask, Mode::Eval).unwrap();
        let (prefix, _) = model.encode_active(r, Mode::Eval).unwrap();
        for t in 0..r.active_len() {
            for (a, b) in full.row(t).iter().zip(prefix.row(t)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn attention_layer_norm_and_softmax_statistics() {
    let fx = synthetic_fixture(10, 4, 20);
    for kind in [HeadKind::Cbert, HeadKind::Event] {
        let mut model = Model::new(tiny_config(fx.vocab.len(), 16, 2, 4, 20), kind, 0.4).unwrap();
        jitter(&mut model, 0.5, 2);
        let s = encoder_stats(&model, &fx.marked);
        assert!(s.attention_row_err < 1e-9, "{}", s.attention_row_err);
        assert!(s.ln_max_abs_mean < 1e-6, "{}", s.ln_max_abs_mean);
        assert!(s.ln_max_var_dev < 1e-4, "{}", s.ln_max_var_dev);
        assert!(s.softmax_err < 1e-12, "{}", s.softmax_err);
    }
}

#[test]
fn eval_mode_is_bit_deterministic_and_seed_free() {
    let fx = synthetic_fixture(5, 6, 20);
    let model = Model::new(tiny_config(fx.vocab.len(), 16, 2, 4, 20), HeadKind::Event, 0.4).unwrap();
    assert!(eval_is_deterministic(&model, &fx.marked));
    let mut reseeded = model.clone();
    reseeded.encoder_config.seed = 999;
    for r in &fx.marked {
        assert_eq!(model.predict_proba(r).unwrap(), reseeded.predict_proba(r).unwrap());
    }
}

#[test]
fn hidden_row_zero_is_cls_and_outputs_are_finite() {
    let cfg = cfg16();
    let p = EncoderParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let ids = [2, 10, 11, 12, 3];
    let (out, _) = encoder_forward(&p, &cfg, &ids, &[1; 5], Mode::Eval).unwrap();
    assert_eq!(out.row(0), out.h_cls.as_slice());
    assert_eq!((out.seq_len(), out.dim()), (5, 16));
    assert!(out.hidden.is_finite());
}
