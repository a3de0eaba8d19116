//! Loss, the mini-batch Adam training loop, and masked-to-event-aware transfer.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::heads::{HeadKind, HeadParams, NUM_CLASSES};
use crate::model::Model;
use crate::nn::Mode;
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;
use crate::tokenizer::{ExampleRecord, Variant, DEFAULT_MAX_SEQ_LEN};

/// Probability floor applied to the true class before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// The true-class probability was below [`PROB_FLOOR`] and got clamped.
    pub clamped: bool,
}

/// Two-class cross-entropy: `-ln p[label]`.
pub fn binary_loss(p: [f64; NUM_CLASSES], label: Label) -> LossValue {
    let pt = p[label.index()];
    if pt < PROB_FLOOR {
        warn!("true-class probability {pt:e} clamped to {PROB_FLOOR:e}");
        return LossValue {
            value: -PROB_FLOOR.ln(),
            clamped: true,
        };
    }
    LossValue {
        value: -pt.ln(),
        clamped: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub epochs: usize,
    pub seed: u64,
    pub head_kind: HeadKind,
    /// Stop after this many optimizer steps, if set.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            adam_epsilon: 1e-8,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            dropout_rate: 0.4,
            batch_size: 16,
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            epochs: 5,
            seed: 0,
            head_kind: HeadKind::Event,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate {} not in [0, 1)", self.dropout_rate)));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Per-step and per-epoch mean training losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub clamped: usize,
}

impl LossCurve {
    pub fn steps(&self) -> usize {
        self.step_losses.len()
    }
}

fn check_variants(model: &Model, data: &[ExampleRecord]) -> Result<()> {
    let want_masked = model.kind() == HeadKind::Masked;
    for r in data {
        if (r.variant == Variant::Masked) != want_masked {
            return Err(Error::Variant(format!(
                "{}: {:?} record given to a {} head",
                r.sentence_id,
                r.variant,
                model.kind()
            )));
        }
    }
    Ok(())
}

/// Trains every encoder and head parameter with Adam on shuffled mini-batches.
///
/// The head dropout rate is taken from `cfg`. Shuffling and dropout draw from a
/// single generator seeded by `cfg.seed`, so equal seeds give equal curves.
pub fn train(model: &mut Model, data: &[ExampleRecord], cfg: &TrainConfig) -> Result<LossCurve> {
    train_with(model, data, cfg, |_, _| Ok(()))
}

/// [`train`] with a hook called after every completed epoch (0-based index).
pub fn train_with<F>(model: &mut Model, data: &[ExampleRecord], cfg: &TrainConfig, mut on_epoch: F) -> Result<LossCurve>
where
    F: FnMut(usize, &Model) -> Result<()>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    check_variants(model, data)?;
    model.head_dropout = cfg.dropout_rate;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam());
    let mut grads = model.zero_gradients();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = LossCurve::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        let mut epoch_count = 0usize;
        let mut stop = false;
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| curve.steps() >= m) {
                stop = true;
                break;
            }
            grads.fill_zero();
            let mut batch_loss = 0.0;
            for &i in batch {
                let loss = model.accumulate_gradients(&data[i], Mode::train(&mut rng), &mut grads)?;
                curve.clamped += loss.clamped as usize;
                batch_loss += loss.value;
            }
            let step = curve.steps();
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            grads.scale(1.0 / batch.len() as f64);
            {
                let grad_refs: Vec<&Tensor> = grads.tensors().into_iter().map(|(_, t)| t).collect();
                let mut param_refs: Vec<&mut Tensor> = model.tensors_mut().into_iter().map(|(_, t)| t).collect();
                adam.step(&mut param_refs, &grad_refs);
            }
            curve.step_losses.push(batch_loss / batch.len() as f64);
            epoch_total += batch_loss;
            epoch_count += batch.len();
        }
        if epoch_count > 0 {
            curve.epoch_losses.push(epoch_total / epoch_count as f64);
            on_epoch(epoch, model)?;
        }
        if stop {
            break;
        }
    }
    Ok(curve)
}

/// Turns a trained masked-event model into an event-aware model with identical
/// encoder and head weights.
pub fn transfer(source: &Model, target: &EncoderConfig) -> Result<Model> {
    let HeadParams::Masked(head) = &source.head else {
        return Err(Error::HeadMismatch {
            expected: HeadKind::Masked.to_string(),
            found: source.kind().to_string(),
        });
    };
    let s = &source.encoder_config;
    let mismatches: Vec<String> = [
        ("hidden_dim", s.hidden_dim, target.hidden_dim),
        ("layers", s.layers, target.layers),
        ("attention_heads", s.attention_heads, target.attention_heads),
        ("ffn_dim", s.ffn_dim, target.ffn_dim),
        ("vocab_size", s.vocab_size, target.vocab_size),
        ("max_seq_len", s.max_seq_len, target.max_seq_len),
    ]
    .into_iter()
    .filter(|(_, a, b)| a != b)
    .map(|(n, a, b)| format!("{n}: {a} vs {b}"))
    .collect();
    if !mismatches.is_empty() {
        return Err(Error::Config(format!("transfer config mismatch ({})", mismatches.join(", "))));
    }
    let mut encoder_config = source.encoder_config.clone();
    encoder_config.dropout_rate = target.dropout_rate;
    encoder_config.seed = target.seed;
    Ok(Model {
        encoder_config,
        encoder: source.encoder.clone(),
        head: HeadParams::Event(head.clone()),
        head_dropout: source.head_dropout,
    })
}
