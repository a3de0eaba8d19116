//! Encoder plus one classification head, with loss gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encoder_backward, encoder_forward, EncoderCache, EncoderConfig, EncoderOutput, EncoderParams};
use crate::error::{Error, Result};
use crate::heads::{
    cbert_forward_cached, event_aware_forward_cached, head_backward, masked_event_forward_cached, HeadCache,
    HeadKind, HeadParams, NUM_CLASSES,
};
use crate::nn::Mode;
use crate::tensor::Tensor;
use crate::tokenizer::{ExampleRecord, Variant};
use crate::training::{binary_loss, LossValue};

/// Default head dropout rate.
pub const DEFAULT_HEAD_DROPOUT: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub encoder_config: EncoderConfig,
    pub encoder: EncoderParams,
    pub head: HeadParams,
    pub head_dropout: f64,
}

/// Gradients with the same layout as a [`Model`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: EncoderParams,
    pub head: HeadParams,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.encoder.tensors();
        v.extend(self.head.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }

    pub fn fill_zero(&mut self) {
        self.tensors_mut().into_iter().for_each(|(_, t)| t.fill_zero());
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

/// Result of one forward pass with everything backward needs.
pub struct ForwardTrace {
    pub encoder_output: EncoderOutput,
    pub encoder_cache: EncoderCache,
    pub head_cache: HeadCache,
}

impl ForwardTrace {
    pub fn probs(&self) -> [f64; NUM_CLASSES] {
        self.head_cache.probs
    }

    pub fn logits(&self) -> [f64; NUM_CLASSES] {
        self.head_cache.logits
    }
}

impl Model {
    /// Fresh model; all initial weights are drawn from `encoder_config.seed`.
    pub fn new(encoder_config: EncoderConfig, kind: HeadKind, head_dropout: f64) -> Result<Self> {
        encoder_config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(encoder_config.seed);
        let encoder = EncoderParams::init(&encoder_config, &mut rng)?;
        let head = HeadParams::init(kind, encoder_config.hidden_dim, &mut rng);
        Ok(Self {
            encoder_config,
            encoder,
            head,
            head_dropout,
        })
    }

    pub fn kind(&self) -> HeadKind {
        self.head.kind()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            encoder: self.encoder.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.encoder.tensors();
        v.extend(self.head.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.encoder.check_shapes(&self.encoder_config)?;
        self.head.check(self.encoder_config.hidden_dim)
    }

    /// The masked-event head only accepts masked records.
    pub fn check_record(&self, r: &ExampleRecord) -> Result<()> {
        if self.kind() == HeadKind::Masked && r.variant != Variant::Masked {
            return Err(Error::Variant(format!(
                "{}: masked-event head needs a masked record",
                r.sentence_id
            )));
        }
        Ok(())
    }

    /// Encoder forward over the non-PAD prefix of a trailing-padded record.
    ///
    /// PAD keys are masked, so non-PAD hidden states are identical to a full-length
    /// pass; heads never read PAD rows.
    pub fn encode_active(&self, r: &ExampleRecord, mode: Mode<'_>) -> Result<(EncoderOutput, EncoderCache)> {
        let active = r.active_len();
        let trailing = r.attention_mask[..active].iter().all(|&m| m == 1);
        let n = if trailing && active > 0 { active } else { r.seq_len() };
        encoder_forward(
            &self.encoder,
            &self.encoder_config,
            &r.token_ids[..n],
            &r.attention_mask[..n],
            mode,
        )
    }

    pub fn trace(&self, r: &ExampleRecord, mut mode: Mode<'_>) -> Result<ForwardTrace> {
        self.check_record(r)?;
        let (encoder_output, encoder_cache) = self.encode_active(r, mode.reborrow())?;
        let rate = self.head_dropout;
        let head_cache = match &self.head {
            HeadParams::Cbert(p) => cbert_forward_cached(&encoder_output, p, mode, rate)?,
            HeadParams::Event(p) => event_aware_forward_cached(&encoder_output, r.e1_range, r.e2_range, p, mode, rate)?,
            HeadParams::Masked(p) => {
                masked_event_forward_cached(&encoder_output, r.e1_range.start, r.e2_range.start, p, mode, rate)?
            }
        };
        Ok(ForwardTrace {
            encoder_output,
            encoder_cache,
            head_cache,
        })
    }

    pub fn forward(&self, r: &ExampleRecord, mode: Mode<'_>) -> Result<[f64; NUM_CLASSES]> {
        Ok(self.trace(r, mode)?.probs())
    }

    /// Eval-mode class probabilities `(p_cause_effect, p_other)`.
    pub fn predict_proba(&self, r: &ExampleRecord) -> Result<[f64; NUM_CLASSES]> {
        self.forward(r, Mode::Eval)
    }

    /// Loss for one record; gradients are added into `grads`.
    pub fn accumulate_gradients(&self, r: &ExampleRecord, mode: Mode<'_>, grads: &mut Gradients) -> Result<LossValue> {
        let trace = self.trace(r, mode)?;
        let probs = trace.probs();
        let loss = binary_loss(probs, r.label);
        let mut d_logits = probs;
        d_logits[r.label.index()] -= 1.0;

        let s = trace.encoder_output.seq_len();
        let d = self.encoder_config.hidden_dim;
        let mut d_hidden = vec![0.0; s * d];
        head_backward(
            &self.head,
            &trace.encoder_output,
            &trace.head_cache,
            &d_logits,
            &mut grads.head,
            &mut d_hidden,
        );
        encoder_backward(
            &self.encoder,
            &self.encoder_config,
            &trace.encoder_cache,
            &d_hidden,
            &mut grads.encoder,
        );
        Ok(loss)
    }

    /// Mean eval-mode loss over records.
    pub fn mean_loss(&self, records: &[ExampleRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::Empty("loss records"));
        }
        let mut total = 0.0;
        for r in records {
            total += binary_loss(self.predict_proba(r)?, r.label).value;
        }
        Ok(total / records.len() as f64)
    }
}
