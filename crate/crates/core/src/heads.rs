//! Classification heads over encoder outputs.
//!
//! * sentence context: `H0' = W0·tanh(H0) + b0`, `h'' = W1·H0' + b1`
//! * event aware: `H0'` as above, `Hk' = Wk·mean_t tanh(H_t) + bk` over each
//!   event's tokens, `h'' = W3·[H0'; H1'; H2'] + b3`
//! * masked event: as event aware, with each event a single BLANK position
//!
//! `p = softmax(h'')`. Dropout is applied to the input of every linear map.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::encoder::{EncoderOutput, INIT_STD};
use crate::error::{Error, Result};
use crate::nn::{apply_mask, Mode};
use crate::tensor::{matvec, matvec_backward, softmax_in_place, Tensor};
use crate::tokenizer::TokenSpan;

pub const NUM_CLASSES: usize = Label::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Cbert,
    Event,
    Masked,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Cbert => "cbert",
            HeadKind::Event => "event",
            HeadKind::Masked => "masked",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbert" => Ok(HeadKind::Cbert),
            "event" => Ok(HeadKind::Event),
            "masked" => Ok(HeadKind::Masked),
            _ => Err(Error::Config(format!("unknown head `{s}` (cbert|event|masked)"))),
        }
    }
}

/// Sentence-context head: `w0: d×d`, `w1: 2×d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbertParams {
    pub w0: Tensor,
    pub b0: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
}

/// Event-aware / masked-event head: `w0, w1, w2: d×d`, `w3: 2×3d`.
/// Concatenation order is (sentence, event 1, event 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    pub w0: Tensor,
    pub b0: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub w3: Tensor,
    pub b3: Tensor,
}

impl CbertParams {
    pub fn init<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self {
            w0: Tensor::normal(&[d, d], INIT_STD, rng),
            b0: Tensor::zeros(&[d]),
            w1: Tensor::normal(&[NUM_CLASSES, d], INIT_STD, rng),
            b1: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            w0: Tensor::zeros(&[d, d]),
            b0: Tensor::zeros(&[d]),
            w1: Tensor::zeros(&[NUM_CLASSES, d]),
            b1: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    pub fn dim(&self) -> usize {
        self.b0.len()
    }

    fn check(&self, d: usize) -> Result<()> {
        check_shapes(&[
            ("w0", &self.w0, &[d, d]),
            ("b0", &self.b0, &[d]),
            ("w1", &self.w1, &[NUM_CLASSES, d]),
            ("b1", &self.b1, &[NUM_CLASSES]),
        ])
    }
}

impl EventParams {
    pub fn init<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self {
            w0: Tensor::normal(&[d, d], INIT_STD, rng),
            b0: Tensor::zeros(&[d]),
            w1: Tensor::normal(&[d, d], INIT_STD, rng),
            b1: Tensor::zeros(&[d]),
            w2: Tensor::normal(&[d, d], INIT_STD, rng),
            b2: Tensor::zeros(&[d]),
            w3: Tensor::normal(&[NUM_CLASSES, 3 * d], INIT_STD, rng),
            b3: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            w0: Tensor::zeros(&[d, d]),
            b0: Tensor::zeros(&[d]),
            w1: Tensor::zeros(&[d, d]),
            b1: Tensor::zeros(&[d]),
            w2: Tensor::zeros(&[d, d]),
            b2: Tensor::zeros(&[d]),
            w3: Tensor::zeros(&[NUM_CLASSES, 3 * d]),
            b3: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    pub fn dim(&self) -> usize {
        self.b0.len()
    }

    fn check(&self, d: usize) -> Result<()> {
        check_shapes(&[
            ("w0", &self.w0, &[d, d]),
            ("b0", &self.b0, &[d]),
            ("w1", &self.w1, &[d, d]),
            ("b1", &self.b1, &[d]),
            ("w2", &self.w2, &[d, d]),
            ("b2", &self.b2, &[d]),
            ("w3", &self.w3, &[NUM_CLASSES, 3 * d]),
            ("b3", &self.b3, &[NUM_CLASSES]),
        ])
    }
}

fn check_shapes(items: &[(&str, &Tensor, &[usize])]) -> Result<()> {
    for (name, t, shape) in items {
        if t.shape != *shape {
            return Err(Error::Shape(format!("head {name}: expected {shape:?}, found {:?}", t.shape)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HeadParams {
    Cbert(CbertParams),
    Event(EventParams),
    Masked(EventParams),
}

impl HeadParams {
    pub fn init<R: Rng + ?Sized>(kind: HeadKind, d: usize, rng: &mut R) -> Self {
        match kind {
            HeadKind::Cbert => HeadParams::Cbert(CbertParams::init(d, rng)),
            HeadKind::Event => HeadParams::Event(EventParams::init(d, rng)),
            HeadKind::Masked => HeadParams::Masked(EventParams::init(d, rng)),
        }
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            HeadParams::Cbert(_) => HeadKind::Cbert,
            HeadParams::Event(_) => HeadKind::Event,
            HeadParams::Masked(_) => HeadKind::Masked,
        }
    }

    pub fn check(&self, d: usize) -> Result<()> {
        match self {
            HeadParams::Cbert(p) => p.check(d),
            HeadParams::Event(p) | HeadParams::Masked(p) => p.check(d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|(_, t)| t.fill_zero());
        z
    }

    /// Parameters under their checkpoint names (`head.{kind}.w0`, …).
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let kind = self.kind();
        let list: Vec<(&str, &Tensor)> = match self {
            HeadParams::Cbert(p) => vec![("w0", &p.w0), ("b0", &p.b0), ("w1", &p.w1), ("b1", &p.b1)],
            HeadParams::Event(p) | HeadParams::Masked(p) => vec![
                ("w0", &p.w0), ("b0", &p.b0), ("w1", &p.w1), ("b1", &p.b1),
                ("w2", &p.w2), ("b2", &p.b2), ("w3", &p.w3), ("b3", &p.b3),
            ],
        };
        list.into_iter().map(|(n, t)| (format!("head.{kind}.{n}"), t)).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let kind = self.kind();
        let list: Vec<(&str, &mut Tensor)> = match self {
            HeadParams::Cbert(p) => vec![("w0", &mut p.w0), ("b0", &mut p.b0), ("w1", &mut p.w1), ("b1", &mut p.b1)],
            HeadParams::Event(p) | HeadParams::Masked(p) => vec![
                ("w0", &mut p.w0), ("b0", &mut p.b0), ("w1", &mut p.w1), ("b1", &mut p.b1),
                ("w2", &mut p.w2), ("b2", &mut p.b2), ("w3", &mut p.w3), ("b3", &mut p.b3),
            ],
        };
        list.into_iter().map(|(n, t)| (format!("head.{kind}.{n}"), t)).collect()
    }
}

/// Everything the backward pass needs from a head forward.
#[derive(Debug, Clone)]
pub struct HeadCache {
    pub probs: [f64; NUM_CLASSES],
    pub logits: [f64; NUM_CLASSES],
    inner: CacheInner,
}

#[derive(Debug, Clone)]
enum CacheInner {
    Cbert {
        tanh_cls: Vec<f64>,
        in0: Vec<f64>,
        m0: Option<Vec<f64>>,
        in1: Vec<f64>,
        m1: Option<Vec<f64>>,
    },
    Event {
        tanh_cls: Vec<f64>,
        spans: [TokenSpan; 2],
        in0: Vec<f64>,
        m0: Option<Vec<f64>>,
        in1: Vec<f64>,
        m1: Option<Vec<f64>>,
        in2: Vec<f64>,
        m2: Option<Vec<f64>>,
        in3: Vec<f64>,
        m3: Option<Vec<f64>>,
    },
}

fn softmax2(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let mut p = logits;
    softmax_in_place(&mut p);
    p
}

fn tanh_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

fn dropped(x: &[f64], mode: &mut Mode<'_>, rate: f64) -> (Vec<f64>, Option<Vec<f64>>) {
    let mask = mode.dropout_mask(x.len(), rate);
    let mut out = x.to_vec();
    apply_mask(&mut out, mask.as_ref());
    (out, mask)
}

fn to_pair(v: Vec<f64>) -> [f64; NUM_CLASSES] {
    [v[0], v[1]]
}

fn check_enc(enc: &EncoderOutput, d: usize) -> Result<()> {
    if enc.dim() != d || enc.h_cls.len() != d {
        return Err(Error::Shape(format!(
            "encoder dim {} does not match head dim {d}",
            enc.dim()
        )));
    }
    Ok(())
}

pub fn cbert_forward_cached(enc: &EncoderOutput, p: &CbertParams, mut mode: Mode<'_>, dropout: f64) -> Result<HeadCache> {
    let d = p.dim();
    p.check(d)?;
    check_enc(enc, d)?;
    let tanh_cls = tanh_vec(&enc.h_cls);
    let (in0, m0) = dropped(&tanh_cls, &mut mode, dropout);
    let h0 = matvec(&p.w0, &in0, &p.b0.data);
    let (in1, m1) = dropped(&h0, &mut mode, dropout);
    let logits = to_pair(matvec(&p.w1, &in1, &p.b1.data));
    Ok(HeadCache {
        probs: softmax2(logits),
        logits,
        inner: CacheInner::Cbert { tanh_cls, in0, m0, in1, m1 },
    })
}

/// Sentence-context head probabilities `(p_cause_effect, p_other)`.
pub fn cbert_forward(enc: &EncoderOutput, p: &CbertParams, mode: Mode<'_>, dropout: f64) -> Result<[f64; NUM_CLASSES]> {
    Ok(cbert_forward_cached(enc, p, mode, dropout)?.probs)
}

fn check_span(enc: &EncoderOutput, span: TokenSpan) -> Result<()> {
    if span.end < span.start {
        return Err(Error::Span(format!("empty span {span:?}")));
    }
    if span.end >= enc.seq_len() {
        return Err(Error::Span(format!(
            "span {span:?} outside sequence of length {}",
            enc.seq_len()
        )));
    }
    Ok(())
}

/// Mean over the span of element-wise `tanh` of each token's hidden state.
pub fn event_context(enc: &EncoderOutput, span: TokenSpan) -> Result<Vec<f64>> {
    check_span(enc, span)?;
    let mut acc = tanh_vec(enc.row(span.start));
    for t in span.start + 1..=span.end {
        for (a, h) in acc.iter_mut().zip(enc.row(t)) {
            *a += h.tanh();
        }
    }
    let n = span.len() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    Ok(acc)
}

fn event_head_from_contexts(
    enc: &EncoderOutput,
    ctx1: Vec<f64>,
    ctx2: Vec<f64>,
    spans: [TokenSpan; 2],
    p: &EventParams,
    mut mode: Mode<'_>,
    dropout: f64,
) -> HeadCache {
    let d = p.dim();
    let tanh_cls = tanh_vec(&enc.h_cls);
    let (in0, m0) = dropped(&tanh_cls, &mut mode, dropout);
    let (in1, m1) = dropped(&ctx1, &mut mode, dropout);
    let (in2, m2) = dropped(&ctx2, &mut mode, dropout);
    let mut concat = Vec::with_capacity(3 * d);
    concat.extend(matvec(&p.w0, &in0, &p.b0.data));
    concat.extend(matvec(&p.w1, &in1, &p.b1.data));
    concat.extend(matvec(&p.w2, &in2, &p.b2.data));
    let (in3, m3) = dropped(&concat, &mut mode, dropout);
    let logits = to_pair(matvec(&p.w3, &in3, &p.b3.data));
    HeadCache {
        probs: softmax2(logits),
        logits,
        inner: CacheInner::Event {
            tanh_cls,
            spans,
            in0,
            m0,
            in1,
            m1,
            in2,
            m2,
            in3,
            m3,
        },
    }
}

pub fn event_aware_forward_cached(
    enc: &EncoderOutput,
    e1: TokenSpan,
    e2: TokenSpan,
    p: &EventParams,
    mode: Mode<'_>,
    dropout: f64,
) -> Result<HeadCache> {
    let d = p.dim();
    p.check(d)?;
    check_enc(enc, d)?;
    let ctx1 = event_context(enc, e1)?;
    let ctx2 = event_context(enc, e2)?;
    Ok(event_head_from_contexts(enc, ctx1, ctx2, [e1, e2], p, mode, dropout))
}

/// Event-aware head probabilities.
pub fn event_aware_forward(
    enc: &EncoderOutput,
    e1: TokenSpan,
    e2: TokenSpan,
    p: &EventParams,
    mode: Mode<'_>,
    dropout: f64,
) -> Result<[f64; NUM_CLASSES]> {
    Ok(event_aware_forward_cached(enc, e1, e2, p, mode, dropout)?.probs)
}

pub fn masked_event_forward_cached(
    enc: &EncoderOutput,
    e1_pos: usize,
    e2_pos: usize,
    p: &EventParams,
    mode: Mode<'_>,
    dropout: f64,
) -> Result<HeadCache> {
    let d = p.dim();
    p.check(d)?;
    check_enc(enc, d)?;
    let (s1, s2) = (TokenSpan::new(e1_pos, e1_pos), TokenSpan::new(e2_pos, e2_pos));
    check_span(enc, s1)?;
    check_span(enc, s2)?;
    let ctx1 = tanh_vec(enc.row(e1_pos));
    let ctx2 = tanh_vec(enc.row(e2_pos));
    Ok(event_head_from_contexts(enc, ctx1, ctx2, [s1, s2], p, mode, dropout))
}

/// Masked-event head probabilities; each event is one BLANK position.
pub fn masked_event_forward(
    enc: &EncoderOutput,
    e1_pos: usize,
    e2_pos: usize,
    p: &EventParams,
    mode: Mode<'_>,
    dropout: f64,
) -> Result<[f64; NUM_CLASSES]> {
    Ok(masked_event_forward_cached(enc, e1_pos, e2_pos, p, mode, dropout)?.probs)
}

/// Backpropagates `d_logits` through a head. Accumulates parameter gradients
/// into `grads` (same variant as the forward params) and `d_hidden`
/// (`seq_len × d`, same layout as the encoder output).
pub fn head_backward(
    params: &HeadParams,
    enc: &EncoderOutput,
    cache: &HeadCache,
    d_logits: &[f64; NUM_CLASSES],
    grads: &mut HeadParams,
    d_hidden: &mut [f64],
) {
    let d = enc.dim();
    let add_tanh_grad = |d_hidden: &mut [f64], row: usize, tanh_vals: &[f64], g: &[f64], scale: f64| {
        let dst = &mut d_hidden[row * d..(row + 1) * d];
        for i in 0..d {
            dst[i] += scale * g[i] * (1.0 - tanh_vals[i] * tanh_vals[i]);
        }
    };
    match (params, grads, &cache.inner) {
        (HeadParams::Cbert(p), HeadParams::Cbert(g), CacheInner::Cbert { tanh_cls, in0, m0, in1, m1 }) => {
            let mut d_h0 = matvec_backward(&p.w1, in1, d_logits, &mut g.w1, &mut g.b1.data);
            apply_mask(&mut d_h0, m1.as_ref());
            let mut d_t = matvec_backward(&p.w0, in0, &d_h0, &mut g.w0, &mut g.b0.data);
            apply_mask(&mut d_t, m0.as_ref());
            add_tanh_grad(d_hidden, 0, tanh_cls, &d_t, 1.0);
        }
        (
            HeadParams::Event(p) | HeadParams::Masked(p),
            HeadParams::Event(g) | HeadParams::Masked(g),
            CacheInner::Event { tanh_cls, spans, in0, m0, in1, m1, in2, m2, in3, m3 },
        ) => {
            let mut d_concat = matvec_backward(&p.w3, in3, d_logits, &mut g.w3, &mut g.b3.data);
            apply_mask(&mut d_concat, m3.as_ref());
            let mut d0 = matvec_backward(&p.w0, in0, &d_concat[..d], &mut g.w0, &mut g.b0.data);
            let mut d1 = matvec_backward(&p.w1, in1, &d_concat[d..2 * d], &mut g.w1, &mut g.b1.data);
            let mut d2 = matvec_backward(&p.w2, in2, &d_concat[2 * d..], &mut g.w2, &mut g.b2.data);
            apply_mask(&mut d0, m0.as_ref());
            apply_mask(&mut d1, m1.as_ref());
            apply_mask(&mut d2, m2.as_ref());
            add_tanh_grad(d_hidden, 0, tanh_cls, &d0, 1.0);
            for (span, dctx) in spans.iter().zip([&d1, &d2]) {
                let scale = 1.0 / span.len() as f64;
                for t in span.start..=span.end {
                    let th = tanh_vec(enc.row(t));
                    add_tanh_grad(d_hidden, t, &th, dctx, scale);
                }
            }
        }
        _ => panic!("head parameter, gradient and cache variants disagree"),
    }
}
