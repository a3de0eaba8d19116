//! Post-layer-norm bidirectional transformer encoder with explicit backward pass.
//!
//! Block: multi-head self-attention → dropout → residual + layer norm →
//! GELU feed-forward → dropout → residual + layer norm. Keys at PAD positions
//! are masked out of every attention row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{apply_mask, gelu, gelu_grad, layer_norm, layer_norm_backward, LayerNormCache, Mode};
use crate::tensor::{axpy, dot, linear, linear_backward, softmax_in_place, Tensor};
use crate::tokenizer::TokenId;

/// Standard deviation of the normal weight initializer.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub attention_heads: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub max_seq_len: usize,
    pub dropout_rate: f64,
    pub vocab_size: usize,
    pub seed: u64,
}

impl EncoderConfig {
    /// Two layers, four heads, d = 64, feed-forward 256, 128 positions.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            layers: 2,
            attention_heads: 4,
            hidden_dim: 64,
            ffn_dim: 256,
            max_seq_len: 128,
            dropout_rate: 0.1,
            vocab_size,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.attention_heads == 0 || !self.hidden_dim.is_multiple_of(self.attention_heads) {
            return Err(Error::Config(format!(
                "hidden_dim {} must be a positive multiple of attention_heads {}",
                self.hidden_dim, self.attention_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate {} not in [0, 1)", self.dropout_rate)));
        }
        if self.vocab_size == 0 || self.max_seq_len == 0 || self.ffn_dim == 0 {
            return Err(Error::Config("vocab_size, max_seq_len and ffn_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.attention_heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub q: Tensor,
    pub q_bias: Tensor,
    pub k: Tensor,
    pub k_bias: Tensor,
    pub v: Tensor,
    pub v_bias: Tensor,
    pub o: Tensor,
    pub o_bias: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub ffn_in: Tensor,
    pub ffn_in_bias: Tensor,
    pub ffn_out: Tensor,
    pub ffn_out_bias: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
}

const LAYER_NAMES: [&str; 16] = [
    "attn.q", "attn.q_bias", "attn.k", "attn.k_bias", "attn.v", "attn.v_bias", "attn.o",
    "attn.o_bias", "ln1.gain", "ln1.bias", "ffn.in", "ffn.in_bias", "ffn.out", "ffn.out_bias",
    "ln2.gain", "ln2.bias",
];

impl LayerParams {
    fn init<R: Rng + ?Sized>(d: usize, f: usize, rng: &mut R) -> Self {
        Self {
            q: Tensor::normal(&[d, d], INIT_STD, rng),
            q_bias: Tensor::zeros(&[d]),
            k: Tensor::normal(&[d, d], INIT_STD, rng),
            k_bias: Tensor::zeros(&[d]),
            v: Tensor::normal(&[d, d], INIT_STD, rng),
            v_bias: Tensor::zeros(&[d]),
            o: Tensor::normal(&[d, d], INIT_STD, rng),
            o_bias: Tensor::zeros(&[d]),
            ln1_gain: Tensor::filled(&[d], 1.0),
            ln1_bias: Tensor::zeros(&[d]),
            ffn_in: Tensor::normal(&[f, d], INIT_STD, rng),
            ffn_in_bias: Tensor::zeros(&[f]),
            ffn_out: Tensor::normal(&[d, f], INIT_STD, rng),
            ffn_out_bias: Tensor::zeros(&[d]),
            ln2_gain: Tensor::filled(&[d], 1.0),
            ln2_bias: Tensor::zeros(&[d]),
        }
    }

    fn tensors(&self) -> [&Tensor; 16] {
        [
            &self.q, &self.q_bias, &self.k, &self.k_bias, &self.v, &self.v_bias, &self.o,
            &self.o_bias, &self.ln1_gain, &self.ln1_bias, &self.ffn_in, &self.ffn_in_bias,
            &self.ffn_out, &self.ffn_out_bias, &self.ln2_gain, &self.ln2_bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 16] {
        [
            &mut self.q, &mut self.q_bias, &mut self.k, &mut self.k_bias, &mut self.v,
            &mut self.v_bias, &mut self.o, &mut self.o_bias, &mut self.ln1_gain,
            &mut self.ln1_bias, &mut self.ffn_in, &mut self.ffn_in_bias, &mut self.ffn_out,
            &mut self.ffn_out_bias, &mut self.ln2_gain, &mut self.ln2_bias,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub token: Tensor,
    pub position: Tensor,
    pub layers: Vec<LayerParams>,
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(cfg: &EncoderConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.hidden_dim;
        Ok(Self {
            token: Tensor::normal(&[cfg.vocab_size, d], INIT_STD, rng),
            position: Tensor::normal(&[cfg.max_seq_len, d], INIT_STD, rng),
            layers: (0..cfg.layers)
                .map(|_| LayerParams::init(d, cfg.ffn_dim, rng))
                .collect(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|(_, t)| t.fill_zero());
        z
    }

    /// Parameters under their checkpoint names (`embed.token`, `layer.{n}.attn.q`, …).
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("embed.token".to_string(), &self.token),
            ("embed.position".to_string(), &self.position),
        ];
        for (n, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("layer.{n}.{name}"), t));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![
            ("embed.token".to_string(), &mut self.token),
            ("embed.position".to_string(), &mut self.position),
        ];
        for (n, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in LAYER_NAMES.iter().zip(layer.tensors_mut()) {
                out.push((format!("layer.{n}.{name}"), t));
            }
        }
        out
    }

    /// Checks tensor shapes against a config.
    pub fn check_shapes(&self, cfg: &EncoderConfig) -> Result<()> {
        let d = cfg.hidden_dim;
        let f = cfg.ffn_dim;
        let expect = |name: &str, t: &Tensor, shape: &[usize]| {
            if t.shape != shape {
                Err(Error::Shape(format!("{name}: expected {shape:?}, found {:?}", t.shape)))
            } else {
                Ok(())
            }
        };
        expect("embed.token", &self.token, &[cfg.vocab_size, d])?;
        expect("embed.position", &self.position, &[cfg.max_seq_len, d])?;
        if self.layers.len() != cfg.layers {
            return Err(Error::Shape(format!("expected {} layers, found {}", cfg.layers, self.layers.len())));
        }
        let shapes: [&[usize]; 16] = [
            &[d, d], &[d], &[d, d], &[d], &[d, d], &[d], &[d, d], &[d], &[d], &[d], &[f, d], &[f],
            &[d, f], &[d], &[d], &[d],
        ];
        for (n, layer) in self.layers.iter().enumerate() {
            for ((name, t), shape) in LAYER_NAMES.iter().zip(layer.tensors()).zip(shapes) {
                expect(&format!("layer.{n}.{name}"), t, shape)?;
            }
        }
        Ok(())
    }
}

/// `h_cls` is the final hidden state at position 0; `hidden` is `seq_len × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub h_cls: Vec<f64>,
    pub hidden: Tensor,
}

impl EncoderOutput {
    pub fn seq_len(&self) -> usize {
        self.hidden.rows()
    }

    pub fn dim(&self) -> usize {
        self.hidden.cols()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.hidden.row(t)
    }
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Attention weights, `heads × seq × seq`.
    pub probs: Vec<f64>,
    pub ctx: Vec<f64>,
    pub attn_dropout: Option<Vec<f64>>,
    pub ln1: LayerNormCache,
    pub ln1_out: Vec<f64>,
    pub ffn_pre: Vec<f64>,
    pub ffn_act: Vec<f64>,
    pub ffn_dropout: Option<Vec<f64>>,
    pub ln2: LayerNormCache,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    pub token_ids: Vec<TokenId>,
    pub key_mask: Vec<bool>,
    pub embed_dropout: Option<Vec<f64>>,
    pub layers: Vec<LayerCache>,
}

/// Runs the encoder over `token_ids`; `attention_mask[t] == 0` marks a PAD key.
pub fn encoder_forward(
    params: &EncoderParams,
    cfg: &EncoderConfig,
    token_ids: &[TokenId],
    attention_mask: &[u8],
    mut mode: Mode<'_>,
) -> Result<(EncoderOutput, EncoderCache)> {
    let s = token_ids.len();
    let d = cfg.hidden_dim;
    let heads = cfg.attention_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    if s == 0 || s > cfg.max_seq_len {
        return Err(Error::Shape(format!("sequence length {s} outside 1..={}", cfg.max_seq_len)));
    }
    if attention_mask.len() != s {
        return Err(Error::Shape("attention mask length differs from sequence length".into()));
    }
    if let Some(&bad) = token_ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(Error::Shape(format!("token id {bad} >= vocab size {}", cfg.vocab_size)));
    }
    let key_mask: Vec<bool> = attention_mask.iter().map(|&m| m != 0).collect();

    let mut x = vec![0.0; s * d];
    for (t, &id) in token_ids.iter().enumerate() {
        let row = &mut x[t * d..(t + 1) * d];
        row.copy_from_slice(params.token.row(id as usize));
        axpy(1.0, params.position.row(t), row);
    }
    let embed_dropout = mode.dropout_mask(s * d, cfg.dropout_rate);
    apply_mask(&mut x, embed_dropout.as_ref());

    let mut caches = Vec::with_capacity(params.layers.len());
    for (li, lp) in params.layers.iter().enumerate() {
        let q = linear(&x, s, &lp.q, &lp.q_bias.data);
        let k = linear(&x, s, &lp.k, &lp.k_bias.data);
        let v = linear(&x, s, &lp.v, &lp.v_bias.data);

        let mut probs = vec![0.0; heads * s * s];
        let mut ctx = vec![0.0; s * d];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..s {
                let qi = &q[i * d + off..i * d + off + dh];
                let row = &mut probs[(h * s + i) * s..(h * s + i + 1) * s];
                for j in 0..s {
                    row[j] = if key_mask[j] {
                        dot(qi, &k[j * d + off..j * d + off + dh]) * scale
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                softmax_in_place(row);
                let ci = &mut ctx[i * d + off..i * d + off + dh];
                for j in 0..s {
                    if key_mask[j] {
                        axpy(row[j], &v[j * d + off..j * d + off + dh], ci);
                    }
                }
            }
        }

        let mut attn = linear(&ctx, s, &lp.o, &lp.o_bias.data);
        let attn_dropout = mode.dropout_mask(s * d, cfg.dropout_rate);
        apply_mask(&mut attn, attn_dropout.as_ref());
        for (a, xi) in attn.iter_mut().zip(&x) {
            *a += xi;
        }
        let (ln1_out, ln1) = layer_norm(&attn, s, &lp.ln1_gain.data, &lp.ln1_bias.data);

        let ffn_pre = linear(&ln1_out, s, &lp.ffn_in, &lp.ffn_in_bias.data);
        let ffn_act: Vec<f64> = ffn_pre.iter().map(|&u| gelu(u)).collect();
        let mut ffn = linear(&ffn_act, s, &lp.ffn_out, &lp.ffn_out_bias.data);
        let ffn_dropout = mode.dropout_mask(s * d, cfg.dropout_rate);
        apply_mask(&mut ffn, ffn_dropout.as_ref());
        for (f, y) in ffn.iter_mut().zip(&ln1_out) {
            *f += y;
        }
        let (out, ln2) = layer_norm(&ffn, s, &lp.ln2_gain.data, &lp.ln2_bias.data);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { layer: li });
        }

        caches.push(LayerCache {
            input: std::mem::replace(&mut x, out),
            q,
            k,
            v,
            probs,
            ctx,
            attn_dropout,
            ln1,
            ln1_out,
            ffn_pre,
            ffn_act,
            ffn_dropout,
            ln2,
        });
    }

    let hidden = Tensor {
        shape: vec![s, d],
        data: x,
    };
    let output = EncoderOutput {
        h_cls: hidden.row(0).to_vec(),
        hidden,
    };
    Ok((
        output,
        EncoderCache {
            token_ids: token_ids.to_vec(),
            key_mask,
            embed_dropout,
            layers: caches,
        },
    ))
}

/// Backpropagates `d_hidden` (`seq_len × d`) through the encoder, accumulating
/// parameter gradients into `grads`.
pub fn encoder_backward(
    params: &EncoderParams,
    cfg: &EncoderConfig,
    cache: &EncoderCache,
    d_hidden: &[f64],
    grads: &mut EncoderParams,
) {
    let s = cache.token_ids.len();
    let d = cfg.hidden_dim;
    let heads = cfg.attention_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dx = d_hidden.to_vec();

    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let lg = &mut grads.layers[li];

        // second residual block
        let d_res2 = layer_norm_backward(&dx, &lc.ln2, &lp.ln2_gain.data, &mut lg.ln2_gain.data, &mut lg.ln2_bias.data);
        let mut d_ln1_out = d_res2.clone();
        let mut d_ffn = d_res2;
        apply_mask(&mut d_ffn, lc.ffn_dropout.as_ref());
        let mut d_act = linear_backward(&lc.ffn_act, s, &lp.ffn_out, &d_ffn, &mut lg.ffn_out, &mut lg.ffn_out_bias.data);
        for (g, &u) in d_act.iter_mut().zip(&lc.ffn_pre) {
            *g *= gelu_grad(u);
        }
        let d_from_ffn = linear_backward(&lc.ln1_out, s, &lp.ffn_in, &d_act, &mut lg.ffn_in, &mut lg.ffn_in_bias.data);
        axpy(1.0, &d_from_ffn, &mut d_ln1_out);

        // first residual block
        let d_res1 = layer_norm_backward(&d_ln1_out, &lc.ln1, &lp.ln1_gain.data, &mut lg.ln1_gain.data, &mut lg.ln1_bias.data);
        let mut d_input = d_res1.clone();
        let mut d_attn = d_res1;
        apply_mask(&mut d_attn, lc.attn_dropout.as_ref());
        let d_ctx = linear_backward(&lc.ctx, s, &lp.o, &d_attn, &mut lg.o, &mut lg.o_bias.data);

        let mut dq = vec![0.0; s * d];
        let mut dk = vec![0.0; s * d];
        let mut dv = vec![0.0; s * d];
        let mut dp = vec![0.0; s];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..s {
                let p = &lc.probs[(h * s + i) * s..(h * s + i + 1) * s];
                let dci = &d_ctx[i * d + off..i * d + off + dh];
                let mut weighted = 0.0;
                for j in 0..s {
                    if !cache.key_mask[j] {
                        dp[j] = 0.0;
                        continue;
                    }
                    dp[j] = dot(dci, &lc.v[j * d + off..j * d + off + dh]);
                    weighted += p[j] * dp[j];
                    axpy(p[j], dci, &mut dv[j * d + off..j * d + off + dh]);
                }
                for j in 0..s {
                    if !cache.key_mask[j] {
                        continue;
                    }
                    let ds = p[j] * (dp[j] - weighted) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    axpy(ds, &lc.k[j * d + off..j * d + off + dh], &mut dq[i * d + off..i * d + off + dh]);
                    axpy(ds, &lc.q[i * d + off..i * d + off + dh], &mut dk[j * d + off..j * d + off + dh]);
                }
            }
        }
        for (w, b, dy, gw) in [
            (&lp.q, &mut lg.q_bias, &dq, 0),
            (&lp.k, &mut lg.k_bias, &dk, 1),
            (&lp.v, &mut lg.v_bias, &dv, 2),
        ] {
            let dw = match gw {
                0 => &mut lg.q,
                1 => &mut lg.k,
                _ => &mut lg.v,
            };
            let dxi = linear_backward(&lc.input, s, w, dy, dw, &mut b.data);
            axpy(1.0, &dxi, &mut d_input);
        }
        dx = d_input;
    }

    apply_mask(&mut dx, cache.embed_dropout.as_ref());
    for (t, &id) in cache.token_ids.iter().enumerate() {
        let g = &dx[t * d..(t + 1) * d];
        axpy(1.0, g, grads.token.row_mut(id as usize));
        axpy(1.0, g, grads.position.row_mut(t));
    }
}
