//! TOML run configuration: `[data]`, `[encoder]`, `[train]` and `[grid]` tables.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cbert_core::{EncoderConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Raw corpora, laid out as described by `DataLayout::under`.
    pub raw_dir: PathBuf,
    /// Curated `<dataset>.jsonl` files.
    pub corpus_dir: PathBuf,
    pub vocab_size: usize,
    pub synthetic_per_class: usize,
    pub synthetic_test_per_class: usize,
    /// Examples per category in error sheets.
    pub error_examples: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            raw_dir: "data".into(),
            corpus_dir: "corpus".into(),
            vocab_size: 20_000,
            synthetic_per_class: 200,
            synthetic_test_per_class: 100,
            error_examples: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub layers: usize,
    pub attention_heads: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    /// Positional table size; defaults to `train.max_seq_len`.
    pub max_seq_len: Option<usize>,
    pub dropout_rate: f64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let desk = EncoderConfig::desk(0);
        Self {
            layers: desk.layers,
            attention_heads: desk.attention_heads,
            hidden_dim: desk.hidden_dim,
            ffn_dim: desk.ffn_dim,
            max_seq_len: None,
            dropout_rate: desk.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Epochs of masked-event pretraining; defaults to `train.epochs`.
    pub pretrain_epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataSection,
    pub encoder: EncoderSection,
    pub train: TrainConfig,
    pub grid: GridSection,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// A `--seed` flag replaces the configured seed everywhere.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.train.seed = s;
        }
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            layers: self.encoder.layers,
            attention_heads: self.encoder.attention_heads,
            hidden_dim: self.encoder.hidden_dim,
            ffn_dim: self.encoder.ffn_dim,
            max_seq_len: self.encoder.max_seq_len.unwrap_or(self.train.max_seq_len),
            dropout_rate: self.encoder.dropout_rate,
            vocab_size,
            seed: self.train.seed,
        }
    }
}
