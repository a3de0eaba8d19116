//! Self-describing JSON checkpoints.
//!
//! Parameters are stored by name (`embed.token`, `layer.{n}.attn.q`, ...,
//! `head.{kind}.w0`, ...) as row-major `f64` arrays with their shapes. Floats
//! are written in shortest round-trip form, so reloading is bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::heads::HeadKind;
use crate::model::Model;
use crate::tensor::Tensor;
use crate::tokenizer::Vocab;

pub const CHECKPOINT_FORMAT: &str = "cbert-checkpoint/1";

/// Order in which the event-aware and masked heads concatenate their inputs.
pub const CONCAT_ORDER: [&str; 3] = ["sentence", "event1", "event2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub datasets: Vec<String>,
    pub seed: u64,
    pub epochs: usize,
    pub steps: usize,
    /// Checkpoint this model was transferred from, if any.
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub encoder_config: EncoderConfig,
    pub head_kind: HeadKind,
    pub head_dropout: f64,
    pub concat_order: Vec<String>,
    pub tensors: BTreeMap<String, TensorEntry>,
    pub vocab: Vec<String>,
    pub provenance: Provenance,
}

impl Checkpoint {
    pub fn from_model(model: &Model, vocab: &Vocab, provenance: Provenance) -> Self {
        let tensors = model
            .tensors()
            .into_iter()
            .map(|(name, t)| {
                let entry = TensorEntry {
                    shape: t.shape.clone(),
                    data: t.data.clone(),
                };
                (name, entry)
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            encoder_config: model.encoder_config.clone(),
            head_kind: model.kind(),
            head_dropout: model.head_dropout,
            concat_order: CONCAT_ORDER.iter().map(|s| s.to_string()).collect(),
            tensors,
            vocab: vocab.tokens().to_vec(),
            provenance,
        }
    }

    /// Rebuilds the model; every named tensor must be present with its exact shape.
    pub fn to_model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format {:?}", self.format)));
        }
        if self.concat_order != CONCAT_ORDER {
            return Err(Error::Checkpoint(format!("unsupported concat order {:?}", self.concat_order)));
        }
        let mut model = Model::new(self.encoder_config.clone(), self.head_kind, self.head_dropout)?;
        let mut seen = 0;
        for (name, t) in model.tensors_mut() {
            let entry = self
                .tensors
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            copy_entry(&name, entry, t)?;
            seen += 1;
        }
        if seen != self.tensors.len() {
            let known: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
            let extra: Vec<&String> = self.tensors.keys().filter(|k| !known.contains(k)).collect();
            return Err(Error::Checkpoint(format!("unexpected tensors {extra:?}")));
        }
        Ok(model)
    }

    pub fn vocab(&self) -> Result<Vocab> {
        Vocab::from_tokens(self.vocab.clone())
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn copy_entry(name: &str, entry: &TensorEntry, t: &mut Tensor) -> Result<()> {
    if entry.shape != t.shape || entry.data.len() != t.data.len() {
        return Err(Error::Checkpoint(format!(
            "{name}: stored shape {:?} ({} values), expected {:?}",
            entry.shape,
            entry.data.len(),
            t.shape
        )));
    }
    t.data.copy_from_slice(&entry.data);
    Ok(())
}

/// Copies externally pretrained encoder weights (`embed.*`, `layer.*`) into
/// `model`, leaving the head untouched. Returns the number of tensors copied.
pub fn import_encoder_weights(model: &mut Model, tensors: &BTreeMap<String, TensorEntry>) -> Result<usize> {
    let mut copied = 0;
    for (name, t) in model.encoder.tensors_mut() {
        let entry = tensors
            .get(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing encoder tensor {name}")))?;
        copy_entry(&name, entry, t)?;
        copied += 1;
    }
    Ok(copied)
}
