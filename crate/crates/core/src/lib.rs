//! Binary causality detection between two marked events in a sentence.
//!
//! The crate covers corpus curation, a word-level tokenizer with event markers,
//! a small bidirectional transformer encoder with hand-written backpropagation,
//! three classification heads (sentence context, event aware, masked event),
//! Adam training with masked-pretrain to event-aware transfer, and evaluation.

pub mod checkpoint;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod heads;
pub mod model;
pub mod optim;
pub mod nn;
pub mod tensor;
pub mod tokenizer;
pub mod training;

pub use checkpoint::{Checkpoint, Provenance};
pub use corpus::{CharSpan, Label, MarkedSentence, Source, Split, TagStyle};
pub use encoder::EncoderConfig;
pub use error::{Error, Result};
pub use evaluation::{error_sheet, evaluate, ErrorSheet, MetricsReport};
pub use grid::{run_grid, GridConfig, GridDataset, GridResults};
pub use heads::HeadKind;
pub use model::Model;
pub use tokenizer::{encode, ExampleRecord, TokenSpan, Variant, Vocab};
pub use training::{train, transfer, LossCurve, TrainConfig};
