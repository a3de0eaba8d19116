//! The experiment grid: masked-event pretraining on one distribution, transfer,
//! event-aware fine-tuning on another, plus the two end-to-end baselines.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::{mask_events, MarkedSentence};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, render_f1_table, MetricsReport};
use crate::heads::HeadKind;
use crate::model::Model;
use crate::tokenizer::{build_vocab, encode_all, ExampleRecord, Vocab};
use crate::training::{train_with, transfer, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    pub name: String,
    pub train: Vec<MarkedSentence>,
    pub test: Vec<MarkedSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// `vocab_size` is overwritten with the size of the shared vocabulary.
    pub encoder: EncoderConfig,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    /// Masked-event pretraining stage.
    pub pretrain: TrainConfig,
    /// Event-aware fine-tuning and both end-to-end baselines.
    pub finetune: TrainConfig,
}

/// One vocabulary over every training split, so weights transfer across cells.
pub fn grid_vocab(datasets: &[GridDataset], size: usize) -> Result<Vocab> {
    let all: Vec<MarkedSentence> = datasets.iter().flat_map(|d| d.train.iter().cloned()).collect();
    build_vocab(&all, size)
}

struct Encoded {
    marked_train: Vec<ExampleRecord>,
    masked_train: Vec<ExampleRecord>,
    marked_test: Vec<ExampleRecord>,
    masked_test: Vec<ExampleRecord>,
}

fn encode_dataset(d: &GridDataset, vocab: &Vocab, max_seq_len: usize) -> Result<Encoded> {
    let masked = |v: &[MarkedSentence]| v.iter().map(mask_events).collect::<Vec<_>>();
    Ok(Encoded {
        marked_train: encode_all(&d.train, vocab, max_seq_len)?,
        masked_train: encode_all(&masked(&d.train), vocab, max_seq_len)?,
        marked_test: encode_all(&d.test, vocab, max_seq_len)?,
        masked_test: encode_all(&masked(&d.test), vocab, max_seq_len)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    CbertEndToEnd,
    EventEndToEnd,
    PretrainFinetune,
}

impl Regime {
    pub fn title(self) -> &'static str {
        match self {
            Regime::CbertEndToEnd => "C-BERT",
            Regime::EventEndToEnd => "Event Aware C-BERT",
            Regime::PretrainFinetune => "Masked Event C-BERT + Event Aware C-BERT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub metrics: MetricsReport,
    /// Mean training loss per epoch of the final stage.
    pub epoch_losses: Vec<f64>,
    /// Test F1 after each epoch of the final stage; logged only, never used for selection.
    pub epoch_test_f1: Vec<f64>,
    pub pretrain_epoch_losses: Vec<f64>,
    /// Eval-mode loss on the target's masked test records right after transfer.
    pub transferred_initial_loss: Option<f64>,
    /// Same loss for a freshly initialized event-aware model.
    pub random_initial_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub regime: Regime,
    pub pretrain: Option<String>,
    pub target: String,
    pub outcome: Option<CellOutcome>,
    pub error: Option<String>,
}

impl Cell {
    fn from_result(regime: Regime, pretrain: Option<&str>, target: &str, r: Result<CellOutcome>) -> Self {
        let (outcome, error) = match r {
            Ok(o) => (Some(o), None),
            Err(e) => {
                warn!("grid cell {regime:?} {pretrain:?} -> {target} failed: {e}");
                (None, Some(e.to_string()))
            }
        };
        Self {
            regime,
            pretrain: pretrain.map(str::to_string),
            target: target.to_string(),
            outcome,
            error,
        }
    }

    pub fn f1(&self) -> Option<f64> {
        self.outcome.as_ref().map(|o| o.metrics.f1_positive)
    }
}

fn finetune_and_score(
    model: &mut Model,
    train: &[ExampleRecord],
    test: &[ExampleRecord],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>, MetricsReport)> {
    let mut epoch_f1 = Vec::new();
    let curve = train_with(model, train, cfg, |epoch, m| {
        let f1 = evaluate(m, test)?.f1_positive;
        info!("epoch {epoch}: test F1 {f1:.4}");
        epoch_f1.push(f1);
        Ok(())
    })?;
    let metrics = evaluate(model, test)?;
    Ok((curve.epoch_losses, epoch_f1, metrics))
}

fn encoder_config(cfg: &GridConfig, vocab: &Vocab) -> EncoderConfig {
    EncoderConfig {
        vocab_size: vocab.len(),
        ..cfg.encoder.clone()
    }
}

fn run_pretrain_finetune(pre: &Encoded, target: &Encoded, ecfg: &EncoderConfig, cfg: &GridConfig) -> Result<CellOutcome> {
    let mut masked = Model::new(ecfg.clone(), HeadKind::Masked, cfg.pretrain.dropout_rate)?;
    let pre_curve = train_with(&mut masked, &pre.masked_train, &cfg.pretrain, |_, _| Ok(()))?;
    let mut model = transfer(&masked, ecfg)?;

    let random = Model::new(ecfg.clone(), HeadKind::Event, cfg.finetune.dropout_rate)?;
    let transferred_initial_loss = model.mean_loss(&target.masked_test)?;
    let random_initial_loss = random.mean_loss(&target.masked_test)?;

    let (epoch_losses, epoch_test_f1, metrics) =
        finetune_and_score(&mut model, &target.marked_train, &target.marked_test, &cfg.finetune)?;
    Ok(CellOutcome {
        metrics,
        epoch_losses,
        epoch_test_f1,
        pretrain_epoch_losses: pre_curve.epoch_losses,
        transferred_initial_loss: Some(transferred_initial_loss),
        random_initial_loss: Some(random_initial_loss),
    })
}

fn run_end_to_end(kind: HeadKind, target: &Encoded, ecfg: &EncoderConfig, cfg: &GridConfig) -> Result<CellOutcome> {
    if kind == HeadKind::Masked {
        return Err(Error::HeadMismatch {
            expected: "cbert or event".into(),
            found: kind.to_string(),
        });
    }
    let mut model = Model::new(ecfg.clone(), kind, cfg.finetune.dropout_rate)?;
    let (epoch_losses, epoch_test_f1, metrics) =
        finetune_and_score(&mut model, &target.marked_train, &target.marked_test, &cfg.finetune)?;
    Ok(CellOutcome {
        metrics,
        epoch_losses,
        epoch_test_f1,
        pretrain_epoch_losses: Vec::new(),
        transferred_initial_loss: None,
        random_initial_loss: None,
    })
}

/// Pretrains a masked-event model on `pretrain`'s train split, transfers it,
/// fine-tunes on `target`'s marked train split and evaluates on its test split.
pub fn pretrain_finetune(
    pretrain: &GridDataset,
    target: &GridDataset,
    vocab: &Vocab,
    cfg: &GridConfig,
) -> Result<CellOutcome> {
    let ecfg = encoder_config(cfg, vocab);
    let pre = encode_dataset(pretrain, vocab, cfg.max_seq_len)?;
    let tgt = encode_dataset(target, vocab, cfg.max_seq_len)?;
    run_pretrain_finetune(&pre, &tgt, &ecfg, cfg)
}

/// Trains a C-BERT or event-aware model from scratch on `target`.
pub fn end_to_end(kind: HeadKind, target: &GridDataset, vocab: &Vocab, cfg: &GridConfig) -> Result<CellOutcome> {
    let ecfg = encoder_config(cfg, vocab);
    let tgt = encode_dataset(target, vocab, cfg.max_seq_len)?;
    run_end_to_end(kind, &tgt, &ecfg, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResults {
    pub datasets: Vec<String>,
    /// `transfer[i][j]`: pretrained on dataset `i`, fine-tuned and tested on `j`.
    pub transfer: Vec<Vec<Cell>>,
    /// C-BERT row then event-aware row, one cell per dataset.
    pub end_to_end: Vec<Vec<Cell>>,
}

/// Runs every cell. Failures are recorded in the cell and do not stop the grid.
pub fn run_grid(datasets: &[GridDataset], vocab: &Vocab, cfg: &GridConfig) -> GridResults {
    let ecfg = encoder_config(cfg, vocab);
    let encoded: Vec<Result<Encoded>> = datasets
        .iter()
        .map(|d| encode_dataset(d, vocab, cfg.max_seq_len))
        .collect();
    let failed = |i: usize| -> Error {
        let msg = match &encoded[i] {
            Err(e) => e.to_string(),
            Ok(_) => unreachable!(),
        };
        Error::InvalidRecord(format!("dataset {}: {msg}", datasets[i].name))
    };

    let mut transfer_rows = Vec::new();
    for (i, pre) in datasets.iter().enumerate() {
        let mut row = Vec::new();
        for (j, tgt) in datasets.iter().enumerate() {
            info!("grid: pretrain {} -> finetune {}", pre.name, tgt.name);
            let r = match (&encoded[i], &encoded[j]) {
                (Ok(p), Ok(t)) => run_pretrain_finetune(p, t, &ecfg, cfg),
                (Err(_), _) => Err(failed(i)),
                (_, Err(_)) => Err(failed(j)),
            };
            row.push(Cell::from_result(Regime::PretrainFinetune, Some(&pre.name), &tgt.name, r));
        }
        transfer_rows.push(row);
    }

    let mut end_rows = Vec::new();
    for (kind, regime) in [(HeadKind::Cbert, Regime::CbertEndToEnd), (HeadKind::Event, Regime::EventEndToEnd)] {
        let row = datasets
            .iter()
            .enumerate()
            .map(|(j, tgt)| {
                info!("grid: {kind} end-to-end on {}", tgt.name);
                let r = match &encoded[j] {
                    Ok(t) => run_end_to_end(kind, t, &ecfg, cfg),
                    Err(_) => Err(failed(j)),
                };
                Cell::from_result(regime, None, &tgt.name, r)
            })
            .collect();
        end_rows.push(row);
    }

    GridResults {
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        transfer: transfer_rows,
        end_to_end: end_rows,
    }
}

impl GridResults {
    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.transfer
            .iter()
            .chain(&self.end_to_end)
            .flatten()
            .filter(|c| c.error.is_some())
    }

    /// In-domain comparison: both end-to-end heads plus the diagonal of the transfer matrix.
    pub fn render_in_domain(&self) -> String {
        let mut rows: Vec<(String, Vec<Option<f64>>)> = self
            .end_to_end
            .iter()
            .filter_map(|row| {
                let title = row.first()?.regime.title().to_string();
                Some((title, row.iter().map(Cell::f1).collect()))
            })
            .collect();
        let diagonal = (0..self.datasets.len()).map(|i| self.transfer[i][i].f1()).collect();
        rows.push((Regime::PretrainFinetune.title().to_string(), diagonal));
        format!("F1 (Cause-Effect, %), in-domain\n{}", render_f1_table(&self.datasets, &rows))
    }

    /// Transfer matrix: rows are pretraining datasets, columns fine-tuning datasets.
    pub fn render_transfer(&self) -> String {
        let rows: Vec<(String, Vec<Option<f64>>)> = self
            .datasets
            .iter()
            .zip(&self.transfer)
            .map(|(name, row)| (format!("pretrain {name}"), row.iter().map(Cell::f1).collect()))
            .collect();
        format!(
            "F1 (Cause-Effect, %), masked-event pretraining (rows) -> event-aware fine-tuning (columns)\n{}",
            render_f1_table(&self.datasets, &rows)
        )
    }
}
