mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cbert_core::HeadKind;
use clap::{Parser, Subcommand, ValueEnum};

use commands::{parse_dataset_list, DatasetId};
use config::Config;

#[derive(Parser)]
#[command(name = "cbert", version, about = "Event-aware binary cause-effect classification")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `data.raw_dir`.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Overrides `data.corpus_dir`.
    #[arg(long, global = true)]
    corpus_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainHead {
    Cbert,
    Event,
    Masked,
}

impl From<TrainHead> for HeadKind {
    fn from(h: TrainHead) -> Self {
        match h {
            TrainHead::Cbert => HeadKind::Cbert,
            TrainHead::Event => HeadKind::Event,
            TrainHead::Masked => HeadKind::Masked,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw corpora (or generate synthetic ones) into the unified format.
    Curate {
        /// Dataset ids, comma separated; `all` means the three real corpora.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        dataset: Vec<String>,
        /// Defaults to `data.corpus_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print per-split class counts of curated corpora.
    Stats {
        #[arg(long, value_delimiter = ',', default_value = "all")]
        dataset: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model end to end (`--head masked` is the same as `pretrain`).
    Train {
        #[arg(long)]
        dataset: DatasetId,
        #[arg(long, value_enum, default_value = "event")]
        head: TrainHead,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the masked-event model.
    Pretrain {
        #[arg(long)]
        dataset: DatasetId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transfer a pretrained encoder into a fresh event-aware model and train it.
    Finetune {
        #[arg(long)]
        dataset: DatasetId,
        /// A pretrained checkpoint.
        #[arg(long, conflicts_with = "pretrain_dataset")]
        checkpoint: Option<PathBuf>,
        /// Pretrain on this dataset first instead of loading a checkpoint.
        #[arg(long)]
        pretrain_dataset: Option<DatasetId>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every pretrain → target cell plus the end-to-end baselines.
    Grid {
        #[arg(long, value_delimiter = ',', default_value = "all")]
        dataset: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset's test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: DatasetId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one tagged sentence, e.g. "<e1> smoking </e1> causes <e2> cancer </e2>".
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sentence: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    cfg.apply_seed(cli.seed);
    if let Some(d) = cli.data_dir {
        cfg.data.raw_dir = d;
    }
    if let Some(d) = cli.corpus_dir {
        cfg.data.corpus_dir = d;
    }
    match cli.command {
        Command::Curate { dataset, out } => commands::curate(&cfg, &parse_dataset_list(&dataset)?, out.as_deref()),
        Command::Stats { dataset, out } => commands::stats(&cfg, &parse_dataset_list(&dataset)?, out.as_deref()),
        Command::Train { dataset, head, out } => commands::train(&cfg, dataset, head.into(), &out, "train"),
        Command::Pretrain { dataset, out } => commands::train(&cfg, dataset, HeadKind::Masked, &out, "pretrain"),
        Command::Finetune {
            dataset,
            checkpoint,
            pretrain_dataset,
            out,
        } => commands::finetune(&cfg, dataset, checkpoint.as_deref(), pretrain_dataset, &out),
        Command::Grid { dataset, out } => commands::grid(&cfg, &parse_dataset_list(&dataset)?, &out),
        Command::Eval {
            checkpoint,
            dataset,
            out,
        } => commands::eval(&cfg, &checkpoint, dataset, &out),
        Command::Predict { checkpoint, sentence } => commands::predict(&checkpoint, &sentence),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
