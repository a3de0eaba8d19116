use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use cbert_core::corpus::{
    corpus_stats, curate_source, export_records, generate_synthetic_family, import_records, mask_events,
    split_records, DataLayout, Label, MarkedSentence, Source, Split, StatsReport, TemplateFamily,
};
use cbert_core::evaluation::error_sheet;
use cbert_core::grid::{grid_vocab, run_grid, GridConfig, GridDataset};
use cbert_core::tokenizer::{build_vocab, encode, encode_all, ExampleRecord};
use cbert_core::training::train_with;
use cbert_core::{evaluate, transfer, Checkpoint, HeadKind, LossCurve, MetricsReport, Model, Provenance, Vocab};
use log::{info, warn};
use serde::Serialize;

use crate::config::Config;
use crate::manifest::Recorder;

/// Dataset identifiers accepted by `--dataset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetId {
    Semeval2007,
    Semeval2010,
    Ade,
    /// Template family A.
    Synthetic,
    /// Template family B, a second synthetic distribution.
    SyntheticB,
}

impl DatasetId {
    pub const REAL: [DatasetId; 3] = [DatasetId::Semeval2007, DatasetId::Semeval2010, DatasetId::Ade];
    pub const ALL: [DatasetId; 5] = [
        DatasetId::Semeval2007,
        DatasetId::Semeval2010,
        DatasetId::Ade,
        DatasetId::Synthetic,
        DatasetId::SyntheticB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Semeval2007 => "semeval2007",
            DatasetId::Semeval2010 => "semeval2010",
            DatasetId::Ade => "ade",
            DatasetId::Synthetic => "synthetic",
            DatasetId::SyntheticB => "synthetic-b",
        }
    }

    fn source(self) -> Option<Source> {
        match self {
            DatasetId::Semeval2007 => Some(Source::Semeval2007),
            DatasetId::Semeval2010 => Some(Source::Semeval2010),
            DatasetId::Ade => Some(Source::Ade),
            DatasetId::Synthetic | DatasetId::SyntheticB => None,
        }
    }

    fn corpus_path(self, cfg: &Config) -> PathBuf {
        cfg.data.corpus_dir.join(format!("{}.jsonl", self.as_str()))
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        DatasetId::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<&str> = DatasetId::ALL.iter().map(|d| d.as_str()).collect();
                format!("unknown dataset `{s}` (expected one of {})", known.join(", "))
            })
    }
}

/// `all` expands to the three real corpora.
pub fn parse_dataset_list(items: &[String]) -> Result<Vec<DatasetId>> {
    let mut out = Vec::new();
    for item in items {
        if item.eq_ignore_ascii_case("all") {
            out.extend(DatasetId::REAL);
        } else {
            out.push(item.parse().map_err(anyhow::Error::msg)?);
        }
    }
    out.dedup();
    ensure!(!out.is_empty(), "no datasets given");
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T, rec: &mut Recorder) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    rec.output(path);
    Ok(())
}

fn write_text(path: &Path, text: &str, rec: &mut Recorder) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    rec.output(path);
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn synthetic(id: DatasetId, cfg: &Config) -> Vec<MarkedSentence> {
    let family = if id == DatasetId::SyntheticB { TemplateFamily::B } else { TemplateFamily::A };
    let seed = cfg.seed();
    let mut records = generate_synthetic_family(cfg.data.synthetic_per_class, seed, family);
    let mut test = generate_synthetic_family(cfg.data.synthetic_test_per_class, seed.wrapping_add(1), family);
    for r in test.iter_mut() {
        r.split = Split::Test;
    }
    records.extend(test);
    records
}

pub fn curate(cfg: &Config, datasets: &[DatasetId], out: Option<&Path>) -> Result<()> {
    let out = out.unwrap_or(&cfg.data.corpus_dir);
    create_dir(out)?;
    let mut rec = Recorder::new("curate", cfg);
    let layout = DataLayout::under(&cfg.data.raw_dir);
    for &id in datasets {
        let records = match id.source() {
            Some(source) => {
                for p in layout.inputs(source) {
                    rec.input(p);
                }
                let curated = curate_source(source, &layout, cfg.seed())
                    .with_context(|| format!("curating {id} from {}", cfg.data.raw_dir.display()))?;
                if let Some(report) = &curated.ade_report {
                    write_json(&out.join("ade_report.json"), report, &mut rec)?;
                }
                curated.records
            }
            None => synthetic(id, cfg),
        };
        let marked = out.join(format!("{id}.jsonl"));
        export_records(&records, &marked)?;
        rec.output(&marked);
        let masked: Vec<MarkedSentence> = records.iter().map(mask_events).collect();
        let masked_path = out.join(format!("{id}.masked.jsonl"));
        export_records(&masked, &masked_path)?;
        rec.output(&masked_path);
        println!("{id}: {} records -> {}", records.len(), marked.display());
    }
    rec.finish(out)?;
    Ok(())
}

fn load_corpus(cfg: &Config, id: DatasetId, rec: &mut Recorder) -> Result<Vec<MarkedSentence>> {
    let path = id.corpus_path(cfg);
    rec.input(&path);
    import_records(&path).with_context(|| format!("loading {} (run `cbert curate --dataset {id}` first)", path.display()))
}

pub fn stats(cfg: &Config, datasets: &[DatasetId], out: Option<&Path>) -> Result<()> {
    let mut rec = Recorder::new("stats", cfg);
    let mut all = Vec::new();
    for &id in datasets {
        all.extend(load_corpus(cfg, id, &mut rec)?);
    }
    let stats = corpus_stats(&all);
    let report = StatsReport::new(&stats);
    let text = report.render(&stats);
    print!("{text}");
    if let Some(out) = out {
        create_dir(out)?;
        write_json(&out.join("stats.json"), &report, &mut rec)?;
        write_text(&out.join("stats.txt"), &text, &mut rec)?;
        rec.finish(out)?;
    }
    Ok(())
}

struct Splits {
    train: Vec<MarkedSentence>,
    test: Vec<MarkedSentence>,
}

fn splits(records: Vec<MarkedSentence>) -> Splits {
    Splits {
        train: split_records(&records, Split::Train),
        test: split_records(&records, Split::Test),
    }
}

fn encode_variant(records: &[MarkedSentence], vocab: &Vocab, max_seq_len: usize, masked: bool) -> Result<Vec<ExampleRecord>> {
    if masked {
        let m: Vec<MarkedSentence> = records.iter().map(mask_events).collect();
        Ok(encode_all(&m, vocab, max_seq_len)?)
    } else {
        Ok(encode_all(records, vocab, max_seq_len)?)
    }
}

#[derive(Serialize)]
struct EpochLog {
    epoch: usize,
    train_loss: f64,
    /// Logged for transparency only; never used to pick a model.
    test_f1: Option<f64>,
}

struct Trained {
    model: Model,
    epochs: Vec<EpochLog>,
    curve: LossCurve,
    metrics: Option<MetricsReport>,
}

fn fit(mut model: Model, train: &[ExampleRecord], test: &[ExampleRecord], cfg: &Config) -> Result<Trained> {
    ensure!(!train.is_empty(), "the training split is empty");
    let mut test_f1 = Vec::new();
    let curve = train_with(&mut model, train, &cfg.train, |epoch, m| {
        if !test.is_empty() {
            let f1 = evaluate(m, test)?.f1_positive;
            info!("epoch {}: test F1 {f1:.4}", epoch + 1);
            test_f1.push(f1);
        }
        Ok(())
    })?;
    let epochs = curve
        .epoch_losses
        .iter()
        .enumerate()
        .map(|(i, &l)| EpochLog {
            epoch: i + 1,
            train_loss: l,
            test_f1: test_f1.get(i).copied(),
        })
        .collect();
    let metrics = if test.is_empty() {
        warn!("no test split; skipping evaluation");
        None
    } else {
        Some(evaluate(&model, test)?)
    };
    Ok(Trained {
        model,
        epochs,
        curve,
        metrics,
    })
}

fn save_run(out: &Path, trained: &Trained, vocab: &Vocab, provenance: Provenance, cfg: &Config, rec: &mut Recorder) -> Result<()> {
    create_dir(out)?;
    let ck = Checkpoint::from_model(&trained.model, vocab, provenance);
    let ck_path = out.join("checkpoint.json");
    ck.save(&ck_path)?;
    rec.output(&ck_path);
    let vocab_path = out.join("vocab.txt");
    vocab.save(&vocab_path)?;
    rec.output(&vocab_path);
    write_json(&out.join("loss_curve.json"), &trained.curve, rec)?;
    write_json(&out.join("epochs.json"), &trained.epochs, rec)?;
    if let Some(m) = &trained.metrics {
        write_json(&out.join("metrics.json"), m, rec)?;
        let sheet = error_sheet(m, cfg.data.error_examples);
        write_text(&out.join("error_sheet.txt"), &sheet.render(), rec)?;
        print!("{}", m.render());
    }
    Ok(())
}

fn provenance(datasets: &[DatasetId], cfg: &Config, steps: usize, source: Option<String>) -> Provenance {
    Provenance {
        datasets: datasets.iter().map(|d| d.to_string()).collect(),
        seed: cfg.seed(),
        epochs: cfg.train.epochs,
        steps,
        source,
    }
}

/// End-to-end C-BERT or event-aware training, or masked-event pretraining.
pub fn train(cfg: &Config, id: DatasetId, head: HeadKind, out: &Path, command: &str) -> Result<()> {
    let mut rec = Recorder::new(command, cfg);
    let data = splits(load_corpus(cfg, id, &mut rec)?);
    let vocab = build_vocab(&data.train, cfg.data.vocab_size)?;
    let masked = head == HeadKind::Masked;
    let train = encode_variant(&data.train, &vocab, cfg.train.max_seq_len, masked)?;
    let test = encode_variant(&data.test, &vocab, cfg.train.max_seq_len, masked)?;
    let model = Model::new(cfg.encoder_config(vocab.len()), head, cfg.train.dropout_rate)?;
    info!("{head} on {id}: {} train / {} test records, {} parameters", train.len(), test.len(), model.num_parameters());
    let trained = fit(model, &train, &test, cfg)?;
    save_run(out, &trained, &vocab, provenance(&[id], cfg, trained.curve.steps(), None), cfg, &mut rec)?;
    rec.finish(out)?;
    Ok(())
}

pub fn finetune(
    cfg: &Config,
    id: DatasetId,
    checkpoint: Option<&Path>,
    pretrain_dataset: Option<DatasetId>,
    out: &Path,
) -> Result<()> {
    let mut rec = Recorder::new("finetune", cfg);
    let target = splits(load_corpus(cfg, id, &mut rec)?);
    let (source, vocab, source_name, datasets) = match (checkpoint, pretrain_dataset) {
        (Some(path), None) => {
            rec.input(path);
            let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            let mut datasets: Vec<DatasetId> = ck.provenance.datasets.iter().filter_map(|d| d.parse().ok()).collect();
            datasets.push(id);
            (ck.to_model()?, ck.vocab()?, path.display().to_string(), datasets)
        }
        (None, Some(pre_id)) => {
            let pre = splits(load_corpus(cfg, pre_id, &mut rec)?);
            let mut both = pre.train.clone();
            both.extend(target.train.iter().cloned());
            let vocab = build_vocab(&both, cfg.data.vocab_size)?;
            let masked = encode_variant(&pre.train, &vocab, cfg.train.max_seq_len, true)?;
            let model = Model::new(cfg.encoder_config(vocab.len()), HeadKind::Masked, cfg.train.dropout_rate)?;
            info!("pretraining masked-event head on {pre_id}");
            let pretrained = fit(model, &masked, &[], cfg)?;
            (pretrained.model, vocab, format!("pretrain:{pre_id}"), vec![pre_id, id])
        }
        (Some(_), Some(_)) => bail!("give either --checkpoint or --pretrain-dataset, not both"),
        (None, None) => bail!("finetune needs --checkpoint or --pretrain-dataset"),
    };
    let mut ecfg = source.encoder_config.clone();
    ecfg.dropout_rate = cfg.encoder.dropout_rate;
    ecfg.seed = cfg.seed();
    let model = transfer(&source, &ecfg)?;
    let train = encode_variant(&target.train, &vocab, cfg.train.max_seq_len, false)?;
    let test = encode_variant(&target.test, &vocab, cfg.train.max_seq_len, false)?;
    let trained = fit(model, &train, &test, cfg)?;
    let prov = provenance(&datasets, cfg, trained.curve.steps(), Some(source_name));
    save_run(out, &trained, &vocab, prov, cfg, &mut rec)?;
    rec.finish(out)?;
    Ok(())
}

pub fn grid(cfg: &Config, datasets: &[DatasetId], out: &Path) -> Result<()> {
    let mut rec = Recorder::new("grid", cfg);
    let mut grid_data = Vec::new();
    for &id in datasets {
        let s = splits(load_corpus(cfg, id, &mut rec)?);
        grid_data.push(GridDataset {
            name: id.to_string(),
            train: s.train,
            test: s.test,
        });
    }
    let vocab = grid_vocab(&grid_data, cfg.data.vocab_size)?;
    let mut pretrain = cfg.train.clone();
    if let Some(e) = cfg.grid.pretrain_epochs {
        pretrain.epochs = e;
    }
    let gcfg = GridConfig {
        encoder: cfg.encoder_config(vocab.len()),
        vocab_size: cfg.data.vocab_size,
        max_seq_len: cfg.train.max_seq_len,
        pretrain,
        finetune: cfg.train.clone(),
    };
    let results = run_grid(&grid_data, &vocab, &gcfg);
    create_dir(out)?;
    let tables = format!("{}\n{}", results.render_in_domain(), results.render_transfer());
    print!("{tables}");
    write_json(&out.join("grid.json"), &results, &mut rec)?;
    write_text(&out.join("grid.txt"), &tables, &mut rec)?;
    rec.finish(out)?;
    let failed = results.failures().count();
    if failed > 0 {
        warn!("{failed} grid cells failed; see grid.json");
    }
    Ok(())
}

pub fn eval(cfg: &Config, checkpoint: &Path, id: DatasetId, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("eval", cfg);
    rec.input(checkpoint);
    let ck = Checkpoint::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let model = ck.to_model()?;
    let vocab = ck.vocab()?;
    let data = splits(load_corpus(cfg, id, &mut rec)?);
    ensure!(!data.test.is_empty(), "{id} has no test split");
    let test = encode_variant(&data.test, &vocab, model.encoder_config.max_seq_len, ck.head_kind == HeadKind::Masked)?;
    let report = evaluate(&model, &test)?;
    create_dir(out)?;
    print!("{}", report.render());
    write_json(&out.join("metrics.json"), &report, &mut rec)?;
    let sheet = error_sheet(&report, cfg.data.error_examples);
    write_text(&out.join("error_sheet.txt"), &sheet.render(), &mut rec)?;
    rec.finish(out)?;
    Ok(())
}

pub fn predict(checkpoint: &Path, sentence: &str) -> Result<()> {
    let ck = Checkpoint::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let model = ck.to_model()?;
    let vocab = ck.vocab()?;
    let mut s = MarkedSentence::from_tagged("input", sentence, Label::Other, Source::Synthetic, Split::Test)
        .context("malformed event tags")?;
    if ck.head_kind == HeadKind::Masked {
        s = mask_events(&s);
    }
    let r = encode(&s, &vocab, model.encoder_config.max_seq_len)?;
    let p = model.predict_proba(&r)?;
    let label = cbert_core::evaluation::predict_label(p);
    println!("{label}\t{:.6}", p[label.index()]);
    Ok(())
}
