//! One entry point from a raw data directory to unified records.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ade::{parse_ade, AdeReport, ADE_TEST_FRACTION};
use super::semeval::{parse_semeval2007, parse_semeval2010};
use super::types::{MarkedSentence, Source, Split};
use crate::error::{Error, Result};

/// Where each raw file lives. [`DataLayout::under`] gives the default layout:
///
/// ```text
/// <root>/semeval2007/train/relation-{1..7}-*.txt
/// <root>/semeval2007/test/relation-{1..7}-*.txt
/// <root>/semeval2010/TRAIN_FILE.TXT
/// <root>/semeval2010/TEST_FILE_FULL.TXT
/// <root>/ade/DRUG-AE.rel
/// <root>/ade/ADE-NEG.txt
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataLayout {
    pub semeval2007_train: PathBuf,
    pub semeval2007_test: PathBuf,
    pub semeval2010_train: PathBuf,
    pub semeval2010_test: PathBuf,
    pub ade_positive: PathBuf,
    pub ade_negative: PathBuf,
}

impl DataLayout {
    pub fn under(root: &Path) -> Self {
        Self {
            semeval2007_train: root.join("semeval2007/train"),
            semeval2007_test: root.join("semeval2007/test"),
            semeval2010_train: root.join("semeval2010/TRAIN_FILE.TXT"),
            semeval2010_test: root.join("semeval2010/TEST_FILE_FULL.TXT"),
            ade_positive: root.join("ade/DRUG-AE.rel"),
            ade_negative: root.join("ade/ADE-NEG.txt"),
        }
    }

    pub fn inputs(&self, source: Source) -> Vec<&Path> {
        match source {
            Source::Semeval2007 => vec![&self.semeval2007_train, &self.semeval2007_test],
            Source::Semeval2010 => vec![&self.semeval2010_train, &self.semeval2010_test],
            Source::Ade => vec![&self.ade_positive, &self.ade_negative],
            Source::Synthetic => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Curated {
    pub records: Vec<MarkedSentence>,
    pub ade_report: Option<AdeReport>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Parses one raw dataset (both splits). `seed` only affects the ADE split.
pub fn curate_source(source: Source, layout: &DataLayout, seed: u64) -> Result<Curated> {
    match source {
        Source::Semeval2007 => {
            let mut records = parse_semeval2007(&layout.semeval2007_train, Split::Train)?;
            records.extend(parse_semeval2007(&layout.semeval2007_test, Split::Test)?);
            Ok(Curated { records, ade_report: None })
        }
        Source::Semeval2010 => {
            let mut records = parse_semeval2010(open(&layout.semeval2010_train)?, Split::Train)?;
            records.extend(parse_semeval2010(open(&layout.semeval2010_test)?, Split::Test)?);
            Ok(Curated { records, ade_report: None })
        }
        Source::Ade => {
            let corpus = parse_ade(
                open(&layout.ade_positive)?,
                open(&layout.ade_negative)?,
                ADE_TEST_FRACTION,
                seed,
            )?;
            Ok(Curated {
                records: corpus.records,
                ade_report: Some(corpus.report),
            })
        }
        Source::Synthetic => Err(Error::Config(
            "the synthetic corpus is generated, not curated from files".into(),
        )),
    }
}

pub fn split_records(records: &[MarkedSentence], split: Split) -> Vec<MarkedSentence> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}
