//! Confusion counts, positive-class and macro F1, and the categorized error sheet.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::heads::NUM_CLASSES;
use crate::model::Model;
use crate::tokenizer::{ExampleRecord, TokenSpan};

/// Argmax over `p`; an exact tie goes to `Other`.
pub fn predict_label(p: [f64; NUM_CLASSES]) -> Label {
    if p[Label::CauseEffect.index()] > p[Label::Other.index()] {
        Label::CauseEffect
    } else {
        Label::Other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::TruePositive,
        Category::FalsePositive,
        Category::TrueNegative,
        Category::FalseNegative,
    ];

    pub fn of(gold: Label, predicted: Label) -> Self {
        match (gold, predicted) {
            (Label::CauseEffect, Label::CauseEffect) => Category::TruePositive,
            (Label::Other, Label::CauseEffect) => Category::FalsePositive,
            (Label::Other, Label::Other) => Category::TrueNegative,
            (Label::CauseEffect, Label::Other) => Category::FalseNegative,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Category::TruePositive => "True positives",
            Category::FalsePositive => "False positives",
            Category::TrueNegative => "True negatives",
            Category::FalseNegative => "False negatives",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sentence_id: String,
    /// Sentence with inline `<e1>`/`<e2>` markers.
    pub tagged_text: String,
    pub e1: TokenSpan,
    pub e2: TokenSpan,
    pub gold: Label,
    pub predicted: Label,
    pub p_cause_effect: f64,
}

impl Prediction {
    pub fn category(&self) -> Category {
        Category::of(self.gold, self.predicted)
    }
}

/// Binary precision, recall and F1; each is 0 when its denominator is 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1_positive: f64,
    /// Mean of the Cause-Effect and Other F1 scores.
    pub f1_macro: f64,
    pub accuracy: f64,
    /// Every evaluated record in input order.
    pub predictions: Vec<Prediction>,
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (precision, recall, f1_positive) = prf(tp, fp, fn_);
        let (_, _, f1_negative) = prf(tn, fn_, fp);
        let total = tp + fp + tn + fn_;
        Self {
            tp,
            fp,
            tn,
            fn_,
            precision,
            recall,
            f1_positive,
            f1_macro: (f1_positive + f1_negative) / 2.0,
            accuracy: if total == 0 { 0.0 } else { (tp + tn) as f64 / total as f64 },
            predictions: Vec::new(),
        }
    }

    pub fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let mut counts = [0usize; 4];
        for p in &predictions {
            counts[p.category() as usize] += 1;
        }
        let [tp, fp, tn, fn_] = counts;
        Self {
            predictions,
            ..Self::from_counts(tp, fp, tn, fn_)
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn count(&self, c: Category) -> usize {
        match c {
            Category::TruePositive => self.tp,
            Category::FalsePositive => self.fp,
            Category::TrueNegative => self.tn,
            Category::FalseNegative => self.fn_,
        }
    }

    pub fn examples(&self, c: Category) -> impl Iterator<Item = &Prediction> {
        self.predictions.iter().filter(move |p| p.category() == c)
    }

    pub fn render(&self) -> String {
        format!(
            "records {}  tp {}  fp {}  tn {}  fn {}\nprecision {:.4}  recall {:.4}  F1 (Cause-Effect) {:.4}  macro-F1 {:.4}  accuracy {:.4}\n",
            self.total(),
            self.tp,
            self.fp,
            self.tn,
            self.fn_,
            self.precision,
            self.recall,
            self.f1_positive,
            self.f1_macro,
            self.accuracy
        )
    }
}

/// Runs the model in Eval mode over `test` and tallies the confusion matrix.
pub fn evaluate(model: &Model, test: &[ExampleRecord]) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let predictions = test
        .iter()
        .map(|r| {
            let p = model.predict_proba(r)?;
            Ok(Prediction {
                sentence_id: r.sentence_id.clone(),
                tagged_text: r.tagged_text.clone(),
                e1: r.e1_range,
                e2: r.e2_range,
                gold: r.label,
                predicted: predict_label(p),
                p_cause_effect: p[Label::CauseEffect.index()],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_predictions(predictions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSheetSection {
    pub category: Category,
    /// Total records in this category, including ones not shown.
    pub count: usize,
    pub examples: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSheet {
    pub sections: Vec<ErrorSheetSection>,
}

/// Up to `k` examples per category, in evaluation order.
pub fn error_sheet(report: &MetricsReport, k: usize) -> ErrorSheet {
    let sections = Category::ALL
        .iter()
        .map(|&category| ErrorSheetSection {
            category,
            count: report.count(category),
            examples: report.examples(category).take(k).cloned().collect(),
        })
        .collect();
    ErrorSheet { sections }
}

impl ErrorSheet {
    pub fn section(&self, c: Category) -> &ErrorSheetSection {
        self.sections.iter().find(|s| s.category == c).expect("all categories present")
    }

    /// Two-column text table: category, then one tagged sentence per row.
    pub fn render(&self) -> String {
        let width = Category::ALL.iter().map(|c| c.title().len()).max().unwrap_or(0);
        let mut out = String::new();
        for s in &self.sections {
            let head = format!("{} ({})", s.category, s.count);
            let pad = width + 8;
            if s.examples.is_empty() {
                let _ = writeln!(out, "{head:<pad$}| -");
            }
            for (i, ex) in s.examples.iter().enumerate() {
                let label = if i == 0 { head.as_str() } else { "" };
                let _ = writeln!(out, "{label:<pad$}| {}", ex.tagged_text);
            }
        }
        out
    }
}

/// Renders rows of F1 scores (as percentages) under dataset column headers.
pub fn render_f1_table(columns: &[String], rows: &[(String, Vec<Option<f64>>)]) -> String {
    let first = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let widths: Vec<usize> = columns.iter().map(|c| c.len().max(6)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<first$}", "");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, " | {c:>w$}");
    }
    out.push('\n');
    for (name, cells) in rows {
        let _ = write!(out, "{name:<first$}");
        for (cell, w) in cells.iter().zip(&widths) {
            match cell {
                Some(f1) => {
                    let _ = write!(out, " | {:>w$.2}", f1 * 100.0);
                }
                None => {
                    let _ = write!(out, " | {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
