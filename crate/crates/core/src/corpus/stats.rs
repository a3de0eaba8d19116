use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::types::{Label, MarkedSentence, Source, Split};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub total: usize,
    pub cause_effect: usize,
    pub other: usize,
    pub max_sentence_length_tokens: usize,
}

/// Counts per (source, split), in the column layout of the curated-dataset table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub rows: BTreeMap<(Source, Split), StatsRow>,
}

impl CorpusStats {
    pub fn row(&self, source: Source, split: Split) -> StatsRow {
        self.rows.get(&(source, split)).copied().unwrap_or_default()
    }

    pub fn is_consistent(&self) -> bool {
        self.rows.values().all(|r| r.cause_effect + r.other == r.total)
    }

    /// Text table: one line per source with train and test columns.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>13} | {:>7} {:>13} {:>7} | {:>7} {:>13} {:>7}",
            "Dataset", "MaxLen(tr,te)", "Total", "Cause-Effect", "Other", "Total", "Cause-Effect", "Other"
        );
        let mut sources: Vec<Source> = self.rows.keys().map(|(s, _)| *s).collect();
        sources.dedup();
        for src in sources {
            let tr = self.row(src, Split::Train);
            let te = self.row(src, Split::Test);
            let lens = format!("({}, {})", tr.max_sentence_length_tokens, te.max_sentence_length_tokens);
            let _ = writeln!(
                out,
                "{:<14} {:>13} | {:>7} {:>13} {:>7} | {:>7} {:>13} {:>7}",
                src.to_string(),
                lens,
                tr.total,
                tr.cause_effect,
                tr.other,
                te.total,
                te.cause_effect,
                te.other
            );
        }
        out
    }
}

pub fn corpus_stats(records: &[MarkedSentence]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for r in records {
        let row = stats.rows.entry((r.source, r.split)).or_default();
        row.total += 1;
        match r.label {
            Label::CauseEffect => row.cause_effect += 1,
            Label::Other => row.other += 1,
        }
        let len = r.text.split_whitespace().count();
        row.max_sentence_length_tokens = row.max_sentence_length_tokens.max(len);
    }
    stats
}

/// Published reference counts `(total, cause_effect, other)` for each curated split.
pub fn reference_counts(source: Source, split: Split) -> Option<(usize, usize, usize)> {
    match (source, split) {
        (Source::Semeval2010, Split::Train) => Some((8000, 1003, 6997)),
        (Source::Semeval2010, Split::Test) => Some((2717, 134, 2389)),
        (Source::Semeval2007, Split::Train) => Some((980, 80, 900)),
        (Source::Semeval2007, Split::Test) => Some((549, 46, 503)),
        (Source::Ade, Split::Train) => Some((8947, 5379, 3568)),
        (Source::Ade, Split::Test) => Some((2276, 1341, 935)),
        _ => None,
    }
}

/// Notes on reference rows whose class counts do not add up to their totals.
pub fn reference_discrepancies() -> Vec<String> {
    let mut notes = Vec::new();
    for source in [Source::Semeval2010, Source::Semeval2007, Source::Ade] {
        for split in [Split::Train, Split::Test] {
            if let Some((t, c, o)) = reference_counts(source, split) {
                if c + o != t {
                    notes.push(format!(
                        "reference {source} {} row is inconsistent: {c} + {o} = {} != {t}",
                        split.as_str(),
                        c + o
                    ));
                }
            }
        }
    }
    notes
}

/// Machine-readable stats report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsReport {
    pub rows: Vec<StatsReportRow>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsReportRow {
    pub source: Source,
    pub split: Split,
    #[serde(flatten)]
    pub counts: StatsRow,
    pub reference: Option<(usize, usize, usize)>,
}

impl StatsReport {
    pub fn new(stats: &CorpusStats) -> Self {
        let rows: Vec<StatsReportRow> = stats
            .rows
            .iter()
            .map(|(&(source, split), &counts)| StatsReportRow {
                source,
                split,
                counts,
                reference: reference_counts(source, split),
            })
            .collect();
        let mut notes = Vec::new();
        for r in &rows {
            if r.counts.cause_effect + r.counts.other != r.counts.total {
                notes.push(format!("curated {} {} row is inconsistent", r.source, r.split.as_str()));
            }
            if let Some((t, c, o)) = r.reference {
                if (t, c, o) != (r.counts.total, r.counts.cause_effect, r.counts.other) {
                    notes.push(format!(
                        "{} {}: curated {}/{}/{} vs reference {t}/{c}/{o}",
                        r.source,
                        r.split.as_str(),
                        r.counts.total,
                        r.counts.cause_effect,
                        r.counts.other
                    ));
                }
            }
        }
        if rows.iter().any(|r| r.source == Source::Semeval2010 && r.split == Split::Test) {
            notes.extend(reference_discrepancies());
        }
        Self { rows, notes }
    }

    pub fn render(&self, stats: &CorpusStats) -> String {
        let mut out = stats.render_table();
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
