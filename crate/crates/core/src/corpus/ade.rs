//! Adverse-drug-effect corpus: positive relation file, lexicon annotation of the
//! negative sentences, and the deterministic train/test split.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;
use std::io::BufRead;

use fnv::FnvHasher;
use log::warn;
use serde::{Deserialize, Serialize};

use super::types::{char_index, slice_chars, CharSpan, Label, MarkedSentence, Source, Split};
use crate::error::{Error, Result};

/// Test share of the curated ADE corpus (2276 of 8947 + 2276 records).
pub const ADE_TEST_FRACTION: f64 = 2276.0 / (8947.0 + 2276.0);

/// Unique lowercased drug and effect names harvested from annotated positives.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdeLexicon {
    pub drugs: BTreeSet<String>,
    pub effects: BTreeSet<String>,
}

/// Per-character lowercase fold that preserves character count.
fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

pub(crate) fn fold_str(s: &str) -> String {
    s.chars().map(fold).collect()
}

impl AdeLexicon {
    pub fn is_empty(&self) -> bool {
        self.drugs.is_empty() && self.effects.is_empty()
    }

    /// Union of drug and effect names.
    pub fn entries(&self) -> BTreeSet<&str> {
        self.drugs
            .iter()
            .chain(self.effects.iter())
            .map(String::as_str)
            .collect()
    }
}

/// Builds the lexicon from ADE positives: effect spans are `e1`, drug spans `e2`.
pub fn build_ade_lexicon(positives: &[MarkedSentence]) -> Result<AdeLexicon> {
    if positives.is_empty() {
        return Err(Error::Empty("ADE positive list"));
    }
    let mut lex = AdeLexicon::default();
    for s in positives {
        if s.source != Source::Ade {
            return Err(Error::InvalidRecord(format!(
                "{} is not an ADE record",
                s.sentence_id
            )));
        }
        let effect = fold_str(s.e1_text().trim());
        let drug = fold_str(s.e2_text().trim());
        if !effect.is_empty() {
            lex.effects.insert(effect);
        }
        if !drug.is_empty() {
            lex.drugs.insert(drug);
        }
    }
    Ok(lex)
}

/// Leftmost, longest-first, non-overlapping lexicon matches with word boundaries
/// (case-insensitive). Returned spans are character spans into `sentence`.
pub fn lexicon_matches(sentence: &str, lexicon: &AdeLexicon) -> Vec<CharSpan> {
    let entries = lexicon.entries();
    let max_len = entries.iter().map(|e| e.chars().count()).max().unwrap_or(0);
    let chars: Vec<char> = sentence.chars().map(fold).collect();
    let n = chars.len();
    let is_word = |c: char| c.is_alphanumeric();
    let boundary_before = |i: usize| i == 0 || !is_word(chars[i - 1]) || !is_word(chars[i]);
    let boundary_after = |j: usize| j == n || !is_word(chars[j]) || !is_word(chars[j - 1]);

    let mut out = Vec::new();
    let mut candidate = String::new();
    let mut i = 0;
    while i < n {
        if !boundary_before(i) {
            i += 1;
            continue;
        }
        let mut best = None;
        candidate.clear();
        for j in i + 1..=(i + max_len).min(n) {
            candidate.push(chars[j - 1]);
            if boundary_after(j) && entries.contains(candidate.as_str()) {
                best = Some(j);
            }
        }
        match best {
            Some(j) => {
                out.push(CharSpan::new(i, j));
                i = j;
            }
            None => i += 1,
        }
    }
    out
}

/// Marks the first two lexicon mentions of an unannotated sentence as `e1`, `e2`.
///
/// The returned record has label `Other`, source ADE, and an empty sentence id
/// that the caller fills in.
pub fn annotate_negative(sentence: &str, lexicon: &AdeLexicon) -> Option<MarkedSentence> {
    let matches = lexicon_matches(sentence, lexicon);
    if matches.len() < 2 {
        return None;
    }
    Some(MarkedSentence {
        sentence_id: String::new(),
        text: sentence.to_string(),
        e1: matches[0],
        e2: matches[1],
        label: Label::Other,
        source: Source::Ade,
        split: Split::Train,
    })
}

/// Counts of records dropped while curating ADE.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdeReport {
    pub positive_lines: usize,
    pub positives_offset_fallback: usize,
    pub positives_skipped: usize,
    pub negative_lines: usize,
    pub negatives_excluded: usize,
}

#[derive(Debug, Clone)]
pub struct AdeCorpus {
    pub records: Vec<MarkedSentence>,
    pub lexicon: AdeLexicon,
    pub report: AdeReport,
}

fn locate(text: &str, surface: &str, begin: Option<usize>, end: Option<usize>, avoid: Option<CharSpan>) -> Option<(CharSpan, bool)> {
    if surface.is_empty() {
        return None;
    }
    if let (Some(b), Some(e)) = (begin, end) {
        let span = CharSpan::new(b, e);
        if b < e && slice_chars(text, span) == surface && avoid.is_none_or(|a| !a.overlaps(&span)) {
            return Some((span, false));
        }
    }
    let len = surface.chars().count();
    text.match_indices(surface).find_map(|(byte, _)| {
        let start = char_index(text, byte);
        let span = CharSpan::new(start, start + len);
        (avoid.is_none_or(|a| !a.overlaps(&span))).then_some((span, true))
    })
}

fn parse_positive_line(line: &str, lineno: usize) -> Result<(String, String, usize, usize, String, usize, usize)> {
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() < 8 {
        return Err(Error::Parse {
            line: lineno,
            message: format!("expected 8 `|`-separated fields, found {}", fields.len()),
        });
    }
    let k = fields.len();
    let num = |s: &str| -> Result<usize> {
        s.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad offset `{s}`"),
        })
    };
    let sentence = fields[1..k - 6].join("|");
    Ok((
        sentence,
        fields[k - 6].to_string(),
        num(fields[k - 5])?,
        num(fields[k - 4])?,
        fields[k - 3].to_string(),
        num(fields[k - 2])?,
        num(fields[k - 1])?,
    ))
}

/// Parses `DRUG-AE.rel`-style lines: `PMID|sentence|effect|begin|end|drug|begin|end`.
///
/// One record per relation line with `e1` on the effect and `e2` on the drug.
/// Offsets that disagree with the surface string fall back to the first
/// case-sensitive occurrence; lines that still cannot be placed are skipped.
pub fn parse_ade_positives<R: BufRead>(reader: R, report: &mut AdeReport) -> Result<Vec<MarkedSentence>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        report.positive_lines += 1;
        let (text, effect, eb, ee, drug, db, de) = match parse_positive_line(line, lineno) {
            Ok(f) => f,
            Err(e) => {
                warn!("skipping ADE positive: {e}");
                report.positives_skipped += 1;
                continue;
            }
        };
        let effect_span = locate(&text, &effect, Some(eb), Some(ee), None);
        let drug_span = effect_span.and_then(|(es, _)| locate(&text, &drug, Some(db), Some(de), Some(es)));
        match (effect_span, drug_span) {
            (Some((e1, f1)), Some((e2, f2))) => {
                if f1 || f2 {
                    report.positives_offset_fallback += 1;
                }
                out.push(MarkedSentence {
                    sentence_id: format!("ade-pos-{lineno}"),
                    text,
                    e1,
                    e2,
                    label: Label::CauseEffect,
                    source: Source::Ade,
                    split: Split::Train,
                });
            }
            _ => {
                warn!("skipping ADE positive at line {lineno}: cannot place `{effect}` / `{drug}`");
                report.positives_skipped += 1;
            }
        }
    }
    Ok(out)
}

/// Strips an optional leading `PMID NEG` prefix from a negative-file line.
fn negative_sentence(line: &str) -> &str {
    let trimmed = line.trim();
    let mut parts = trimmed.splitn(3, char::is_whitespace);
    match (parts.next(), parts.next(), parts.next()) {
        (Some(id), Some("NEG"), Some(rest)) if id.bytes().all(|b| b.is_ascii_digit()) => rest.trim(),
        _ => trimmed,
    }
}

/// Lexicon-annotates each negative sentence; sentences with fewer than two
/// mentions are excluded and counted.
pub fn parse_ade_negatives<R: BufRead>(
    reader: R,
    lexicon: &AdeLexicon,
    report: &mut AdeReport,
) -> Result<Vec<MarkedSentence>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let sentence = negative_sentence(&line);
        if sentence.is_empty() {
            continue;
        }
        report.negative_lines += 1;
        match annotate_negative(sentence, lexicon) {
            Some(mut rec) => {
                rec.sentence_id = format!("ade-neg-{}", idx + 1);
                out.push(rec);
            }
            None => report.negatives_excluded += 1,
        }
    }
    Ok(out)
}

fn sentence_hash(seed: u64, text: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(text.as_bytes());
    h.finish()
}

/// Deterministic split keyed on a seeded hash of the sentence text, stratified
/// by label. Records sharing a sentence always land in the same split.
pub fn split_by_sentence_hash(records: &mut [MarkedSentence], test_fraction: f64, seed: u64) {
    for label in [Label::CauseEffect, Label::Other] {
        let mut groups: BTreeMap<(u64, &str), usize> = BTreeMap::new();
        let mut total = 0usize;
        for r in records.iter().filter(|r| r.label == label) {
            *groups.entry((sentence_hash(seed, &r.text), r.text.as_str())).or_default() += 1;
            total += 1;
        }
        let target = (total as f64 * test_fraction).round() as usize;
        let mut taken = 0usize;
        let mut test_texts = BTreeSet::new();
        for ((_, text), count) in groups {
            if taken >= target {
                break;
            }
            taken += count;
            test_texts.insert(text.to_string());
        }
        for r in records.iter_mut().filter(|r| r.label == label) {
            r.split = if test_texts.contains(&r.text) {
                Split::Test
            } else {
                Split::Train
            };
        }
    }
}

/// Full ADE curation: positives, lexicon, annotated negatives, split.
pub fn parse_ade<P: BufRead, N: BufRead>(
    positive_file: P,
    negative_file: N,
    test_fraction: f64,
    seed: u64,
) -> Result<AdeCorpus> {
    let mut report = AdeReport::default();
    let positives = parse_ade_positives(positive_file, &mut report)?;
    let lexicon = build_ade_lexicon(&positives)?;
    let negatives = parse_ade_negatives(negative_file, &lexicon, &mut report)?;
    let mut records = positives;
    records.extend(negatives);
    split_by_sentence_hash(&mut records, test_fraction, seed);
    Ok(AdeCorpus {
        records,
        lexicon,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::TagStyle;

    fn lex(drugs: &[&str], effects: &[&str]) -> AdeLexicon {
        AdeLexicon {
            drugs: drugs.iter().map(|s| s.to_string()).collect(),
            effects: effects.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn positive_line_with_document_offsets_falls_back() {
        let raw = "10030778|Quinine induced coagulopathy --a near fatal experience.|coagulopathy|500|512|Quinine|480|487\n";
        let mut rep = AdeReport::default();
        let recs = parse_ade_positives(raw.as_bytes(), &mut rep).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.e1_text(), "coagulopathy");
        assert_eq!(r.e2_text(), "Quinine");
        assert_eq!(r.label, Label::CauseEffect);
        assert_eq!(rep.positives_offset_fallback, 1);
        assert_eq!(
            r.render_tagged(TagStyle::Spaced),
            "<e2> Quinine </e2> induced <e1> coagulopathy </e1> --a near fatal experience."
        );
    }

    #[test]
    fn positive_line_with_sentence_offsets_is_taken_verbatim() {
        let raw = "1|Quinine induced coagulopathy.|coagulopathy|16|28|Quinine|0|7\n";
        let mut rep = AdeReport::default();
        let recs = parse_ade_positives(raw.as_bytes(), &mut rep).unwrap();
        assert_eq!(recs[0].e1, CharSpan::new(16, 28));
        assert_eq!(rep.positives_offset_fallback, 0);
    }

    #[test]
    fn one_record_per_relation_line() {
        let text = "Colchicine caused fatigue, myalgia and leg weakness.";
        let raw = format!(
            "9|{text}|fatigue|0|0|Colchicine|0|0\n9|{text}|myalgia|0|0|Colchicine|0|0\n9|{text}|leg weakness|0|0|Colchicine|0|0\n"
        );
        let mut rep = AdeReport::default();
        let recs = parse_ade_positives(raw.as_bytes(), &mut rep).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.text == text));
        let effects: Vec<&str> = recs.iter().map(|r| r.e1_text()).collect();
        assert_eq!(effects, ["fatigue", "myalgia", "leg weakness"]);
    }

    #[test]
    fn unplaceable_positive_is_skipped() {
        let raw = "1|Aspirin was given.|rash|0|4|Aspirin|0|7\n2|bad line\n";
        let mut rep = AdeReport::default();
        let recs = parse_ade_positives(raw.as_bytes(), &mut rep).unwrap();
        assert!(recs.is_empty());
        assert_eq!(rep.positives_skipped, 2);
    }

    #[test]
    fn lexicon_is_deduplicated_and_lowercased() {
        let raw = "1|Quinine induced coagulopathy.|coagulopathy|0|0|Quinine|0|0\n\
                   2|QUININE and coagulopathy again.|coagulopathy|0|0|QUININE|0|0\n\
                   3|Colchicine induced coagulopathy.|coagulopathy|0|0|Colchicine|0|0\n";
        let mut rep = AdeReport::default();
        let recs = parse_ade_positives(raw.as_bytes(), &mut rep).unwrap();
        let lex = build_ade_lexicon(&recs).unwrap();
        assert_eq!(lex.drugs.len(), 2);
        assert!(lex.drugs.contains("quinine"));
        assert_eq!(lex.effects.len(), 1);
        assert!(build_ade_lexicon(&[]).is_err());
    }

    #[test]
    fn annotate_negative_marks_first_two_mentions() {
        let l = lex(&["quinine"], &["coagulopathy", "rash"]);
        let s = annotate_negative("Patients on Quinine had no coagulopathy or rash.", &l).unwrap();
        assert_eq!(s.e1_text(), "Quinine");
        assert_eq!(s.e2_text(), "coagulopathy");
        assert_eq!(s.label, Label::Other);
        assert!(annotate_negative("Only quinine here.", &l).is_none());
    }

    #[test]
    fn longest_match_wins_and_is_not_rematched() {
        let l = lex(&["digoxin"], &["heart failure", "failure"]);
        let s = annotate_negative("Heart failure after digoxin.", &l).unwrap();
        assert_eq!(s.e1_text(), "Heart failure");
        assert_eq!(s.e2_text(), "digoxin");
        let m = lexicon_matches("heart failure", &l);
        assert_eq!(m, vec![CharSpan::new(0, 13)]);
    }

    #[test]
    fn word_boundaries_are_respected() {
        let l = lex(&["ace"], &["rash"]);
        assert!(lexicon_matches("placebo crashes", &l).is_empty());
        assert_eq!(lexicon_matches("ace, rash.", &l).len(), 2);
    }

    #[test]
    fn negative_prefix_is_stripped() {
        assert_eq!(negative_sentence("12345 NEG Some text here."), "Some text here.");
        assert_eq!(negative_sentence("Some text here."), "Some text here.");
    }

    #[test]
    fn split_is_deterministic_and_keeps_sentences_together() {
        let mut recs = Vec::new();
        for i in 0..200 {
            for k in 0..(1 + i % 3) {
                recs.push(MarkedSentence {
                    sentence_id: format!("{i}-{k}"),
                    text: format!("sentence number {i} drug effect"),
                    e1: CharSpan::new(0, 8),
                    e2: CharSpan::new(9, 15),
                    label: if i % 4 == 0 { Label::Other } else { Label::CauseEffect },
                    source: Source::Ade,
                    split: Split::Train,
                });
            }
        }
        let mut a = recs.clone();
        let mut b = recs;
        split_by_sentence_hash(&mut a, ADE_TEST_FRACTION, 7);
        split_by_sentence_hash(&mut b, ADE_TEST_FRACTION, 7);
        assert_eq!(a, b);
        let mut by_text: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
        for r in &a {
            by_text.entry(&r.text).or_default().insert(r.split);
        }
        assert!(by_text.values().all(|s| s.len() == 1));
        let test = a.iter().filter(|r| r.split == Split::Test).count() as f64;
        let frac = test / a.len() as f64;
        assert!((frac - ADE_TEST_FRACTION).abs() < 0.03, "fraction {frac}");
    }
}
