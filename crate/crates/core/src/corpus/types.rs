use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open span `[start, end)` measured in Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &CharSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<(usize, usize)> for CharSpan {
    fn from((start, end): (usize, usize)) -> Self {
        Self { start, end }
    }
}

impl From<CharSpan> for (usize, usize) {
    fn from(s: CharSpan) -> Self {
        (s.start, s.end)
    }
}

/// Binary relation label. Class index 0 is `CauseEffect`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    CauseEffect,
    Other,
}

impl Label {
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        match self {
            Label::CauseEffect => 0,
            Label::Other => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::CauseEffect),
            1 => Some(Label::Other),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::CauseEffect => "Cause-Effect",
            Label::Other => "Other",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    Semeval2007,
    Semeval2010,
    #[serde(rename = "ADE")]
    Ade,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Semeval2007 => "semeval2007",
            Source::Semeval2010 => "semeval2010",
            Source::Ade => "ade",
            Source::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Semeval2007 => "Semeval 2007",
            Source::Semeval2010 => "Semeval 2010",
            Source::Ade => "ADE",
            Source::Synthetic => "Synthetic",
        })
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [Source::Semeval2007, Source::Semeval2010, Source::Ade, Source::Synthetic]
            .into_iter()
            .find(|src| src.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown dataset `{s}` (semeval2007, semeval2010, ade, synthetic)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A sentence with two marked events, stored tag-free with character spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedSentence {
    pub sentence_id: String,
    pub text: String,
    pub e1: CharSpan,
    pub e2: CharSpan,
    pub label: Label,
    pub source: Source,
    pub split: Split,
}

/// How event markers are printed around event surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagStyle {
    /// `<e1>x</e1>`: exact inverse of tag stripping.
    Tight,
    /// `<e1> x </e1>`: the display form used in curated corpus tables.
    Spaced,
}

pub const E1_OPEN: &str = "<e1>";
pub const E1_CLOSE: &str = "</e1>";
pub const E2_OPEN: &str = "<e2>";
pub const E2_CLOSE: &str = "</e2>";

impl MarkedSentence {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Checks the span invariants: non-empty, in bounds, disjoint.
    pub fn validate(&self) -> Result<()> {
        let n = self.char_len();
        for (name, span) in [("e1", self.e1), ("e2", self.e2)] {
            if span.is_empty() {
                return Err(Error::InvalidRecord(format!(
                    "{}: {name} span {:?} is empty",
                    self.sentence_id, span
                )));
            }
            if span.end > n {
                return Err(Error::InvalidRecord(format!(
                    "{}: {name} span {:?} exceeds text length {n}",
                    self.sentence_id, span
                )));
            }
        }
        if self.e1.overlaps(&self.e2) {
            return Err(Error::InvalidRecord(format!(
                "{}: event spans {:?} and {:?} overlap",
                self.sentence_id, self.e1, self.e2
            )));
        }
        Ok(())
    }

    /// Builds a record from inline-tagged text such as
    /// `<e1> smoking </e1> causes <e2> cancer </e2>`. Whitespace just inside
    /// the tags is excluded from the event spans.
    pub fn from_tagged(
        sentence_id: &str,
        tagged: &str,
        label: Label,
        source: Source,
        split: Split,
    ) -> Result<Self> {
        let st = strip_tags(tagged).map_err(Error::Span)?;
        let trim = |span: CharSpan| -> Result<CharSpan> {
            let chars: Vec<char> = slice_chars(&st.text, span).chars().collect();
            let lead = chars.iter().take_while(|c| c.is_whitespace()).count();
            let trail = chars.iter().rev().take_while(|c| c.is_whitespace()).count();
            if lead == chars.len() {
                return Err(Error::Span("event markers enclose only whitespace".into()));
            }
            Ok(CharSpan::new(span.start + lead, span.end - trail))
        };
        let s = Self {
            sentence_id: sentence_id.to_string(),
            e1: trim(st.e1)?,
            e2: trim(st.e2)?,
            text: st.text,
            label,
            source,
            split,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn e1_text(&self) -> &str {
        slice_chars(&self.text, self.e1)
    }

    pub fn e2_text(&self) -> &str {
        slice_chars(&self.text, self.e2)
    }

    /// Re-inserts inline event markers at the stored spans.
    pub fn render_tagged(&self, style: TagStyle) -> String {
        let mut events = [
            (self.e1, E1_OPEN, E1_CLOSE),
            (self.e2, E2_OPEN, E2_CLOSE),
        ];
        events.sort_by_key(|(span, _, _)| span.start);

        let mut out = String::with_capacity(self.text.len() + 24);
        let mut cursor = 0;
        for (span, open, close) in events {
            out.push_str(slice_chars(&self.text, CharSpan::new(cursor, span.start)));
            let surface = slice_chars(&self.text, span);
            match style {
                TagStyle::Tight => {
                    out.push_str(open);
                    out.push_str(surface);
                    out.push_str(close);
                }
                TagStyle::Spaced => {
                    out.push_str(open);
                    out.push(' ');
                    out.push_str(surface.trim());
                    out.push(' ');
                    out.push_str(close);
                }
            }
            cursor = span.end;
        }
        out.push_str(slice_chars(&self.text, CharSpan::new(cursor, self.char_len())));
        out
    }
}

/// Substring by character span. Out-of-range ends are clamped.
pub fn slice_chars(text: &str, span: CharSpan) -> &str {
    let start = byte_offset(text, span.start);
    let end = byte_offset(text, span.end.max(span.start));
    &text[start..end]
}

/// Byte offset of the `char_idx`-th scalar value (or `text.len()` past the end).
pub fn byte_offset(text: &str, char_idx: usize) -> usize {
    text.char_indices()
        .nth(char_idx)
        .map(|(b, _)| b)
        .unwrap_or(text.len())
}

/// Character index of a byte offset that lies on a char boundary.
pub fn char_index(text: &str, byte_idx: usize) -> usize {
    text[..byte_idx].chars().count()
}

/// Result of stripping inline `<e1>`/`<e2>` markers from a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrippedTags {
    pub text: String,
    pub e1: CharSpan,
    pub e2: CharSpan,
}

/// Strips exactly one `<e1>…</e1>` and one `<e2>…</e2>` pair, returning tag-free
/// text and the character spans the tags enclosed.
pub fn strip_tags(tagged: &str) -> std::result::Result<StrippedTags, String> {
    let mut text = String::with_capacity(tagged.len());
    let mut chars = 0usize;
    let mut e1: (Option<usize>, Option<usize>) = (None, None);
    let mut e2: (Option<usize>, Option<usize>) = (None, None);
    let mut rest = tagged;

    while !rest.is_empty() {
        let marker = [E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE]
            .into_iter()
            .find(|m| rest.starts_with(m));
        if let Some(m) = marker {
            let slot = match m {
                E1_OPEN => &mut e1.0,
                E1_CLOSE => &mut e1.1,
                E2_OPEN => &mut e2.0,
                _ => &mut e2.1,
            };
            if slot.is_some() {
                return Err(format!("marker {m} appears more than once"));
            }
            *slot = Some(chars);
            rest = &rest[m.len()..];
            continue;
        }
        let c = rest.chars().next().expect("non-empty");
        text.push(c);
        chars += 1;
        rest = &rest[c.len_utf8()..];
    }

    let span = |name: &str, pair: (Option<usize>, Option<usize>)| match pair {
        (Some(s), Some(e)) if s < e => Ok(CharSpan::new(s, e)),
        (Some(_), Some(_)) => Err(format!("{name} markers enclose no text or are reversed")),
        (None, _) => Err(format!("missing <{name}> marker")),
        (_, None) => Err(format!("missing </{name}> marker")),
    };
    let e1 = span("e1", e1)?;
    let e2 = span("e2", e2)?;
    if e1.overlaps(&e2) {
        return Err("event markers nest or overlap".to_string());
    }
    Ok(StrippedTags { text, e1, e2 })
}
