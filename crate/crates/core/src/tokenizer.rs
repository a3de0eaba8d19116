//! Word-level tokenizer with event-marker special tokens.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::types::{slice_chars, CharSpan, Label, MarkedSentence, TagStyle};
use crate::corpus::{is_masked, MASK_TOKEN};
use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const CLS: TokenId = 2;
pub const SEP: TokenId = 3;
pub const E1_OPEN: TokenId = 4;
pub const E1_CLOSE: TokenId = 5;
pub const E2_OPEN: TokenId = 6;
pub const E2_CLOSE: TokenId = 7;
pub const BLANK: TokenId = 8;

/// Special token strings, indexed by id.
pub const SPECIALS: [&str; 9] = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "<e1>", "</e1>", "<e2>", "</e2>", MASK_TOKEN,
];

/// Default maximum sequence length.
pub const DEFAULT_MAX_SEQ_LEN: usize = 384;

/// Lowercases and splits on whitespace; every punctuation character is its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if !c.is_whitespace() {
            out.push(c.to_lowercase().collect());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds from an ordered token list whose head must be [`SPECIALS`].
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIALS.len() || tokens.iter().zip(SPECIALS).any(|(t, s)| t != s) {
            return Err(Error::InvalidRecord(
                "vocabulary must start with the special tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(Error::InvalidRecord(format!("bad vocabulary token at id {i}")));
            }
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::InvalidRecord(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line; the line number is the id.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let tokens = r.lines().collect::<std::io::Result<Vec<_>>>()?;
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Frequency-ranked vocabulary (ties broken lexicographically) truncated to `size`.
pub fn build_vocab(corpus: &[MarkedSentence], size: usize) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::Empty("vocabulary corpus"));
    }
    if size <= SPECIALS.len() {
        return Err(Error::VocabTooSmall {
            size,
            specials: SPECIALS.len(),
        });
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for s in corpus {
        for t in tokenize(&s.text) {
            if !SPECIALS.contains(&t.as_str()) {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    tokens.extend(ranked.into_iter().take(size - SPECIALS.len()).map(|(t, _)| t));
    Vocab::from_tokens(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Marked,
    Masked,
}

/// Inclusive token index range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A tokenized, padded model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub sentence_id: String,
    pub token_ids: Vec<TokenId>,
    pub attention_mask: Vec<u8>,
    pub e1_range: TokenSpan,
    pub e2_range: TokenSpan,
    pub label: Label,
    pub variant: Variant,
    /// Source sentence with tight inline markers, for error sheets.
    pub tagged_text: String,
}

impl ExampleRecord {
    pub fn seq_len(&self) -> usize {
        self.token_ids.len()
    }

    /// Number of non-PAD positions.
    pub fn active_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.token_ids.len();
        let bad = |m: String| Err(Error::InvalidRecord(format!("{}: {m}", self.sentence_id)));
        if n == 0 || self.token_ids[0] != CLS {
            return bad("position 0 is not CLS".into());
        }
        if self.attention_mask.len() != n {
            return bad("attention mask length differs from sequence length".into());
        }
        let (a, b) = if self.e1_range.start <= self.e2_range.start {
            (self.e1_range, self.e2_range)
        } else {
            (self.e2_range, self.e1_range)
        };
        if !(a.start <= a.end && a.end < b.start && b.start <= b.end && b.end < n) {
            return bad(format!("bad event ranges {:?} {:?}", self.e1_range, self.e2_range));
        }
        for r in [a, b] {
            if (r.start..=r.end).any(|t| self.attention_mask[t] == 0) {
                return bad("event range covers padding".into());
            }
        }
        if self.variant == Variant::Masked {
            for r in [a, b] {
                if r.start != r.end || self.token_ids[r.start] != BLANK {
                    return bad("masked event is not a single BLANK token".into());
                }
            }
        }
        Ok(())
    }
}

fn push_text(out: &mut Vec<TokenId>, text: &str, v: &Vocab) {
    out.extend(tokenize(text).iter().map(|t| v.id(t)));
}

/// Encodes `CLS … <eX> event </eX> … <eY> event </eY> … SEP PAD…` padded to
/// `max_seq_len`. Event ranges exclude the markers. Text after the last marker
/// may be truncated; events and markers never are.
pub fn encode(s: &MarkedSentence, v: &Vocab, max_seq_len: usize) -> Result<ExampleRecord> {
    s.validate()?;
    let variant = if is_masked(s) { Variant::Masked } else { Variant::Marked };
    let e1_first = s.e1.start <= s.e2.start;
    let (first, second) = if e1_first { (s.e1, s.e2) } else { (s.e2, s.e1) };
    let (first_marks, second_marks) = if e1_first {
        ((E1_OPEN, E1_CLOSE), (E2_OPEN, E2_CLOSE))
    } else {
        ((E2_OPEN, E2_CLOSE), (E1_OPEN, E1_CLOSE))
    };

    let mut ids = vec![CLS];
    push_text(&mut ids, slice_chars(&s.text, CharSpan::new(0, first.start)), v);
    let mut ranges = Vec::with_capacity(2);
    for (k, (span, (open, close))) in [(first, first_marks), (second, second_marks)].into_iter().enumerate() {
        if k == 1 {
            push_text(&mut ids, slice_chars(&s.text, CharSpan::new(first.end, second.start)), v);
        }
        ids.push(open);
        let start = ids.len();
        match variant {
            Variant::Masked => ids.push(BLANK),
            Variant::Marked => push_text(&mut ids, slice_chars(&s.text, span), v),
        }
        if ids.len() == start {
            return Err(Error::InvalidRecord(format!(
                "{}: event `{}` has no tokens",
                s.sentence_id,
                slice_chars(&s.text, span)
            )));
        }
        ranges.push(TokenSpan::new(start, ids.len() - 1));
        ids.push(close);
    }
    // last marker plus SEP must fit
    if ids.len() + 1 > max_seq_len {
        return Err(Error::EventTruncated {
            id: s.sentence_id.clone(),
            max_seq_len,
        });
    }
    push_text(&mut ids, slice_chars(&s.text, CharSpan::new(second.end, s.char_len())), v);
    ids.truncate(max_seq_len - 1);
    ids.push(SEP);
    let active = ids.len();
    ids.resize(max_seq_len, PAD);
    let mut attention_mask = vec![1u8; active];
    attention_mask.resize(max_seq_len, 0);

    let (e1_range, e2_range) = if e1_first {
        (ranges[0], ranges[1])
    } else {
        (ranges[1], ranges[0])
    };
    Ok(ExampleRecord {
        sentence_id: s.sentence_id.clone(),
        token_ids: ids,
        attention_mask,
        e1_range,
        e2_range,
        label: s.label,
        variant,
        tagged_text: s.render_tagged(TagStyle::Tight),
    })
}

/// Encodes a batch, failing on the first record that cannot be encoded.
pub fn encode_all(records: &[MarkedSentence], v: &Vocab, max_seq_len: usize) -> Result<Vec<ExampleRecord>> {
    records.iter().map(|s| encode(s, v, max_seq_len)).collect()
}

/// Token strings of the marker-tagged sequence (CLS, SEP and PAD dropped).
pub fn decode(r: &ExampleRecord, v: &Vocab) -> Vec<String> {
    r.token_ids
        .iter()
        .filter(|&&id| id != CLS && id != SEP && id != PAD)
        .map(|&id| v.token(id).unwrap_or(SPECIALS[UNK as usize]).to_string())
        .collect()
}
