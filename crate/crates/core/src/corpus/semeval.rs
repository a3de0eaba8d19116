//! Parsers for the two SemEval relation-classification distributions.

use std::collections::HashSet;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;

use super::types::{strip_tags, Label, MarkedSentence, Source, Split};
use crate::error::{Error, Result};

/// Folds a SemEval relation string into the binary label. Direction is ignored.
pub fn binarize_relation(relation: &str) -> Result<Label> {
    let relation = relation.trim();
    if relation.is_empty() {
        return Err(Error::InvalidRecord("empty relation string".into()));
    }
    let name = relation.split('(').next().unwrap_or(relation).trim();
    Ok(if name == "Cause-Effect" {
        Label::CauseEffect
    } else {
        Label::Other
    })
}

fn numbered_sentence(line: &str) -> Option<(&str, &str)> {
    let line = line.trim_end_matches(['\r', '\n']);
    let split_at = line.find(['\t', ' '])?;
    let (id, rest) = line.split_at(split_at);
    if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let rest = rest.trim();
    let body = rest.strip_prefix('"')?.strip_suffix('"')?;
    Some((id, body))
}

/// Parses a SemEval-2010 Task 8 file (`TRAIN_FILE.TXT` / `TEST_FILE_FULL.TXT` layout).
///
/// Each block is a numbered, quoted sentence with inline event tags, then a relation
/// line and an optional `Comment:` line; blocks are separated by blank lines.
pub fn parse_semeval2010<R: BufRead>(reader: R, split: Split) -> Result<Vec<MarkedSentence>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut pending: Option<(usize, String, String)> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();

        if let Some((start_line, id, tagged)) = pending.take() {
            if trimmed.is_empty() || numbered_sentence(&line).is_some() {
                return Err(Error::Parse {
                    line: start_line,
                    message: format!("sentence {id} has no relation line"),
                });
            }
            let label = binarize_relation(trimmed).map_err(|_| Error::Parse {
                line: lineno,
                message: "empty relation line".into(),
            })?;
            let st = strip_tags(&tagged).map_err(|m| Error::Parse {
                line: start_line,
                message: m,
            })?;
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            out.push(MarkedSentence {
                sentence_id: id,
                text: st.text,
                e1: st.e1,
                e2: st.e2,
                label,
                source: Source::Semeval2010,
                split,
            });
            continue;
        }

        if trimmed.is_empty() || trimmed.starts_with("Comment") {
            continue;
        }
        match numbered_sentence(&line) {
            Some((id, body)) => pending = Some((lineno, id.to_string(), body.to_string())),
            None => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected a numbered quoted sentence, found `{trimmed}`"),
                })
            }
        }
    }

    if let Some((start_line, id, _)) = pending {
        return Err(Error::Parse {
            line: start_line,
            message: format!("sentence {id} has no relation line"),
        });
    }
    Ok(out)
}

/// The seven SemEval-2007 Task 4 relations, in file-number order.
pub const SEMEVAL2007_RELATIONS: [&str; 7] = [
    "Cause-Effect",
    "Instrument-Agency",
    "Product-Producer",
    "Origin-Entity",
    "Theme-Tool",
    "Part-Whole",
    "Content-Container",
];

fn judgment_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"([A-Z][A-Za-z]*-[A-Z][A-Za-z]*)\(\s*e[12]\s*,\s*e[12]\s*\)\s*=\s*"(true|false)""#)
            .expect("valid regex")
    })
}

/// Parses one SemEval-2007 relation file. Only a `true` judgment on the
/// Cause-Effect relation yields `CauseEffect`; everything else is `Other`.
pub fn parse_semeval2007_file<R: BufRead>(
    reader: R,
    file_tag: &str,
    split: Split,
) -> Result<Vec<MarkedSentence>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut pending: Option<(usize, String, String)> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();

        if let Some((start_line, id, tagged)) = pending.take() {
            let Some(caps) = judgment_re().captures(trimmed) else {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("sentence {id} is not followed by a relation judgment"),
                });
            };
            let causal = &caps[1] == "Cause-Effect" && &caps[2] == "true";
            let st = strip_tags(&tagged).map_err(|m| Error::Parse {
                line: start_line,
                message: m,
            })?;
            let sentence_id = format!("{file_tag}-{id}");
            if !seen.insert(sentence_id.clone()) {
                return Err(Error::DuplicateId(sentence_id));
            }
            out.push(MarkedSentence {
                sentence_id,
                text: st.text,
                e1: st.e1,
                e2: st.e2,
                label: if causal { Label::CauseEffect } else { Label::Other },
                source: Source::Semeval2007,
                split,
            });
            continue;
        }

        if trimmed.is_empty() || trimmed.starts_with("Comment") {
            continue;
        }
        match numbered_sentence(&line) {
            Some((id, body)) => pending = Some((lineno, id.to_string(), body.to_string())),
            None => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected a numbered quoted sentence, found `{trimmed}`"),
                })
            }
        }
    }
    if let Some((start_line, id, _)) = pending {
        return Err(Error::Parse {
            line: start_line,
            message: format!("sentence {id} is not followed by a relation judgment"),
        });
    }
    Ok(out)
}

/// Locates the `relation-{n}-*.txt` file for each of the seven relations.
///
/// When several files share a relation number, the one whose name mentions the
/// split (`train`/`test`) wins.
pub fn locate_semeval2007_files(dir: &Path, split: Split) -> Result<Vec<PathBuf>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    names.sort();

    let mut found = Vec::with_capacity(7);
    let mut missing = Vec::new();
    for (i, rel) in SEMEVAL2007_RELATIONS.iter().enumerate() {
        let prefix = format!("relation-{}-", i + 1);
        let candidates: Vec<&PathBuf> = names
            .iter()
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with(&prefix) && n.ends_with(".txt"))
                    .unwrap_or(false)
            })
            .collect();
        let chosen = candidates
            .iter()
            .find(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.contains(split.as_str()))
                    .unwrap_or(false)
            })
            .or(candidates.first());
        match chosen {
            Some(p) => found.push((*p).clone()),
            None => missing.push(format!("relation-{}-*.txt ({rel})", i + 1)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingRelationFiles {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    Ok(found)
}

/// Parses the seven per-relation files of one SemEval-2007 split directory.
pub fn parse_semeval2007(dir: &Path, split: Split) -> Result<Vec<MarkedSentence>> {
    let files = locate_semeval2007_files(dir, split)?;
    let mut out = Vec::new();
    for (i, path) in files.iter().enumerate() {
        let reader = std::io::BufReader::new(fs::File::open(path)?);
        let tag = format!("r{}-{}", i + 1, split.as_str());
        out.extend(parse_semeval2007_file(reader, &tag, split)?);
    }
    Ok(out)
}
