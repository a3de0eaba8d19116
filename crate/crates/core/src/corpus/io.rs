//! Line-delimited JSON corpus files: one `MarkedSentence` per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::types::MarkedSentence;
use crate::error::{Error, Result};

pub fn write_records<W: Write>(records: &[MarkedSentence], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<MarkedSentence>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MarkedSentence = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn export_records(records: &[MarkedSentence], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_records(records, BufWriter::new(File::create(path)?))
}

pub fn import_records(path: &Path) -> Result<Vec<MarkedSentence>> {
    read_records(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::generate_synthetic;
    use crate::corpus::types::{strip_tags, Label, Source, Split};

    #[test]
    fn ade_example_round_trips_exactly() {
        let st = strip_tags("<e2>Quinine</e2> induced <e1>coagulopathy</e1> --a near fatal experience.").unwrap();
        let rec = MarkedSentence {
            sentence_id: "ade-pos-1".into(),
            text: st.text,
            e1: st.e1,
            e2: st.e2,
            label: Label::CauseEffect,
            source: Source::Ade,
            split: Split::Train,
        };
        let mut buf = Vec::new();
        write_records(std::slice::from_ref(&rec), &mut buf).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(read_records(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn corrupt_line_is_named() {
        let recs = generate_synthetic(50, 9);
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let mut lines: Vec<String> = String::from_utf8(buf).unwrap().lines().map(String::from).collect();
        lines[36] = "{\"sentence_id\": \"broken\"".into();
        let joined = lines.join("\n");
        match read_records(joined.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 37),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("cbert-io-{}", std::process::id()));
        let path = dir.join("x.jsonl");
        let recs = generate_synthetic(10, 1);
        export_records(&recs, &path).unwrap();
        assert_eq!(import_records(&path).unwrap(), recs);
        std::fs::remove_dir_all(dir).ok();
    }
}
