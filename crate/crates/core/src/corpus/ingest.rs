use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::SentenceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    Jsonl,
    Csv,
}

impl FromStr for IngestFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(IngestFormat::Jsonl),
            "csv" => Ok(IngestFormat::Csv),
            other => Err(Error::Validation(format!("unknown ingest format {other:?}"))),
        }
    }
}

/// Splits on `.`, `?` or `!` followed by whitespace. The terminator stays
/// with its sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            if let Some((_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = i + c.len_utf8();
                    push_trimmed(&mut out, &text[start..end]);
                    start = end;
                }
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

#[derive(Deserialize)]
struct RawRow {
    report_id: String,
    #[serde(default)]
    sentence_index: Option<u32>,
    text: String,
}

struct Assembler {
    source_name: String,
    next_index: HashMap<String, u32>,
    seen: HashSet<(String, u32)>,
    out: Vec<SentenceRecord>,
}

impl Assembler {
    fn push(&mut self, row: RawRow, line: usize) -> Result<()> {
        let pieces = match row.sentence_index {
            Some(idx) => vec![(idx, row.text)],
            None => {
                let next = self.next_index.get(&row.report_id).copied().unwrap_or(0);
                split_sentences(&row.text)
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| (next + i as u32, s))
                    .collect()
            }
        };
        for (idx, text) in pieces {
            if !self.seen.insert((row.report_id.clone(), idx)) {
                return Err(Error::Parse {
                    source_name: self.source_name.clone(),
                    line,
                    message: format!("duplicate sentence ({}, {idx})", row.report_id),
                });
            }
            let next = self.next_index.entry(row.report_id.clone()).or_insert(0);
            *next = (*next).max(idx + 1);
            self.out.push(SentenceRecord::new(row.report_id.clone(), idx, text));
        }
        Ok(())
    }
}

pub fn ingest(path: impl AsRef<Path>, format: IngestFormat) -> Result<Vec<SentenceRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, format, &path.display().to_string())
}

/// Reads a corpus in `format` and returns canonical sentence records.
/// Rows without a sentence index are split into sentences.
pub fn ingest_reader(
    reader: impl Read,
    format: IngestFormat,
    source_name: &str,
) -> Result<Vec<SentenceRecord>> {
    let mut asm = Assembler {
        source_name: source_name.to_string(),
        next_index: HashMap::new(),
        seen: HashSet::new(),
        out: Vec::new(),
    };
    match format {
        IngestFormat::Jsonl => {
            for (line, row) in crate::io::parse_jsonl_numbered::<RawRow>(reader, source_name)? {
                asm.push(row, line)?;
            }
        }
        IngestFormat::Csv => ingest_csv(reader, &mut asm)?,
    }
    Ok(asm.out)
}

fn ingest_csv(reader: impl Read, asm: &mut Assembler) -> Result<()> {
    let source_name = asm.source_name.clone();
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.clone(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .byte_headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name.as_bytes());
    let report_col = column("report_id");
    let text_col = column("text");
    let (Some(report_col), Some(text_col)) = (report_col, text_col) else {
        return Err(Error::Validation(format!(
            "{source_name}: csv must have report_id and text columns"
        )));
    };
    let index_col = column("sentence_index");

    let mut record = csv::ByteRecord::new();
    loop {
        let more = rdr.read_byte_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize| -> Result<&str> {
            let bytes = record.get(col).unwrap_or_default();
            std::str::from_utf8(bytes).map_err(|e| parse_err(line, format!("invalid UTF-8: {e}")))
        };
        let sentence_index = match index_col {
            Some(col) => {
                let raw = field(col)?.trim();
                if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse::<u32>().map_err(|e| {
                        parse_err(line, format!("bad sentence_index {raw:?}: {e}"))
                    })?)
                }
            }
            None => None,
        };
        let row = RawRow {
            report_id: field(report_col)?.to_string(),
            sentence_index,
            text: field(text_col)?.to_string(),
        };
        asm.push(row, line)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitter() {
        assert_eq!(split_sentences("No edema. No effusion."), vec!["No edema.", "No effusion."]);
        assert_eq!(split_sentences("s/p CABG.No change"), vec!["s/p CABG.No change"]);
        assert_eq!(split_sentences("Is there? Yes!  Done"), vec!["Is there?", "Yes!", "Done"]);
        assert!(split_sentences("  ").is_empty());
    }

    #[test]
    fn csv_two_rows() {
        let data = "report_id,sentence_index,text\nr1,0,No edema.\nr1,1,\"Possible pneumonia, left.\"\n";
        let recs = ingest_reader(data.as_bytes(), IngestFormat::Csv, "c.csv").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].text, "Possible pneumonia, left.");
    }

    #[test]
    fn csv_without_index_splits() {
        let data = "report_id,text\nr1,No edema. No effusion.\n";
        let recs = ingest_reader(data.as_bytes(), IngestFormat::Csv, "c.csv").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!((recs[0].sentence_index, recs[1].sentence_index), (0, 1));
        assert_eq!(recs[1].text, "No effusion.");
    }

    #[test]
    fn csv_missing_column() {
        let data = "report,text\nr1,x\n";
        assert!(matches!(
            ingest_reader(data.as_bytes(), IngestFormat::Csv, "c.csv"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn csv_bad_bytes_name_the_line() {
        let mut data = b"report_id,text\nr1,ok\nr2,ok\n".to_vec();
        data.extend_from_slice(b"r3,\xff\xfe\n");
        match ingest_reader(&data[..], IngestFormat::Csv, "c.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_malformed_line_seven() {
        let mut data = String::new();
        for i in 0..6 {
            data.push_str(&format!("{{\"report_id\":\"r\",\"sentence_index\":{i},\"text\":\"x\"}}\n"));
        }
        data.push_str("{\"report_id\": broken\n");
        match ingest_reader(data.as_bytes(), IngestFormat::Jsonl, "c.jsonl") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_without_index_splits() {
        let data = "{\"report_id\":\"r\",\"text\":\"No edema. Possible effusion.\"}\n";
        let recs = ingest_reader(data.as_bytes(), IngestFormat::Jsonl, "c.jsonl").unwrap();
        assert_eq!(recs.len(), 2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let data = "report_id,sentence_index,text\nr1,0,a\nr1,0,b\n";
        assert!(ingest_reader(data.as_bytes(), IngestFormat::Csv, "c.csv").is_err());
    }
}
