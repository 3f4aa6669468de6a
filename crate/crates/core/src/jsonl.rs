//! One-record-per-line JSON helpers.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Encode(serde_json::Error),
}

/// Reads every non-blank line as one record. Line numbers are 1-based.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| JsonlError::Parse { line: k + 1, source })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<(), JsonlError> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(JsonlError::Encode)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn to_jsonl_string<T: Serialize>(records: &[T]) -> Result<String, JsonlError> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
