//! Logit dump files.
//!
//! Two encodings, detected by content on read:
//!
//! * binary: magic `LGTD`, `u16` version (1), `u32` vocabulary size `V`,
//!   `u64` row count, then each row as `V` little-endian `f32`s. `-inf` marks
//!   a masked token.
//! * NDJSON: one object per line, `{"logits": [..], "token": 17}`. `token`
//!   (the id the engine actually emitted) is optional; `null` entries in
//!   `logits` stand for `-inf`, which JSON cannot spell.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use topnsigma::Logits;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"LGTD";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Binary,
    Ndjson,
}

impl DumpFormat {
    /// `.ndjson`, `.jsonl` and `.json` select NDJSON; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ndjson" | "jsonl" | "json") => DumpFormat::Ndjson,
            _ => DumpFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub vocab_size: usize,
    pub rows: Vec<Logits>,
    /// Emitted token per row, when the producer recorded one.
    pub tokens: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
struct NdjsonRow {
    logits: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token: Option<usize>,
}

pub fn read_dump(path: &Path) -> Result<Dump> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| HarnessError::io(&name, e))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(|e| HarnessError::io(&name, e))?;
    if head.starts_with(MAGIC) {
        read_binary(reader, &name)
    } else {
        read_ndjson(reader, &name)
    }
}

fn row_error(source_name: &str, row: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        source_name: source_name.to_owned(),
        row,
        message: message.into(),
    }
}

fn header_error(source_name: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::ParseHeader {
        source_name: source_name.to_owned(),
        message: message.into(),
    }
}

fn to_logits(values: Vec<f64>, source_name: &str, row: usize) -> Result<Logits> {
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(row_error(source_name, row, format!("entry {i} is NaN")));
    }
    Logits::new(values).map_err(|e| row_error(source_name, row, e.to_string()))
}

pub fn read_binary<R: Read>(mut reader: R, source_name: &str) -> Result<Dump> {
    let mut header = [0u8; HEADER_LEN];
    reader
        .read_exact(&mut header)
        .map_err(|_| header_error(source_name, "truncated header"))?;
    if &header[..4] != MAGIC {
        return Err(header_error(source_name, "bad magic, expected LGTD"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(header_error(source_name, format!("unsupported version {version}")));
    }
    let vocab_size = u32::from_le_bytes(header[6..10].try_into().expect("4 bytes")) as usize;
    let row_count = u64::from_le_bytes(header[10..18].try_into().expect("8 bytes"));
    if vocab_size == 0 {
        return Err(header_error(source_name, "vocabulary size is 0"));
    }
    let row_count = usize::try_from(row_count)
        .map_err(|_| header_error(source_name, "row count does not fit in memory"))?;

    let mut buf = vec![0u8; vocab_size * 4];
    let mut rows = Vec::with_capacity(row_count.min(1 << 16));
    for row in 0..row_count {
        reader
            .read_exact(&mut buf)
            .map_err(|_| row_error(source_name, row, "unexpected end of data"))?;
        let values = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        rows.push(to_logits(values, source_name, row)?);
    }
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing).map_err(|e| HarnessError::io(source_name, e))? != 0 {
        return Err(header_error(
            source_name,
            format!("trailing bytes after {row_count} declared rows"),
        ));
    }
    Ok(Dump {
        vocab_size,
        tokens: vec![None; rows.len()],
        rows,
    })
}

pub fn read_ndjson<R: BufRead>(reader: R, source_name: &str) -> Result<Dump> {
    let mut rows = Vec::new();
    let mut tokens = Vec::new();
    let mut vocab_size = None;
    for line in reader.lines() {
        let line = line.map_err(|e| HarnessError::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = rows.len();
        let parsed: NdjsonRow =
            serde_json::from_str(&line).map_err(|e| row_error(source_name, row, e.to_string()))?;
        let expected = *vocab_size.get_or_insert(parsed.logits.len());
        if parsed.logits.len() != expected {
            return Err(row_error(
                source_name,
                row,
                format!("row has {} logits, earlier rows have {expected}", parsed.logits.len()),
            ));
        }
        let values = parsed
            .logits
            .into_iter()
            .map(|v| v.unwrap_or(f64::NEG_INFINITY))
            .collect();
        rows.push(to_logits(values, source_name, row)?);
        tokens.push(parsed.token);
    }
    let vocab_size = vocab_size.ok_or_else(|| header_error(source_name, "no rows"))?;
    Ok(Dump {
        vocab_size,
        rows,
        tokens,
    })
}

fn check_uniform_width(rows: &[Logits]) -> Result<usize> {
    let width = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != width) {
        return Err(HarnessError::InvalidParameter(
            "all rows of a dump must have the same length".into(),
        ));
    }
    Ok(width)
}

/// Writes rows as `f32`; values outside `f32` range saturate.
pub fn write_binary<W: Write>(mut writer: W, rows: &[Logits]) -> Result<()> {
    let width = check_uniform_width(rows)?;
    let width32 = u32::try_from(width)
        .map_err(|_| HarnessError::InvalidParameter("vocabulary too large for the binary format".into()))?;
    let io = |e| HarnessError::io("<dump>", e);
    writer.write_all(MAGIC).map_err(io)?;
    writer.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    writer.write_all(&width32.to_le_bytes()).map_err(io)?;
    writer.write_all(&(rows.len() as u64).to_le_bytes()).map_err(io)?;
    let mut buf = Vec::with_capacity(width * 4);
    for row in rows {
        buf.clear();
        for v in row.values() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        writer.write_all(&buf).map_err(io)?;
    }
    writer.flush().map_err(io)
}

pub fn write_ndjson<W: Write>(mut writer: W, rows: &[Logits], tokens: &[Option<usize>]) -> Result<()> {
    check_uniform_width(rows)?;
    let io = |e| HarnessError::io("<dump>", e);
    for (i, row) in rows.iter().enumerate() {
        let record = NdjsonRow {
            logits: row
                .values()
                .iter()
                .map(|v| v.is_finite().then_some(*v))
                .collect(),
            token: tokens.get(i).copied().flatten(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n").map_err(io)?;
    }
    writer.flush().map_err(io)
}

pub fn write_dump(path: &Path, rows: &[Logits], tokens: &[Option<usize>], format: DumpFormat) -> Result<()> {
    let name = path.display().to_string();
    let file = File::create(path).map_err(|e| HarnessError::io(&name, e))?;
    let writer = BufWriter::new(file);
    match format {
        DumpFormat::Binary => write_binary(writer, rows),
        DumpFormat::Ndjson => write_ndjson(writer, rows, tokens),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(data: &[&[f64]]) -> Vec<Logits> {
        data.iter().map(|r| Logits::new(r.to_vec()).unwrap()).collect()
    }

    #[test]
    fn binary_three_rows() {
        let input = rows(&[
            &[0.0, 1.0, 2.0, 3.0],
            &[-1.5, f64::NEG_INFINITY, 0.25, 8.0],
            &[4.0, 4.0, 4.0, 4.0],
        ]);
        let mut bytes = Vec::new();
        write_binary(&mut bytes, &input).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 3 * 4 * 4);
        assert_eq!(&bytes[..4], b"LGTD");
        let dump = read_binary(&bytes[..], "mem").unwrap();
        assert_eq!(dump.vocab_size, 4);
        assert_eq!(dump.rows, input);
    }

    #[test]
    fn ndjson_row() {
        let dump = read_ndjson(&br#"{"logits":[0.0,1.0]}"#[..], "mem").unwrap();
        assert_eq!(dump.rows[0].values(), &[0.0, 1.0]);
        assert_eq!(dump.tokens, vec![None]);
    }

    #[test]
    fn ndjson_null_and_token() {
        let text = b"{\"logits\":[null,2.5,1],\"token\":1}\n\n{\"logits\":[0,0,0]}\n";
        let dump = read_ndjson(&text[..], "mem").unwrap();
        assert_eq!(dump.rows[0].values(), &[f64::NEG_INFINITY, 2.5, 1.0]);
        assert_eq!(dump.tokens, vec![Some(1), None]);
    }

    #[test]
    fn nan_row_is_named() {
        let mut bytes = Vec::new();
        write_binary(&mut bytes, &rows(&[&[0.0, 1.0], &[2.0, 3.0]])).unwrap();
        let off = HEADER_LEN + 8 + 4;
        bytes[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        match read_binary(&bytes[..], "mem") {
            Err(HarnessError::Parse { row, message, .. }) => {
                assert_eq!(row, 1);
                assert!(message.contains("NaN"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_width_is_named() {
        let text = b"{\"logits\":[0,1]}\n{\"logits\":[0,1]}\n{\"logits\":[0,1,2]}\n";
        match read_ndjson(&text[..], "mem") {
            Err(HarnessError::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(read_binary(&b"LGT"[..], "m"), Err(HarnessError::ParseHeader { .. })));
        let mut bytes = Vec::new();
        write_binary(&mut bytes, &rows(&[&[0.0]])).unwrap();
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(read_binary(&bad_version[..], "m"), Err(HarnessError::ParseHeader { .. })));
        let mut truncated = bytes.clone();
        truncated.pop();
        assert!(matches!(read_binary(&truncated[..], "m"), Err(HarnessError::Parse { row: 0, .. })));
        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(read_binary(&trailing[..], "m"), Err(HarnessError::ParseHeader { .. })));
    }

    #[test]
    fn bad_json_and_all_masked() {
        assert!(matches!(read_ndjson(&b"{\"logits\":"[..], "m"), Err(HarnessError::Parse { row: 0, .. })));
        assert!(matches!(
            read_ndjson(&b"{\"logits\":[null,null]}"[..], "m"),
            Err(HarnessError::Parse { row: 0, .. })
        ));
        assert!(matches!(read_ndjson(&b""[..], "m"), Err(HarnessError::ParseHeader { .. })));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(DumpFormat::from_path(Path::new("a.ndjson")), DumpFormat::Ndjson);
        assert_eq!(DumpFormat::from_path(Path::new("a.jsonl")), DumpFormat::Ndjson);
        assert_eq!(DumpFormat::from_path(Path::new("a.lgtd")), DumpFormat::Binary);
    }
}
