//! CSV / JSON emission to a file or stdout.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Opens `path`, or stdout when `None`.
pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| HarnessError::io(p.display().to_string(), e))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `rows` as CSV with a header, or as a pretty-printed JSON array.
pub fn write_rows<T: Serialize, W: Write>(mut writer: W, rows: &[T], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut writer);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush().map_err(|e| HarnessError::io("<output>", e))?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut writer, rows)?;
            writer.write_all(b"\n").map_err(|e| HarnessError::io("<output>", e))?;
        }
    }
    writer.flush().map_err(|e| HarnessError::io("<output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
    }

    #[test]
    fn csv_and_json() {
        let rows = [Row { a: 1, b: Some(0.5) }, Row { a: 2, b: None }];
        let mut out = Vec::new();
        write_rows(&mut out, &rows, Format::Csv).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n1,0.5\n2,\n");
        let mut out = Vec::new();
        write_rows(&mut out, &rows, Format::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v[1]["b"], serde_json::Value::Null);
    }
}
