//! Line-delimited JSON iteration traces.

use std::io::{self, BufRead, Write};

use crate::model::IterationRecord;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// Writes one JSON object per record, each followed by a newline.
pub fn write_trace<W: Write>(mut out: W, records: &[IterationRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a trace back, skipping blank lines.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<IterationRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| TraceError::Parse {
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}
