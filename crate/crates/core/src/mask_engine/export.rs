//! Mask serialization: a dense 0/1 text grid for eyeballing and a run-length
//! binary record for fixtures.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! b"AVRM" | version: u8 = 1 | length: u32 | runs: u32 | run_0: u32 | run_1: u32 | ...
//! ```
//!
//! Runs cover the row-major cells and alternate visible, blocked, visible, ...
//! starting with visible, so the first run may be zero.

use super::matrix::MaskMatrix;
use super::MaskError;

const MAGIC: &[u8; 4] = b"AVRM";
const VERSION: u8 = 1;

/// One line per row, `1` visible and `0` blocked, each line newline-terminated.
pub fn to_grid(mask: &MaskMatrix) -> String {
    let n = mask.len();
    let mut out = String::with_capacity(n * (n + 1));
    for i in 0..n {
        out.extend(mask.row(i).iter().map(|&v| if v { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn row_to_string(row: &[bool]) -> String {
    row.iter().map(|&v| if v { '1' } else { '0' }).collect()
}

pub fn from_grid(text: &str) -> Result<MaskMatrix, MaskError> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let n = rows.len();
    let mut cells = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        let row = row.trim();
        if row.chars().count() != n {
            return Err(MaskError::Format(format!(
                "grid row {i} has {} cells, expected {n}",
                row.chars().count()
            )));
        }
        for c in row.chars() {
            cells.push(match c {
                '1' => true,
                '0' => false,
                other => return Err(MaskError::Format(format!("unexpected grid character {other:?}"))),
            });
        }
    }
    MaskMatrix::from_cells(cells)
}

pub fn to_rle(mask: &MaskMatrix) -> Vec<u8> {
    let mut runs: Vec<u32> = Vec::new();
    let mut current = true;
    let mut count = 0u32;
    for &c in mask.cells() {
        if c == current {
            count += 1;
        } else {
            runs.push(count);
            current = c;
            count = 1;
        }
    }
    runs.push(count);

    let mut out = Vec::with_capacity(13 + 4 * runs.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(mask.len() as u32).to_le_bytes());
    out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
    for r in runs {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

pub fn from_rle(bytes: &[u8]) -> Result<MaskMatrix, MaskError> {
    let bad = |m: &str| MaskError::Format(m.to_string());
    if bytes.len() < 13 || &bytes[..4] != MAGIC {
        return Err(bad("not a run-length mask record"));
    }
    if bytes[4] != VERSION {
        return Err(MaskError::Format(format!("unsupported version {}", bytes[4])));
    }
    let word = |at: usize| -> Result<u32, MaskError> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| bad("truncated record"))
    };
    let len = word(5)? as usize;
    let nruns = word(9)? as usize;
    if bytes.len() != 13 + 4 * nruns {
        return Err(bad("record length does not match run count"));
    }
    let total = len.checked_mul(len).ok_or_else(|| bad("mask length overflows"))?;
    let mut cells = Vec::with_capacity(total);
    let mut value = true;
    for k in 0..nruns {
        let run = word(13 + 4 * k)? as usize;
        if cells.len() + run > total {
            return Err(bad("runs exceed mask size"));
        }
        cells.extend(std::iter::repeat_n(value, run));
        value = !value;
    }
    if cells.len() != total {
        return Err(bad("runs do not cover the mask"));
    }
    MaskMatrix::from_cells(cells)
}
