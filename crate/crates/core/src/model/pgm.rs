//! Binary 16-bit PGM (P5) export.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Encodes `values` (row-major, `width × height`) as a 16-bit P5 image scaled so
/// the maximum maps to 65535. The maximum is recorded in a `# max` header comment.
pub fn encode_pgm16(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "pgm dimensions do not match data");
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    let mut out = Vec::with_capacity(64 + 2 * values.len());
    write!(out, "P5\n# max {max:e}\n{width} {height}\n65535\n").expect("write to vec");
    for &v in values {
        let level = if max > 0.0 {
            (v.max(0.0) / max * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn write_pgm16(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> io::Result<()> {
    fs::write(path, encode_pgm16(width, height, values))
}

/// Binary image as a PGM (1 → 65535).
pub fn write_bits_pgm(path: impl AsRef<Path>, side: usize, bits: &[u8]) -> io::Result<()> {
    let values: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
    write_pgm16(path, side, side, &values)
}

/// Parses the header maximum and 16-bit samples of a P5 file written by [`encode_pgm16`].
pub fn decode_pgm16(bytes: &[u8]) -> Option<(usize, usize, f64, Vec<u16>)> {
    let text_end = {
        let mut lines = 0;
        let mut idx = 0;
        while lines < 4 {
            idx += bytes[idx..].iter().position(|&b| b == b'\n')? + 1;
            lines += 1;
        }
        idx
    };
    let header = std::str::from_utf8(&bytes[..text_end]).ok()?;
    let mut lines = header.lines();
    if lines.next()? != "P5" {
        return None;
    }
    let max: f64 = lines.next()?.strip_prefix("# max ")?.parse().ok()?;
    let mut dims = lines.next()?.split_whitespace();
    let w: usize = dims.next()?.parse().ok()?;
    let h: usize = dims.next()?.parse().ok()?;
    if lines.next()? != "65535" {
        return None;
    }
    let data = &bytes[text_end..];
    if data.len() != 2 * w * h {
        return None;
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Some((w, h, max, samples))
}
