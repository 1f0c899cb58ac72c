//! Binary matrix container: one JSON header line followed by the matrix as
//! row-major little-endian `f64` values.
//!
//! The header always carries `format`, `rows` and `cols`; everything else is
//! owner-specific metadata.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub fn write_container<W: Write>(
    mut out: W,
    format: &str,
    mut header: Map<String, Value>,
    matrix: &DMatrix<f64>,
) -> Result<()> {
    header.insert("format".into(), Value::from(format));
    header.insert("rows".into(), Value::from(matrix.nrows()));
    header.insert("cols".into(), Value::from(matrix.ncols()));
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(matrix.len() * 8);
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            buf.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a container, checking that its `format` field equals `format`.
pub fn read_container<R: BufRead>(
    mut input: R,
    format: &str,
) -> Result<(Map<String, Value>, DMatrix<f64>)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: Map<String, Value> = serde_json::from_str(line.trim_end())?;
    let found = header.get("format").and_then(Value::as_str).unwrap_or("");
    if found != format {
        return Err(Error::InvalidInput(format!(
            "expected a '{format}' container, found '{found}'"
        )));
    }
    let dim = |key: &str| -> Result<usize> {
        header
            .get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| Error::InvalidInput(format!("container header lacks '{key}'")))
    };
    let (rows, cols) = (dim("rows")?, dim("cols")?);
    let mut bytes = vec![0u8; rows * cols * 8];
    input.read_exact(&mut bytes)?;
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")));
    let mut matrix = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            matrix[(i, j)] = values.next().expect("sized buffer");
        }
    }
    Ok((header, matrix))
}

pub(crate) fn header_f64(header: &Map<String, Value>, key: &str) -> Result<f64> {
    header
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::InvalidInput(format!("container header lacks numeric '{key}'")))
}

pub(crate) fn header_str<'a>(header: &'a Map<String, Value>, key: &str) -> Result<&'a str> {
    header
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::InvalidInput(format!("container header lacks string '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_preserves_bits(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let m = DMatrix::from_fn(rows, cols, |i, j| {
                f64::from_bits(seed.rotate_left((i * 7 + j) as u32) >> 2)
            });
            let mut header = Map::new();
            header.insert("note".into(), Value::from("x"));
            let mut buf = Vec::new();
            write_container(&mut buf, "test", header, &m).unwrap();
            let (h, back) = read_container(buf.as_slice(), "test").unwrap();
            prop_assert_eq!(h.get("note").and_then(Value::as_str), Some("x"));
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn layout_is_row_major_le() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut buf = Vec::new();
        write_container(&mut buf, "t", Map::new(), &m).unwrap();
        let newline = buf.iter().position(|&b| b == b'\n').unwrap();
        let body = &buf[newline + 1..];
        assert_eq!(body.len(), 32);
        assert_eq!(&body[8..16], &2.0f64.to_le_bytes());
        assert_eq!(&body[16..24], &3.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_wrong_format() {
        let mut buf = Vec::new();
        write_container(&mut buf, "a", Map::new(), &DMatrix::zeros(1, 1)).unwrap();
        assert!(read_container(buf.as_slice(), "b").is_err());
    }
}
