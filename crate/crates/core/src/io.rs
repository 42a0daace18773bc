//! On-disk lattice formats.
//!
//! Binary: one JSON header line `{"dims":[..],"dtype":"f64"}` followed by raw
//! little-endian values (`f64` for fields, `u8` 0/1 for masks).
//! CSV: 2D only, one line per lattice row.
//! PGM: binary P5 export of 2D masks, 0 = retained, 255 = rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Lattice, Mask};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dims: Vec<usize>,
    dtype: String,
}

fn split_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    Ok((header, &bytes[newline + 1..]))
}

fn header_line(dims: &[usize], dtype: &str) -> Vec<u8> {
    let mut line = serde_json::to_vec(&Header {
        dims: dims.to_vec(),
        dtype: dtype.into(),
    })
    .expect("header serializes");
    line.push(b'\n');
    line
}

pub fn encode_lattice(lattice: &Lattice) -> Vec<u8> {
    let mut out = header_line(lattice.dims(), "f64");
    out.reserve(lattice.len() * 8);
    for v in lattice.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_lattice(bytes: &[u8]) -> Result<Lattice> {
    let (header, body) = split_header(bytes)?;
    if header.dtype != "f64" {
        return Err(Error::Format(format!(
            "expected dtype f64, found {}",
            header.dtype
        )));
    }
    if body.len() % 8 != 0 {
        return Err(Error::Format("payload is not a whole number of f64".into()));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Lattice::new(header.dims, values)
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let mut out = header_line(mask.dims(), "u8");
    out.extend(mask.values().iter().map(|&b| b as u8));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let (header, body) = split_header(bytes)?;
    if header.dtype != "u8" {
        return Err(Error::Format(format!(
            "expected dtype u8, found {}",
            header.dtype
        )));
    }
    let values = body
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("mask byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Mask::new(header.dims, values)
}

fn require_2d(dims: &[usize]) -> Result<(usize, usize)> {
    match dims {
        [rows, cols] => Ok((*rows, *cols)),
        _ => Err(Error::Format(format!(
            "CSV/PGM formats hold 2D lattices only, got dims {dims:?}"
        ))),
    }
}

pub fn lattice_to_csv(lattice: &Lattice) -> Result<String> {
    let (_, cols) = require_2d(lattice.dims())?;
    let mut out = String::new();
    for row in lattice.values().chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn parse_csv_rows<T>(text: &str, parse: impl Fn(&str) -> Result<T>) -> Result<(Vec<usize>, Vec<T>)> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let before = values.len();
        for cell in line.split(',') {
            values.push(parse(cell.trim())?);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Format(format!(
                    "row {rows} has {width} columns, expected {c}"
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    Ok((vec![rows, cols.unwrap_or(0)], values))
}

pub fn lattice_from_csv(text: &str) -> Result<Lattice> {
    let (dims, values) = parse_csv_rows(text, |cell| {
        cell.parse::<f64>()
            .map_err(|e| Error::Format(format!("bad number {cell:?}: {e}")))
    })?;
    Lattice::new(dims, values)
}

pub fn mask_to_csv(mask: &Mask) -> Result<String> {
    let (_, cols) = require_2d(mask.dims())?;
    let mut out = String::new();
    for row in mask.values().chunks(cols) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn mask_from_csv(text: &str) -> Result<Mask> {
    let (dims, values) = parse_csv_rows(text, |cell| match cell {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Format(format!("mask cell {other:?} is not 0 or 1"))),
    })?;
    Mask::new(dims, values)
}

pub fn mask_to_pgm(mask: &Mask) -> Result<Vec<u8>> {
    let (rows, cols) = require_2d(mask.dims())?;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(mask.values().iter().map(|&b| if b { 255u8 } else { 0 }));
    Ok(out)
}

fn is_csv(path: &std::path::Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a lattice, choosing CSV or binary by file extension.
pub fn read_lattice(path: &std::path::Path) -> Result<Lattice> {
    if is_csv(path) {
        lattice_from_csv(&std::fs::read_to_string(path)?)
    } else {
        decode_lattice(&std::fs::read(path)?)
    }
}

pub fn read_mask(path: &std::path::Path) -> Result<Mask> {
    if is_csv(path) {
        mask_from_csv(&std::fs::read_to_string(path)?)
    } else {
        decode_mask(&std::fs::read(path)?)
    }
}

/// Serializes a lattice for `path`: CSV when the extension says so, binary otherwise.
pub fn lattice_bytes_for(path: &std::path::Path, lattice: &Lattice) -> Result<Vec<u8>> {
    if is_csv(path) {
        Ok(lattice_to_csv(lattice)?.into_bytes())
    } else {
        Ok(encode_lattice(lattice))
    }
}

pub fn mask_bytes_for(path: &std::path::Path, mask: &Mask) -> Result<Vec<u8>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Ok(mask_to_csv(mask)?.into_bytes()),
        Some(e) if e.eq_ignore_ascii_case("pgm") => mask_to_pgm(mask),
        _ => Ok(encode_mask(mask)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_header_layout() {
        let l = Lattice::new(vec![1, 2], vec![0.5, 1.0]).unwrap();
        let bytes = encode_lattice(&l);
        let text_end = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(&bytes[..text_end], br#"{"dims":[1,2],"dtype":"f64"}"#);
        assert_eq!(&bytes[text_end + 1..text_end + 9], &0.5f64.to_le_bytes());
        assert_eq!(bytes.len(), text_end + 1 + 16);
    }

    #[test]
    fn rejects_wrong_dtype_and_length() {
        let m = Mask::new(vec![2, 2], vec![true, false, false, true]).unwrap();
        assert!(decode_lattice(&encode_mask(&m)).is_err());
        let mut bytes = encode_lattice(&Lattice::filled(vec![2, 2], 0.1).unwrap());
        bytes.pop();
        assert!(matches!(decode_lattice(&bytes), Err(Error::Format(_))));
        let mut bytes = encode_lattice(&Lattice::filled(vec![2, 2], 0.1).unwrap());
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(
            decode_lattice(&bytes),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pgm_export() {
        let m = Mask::new(vec![2, 3], vec![true, false, false, false, false, true]).unwrap();
        let pgm = mask_to_pgm(&m).unwrap();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[255, 0, 0, 0, 0, 255]);
        let cube = Mask::new(vec![2, 2, 2], vec![false; 8]).unwrap();
        assert!(mask_to_pgm(&cube).is_err());
    }

    #[test]
    fn csv_ragged_rows_fail() {
        assert!(lattice_from_csv("0.1,0.2\n0.3\n").is_err());
        assert!(mask_from_csv("0,1\n1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn lattice_formats_are_lossless(
            rows in 1usize..6, cols in 1usize..6, depth in 0usize..4,
            seed in proptest::collection::vec(-1e6f64..1e6, 150),
        ) {
            let dims = if depth == 0 { vec![rows, cols] } else { vec![rows, cols, depth] };
            let n: usize = dims.iter().product();
            let l = Lattice::new(dims.clone(), seed[..n].to_vec()).unwrap();
            prop_assert_eq!(&decode_lattice(&encode_lattice(&l)).unwrap(), &l);
            if depth == 0 {
                prop_assert_eq!(&lattice_from_csv(&lattice_to_csv(&l).unwrap()).unwrap(), &l);
            }
            let m = Mask::from_fn(dims, |c| c.iter().sum::<usize>() % 3 == 0).unwrap();
            prop_assert_eq!(&decode_mask(&encode_mask(&m)).unwrap(), &m);
        }
    }
}
