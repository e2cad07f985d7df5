//! File formats: binary field snapshots, JSON, and CSV tables.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use degma_core::fields::{Grid, ScalarField};
use serde::Serialize;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DGMF";
const VERSION: u32 = 1;

/// Little-endian snapshot: magic, version, dimension, each axis as a length
/// followed by its coordinates, then the values.
pub fn encode_field(u: &ScalarField) -> Vec<u8> {
    let grid = u.grid();
    let mut out =
        Vec::with_capacity(16 + 8 * (u.values().len() + grid.shape().iter().sum::<usize>() + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for k in 0..grid.dim() {
        let axis = grid.axis(k);
        out.extend_from_slice(&(axis.len() as u64).to_le_bytes());
        axis.iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    out.extend_from_slice(&(u.values().len() as u64).to_le_bytes());
    u.values()
        .iter()
        .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format("length overflows".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("length overflows".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = c.u32()? as usize;
    let mut axes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let len = c.u64()?;
        axes.push(c.f64s(len)?);
    }
    let count = c.u64()?;
    let values = c.f64s(count)?;
    if c.at != bytes.len() {
        return Err(Error::Format("trailing bytes".into()));
    }
    let grid = Arc::new(Grid::new(axes).map_err(|e| Error::Format(e.to_string()))?);
    ScalarField::from_values(&grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_field(path: &Path, u: &ScalarField) -> Result<()> {
    write_bytes(path, &encode_field(u))
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
pub fn number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-3..1e7).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// A CSV table with a header row. Numbers are stored in their shortest
/// round-trip form.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| number(*v)).collect());
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner()
            .map_err(|e| Error::Csv(e.into_error().into()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_csv()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    /// The named column parsed as numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r.get(k)?.parse().ok()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let grid = Arc::new(Grid::uniform(&[-1.0, 0.0], &[1.0, 2.0], &[5, 4]).unwrap());
        let u = ScalarField::sample(|x| x[0] * x[0] - 0.1 * x[1], &grid).unwrap();
        let bytes = encode_field(&u);
        let back = decode_field(&bytes).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(back.grid().axis(1), grid.axis(1));
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["h", "err"]);
        t.push_numbers(&[0.1, 1.0 / 3.0]);
        t.push_numbers(&[0.05, 1e-300]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write(&path).unwrap();
        let back = Table::read(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("err").unwrap(), vec![1.0 / 3.0, 1e-300]);
        assert!(back.column("nope").is_none());
    }
}
