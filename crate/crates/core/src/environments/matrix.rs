//! Dense matrices and the finite loss-matrix environment, with CSV and
//! `CHLM` binary serialization.
//!
//! Binary layout: magic `CHLM`, one version byte (`1`), `u32` rows, `u32`
//! columns, then `rows * cols` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{scan_uncovered, ExpertCount, ExpertId, LossOracle, LossValue, Round};

pub const BINARY_MAGIC: &[u8; 4] = b"CHLM";
pub const BINARY_VERSION: u8 = 1;

/// Row-major dense matrix of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(r).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for r in 0..self.rows {
            w.write_record(self.row(r).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Matrix> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut data = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for record in rdr.records() {
            let record = record?;
            match cols {
                None => cols = Some(record.len()),
                Some(c) if c != record.len() => {
                    return Err(Error::Format(format!(
                        "row {} has {} columns, expected {c}",
                        rows + 1,
                        record.len()
                    )))
                }
                _ => {}
            }
            for field in record.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Format(format!("row {}: `{field}` is not a number", rows + 1))
                })?;
                data.push(v);
            }
            rows += 1;
        }
        Matrix::from_vec(rows, cols.unwrap_or(0), data)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = u32::try_from(self.rows).map_err(|_| Error::Format("too many rows".into()))?;
        let cols =
            u32::try_from(self.cols).map_err(|_| Error::Format("too many columns".into()))?;
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&[BINARY_VERSION])?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&cols.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Matrix> {
        let mut header = [0u8; 13];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format("truncated header".into()))?;
        if &header[..4] != BINARY_MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        if header[4] != BINARY_VERSION {
            return Err(Error::Format(format!("unsupported version {}", header[4])));
        }
        let rows = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[9..13].try_into().unwrap()) as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format("truncated payload".into()))?;
            data.push(f64::from_le_bytes(buf));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        Matrix::from_vec(rows, cols, data)
    }
}

/// Serialization format for matrices on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Binary => "chlm",
        }
    }
}

pub fn write_matrix(matrix: &Matrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match format {
        MatrixFormat::Csv => matrix.write_csv(w),
        MatrixFormat::Binary => matrix.write_binary(w),
    }
}

/// Reads a matrix, detecting the binary format by its magic bytes.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut file = BufReader::new(File::open(path)?);
    let mut head = [0u8; 4];
    let n = file.read(&mut head)?;
    let file = BufReader::new(File::open(path)?);
    if n == 4 && &head == BINARY_MAGIC {
        Matrix::read_binary(file)
    } else {
        Matrix::read_csv(file)
    }
}

/// A finite environment given by an explicit `T x K` loss matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    inner: Matrix,
}

impl LossMatrix {
    /// Validates every entry into `[-1, 1]` (clamping rounding noise).
    pub fn new(matrix: Matrix) -> Result<Self> {
        let mut inner = matrix;
        for v in inner.data.iter_mut() {
            *v = LossValue::new(*v)?.get();
        }
        Ok(LossMatrix { inner })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        let data = rows.iter().flatten().copied().collect();
        LossMatrix::new(Matrix::from_vec(rows.len(), cols, data)?)
    }

    pub fn rounds(&self) -> usize {
        self.inner.rows
    }

    pub fn experts(&self) -> usize {
        self.inner.cols
    }

    pub fn matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    /// Losses of all experts at round `t` (1-based).
    pub fn round(&self, t: Round) -> &[f64] {
        self.inner.row(t - 1)
    }

    pub fn column(&self, expert: usize) -> Vec<f64> {
        (0..self.rounds())
            .map(|r| self.inner.get(r, expert))
            .collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.experts()];
        for r in 0..self.rounds() {
            for (s, v) in sums.iter_mut().zip(self.inner.row(r)) {
                *s += v;
            }
        }
        sums
    }

    pub fn read(path: &Path) -> Result<Self> {
        LossMatrix::new(read_matrix(path)?)
    }

    pub fn write(&self, path: &Path, format: MatrixFormat) -> Result<()> {
        write_matrix(&self.inner, path, format)
    }
}

impl LossOracle for LossMatrix {
    fn loss(&self, t: Round, expert: ExpertId) -> f64 {
        self.inner.get(t - 1, expert.0)
    }

    fn num_experts(&self) -> ExpertCount {
        ExpertCount::Finite(self.experts())
    }

    fn horizon(&self) -> Round {
        self.rounds()
    }

    fn uncovered_expert_from(
        &self,
        t: Round,
        active: &[ExpertId],
        threshold: f64,
        start: usize,
    ) -> Option<ExpertId> {
        let row = self.round(t);
        scan_uncovered(row.len(), start, active, threshold, |i| row[i])
    }

    fn round_losses(&self, t: Round, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        out.extend_from_slice(self.round(t));
        Ok(())
    }

    fn cumulative_losses(&self) -> Result<Vec<f64>> {
        Ok(self.column_sums())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> Matrix {
        Matrix::from_vec(
            3,
            3,
            vec![0.5, -1.0, 0.0, 1.0, 0.25, -0.75, -0.125, 0.1, 0.3],
        )
        .unwrap()
    }

    #[test]
    fn csv_golden() {
        let mut buf = Vec::new();
        fixture().write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "0.5,-1,0\n1,0.25,-0.75\n-0.125,0.1,0.3\n"
        );
        let back =
            Matrix::read_csv("0.5,-1,0\n1, 0.25,-0.75\n-0.125,0.1,0.3\n".as_bytes()).unwrap();
        assert_eq!(back, fixture());
    }

    #[test]
    fn binary_header_layout() {
        let mut buf = Vec::new();
        fixture().write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CHLM");
        assert_eq!(buf[4], 1);
        assert_eq!(&buf[5..9], &3u32.to_le_bytes());
        assert_eq!(&buf[9..13], &3u32.to_le_bytes());
        assert_eq!(&buf[13..21], &0.5f64.to_le_bytes());
        assert_eq!(buf.len(), 13 + 9 * 8);
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(Matrix::read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(Matrix::read_csv("1,x\n".as_bytes()).is_err());
        assert!(Matrix::read_binary(&b"CHLX\x01\0\0\0\0\0\0\0\0"[..]).is_err());
        assert!(Matrix::read_binary(&b"CHLM\x02\0\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        fixture().write_binary(&mut buf).unwrap();
        assert!(Matrix::read_binary(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(Matrix::read_binary(&buf[..]).is_err());
    }

    #[test]
    fn loss_matrix_validates_range() {
        assert!(LossMatrix::from_rows(&[vec![0.0, 1.5]]).is_err());
        let m = LossMatrix::from_rows(&[vec![0.0, 1.0 + 1e-13]]).unwrap();
        assert_eq!(m.round(1), &[0.0, 1.0]);
        assert!(LossMatrix::from_rows(&[vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn uncovered_scan_respects_start_and_strictness() {
        let m = LossMatrix::from_rows(&[vec![0.0, 0.4, 0.41, -0.5]]).unwrap();
        let s = [ExpertId(0)];
        assert_eq!(m.uncovered_expert(1, &s, 0.4), Some(ExpertId(2)));
        assert_eq!(m.uncovered_expert_from(1, &s, 0.4, 3), Some(ExpertId(3)));
        assert_eq!(m.uncovered_expert(1, &s, 0.5), None);
    }

    proptest! {
        #[test]
        fn csv_and_binary_roundtrip_bit_exact(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in prop::collection::vec(-1.0f64..=1.0, 36),
        ) {
            let m = Matrix::from_fn(rows, cols, |r, c| seed[r * 6 + c]);
            let mut bin = Vec::new();
            m.write_binary(&mut bin).unwrap();
            prop_assert_eq!(&Matrix::read_binary(&bin[..]).unwrap(), &m);
            let mut text = Vec::new();
            m.write_csv(&mut text).unwrap();
            let back = Matrix::read_csv(&text[..]).unwrap();
            for (a, b) in back.data().iter().zip(m.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
