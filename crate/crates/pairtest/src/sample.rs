//! Dense samples (rows = observations, columns = dimensions) and the CSV
//! format used to exchange them.
//!
//! The CSV dialect is deliberately minimal: no header, one observation per
//! line, comma-separated decimal floats, scientific notation accepted.
//! Non-finite values are rejected at load time so every downstream statistic
//! can assume finite inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A dense real matrix of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Sample {
    /// Build from row-major data. Rejects empty shapes, shape/length
    /// disagreement and non-finite entries.
    pub fn from_vec(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptySample);
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i / cols,
                    col: i % cols,
                });
            }
        }
        Ok(Self { data, rows, cols })
    }

    /// Build from a list of rows, which must all have the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::RaggedRow {
                    row: i,
                    got: r.len(),
                    expected: d,
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(data, n, d)
    }

    /// Convenience constructor for 1-D samples.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::from_vec(values, n, 1)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Stack two samples with equal column counts vertically.
    pub fn vstack(&self, other: &Sample) -> Result<Sample> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                left: self.cols,
                right: other.cols,
            });
        }
        let mut data = Vec::with_capacity((self.rows + other.rows) * self.cols);
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Sample::from_vec(data, self.rows + other.rows, self.cols)
    }

    /// Rows at the given indices, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Sample {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Sample {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }

    /// Split into the column blocks `[0, split)` and `[split, cols)`.
    pub fn split_columns(&self, split: usize) -> Result<(Sample, Sample)> {
        if split == 0 || split >= self.cols {
            return Err(Error::Config(format!(
                "split column {split} must lie strictly inside 1..{}",
                self.cols
            )));
        }
        let mut left = Vec::with_capacity(self.rows * split);
        let mut right = Vec::with_capacity(self.rows * (self.cols - split));
        for r in self.iter_rows() {
            left.extend_from_slice(&r[..split]);
            right.extend_from_slice(&r[split..]);
        }
        Ok((
            Sample::from_vec(left, self.rows, split)?,
            Sample::from_vec(right, self.rows, self.cols - split)?,
        ))
    }

    /// Parse the headerless CSV dialect described in the module docs.
    pub fn parse_csv(text: &str) -> Result<Sample> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut expected: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for cell in line.split(',') {
                let cell = cell.trim();
                let v: f64 = cell.parse().map_err(|_| Error::CsvParse {
                    line: lineno + 1,
                    msg: format!("cannot parse `{cell}` as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::CsvParse {
                        line: lineno + 1,
                        msg: format!("non-finite value `{cell}`"),
                    });
                }
                row.push(v);
            }
            match expected {
                None => expected = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::RaggedRow {
                        row: rows.len(),
                        got: row.len(),
                        expected: d,
                    })
                }
                _ => {}
            }
            rows.push(row);
        }
        Sample::from_rows(rows)
    }

    pub fn read_csv(path: &Path) -> Result<Sample> {
        let text = fs::read_to_string(path)?;
        Sample::parse_csv(&text)
    }

    /// Serialize using the shortest round-trip float formatting, so writing
    /// and re-reading reproduces the sample exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in self.iter_rows() {
            for (j, v) in r.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Jointly observed rows: `x` is m x p, `y` is m x q, row i of each side
/// belongs to the same observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub x: Sample,
    pub y: Sample,
}

impl PairedSample {
    pub fn new(x: Sample, y: Sample) -> Result<Self> {
        if x.n_rows() != y.n_rows() {
            return Err(Error::PairedRowMismatch {
                left: x.n_rows(),
                right: y.n_rows(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn m(&self) -> usize {
        self.x.n_rows()
    }

    /// Concatenate both sides into one m x (p+q) sample.
    pub fn joined(&self) -> Sample {
        let p = self.x.n_cols();
        let q = self.y.n_cols();
        let m = self.m();
        let mut data = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            data.extend_from_slice(self.x.row(i));
            data.extend_from_slice(self.y.row(i));
        }
        Sample {
            data,
            rows: m,
            cols: p + q,
        }
    }

    /// Apply the same row permutation to both sides.
    pub fn permute_rows(&self, perm: &[usize]) -> PairedSample {
        PairedSample {
            x: self.x.select_rows(perm),
            y: self.y.select_rows(perm),
        }
    }
}
