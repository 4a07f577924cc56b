//! Dense square matrices and the doubly stochastic domain types.
//!
//! Storage is row-major `Vec<f64>`. Everything here is immutable after
//! construction; arithmetic returns new matrices.

use std::fmt::Write as _;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on row and column sums of a doubly stochastic matrix.
pub const DS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(Error::ShapeMismatch {
                n,
                expected: n * n,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEntry {
                row: pos / n,
                col: pos % n,
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::ShapeMismatch {
                    n,
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(n, data)
    }

    /// Builds a matrix from a generator. Panics if the generator yields a
    /// non-finite value, so only use it with expressions that cannot.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n > 0, "matrix order must be at least 1");
        let data: Vec<f64> = (0..n * n).map(|k| f(k / n, k % n)).collect();
        assert!(data.iter().all(|x| x.is_finite()), "non-finite entry");
        Self { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self::from_fn(n, |_, _| value)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Permutation matrix with a one at `(i, perm[i])`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter(format!(
                    "{perm:?} is not a permutation"
                )));
            }
        }
        Ok(Self::from_fn(n, |i, j| if perm[i] == j { 1.0 } else { 0.0 }))
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self::from_vec(n, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.rows() {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    /// Entrywise power with integer exponent.
    pub fn powi(&self, p: i32) -> Self {
        self.map(|x| x.powi(p))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_order(other)?;
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { n, data: out })
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let t = self.transpose();
        t.matmul(self).expect("same order")
    }

    /// `self · selfᵀ`.
    pub fn gram_rows(&self) -> Self {
        self.matmul(&self.transpose()).expect("same order")
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Sum of all n² entries.
    pub fn grand_sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Reorders rows by `row_perm` and columns by `col_perm`:
    /// `out[i][j] = self[row_perm[i]][col_perm[j]]`.
    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        Self::from_fn(self.n, |i, j| self.get(row_perm[i], col_perm[j]))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol
    }

    /// max |a_ij − a_ji| relative to max |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    fn check_same_order(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Parses the text format: first line `n`, then `n` lines of `n`
    /// whitespace-separated numbers. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing order line".into(),
        })?;
        let n: usize = header.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("expected matrix order, got {header:?}"),
        })?;
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            let (line, content) = lines.next().ok_or(Error::Parse {
                line: line + r + 1,
                msg: format!("expected {n} rows, found {r}"),
            })?;
            let before = data.len();
            for tok in content.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number {tok:?}"),
                })?;
                data.push(v);
            }
            if data.len() - before != n {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {n} entries, got {}", data.len() - before),
                });
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                msg: "trailing content after matrix".into(),
            });
        }
        Self::from_vec(n, data)
    }

    /// Writes the text format with 17 significant digits per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| fmt17(*x)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for SquareMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SquareMatrix> for Vec<Vec<f64>> {
    fn from(m: SquareMatrix) -> Self {
        m.to_rows()
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A non-negative square matrix whose row and column sums are all one
/// within `tol`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DoublyStochasticMatrix {
    inner: SquareMatrix,
    #[serde(skip)]
    tol: f64,
}

impl DoublyStochasticMatrix {
    pub fn new(m: SquareMatrix) -> Result<Self> {
        Self::with_tol(m, DS_TOL)
    }

    /// Validates margins to `tol`. Nothing is renormalized; use Sinkhorn
    /// projection to repair an input that fails.
    pub fn with_tol(m: SquareMatrix, tol: f64) -> Result<Self> {
        for (k, &x) in m.as_slice().iter().enumerate() {
            if x < 0.0 {
                return Err(Error::NegativeEntry {
                    row: k / m.n(),
                    col: k % m.n(),
                    value: x,
                });
            }
        }
        for (what, sums) in [("row", m.row_sums()), ("column", m.col_sums())] {
            if let Some((index, &sum)) = sums
                .iter()
                .enumerate()
                .find(|(_, s)| (**s - 1.0).abs() > tol)
            {
                return Err(Error::NotDoublyStochastic { what, index, sum });
            }
        }
        Ok(Self { inner: m, tol })
    }

    /// The uniform matrix J with every entry 1/n.
    pub fn uniform(n: usize) -> Self {
        Self {
            inner: SquareMatrix::constant(n, 1.0 / n as f64),
            tol: DS_TOL,
        }
    }

    pub fn permutation(perm: &[usize]) -> Result<Self> {
        Ok(Self {
            inner: SquareMatrix::permutation(perm)?,
            tol: DS_TOL,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.inner
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
            tol: self.tol,
        }
    }

    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        Self {
            inner: self.inner.permute(row_perm, col_perm),
            tol: self.tol,
        }
    }

    /// Largest deviation of any row or column sum from one.
    pub fn marginal_error(&self) -> f64 {
        marginal_error(&self.inner)
    }
}

pub(crate) fn marginal_error(m: &SquareMatrix) -> f64 {
    m.row_sums()
        .into_iter()
        .chain(m.col_sums())
        .fold(0.0, |e, s| e.max((s - 1.0).abs()))
}

/// `eps = n·A − 1`, with zero row and column sums.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationMatrix {
    eps: SquareMatrix,
}

impl DeviationMatrix {
    pub fn from_doubly_stochastic(a: &DoublyStochasticMatrix) -> Self {
        let n = a.n() as f64;
        Self {
            eps: a.matrix().map(|x| n * x - 1.0),
        }
    }

    /// Wraps an arbitrary matrix whose margins vanish within `tol·n`.
    pub fn new(eps: SquareMatrix, tol: f64) -> Result<Self> {
        let bound = tol * eps.n() as f64;
        for (what, sums) in [("row", eps.row_sums()), ("column", eps.col_sums())] {
            if let Some((index, &sum)) = sums.iter().enumerate().find(|(_, s)| s.abs() > bound) {
                return Err(Error::NotDoublyStochastic { what, index, sum });
            }
        }
        Ok(Self { eps })
    }

    pub fn n(&self) -> usize {
        self.eps.n()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.eps
    }

    /// `(1 + eps)/n`.
    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.n() as f64;
        self.eps.map(|e| (1.0 + e) / n)
    }
}
