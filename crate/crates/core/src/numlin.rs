//! Small dense linear algebra: determinants, rectangular volume, least squares.
//!
//! Everything here works on matrices with at most a few dozen rows and columns,
//! which is all the samplers ever need (Jacobians are L×K with L, K ≤ 10, and
//! the ARMA auxiliary regression has four regressors).

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative rank tolerance applied to `volume` and `ols_fit`.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Dense row-major matrix of finite reals.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    /// Builds a matrix column by column.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|col| col.len() != r) {
            return Err(Error::Dimension("ragged columns".into()));
        }
        let mut data = vec![0.0; r * c];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * c + j] = *v;
            }
        }
        Self::new(r, c, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n.max(1)])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self[(i, j)];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Gram matrix of the thin side: A′A when rows ≥ cols, AA′ otherwise.
    pub fn thin_gram(&self) -> Matrix {
        let tall = self.rows >= self.cols;
        let k = self.rows.min(self.cols);
        let mut g = vec![0.0; k * k];
        for p in 0..k {
            for q in p..k {
                let s: f64 = if tall {
                    (0..self.rows).map(|i| self[(i, p)] * self[(i, q)]).sum()
                } else {
                    self.row(p)
                        .iter()
                        .zip(self.row(q))
                        .map(|(a, b)| a * b)
                        .sum()
                };
                g[p * k + q] = s;
                g[q * k + p] = s;
            }
        }
        Matrix {
            rows: k,
            cols: k,
            data: g,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..i).all(|j| {
                    let (a, b) = (self[(i, j)], self[(j, i)]);
                    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
                })
            })
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
    /// when a pivot is not strictly positive.
    pub fn cholesky(&self) -> Option<Matrix> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Matrix {
            rows: n,
            cols: n,
            data: l,
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Determinant by LU factorisation with partial pivoting.
pub fn determinant(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "determinant needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let mut m = a.data.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p * n + col].abs().total_cmp(&m[q * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col] == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for i in col + 1..n {
            let factor = m[i * n + col] / p;
            if factor != 0.0 {
                for j in col + 1..n {
                    m[i * n + j] -= factor * m[col * n + j];
                }
            }
        }
    }
    Ok(det)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
fn largest_eigenvalue(g: &Matrix) -> f64 {
    let n = g.rows;
    let trace: f64 = (0..n).map(|i| g[(i, i)]).sum();
    if n == 1 || trace == 0.0 {
        return trace;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = g.mul_vec(&v).expect("square");
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Product of the non-zero singular values of a full-rank matrix.
///
/// Equal to sqrt(|A′A|) for tall inputs and sqrt(|AA′|) for wide ones; it is
/// computed from the R factor of a QR decomposition of the tall orientation,
/// since R′R = A′A and forming the Gram matrix would square the conditioning.
pub fn volume(a: &Matrix) -> Result<f64> {
    let tall = if a.rows >= a.cols {
        a.clone()
    } else {
        a.transpose()
    };
    let (n, p) = (tall.rows, tall.cols);
    let sigma_max = largest_eigenvalue(&tall.thin_gram()).max(0.0).sqrt();
    let tolerance = RANK_TOLERANCE * sigma_max.powi(p as i32);
    let mut r = tall.data;
    householder(&mut r, n, p, &mut []);
    let vol: f64 = (0..p).map(|k| r[k * p + k].abs()).product();
    if !(vol > tolerance) {
        return Err(Error::RankDeficient {
            volume: vol,
            tolerance,
        });
    }
    Ok(vol)
}

/// Reduces the row-major n×p matrix `r` to upper-triangular form in place by
/// Householder reflections, applying the same reflections to `rhs` when it
/// has length n.
fn householder(r: &mut [f64], n: usize, p: usize, rhs: &mut [f64]) {
    for k in 0..p.min(n) {
        let norm = (k..n).map(|i| r[i * p + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[k * p + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| r[i * p + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let dot: f64 = (k..n).map(|i| v[i - k] * r[i * p + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                r[i * p + j] -= f * v[i - k];
            }
        }
        if rhs.len() == n {
            let dot: f64 = (k..n).map(|i| v[i - k] * rhs[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                rhs[i] -= f * v[i - k];
            }
        }
    }
}

/// Ordinary least squares by Householder QR.
///
/// Returns the coefficients and the residual variance with divisor n.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (n, p) = (x.rows, x.cols);
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but response has {} entries",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::Dimension(format!(
            "least squares needs more rows than columns, got {n}x{p}"
        )));
    }
    let mut r = x.data.clone();
    let mut qty = y.to_vec();
    householder(&mut r, n, p, &mut qty);
    let diag: Vec<f64> = (0..p).map(|k| r[k * p + k].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let tolerance = RANK_TOLERANCE * largest;
    if diag.iter().any(|d| !(*d > tolerance)) {
        return Err(Error::RankDeficient {
            volume: diag.iter().product(),
            tolerance,
        });
    }
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| r[k * p + j] * beta[j]).sum();
        beta[k] = (qty[k] - s) / r[k * p + k];
    }
    let ssr: f64 = qty[p..].iter().map(|e| e * e).sum();
    Ok((beta, ssr / n as f64))
}

/// Quadratic form g′Wg.
pub fn quadratic_form(g: &[f64], w: &Matrix) -> Result<f64> {
    let wg = w.mul_vec(g)?;
    if wg.len() != g.len() {
        return Err(Error::Dimension(format!(
            "weight matrix is {}x{} but vector has length {}",
            w.rows,
            w.cols,
            g.len()
        )));
    }
    Ok(g.iter().zip(&wg).map(|(a, b)| a * b).sum())
}
