//! Dense real matrices and the handful of factorizations and norms the
//! estimators need. Dimensions here are small (p up to ~100), so everything
//! is plain row-major `f64` storage and textbook algorithms.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative off-diagonal Frobenius mass at which Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
/// Sweep cap for the Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Cholesky pivots at or below this multiple of `max|A|` are rejected.
pub const CHOLESKY_PIVOT_TOLERANCE: f64 = 1e-12;

/// Row-major dense matrix of finite `f64`.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    expected: (r, c),
                    found: (r, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_row_major(r, c, data)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// True when `A_ij == A_ji` bit for bit.
    pub fn is_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    fn first_asymmetry(&self) -> Option<(usize, usize)> {
        if !self.is_square() {
            return Some((0, 0));
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self[(i, j)] != self[(j, i)] {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: (self.cols, other.cols),
                found: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Square matrix with `A_ij == A_ji` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Wraps `m`, failing unless it is square and exactly symmetric.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch {
                expected: (m.rows, m.rows),
                found: m.shape(),
            });
        }
        match m.first_asymmetry() {
            None => Ok(SymMatrix(m)),
            Some((row, col)) => Err(Error::NotSymmetric { row, col }),
        }
    }

    /// `(A + Aᵀ) / 2`, evaluated as `0.5 * (a_ij + a_ji)` so both halves are
    /// bit-identical.
    pub fn symmetrize(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch {
                expected: (m.rows, m.rows),
                found: m.shape(),
            });
        }
        let n = m.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = m[(i, i)];
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(SymMatrix(out))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix(Matrix::diag(values))
    }

    /// `f` is evaluated on the upper triangle and mirrored.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Lower-triangular `L` with `L Lᵀ = A`.
pub fn cholesky(a: &SymMatrix) -> Result<Matrix> {
    let n = a.dim();
    let threshold = CHOLESKY_PIVOT_TOLERANCE * a.as_matrix().max_abs();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= threshold || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = libm::sqrt(d);
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Eigenvalues in descending order, by cyclic Jacobi rotations.
pub fn sym_eigvals(a: &SymMatrix) -> Result<Vec<f64>> {
    let (mut eig, _) = jacobi(a, false)?;
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// Unsorted eigenvalues and, if asked, the eigenvectors as the columns of a
/// row-major `n x n` buffer.
fn jacobi(a: &SymMatrix, vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    let mut m = a.as_matrix().as_slice().to_vec();
    let total = libm::sqrt(m.iter().map(|v| v * v).sum::<f64>());
    let target = JACOBI_TOLERANCE * total;
    let mut v = if vectors {
        Matrix::identity(n).data
    } else {
        Vec::new()
    };

    let off_mass = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        libm::sqrt(s)
    };

    // Diagonal corrections are collected in `z` and folded into `d` once per
    // sweep, which keeps rounding in the eigenvalues low.
    let mut d: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let mut b = d.clone();
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_mass(&m) <= target {
            converged = true;
            break;
        }
        let mut z = vec![0.0; n];
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (d[q] - d[p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let new_p = akp - s * (akq + tau * akp);
                    let new_q = akq + s * (akp - tau * akq);
                    m[k * n + p] = new_p;
                    m[p * n + k] = new_p;
                    m[k * n + q] = new_q;
                    m[q * n + k] = new_q;
                }
                if vectors {
                    for k in 0..n {
                        let g = v[k * n + p];
                        let h = v[k * n + q];
                        v[k * n + p] = g - s * (h + g * tau);
                        v[k * n + q] = h + s * (g - h * tau);
                    }
                }
            }
        }
        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            m[i * n + i] = d[i];
        }
    }
    if !converged && off_mass(&m) > target {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }
    Ok((d, v))
}

/// Largest singular value. Symmetric input uses `max |eigenvalue|`,
/// anything else goes through the eigenvalues of `AᵀA`.
///
/// The dominant eigenvalue is refined by a Rayleigh quotient evaluated in
/// compensated arithmetic, so integer-valued norms come out exact.
pub fn op_norm(a: &Matrix) -> Result<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Ok(0.0);
    }
    if a.is_symmetric() {
        return Ok(libm::fabs(dominant_eigenvalue(&SymMatrix(a.clone()))?));
    }
    let ata = a.transpose().matmul(a)?;
    let ata = SymMatrix::symmetrize(&ata)?;
    Ok(libm::sqrt(dominant_eigenvalue(&ata)?.max(0.0)))
}

fn dominant_eigenvalue(a: &SymMatrix) -> Result<f64> {
    let n = a.dim();
    let (d, v) = jacobi(a, true)?;
    let top = (0..n)
        .max_by(|&i, &j| libm::fabs(d[i]).total_cmp(&libm::fabs(d[j])))
        .expect("nonempty");
    if d[top] == 0.0 {
        return Ok(0.0);
    }
    let x: Vec<f64> = (0..n).map(|k| v[k * n + top]).collect();
    let refined = rayleigh_quotient(a.as_matrix(), &x);
    // Keep the refinement only when it is a genuine correction of rounding.
    if libm::fabs(refined - d[top]) <= 1e-8 * libm::fabs(d[top]) {
        Ok(refined)
    } else {
        Ok(d[top])
    }
}

/// `(x, y)` with `x + y = a + b` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `(x, y)` with `x + y = a * b` exactly.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, libm::fma(a, b, -p))
}

/// Sum of `a_i * b_i * c_i` as an unevaluated pair `hi + lo`.
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn new() -> Self {
        Compensated { hi: 0.0, lo: 0.0 }
    }

    fn add_triple(&mut self, a: f64, b: f64, c: f64) {
        let (p1, e1) = two_prod(a, b);
        let (p2, e2) = two_prod(p1, c);
        let (s, t) = two_sum(self.hi, p2);
        self.hi = s;
        self.lo += t + e2 + e1 * c;
    }
}

/// `xᵀAx / xᵀx` with roughly twice the working precision before the final
/// rounding.
fn rayleigh_quotient(a: &Matrix, x: &[f64]) -> f64 {
    let n = x.len();
    let mut num = Compensated::new();
    let mut den = Compensated::new();
    for i in 0..n {
        den.add_triple(x[i], x[i], 1.0);
        for j in 0..n {
            num.add_triple(x[i], a.data[i * n + j], x[j]);
        }
    }
    let q = num.hi / den.hi;
    let rem = libm::fma(-q, den.hi, num.hi) + num.lo - q * den.lo;
    q + rem / den.hi
}

pub fn fro_norm(a: &Matrix) -> f64 {
    libm::sqrt(a.data.iter().map(|v| v * v).sum())
}

/// Entry-wise max norm, `max |a_ij|`.
pub fn max_norm(a: &Matrix) -> f64 {
    a.max_abs()
}

/// Largest column Euclidean norm (the `1 -> 2` operator norm).
pub fn col_norm_1to2(a: &Matrix) -> f64 {
    (0..a.cols)
        .map(|j| libm::sqrt((0..a.rows).map(|i| a[(i, j)] * a[(i, j)]).sum()))
        .fold(0.0, f64::max)
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.zip_with(b, |x, y| x * y)
}

/// `Tr(A) / ||A||`; zero for the zero matrix.
pub fn effective_rank(a: &SymMatrix) -> Result<f64> {
    let norm = op_norm(a.as_matrix())?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(a.trace() / norm)
}
