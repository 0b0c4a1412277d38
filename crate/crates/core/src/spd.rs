//! Dense linear algebra for small symmetric positive (semi)definite matrices.
//!
//! Everything here is sized for `d` in the low single digits: storage is a
//! flat row-major `Vec<f64>` and factorizations are the textbook
//! unblocked algorithms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.cols.max(1)).collect();
        f.debug_struct("Matrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &rows)
            .finish()
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = 1.0;
        }
        m
    }

    pub fn scaled_identity(d: usize, scale: f64) -> Self {
        let mut m = Self::identity(d);
        m.data.iter_mut().for_each(|x| *x *= scale);
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        let mut m = Self::zeros(d, d);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * d + i] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
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

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self { data, ..*self })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self { data, ..*self })
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Self {
            data: self.data.iter().map(|x| x * factor).collect(),
            ..*self
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(())
    }
}

/// Numerical tolerances used when validating and factorizing.
///
/// `sym` is relative to `max(1, max|M_ij|)`; `pivot` and `psd` are relative
/// to the largest diagonal entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    pub sym: f64,
    pub pivot: f64,
    pub psd: f64,
    pub recon: f64,
    pub solve: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            sym: 1e-8,
            pivot: 1e-12,
            psd: 1e-8,
            recon: 1e-10,
            solve: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    /// Cholesky succeeds with strictly positive pivots.
    Strict,
    /// Positive semidefinite up to `ToleranceSet::psd`.
    Psd,
}

/// A validated symmetric positive (semi)definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    matrix: Matrix,
    definiteness: Definiteness,
}

impl SpdMatrix {
    pub fn identity(d: usize) -> Self {
        Self {
            matrix: Matrix::identity(d),
            definiteness: Definiteness::Strict,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            matrix: Matrix::zeros(d, d),
            definiteness: Definiteness::Psd,
        }
    }

    /// Validates with default tolerances, trying strict first and falling
    /// back to PSD.
    pub fn new(m: Matrix) -> Result<Self> {
        let tol = ToleranceSet::default();
        match validate_spd(&m, Definiteness::Strict, &tol) {
            Ok(s) => Ok(s),
            Err(Error::NotPositiveDefinite { .. }) => validate_spd(&m, Definiteness::Psd, &tol),
            Err(e) => Err(e),
        }
    }

    pub fn strict(m: Matrix) -> Result<Self> {
        validate_spd(&m, Definiteness::Strict, &ToleranceSet::default())
    }

    pub fn psd(m: Matrix) -> Result<Self> {
        validate_spd(&m, Definiteness::Psd, &ToleranceSet::default())
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn is_strict(&self) -> bool {
        self.definiteness == Definiteness::Strict
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn as_slice(&self) -> &[f64] {
        self.matrix.as_slice()
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Scales by a nonnegative factor; a zero factor yields a PSD matrix.
    pub fn scale(&self, factor: f64) -> SpdMatrix {
        assert!(factor >= 0.0, "SPD matrices are closed only under nonnegative scaling");
        let definiteness = if factor > 0.0 {
            self.definiteness
        } else {
            Definiteness::Psd
        };
        Self {
            matrix: self.matrix.scale(factor),
            definiteness,
        }
    }

    /// Sum of two PSD matrices; strict if either summand is strict.
    pub fn add(&self, other: &SpdMatrix) -> Result<SpdMatrix> {
        let definiteness = if self.is_strict() || other.is_strict() {
            Definiteness::Strict
        } else {
            Definiteness::Psd
        };
        Ok(Self {
            matrix: self.matrix.add(&other.matrix)?,
            definiteness,
        })
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: Matrix,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn reconstruct(&self) -> Matrix {
        self.lower
            .matmul(&self.lower.transpose())
            .expect("square factor")
    }

    pub fn logdet(&self) -> f64 {
        let d = self.dim();
        2.0 * (0..d).map(|i| self.lower.get(i, i).ln()).sum::<f64>()
    }

    /// Solves `M·X = B` by forward then backward substitution.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let d = self.dim();
        if b.rows != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: b.rows,
            });
        }
        let mut x = b.clone();
        let k = b.cols;
        let mut col = vec![0.0; d];
        for c in 0..k {
            for (i, v) in col.iter_mut().enumerate() {
                *v = x.data[i * k + c];
            }
            small::solve_in_place(self.lower.as_slice(), d, &mut col);
            for (i, v) in col.iter().enumerate() {
                x.data[i * k + c] = *v;
            }
        }
        Ok(x)
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> Matrix {
        let d = self.dim();
        let mut inv = self.solve(&Matrix::identity(d)).expect("square");
        symmetrize(&mut inv);
        inv
    }
}

fn symmetrize(m: &mut Matrix) {
    let d = m.rows;
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m.data[i * d + j] + m.data[j * d + i]);
            m.data[i * d + j] = v;
            m.data[j * d + i] = v;
        }
    }
}

fn max_diag(m: &Matrix) -> f64 {
    (0..m.rows).fold(f64::NEG_INFINITY, |acc, i| acc.max(m.get(i, i)))
}

/// Checks symmetry and definiteness, returning the symmetrized matrix.
pub fn validate_spd(m: &Matrix, mode: Definiteness, tol: &ToleranceSet) -> Result<SpdMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows,
            found: m.cols,
        });
    }
    if m.rows == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    if m.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let d = m.rows;
    let mut asym: f64 = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            asym = asym.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    let sym_tol = tol.sym * m.max_abs().max(1.0);
    if asym > sym_tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: sym_tol,
        });
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let scale = max_diag(&sym);

    match mode {
        Definiteness::Strict => {
            if scale <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    pivot: 0,
                    value: scale,
                });
            }
            let mut work = sym.data.clone();
            small::cholesky_in_place(&mut work, d, tol.pivot * scale)
                .map_err(|(pivot, value)| Error::NotPositiveDefinite { pivot, value })?;
        }
        Definiteness::Psd => {
            if sym.max_abs() > 0.0 {
                let shift = tol.psd * scale.max(0.0);
                let mut work = sym.data.clone();
                for i in 0..d {
                    work[i * d + i] += shift;
                }
                small::cholesky_in_place(&mut work, d, 0.0)
                    .map_err(|(pivot, _)| Error::NotPsd { pivot })?;
            }
        }
    }
    Ok(SpdMatrix {
        matrix: sym,
        definiteness: mode,
    })
}

pub fn cholesky(m: &SpdMatrix) -> Result<CholeskyFactor> {
    let d = m.dim();
    let scale = max_diag(&m.matrix);
    let mut work = m.matrix.data.clone();
    small::cholesky_in_place(&mut work, d, ToleranceSet::default().pivot * scale.max(0.0))
        .map_err(|(pivot, value)| Error::PivotFailure { pivot, value })?;
    Ok(CholeskyFactor {
        lower: Matrix {
            rows: d,
            cols: d,
            data: work,
        },
    })
}

pub fn logdet(m: &SpdMatrix) -> Result<f64> {
    Ok(cholesky(m)?.logdet())
}

pub fn solve_spd(m: &SpdMatrix, b: &Matrix) -> Result<Matrix> {
    cholesky(m)?.solve(b)
}

/// `tr(A·B) = Σᵢⱼ A[i][j]·B[j][i]`.
pub fn trace_product(a: &Matrix, b: &Matrix) -> Result<f64> {
    if !a.is_square() || a.rows != b.cols || a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            found: b.cols,
        });
    }
    Ok(small::trace_product(a.as_slice(), b.as_slice(), a.rows))
}

/// Slice-level kernels shared with the hot evaluation loop.
pub(crate) mod small {
    /// In-place Cholesky of a row-major `d×d` matrix. On success the lower
    /// triangle holds `L` and the strict upper triangle is zeroed. Fails with
    /// `(index, pivot)` when a pivot is `<= pivot_tol` or not finite.
    #[inline]
    pub fn cholesky_in_place(a: &mut [f64], d: usize, pivot_tol: f64) -> Result<(), (usize, f64)> {
        for j in 0..d {
            let mut diag = a[j * d + j];
            for k in 0..j {
                diag -= a[j * d + k] * a[j * d + k];
            }
            if !(diag > pivot_tol) || !diag.is_finite() {
                return Err((j, diag));
            }
            let ljj = diag.sqrt();
            a[j * d + j] = ljj;
            for i in (j + 1)..d {
                let mut s = a[i * d + j];
                for k in 0..j {
                    s -= a[i * d + k] * a[j * d + k];
                }
                a[i * d + j] = s / ljj;
            }
            for i in (j + 1)..d {
                a[j * d + i] = 0.0;
            }
        }
        Ok(())
    }

    /// Solves `L·Lᵀ·x = b` in place given the lower factor.
    #[inline]
    pub fn solve_in_place(l: &[f64], d: usize, b: &mut [f64]) {
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * d + k] * b[k];
            }
            b[i] = s / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in (i + 1)..d {
                s -= l[k * d + i] * b[k];
            }
            b[i] = s / l[i * d + i];
        }
    }

    #[inline]
    pub fn trace_product(a: &[f64], b: &[f64], d: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += a[i * d + j] * b[j * d + i];
            }
        }
        s
    }
}
