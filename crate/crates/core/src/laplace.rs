//! Laplace transforms: the closed form of the noncentral Wishart weight
//! measure, and empirical transforms of matrix samples.
//!
//! The weight transform is
//!
//! ```text
//! L(S) = exp(-tr(2 S (I + 2 Σ S)⁻¹ ω)) / det(I + 2 Σ S)^ν
//! ```
//!
//! `I + 2ΣS` is not symmetric unless Σ and S commute, so it is never
//! factored directly. With `Σ = C·Cᵀ` it is similar to the SPD matrix
//! `M = I + 2·Cᵀ·S·C`, which gives `det(I + 2ΣS) = det M` and
//! `tr(S (I + 2ΣS)⁻¹ ω) = tr(M⁻¹ · C⁻¹ω · S · C)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{self, small, Matrix, SpdMatrix};
use crate::statistic::MatrixSample;

/// Largest dimension evaluated on stack buffers.
const STACK_DIM: usize = 8;

/// Parameters `(ν, Σ, ω)` of the weight measure.
#[derive(Debug, Clone, PartialEq)]
pub struct NcwParams {
    nu: f64,
    sigma: SpdMatrix,
    omega: SpdMatrix,
}

impl NcwParams {
    pub fn new(nu: f64, sigma: SpdMatrix, omega: SpdMatrix) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParams(format!("nu must be positive, got {nu}")));
        }
        if sigma.dim() != omega.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: omega.dim(),
            });
        }
        if !sigma.is_strict() {
            return Err(Error::InvalidParams(
                "sigma must be strictly positive definite".into(),
            ));
        }
        Ok(Self { nu, sigma, omega })
    }

    /// `ν` with `Σ = σ·I` and `ω = w·I`, the parameterization used in the
    /// power study.
    pub fn isotropic(d: usize, nu: f64, sigma_scale: f64, omega_scale: f64) -> Result<Self> {
        if !(sigma_scale > 0.0) {
            return Err(Error::InvalidParams("sigma scale must be positive".into()));
        }
        if !(omega_scale >= 0.0) {
            return Err(Error::InvalidParams("omega scale must be nonnegative".into()));
        }
        Self::new(
            nu,
            SpdMatrix::identity(d).scale(sigma_scale),
            SpdMatrix::identity(d).scale(omega_scale),
        )
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn omega(&self) -> &SpdMatrix {
        &self.omega
    }

    pub fn kernel(&self) -> Result<LaplaceKernel> {
        LaplaceKernel::new(self)
    }

    pub fn to_record(&self) -> NcwParamsRecord {
        NcwParamsRecord {
            nu: self.nu,
            sigma: rows_of(self.sigma.matrix()),
            omega: rows_of(self.omega.matrix()),
        }
    }
}

impl fmt::Display for NcwParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nu={}, Sigma={}, omega={}",
            self.nu,
            matrix_label(self.sigma.matrix()),
            matrix_label(self.omega.matrix())
        )
    }
}

/// Serializable mirror of [`NcwParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcwParamsRecord {
    pub nu: f64,
    pub sigma: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.as_slice().chunks(m.cols()).map(<[f64]>::to_vec).collect()
}

/// `I`, `2I`, `0` for scaled identities, otherwise the row list.
pub(crate) fn matrix_label(m: &Matrix) -> String {
    let d = m.rows();
    let c = m.get(0, 0);
    let scaled_identity = (0..d).all(|i| (0..d).all(|j| m.get(i, j) == if i == j { c } else { 0.0 }));
    if scaled_identity {
        if c == 1.0 {
            "I".to_string()
        } else if c == 0.0 {
            "0".to_string()
        } else {
            format!("{c}I")
        }
    } else {
        format!("{:?}", rows_of(m))
    }
}

/// Precomputed evaluator of the weight transform for fixed parameters.
#[derive(Debug, Clone)]
pub struct LaplaceKernel {
    d: usize,
    nu: f64,
    /// Lower Cholesky factor of Σ; `None` when Σ = I.
    sigma_chol: Option<Vec<f64>>,
    /// `C⁻¹·ω` (just ω when Σ = I); `None` when ω = 0.
    omega_term: Option<Vec<f64>>,
}

impl LaplaceKernel {
    pub fn new(p: &NcwParams) -> Result<Self> {
        let d = p.dim();
        let sigma_is_identity = p.sigma.matrix() == &Matrix::identity(d);
        let chol = spd::cholesky(&p.sigma)?;
        let omega_zero = p.omega.matrix().max_abs() == 0.0;
        let omega_term = if omega_zero {
            None
        } else if sigma_is_identity {
            Some(p.omega.as_slice().to_vec())
        } else {
            // C⁻¹ω by forward substitution column by column.
            let l = chol.lower().as_slice();
            let mut g = p.omega.as_slice().to_vec();
            for c in 0..d {
                for i in 0..d {
                    let mut s = g[i * d + c];
                    for k in 0..i {
                        s -= l[i * d + k] * g[k * d + c];
                    }
                    g[i * d + c] = s / l[i * d + i];
                }
            }
            Some(g)
        };
        Ok(Self {
            d,
            nu: p.nu,
            sigma_chol: (!sigma_is_identity).then(|| chol.lower().as_slice().to_vec()),
            omega_term,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Evaluates the transform at the row-major PSD matrix `s`.
    #[inline]
    pub fn eval(&self, s: &[f64]) -> Result<f64> {
        debug_assert_eq!(s.len(), self.d * self.d);
        if self.d <= STACK_DIM {
            let mut buf = [0.0; 3 * STACK_DIM * STACK_DIM];
            self.eval_with(s, &mut buf)
        } else {
            let mut buf = vec![0.0; 3 * self.d * self.d];
            self.eval_with(s, &mut buf)
        }
    }

    /// Evaluates at `a + b` without materializing the sum elsewhere.
    #[inline]
    pub fn eval_sum(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let dd = self.d * self.d;
        if self.d <= STACK_DIM {
            let mut sum = [0.0; STACK_DIM * STACK_DIM];
            for i in 0..dd {
                sum[i] = a[i] + b[i];
            }
            self.eval(&sum[..dd])
        } else {
            let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            self.eval(&sum)
        }
    }

    fn eval_with(&self, s: &[f64], buf: &mut [f64]) -> Result<f64> {
        let d = self.d;
        let dd = d * d;
        let (m, rest) = buf.split_at_mut(dd);
        let (tmp, rhs) = rest.split_at_mut(dd);

        // m = I + 2·Cᵀ·S·C, with tmp = S·C
        match &self.sigma_chol {
            None => {
                for i in 0..dd {
                    m[i] = 2.0 * s[i];
                }
            }
            Some(c) => {
                for i in 0..d {
                    for j in 0..d {
                        let mut acc = 0.0;
                        for k in j..d {
                            acc += s[i * d + k] * c[k * d + j];
                        }
                        tmp[i * d + j] = acc;
                    }
                }
                for i in 0..d {
                    for j in 0..=i {
                        let mut acc = 0.0;
                        for k in i..d {
                            acc += c[k * d + i] * tmp[k * d + j];
                        }
                        m[i * d + j] = 2.0 * acc;
                        m[j * d + i] = 2.0 * acc;
                    }
                }
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (m[i * d + j] + m[j * d + i]);
                m[i * d + j] = v;
                m[j * d + i] = v;
            }
            m[i * d + i] += 1.0;
        }
        let scale = (0..d).fold(1.0_f64, |acc, i| acc.max(m[i * d + i]));
        small::cholesky_in_place(m, d, 1e-12 * scale)
            .map_err(|(pivot, value)| Error::PivotFailure { pivot, value })?;

        let mut diag_prod = 1.0;
        for i in 0..d {
            diag_prod *= m[i * d + i];
        }
        let logdet = if diag_prod.is_finite() && diag_prod > 0.0 {
            2.0 * diag_prod.ln()
        } else {
            2.0 * (0..d).map(|i| m[i * d + i].ln()).sum::<f64>()
        };

        let mut trace = 0.0;
        if let Some(g) = &self.omega_term {
            // rhs = g·S (Σ = I) or g·(S·C)
            let right: &[f64] = if self.sigma_chol.is_some() { tmp } else { s };
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for k in 0..d {
                        acc += g[i * d + k] * right[k * d + j];
                    }
                    rhs[i * d + j] = acc;
                }
            }
            let mut col = [0.0; STACK_DIM];
            let mut heap;
            let col: &mut [f64] = if d <= STACK_DIM {
                &mut col[..d]
            } else {
                heap = vec![0.0; d];
                &mut heap
            };
            for c in 0..d {
                for i in 0..d {
                    col[i] = rhs[i * d + c];
                }
                small::solve_in_place(m, d, col);
                trace += col[c];
            }
        }
        Ok((-2.0 * trace - self.nu * logdet).exp())
    }
}

/// Weight-measure Laplace transform at the PSD matrix `s`.
pub fn ncw_laplace(s: &SpdMatrix, p: &NcwParams) -> Result<f64> {
    if s.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: s.dim(),
        });
    }
    p.kernel()?.eval(s.as_slice())
}

/// `(1/n)·Σₖ exp(−tr(T·Xₖ))`.
pub fn empirical_laplace(sample: &MatrixSample, t: &SpdMatrix) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            found: t.dim(),
        });
    }
    let d = t.dim();
    let sum: f64 = sample
        .iter()
        .map(|x| (-small::trace_product(t.as_slice(), x.as_slice(), d)).exp())
        .sum();
    Ok(sum / sample.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> SpdMatrix {
        SpdMatrix::new(Matrix::from_rows(&[[v]]).unwrap()).unwrap()
    }

    fn spd(rows: &[&[f64]]) -> SpdMatrix {
        SpdMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    /// Direct evaluation with general (non-symmetric) Gaussian elimination
    /// on `I + 2ΣS`, d <= 3.
    fn laplace_direct(s: &Matrix, p: &NcwParams) -> f64 {
        let d = s.rows();
        let a = Matrix::identity(d)
            .add(&p.sigma().matrix().matmul(s).unwrap().scale(2.0))
            .unwrap();
        // Gauss-Jordan inverse and determinant with partial pivoting.
        let mut w = a.as_slice().to_vec();
        let mut inv = Matrix::identity(d).into_vec();
        let mut det = 1.0;
        for c in 0..d {
            let p_row = (c..d)
                .max_by(|&x, &y| w[x * d + c].abs().total_cmp(&w[y * d + c].abs()))
                .unwrap();
            if p_row != c {
                det = -det;
                for k in 0..d {
                    w.swap(c * d + k, p_row * d + k);
                    inv.swap(c * d + k, p_row * d + k);
                }
            }
            let piv = w[c * d + c];
            det *= piv;
            for k in 0..d {
                w[c * d + k] /= piv;
                inv[c * d + k] /= piv;
            }
            for r in 0..d {
                if r != c {
                    let f = w[r * d + c];
                    for k in 0..d {
                        w[r * d + k] -= f * w[c * d + k];
                        inv[r * d + k] -= f * inv[c * d + k];
                    }
                }
            }
        }
        let inv = Matrix::from_row_major(d, d, inv).unwrap();
        let arg = s
            .scale(2.0)
            .matmul(&inv)
            .unwrap()
            .matmul(p.omega().matrix())
            .unwrap()
            .trace();
        (-arg).exp() / det.powf(p.nu())
    }

    #[test]
    fn zero_argument_is_one() {
        let p = NcwParams::isotropic(3, 2.0, 1.0, 2.0).unwrap();
        assert_eq!(ncw_laplace(&SpdMatrix::zeros(3), &p).unwrap(), 1.0);
        let k3 = spd(&[&[1.0, -1.0, 0.95], &[-1.0, 5.0, 0.01], &[0.95, 0.01, 7.0]]);
        let p = NcwParams::new(1.5, k3.clone(), k3).unwrap();
        assert_eq!(ncw_laplace(&SpdMatrix::zeros(3), &p).unwrap(), 1.0);
    }

    #[test]
    fn scalar_reduction() {
        let p = NcwParams::isotropic(1, 1.0, 1.0, 0.0).unwrap();
        assert!((ncw_laplace(&scalar(0.5), &p).unwrap() - 0.5).abs() < 1e-15);
        // ν = 1/2, Σ = 1, ω = 1, S = 1: exp(-2/3) / √3
        let p = NcwParams::isotropic(1, 0.5, 1.0, 1.0).unwrap();
        let expected = (-2.0_f64 / 3.0).exp() / 3.0_f64.sqrt();
        assert!((ncw_laplace(&scalar(1.0), &p).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn matches_direct_nonsymmetric_route() {
        let sigma = spd(&[&[2.0, 0.3], &[0.3, 0.5]]);
        let omega = spd(&[&[1.0, 0.9], &[0.9, 1.0]]);
        let p = NcwParams::new(1.3, sigma, omega).unwrap();
        for s in [
            spd(&[&[0.7, 0.2], &[0.2, 0.4]]),
            spd(&[&[1.0, 1.0], &[1.0, 1.0]]),
            spd(&[&[3.0, -1.0], &[-1.0, 2.0]]),
        ] {
            let fast = ncw_laplace(&s, &p).unwrap();
            let direct = laplace_direct(s.matrix(), &p);
            assert!((fast - direct).abs() <= 1e-13 * direct.max(1e-300), "{fast} vs {direct}");
        }
        let k3 = spd(&[&[1.0, -1.0, 0.95], &[-1.0, 5.0, 0.01], &[0.95, 0.01, 7.0]]);
        let p = NcwParams::new(2.0, k3, SpdMatrix::identity(3).scale(2.0)).unwrap();
        let s = spd(&[&[0.3, 0.1, 0.0], &[0.1, 0.2, 0.05], &[0.0, 0.05, 0.1]]);
        let fast = ncw_laplace(&s, &p).unwrap();
        let direct = laplace_direct(s.matrix(), &p);
        assert!((fast - direct).abs() <= 1e-12 * direct, "{fast} vs {direct}");
    }

    #[test]
    fn underflow_is_zero_not_error() {
        let p = NcwParams::isotropic(1, 5.0, 1.0, 1.0).unwrap();
        assert_eq!(ncw_laplace(&scalar(1e200), &p).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let p = NcwParams::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            ncw_laplace(&SpdMatrix::identity(3), &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(NcwParams::isotropic(2, 0.0, 1.0, 1.0).is_err());
        assert!(NcwParams::isotropic(2, -1.0, 1.0, 1.0).is_err());
        assert!(NcwParams::new(1.0, SpdMatrix::zeros(2), SpdMatrix::identity(2)).is_err());
        assert!(NcwParams::new(1.0, SpdMatrix::identity(2), SpdMatrix::identity(3)).is_err());
        let p = NcwParams::isotropic(2, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(p.to_string(), "nu=1, Sigma=I, omega=2I");
    }

    #[test]
    fn empirical_examples() {
        let sample = MatrixSample::new(vec![scalar(1.0), scalar(3.0)]).unwrap();
        let v = empirical_laplace(&sample, &scalar(1.0)).unwrap();
        assert!((v - ((-1.0f64).exp() + (-3.0f64).exp()) / 2.0).abs() < 1e-16);
        assert_eq!(empirical_laplace(&sample, &SpdMatrix::zeros(1)).unwrap(), 1.0);
        let zeros = MatrixSample::new(vec![SpdMatrix::zeros(2)]).unwrap();
        assert_eq!(
            empirical_laplace(&zeros, &SpdMatrix::identity(2).scale(7.0)).unwrap(),
            1.0
        );
        let a = spd(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let t = spd(&[&[0.3, 0.1], &[0.1, 0.7]]);
        let single = MatrixSample::new(vec![a.clone()]).unwrap();
        let expected = (-spd::trace_product(t.matrix(), a.matrix()).unwrap()).exp();
        assert_eq!(empirical_laplace(&single, &t).unwrap(), expected);
    }
}
