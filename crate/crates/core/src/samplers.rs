//! Random generators for every matrix distribution in the power study.
//!
//! Conventions, for `d×d` matrices:
//!
//! * `W_d(a, Σ)` (rate form): density ∝ `det(X)^(a−(d+1)/2)·exp(−tr(ΣX))`,
//!   mean `a·Σ⁻¹`. Drawn as `½·C·W·Cᵀ` with `Σ⁻¹ = C·Cᵀ` and `W` a standard
//!   Wishart with `2a` degrees of freedom.
//! * Classical Wishart `W_d(n, Σ)`: distribution of `Σᵢ xᵢxᵢᵀ` for
//!   `xᵢ ~ N(0, Σ)`, mean `n·Σ`.
//! * `IW_d(a, Σ)`: inverse of classical `W_d(a, Σ⁻¹)`, mean `Σ/(a−d−1)`.
//! * `CMU_d`, `CMT_d(a, Σ)`: centered sample covariance (divisor `nobs−1`)
//!   of `nobs` uniform / multivariate-t vectors.

use std::fmt;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::laplace::matrix_label;
use crate::spd::{self, Matrix, SpdMatrix};

/// `K₂`: unit diagonal, off-diagonal `sin 0.7`, diagonal `cos 0.7`.
pub fn k2() -> SpdMatrix {
    let (c, s) = (0.7_f64.cos(), 0.7_f64.sin());
    SpdMatrix::strict(Matrix::from_rows(&[[c, s], [s, c]]).unwrap()).expect("K2 is positive definite")
}

pub fn k3() -> SpdMatrix {
    SpdMatrix::strict(
        Matrix::from_rows(&[[1.0, -1.0, 0.95], [-1.0, 5.0, 0.01], [0.95, 0.01, 7.0]]).unwrap(),
    )
    .expect("K3 is positive definite")
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn chi_squared<R: Rng + ?Sized>(df: f64, rng: &mut R) -> Result<f64> {
    let dist = ChiSquared::new(df).map_err(|e| Error::InvalidShape(format!("chi-square df {df}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Lower-triangular Bartlett factor `A` with `A·Aᵀ ~ W_d(df, I)`.
fn bartlett_factor<R: Rng + ?Sized>(df: f64, d: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        a[i * d + i] = chi_squared(df - i as f64, rng)?.sqrt();
        for j in 0..i {
            a[i * d + j] = standard_normal(rng);
        }
    }
    Ok(a)
}

/// `L·A` for lower-triangular `L`, `A`.
fn lower_mul(l: &[f64], a: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = 0.0;
            for k in j..=i {
                s += l[i * d + k] * a[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
    out
}

/// `B·Bᵀ·factor`, exactly symmetric.
fn gram(b: &[f64], d: usize, factor: f64) -> Matrix {
    let mut out = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum::<f64>() * factor;
            out.set(i, j, s);
            out.set(j, i, s);
        }
    }
    out
}

/// Inverse of a lower-triangular matrix (also lower-triangular).
fn lower_inverse(b: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; d * d];
    for j in 0..d {
        let bjj = b[j * d + j];
        if !(bjj != 0.0) || !bjj.is_finite() {
            return Err(Error::PivotFailure { pivot: j, value: bjj });
        }
        inv[j * d + j] = 1.0 / bjj;
        for i in (j + 1)..d {
            let s: f64 = (j..i).map(|k| b[i * d + k] * inv[k * d + j]).sum();
            inv[i * d + j] = -s / b[i * d + i];
        }
    }
    Ok(inv)
}

fn finish(m: Matrix) -> Result<SpdMatrix> {
    SpdMatrix::new(m)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn sample_mvn<R: Rng + ?Sized>(mean: &[f64], sigma: &SpdMatrix, rng: &mut R) -> Result<Vec<f64>> {
    check_dim(sigma.dim(), mean.len())?;
    let l = spd::cholesky(sigma)?;
    Ok(mvn_with(mean, l.lower().as_slice(), rng))
}

fn mvn_with<R: Rng + ?Sized>(mean: &[f64], l: &[f64], rng: &mut R) -> Vec<f64> {
    let d = mean.len();
    let z: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
    (0..d)
        .map(|i| mean[i] + (0..=i).map(|k| l[i * d + k] * z[k]).sum::<f64>())
        .collect()
}

/// Centered sample covariance of the rows of `obs` (`nobs × d`, row-major).
pub fn sample_covariance(obs: &[f64], d: usize, divisor: CovDivisor) -> Result<Matrix> {
    let nobs = obs.len() / d;
    if nobs < 2 {
        return Err(Error::TooShort { needed: 2, have: nobs });
    }
    let mut mean = vec![0.0; d];
    for row in obs.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nobs as f64);
    let mut cov = Matrix::zeros(d, d);
    for row in obs.chunks_exact(d) {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in 0..=i {
                let v = cov.get(i, j) + di * (row[j] - mean[j]);
                cov.set(i, j, v);
            }
        }
    }
    let div = match divisor {
        CovDivisor::Unbiased => (nobs - 1) as f64,
        CovDivisor::N => nobs as f64,
    };
    for i in 0..d {
        for j in 0..=i {
            let v = cov.get(i, j) / div;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok(cov)
}

/// Divisor of the sample covariance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovDivisor {
    /// `n − 1`
    #[default]
    Unbiased,
    /// `n`
    N,
}

pub fn sample_std_wishart<R: Rng + ?Sized>(df: f64, sigma: &SpdMatrix, rng: &mut R) -> Result<SpdMatrix> {
    ScenarioSpec::std_wishart(df, sigma.clone())
        .prepare()?
        .draw(rng)
}

pub fn sample_wishart_rate<R: Rng + ?Sized>(a: f64, sigma: &SpdMatrix, rng: &mut R) -> Result<SpdMatrix> {
    ScenarioSpec::wishart_rate(a, sigma.clone()).prepare()?.draw(rng)
}

pub fn sample_inv_wishart<R: Rng + ?Sized>(a: f64, sigma: &SpdMatrix, rng: &mut R) -> Result<SpdMatrix> {
    ScenarioSpec::inv_wishart(a, sigma.clone()).prepare()?.draw(rng)
}

pub fn sample_cov_uniform<R: Rng + ?Sized>(d: usize, nobs: usize, rng: &mut R) -> Result<SpdMatrix> {
    ScenarioSpec::cmu(d).with_nobs(nobs).prepare()?.draw(rng)
}

pub fn sample_cov_t<R: Rng + ?Sized>(
    df: f64,
    sigma: &SpdMatrix,
    nobs: usize,
    rng: &mut R,
) -> Result<SpdMatrix> {
    ScenarioSpec::cmt(df, sigma.clone()).with_nobs(nobs).prepare()?.draw(rng)
}

/// `Σᵢ yᵢyᵢᵀ` with `yᵢ ~ N(meansᵢ, Σ)`; one Gaussian vector per mean.
pub fn sample_ncw<R: Rng + ?Sized>(sigma: &SpdMatrix, means: &[Vec<f64>], rng: &mut R) -> Result<SpdMatrix> {
    if means.is_empty() {
        return Err(Error::InvalidShape("noncentral Wishart needs at least one vector".into()));
    }
    for m in means {
        check_dim(sigma.dim(), m.len())?;
    }
    let l = spd::cholesky(sigma)?;
    ncw_with(sigma.dim(), l.lower().as_slice(), means, rng)
}

fn ncw_with<R: Rng + ?Sized>(d: usize, l: &[f64], means: &[Vec<f64>], rng: &mut R) -> Result<SpdMatrix> {
    let mut acc = Matrix::zeros(d, d);
    for m in means {
        let y = mvn_with(m, l, rng);
        for i in 0..d {
            for j in 0..=i {
                let v = acc.get(i, j) + y[i] * y[j];
                acc.set(i, j, v);
                acc.set(j, i, v);
            }
        }
    }
    finish(acc)
}

/// Columns `m₁…m_r` with `Σ mᵢmᵢᵀ = ω`, from a semidefinite Cholesky
/// factorization that skips zero pivots.
pub fn noncentrality_means(omega: &SpdMatrix) -> Vec<Vec<f64>> {
    let d = omega.dim();
    let a = omega.as_slice();
    let tol = 1e-12 * (0..d).fold(0.0_f64, |m, i| m.max(a[i * d + i]));
    let mut l = vec![0.0; d * d];
    let mut cols = Vec::new();
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if diag <= tol {
            continue;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / ljj;
        }
        cols.push((0..d).map(|i| l[i * d + j]).collect());
    }
    cols
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    WishartRate,
    InvWishart,
    Cmu,
    Cmt,
    ScaledStdWishart,
    Ncw,
}

/// A distribution to draw sample matrices from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    pub dim: usize,
    /// Shape `a` (Wishart kinds), degrees of freedom (t, classical Wishart),
    /// or the number of Gaussian vectors (noncentral Wishart).
    pub shape: f64,
    pub scale: SpdMatrix,
    /// Observations per covariance matrix (covariance kinds).
    pub nobs: usize,
    /// Multiplier applied to classical Wishart draws.
    pub scale_factor: f64,
    /// Noncentrality (noncentral Wishart only).
    pub omega: Option<SpdMatrix>,
}

fn dim_suffix(name: &str, d: usize) -> String {
    format!("{name}{d}")
}

fn scale_label(m: &SpdMatrix) -> String {
    let d = m.dim();
    if let Some(named) = [(k2(), "K2"), (k3(), "K3")]
        .iter()
        .find(|(k, _)| k.dim() == d && k.matrix() == m.matrix())
        .map(|(_, n)| *n)
    {
        return named.to_string();
    }
    match matrix_label(m.matrix()).as_str() {
        "I" => format!("I{d}"),
        l if l.ends_with('I') && !l.starts_with('[') => format!("{l}{d}"),
        other => other.to_string(),
    }
}

impl ScenarioSpec {
    fn base(kind: ScenarioKind, shape: f64, scale: SpdMatrix) -> Self {
        let dim = scale.dim();
        let mut s = Self {
            name: String::new(),
            kind,
            dim,
            shape,
            scale,
            nobs: dim,
            scale_factor: 1.0,
            omega: None,
        };
        s.name = s.default_name();
        s
    }

    /// `W_d(a, Σ)` in rate form.
    pub fn wishart_rate(a: f64, sigma: SpdMatrix) -> Self {
        Self::base(ScenarioKind::WishartRate, a, sigma)
    }

    /// `IW_d(a, Σ)`.
    pub fn inv_wishart(a: f64, sigma: SpdMatrix) -> Self {
        Self::base(ScenarioKind::InvWishart, a, sigma)
    }

    /// `CMU_d` with `nobs = d`.
    pub fn cmu(d: usize) -> Self {
        Self::base(ScenarioKind::Cmu, 0.0, SpdMatrix::identity(d))
    }

    /// `CMT_d(df, Σ)` with `nobs = d`.
    pub fn cmt(df: f64, sigma: SpdMatrix) -> Self {
        Self::base(ScenarioKind::Cmt, df, sigma)
    }

    /// Classical `W_d(df, Σ)`.
    pub fn std_wishart(df: f64, sigma: SpdMatrix) -> Self {
        Self::base(ScenarioKind::ScaledStdWishart, df, sigma)
    }

    /// `factor · W_d(df, Σ)` (classical).
    pub fn scaled_std_wishart(df: f64, sigma: SpdMatrix, factor: f64) -> Self {
        let mut s = Self::base(ScenarioKind::ScaledStdWishart, df, sigma);
        s.scale_factor = factor;
        s.name = s.default_name();
        s
    }

    /// `NCW(n, Σ, ω)` by the Gaussian construction.
    pub fn ncw(n: usize, sigma: SpdMatrix, omega: SpdMatrix) -> Self {
        let mut s = Self::base(ScenarioKind::Ncw, n as f64, sigma);
        s.omega = Some(omega);
        s.name = s.default_name();
        s
    }

    pub fn with_nobs(mut self, nobs: usize) -> Self {
        self.nobs = nobs;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn default_name(&self) -> String {
        let d = self.dim;
        let sc = scale_label(&self.scale);
        match self.kind {
            ScenarioKind::WishartRate => format!("{}({}, {sc})", dim_suffix("W", d), self.shape),
            ScenarioKind::InvWishart => format!("{}({}, {sc})", dim_suffix("IW", d), self.shape),
            ScenarioKind::Cmu => dim_suffix("CMU", d),
            ScenarioKind::Cmt => format!("{}({}, {sc})", dim_suffix("CMT", d), self.shape),
            ScenarioKind::ScaledStdWishart if self.scale_factor == 1.0 => {
                format!("{}({}, {sc})", dim_suffix("Wstd", d), self.shape)
            }
            ScenarioKind::ScaledStdWishart => {
                format!("{}*{}({}, {sc})", self.scale_factor, dim_suffix("Wstd", d), self.shape)
            }
            ScenarioKind::Ncw => {
                let om = self.omega.as_ref().map_or("0".to_string(), scale_label);
                format!("{}({}, {sc}, {om})", dim_suffix("NCW", d), self.shape)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim as f64;
        check_dim(self.dim, self.scale.dim())?;
        let bad = |msg: String| Err(Error::InvalidShape(format!("{}: {msg}", self.name)));
        match self.kind {
            ScenarioKind::WishartRate if !(self.shape > (d - 1.0) / 2.0) => {
                bad(format!("shape {} must exceed (d-1)/2 = {}", self.shape, (d - 1.0) / 2.0))
            }
            ScenarioKind::InvWishart | ScenarioKind::ScaledStdWishart if !(self.shape > d - 1.0) => {
                bad(format!("degrees of freedom {} must exceed d-1 = {}", self.shape, d - 1.0))
            }
            ScenarioKind::Cmt if !(self.shape > 0.0) => bad(format!("t degrees of freedom {} must be positive", self.shape)),
            ScenarioKind::Cmu | ScenarioKind::Cmt if self.nobs < 2 => {
                bad(format!("nobs {} must be at least 2", self.nobs))
            }
            ScenarioKind::ScaledStdWishart if !(self.scale_factor > 0.0) => {
                bad(format!("scale factor {} must be positive", self.scale_factor))
            }
            ScenarioKind::Ncw => {
                let omega = self.omega.clone().unwrap_or_else(|| SpdMatrix::zeros(self.dim));
                check_dim(self.dim, omega.dim())?;
                let rank = noncentrality_means(&omega).len() as f64;
                if self.shape < 1.0 || self.shape.fract() != 0.0 || self.shape < rank {
                    bad(format!(
                        "vector count {} must be a positive integer no smaller than rank(omega) = {rank}",
                        self.shape
                    ))
                } else {
                    Ok(())
                }
            }
            _ if !self.scale.is_strict() && self.kind != ScenarioKind::Cmu => {
                bad("scale matrix must be strictly positive definite".into())
            }
            _ => Ok(()),
        }
    }

    /// Validates and precomputes factors for repeated draws.
    pub fn prepare(&self) -> Result<PreparedScenario> {
        self.validate()?;
        let d = self.dim;
        let factor = match self.kind {
            ScenarioKind::WishartRate | ScenarioKind::InvWishart => {
                let inv = spd::cholesky(&self.scale)?.inverse();
                spd::cholesky(&SpdMatrix::strict(inv)?)?.lower().as_slice().to_vec()
            }
            ScenarioKind::Cmu => Vec::new(),
            _ => spd::cholesky(&self.scale)?.lower().as_slice().to_vec(),
        };
        let means = match self.kind {
            ScenarioKind::Ncw => {
                let mut m = self
                    .omega
                    .as_ref()
                    .map(noncentrality_means)
                    .unwrap_or_default();
                m.resize(self.shape as usize, vec![0.0; d]);
                m
            }
            _ => Vec::new(),
        };
        Ok(PreparedScenario {
            spec: self.clone(),
            factor,
            means,
        })
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A validated scenario with its Cholesky factor cached.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    spec: ScenarioSpec,
    factor: Vec<f64>,
    means: Vec<Vec<f64>>,
}

impl PreparedScenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SpdMatrix> {
        let s = &self.spec;
        let d = s.dim;
        match s.kind {
            ScenarioKind::WishartRate => {
                let a = bartlett_factor(2.0 * s.shape, d, rng)?;
                finish(gram(&lower_mul(&self.factor, &a, d), d, 0.5))
            }
            ScenarioKind::ScaledStdWishart => {
                let a = bartlett_factor(s.shape, d, rng)?;
                finish(gram(&lower_mul(&self.factor, &a, d), d, s.scale_factor))
            }
            ScenarioKind::InvWishart => {
                // W = B·Bᵀ ~ W_d(a, Σ⁻¹), X = W⁻¹ = B⁻ᵀ·B⁻¹
                let a = bartlett_factor(s.shape, d, rng)?;
                let b_inv = lower_inverse(&lower_mul(&self.factor, &a, d), d)?;
                let mut x = Matrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..=i {
                        let v: f64 = (i..d).map(|k| b_inv[k * d + i] * b_inv[k * d + j]).sum();
                        x.set(i, j, v);
                        x.set(j, i, v);
                    }
                }
                finish(x)
            }
            ScenarioKind::Cmu => {
                let obs: Vec<f64> = (0..s.nobs * d).map(|_| rng.random::<f64>()).collect();
                finish(sample_covariance(&obs, d, CovDivisor::Unbiased)?)
            }
            ScenarioKind::Cmt => {
                let zero = vec![0.0; d];
                let mut obs = Vec::with_capacity(s.nobs * d);
                for _ in 0..s.nobs {
                    let z = mvn_with(&zero, &self.factor, rng);
                    let u = chi_squared(s.shape, rng)?;
                    let w = (u / s.shape).sqrt();
                    obs.extend(z.into_iter().map(|v| v / w));
                }
                finish(sample_covariance(&obs, d, CovDivisor::Unbiased)?)
            }
            ScenarioKind::Ncw => ncw_with(d, &self.factor, &self.means, rng),
        }
    }
}

/// One-shot draw from a scenario.
pub fn sample_scenario<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<SpdMatrix> {
    spec.prepare()?.draw(rng)
}
