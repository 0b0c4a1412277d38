//! The two-sample statistic
//!
//! ```text
//! L = ∫ (L̂₁(T) − L̂₂(T))² dNCW(T)
//!   = (1/n₁²) ΣΣ 𝓛(Xᵢ+Xⱼ) + (1/n₂²) ΣΣ 𝓛(Yₖ+Yₗ) − (2/(n₁n₂)) ΣΣ 𝓛(Xᵢ+Yₖ)
//! ```
//!
//! where `𝓛` is the weight-measure transform from [`crate::laplace`].

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::accum::CompensatedSum;
use crate::error::{Error, Result};
use crate::laplace::{LaplaceKernel, NcwParams};
use crate::spd::SpdMatrix;

/// Row counts above which block rows are evaluated in parallel. Row sums are
/// always combined in index order, so the result does not depend on it.
const PAR_MIN_CELLS: usize = 4096;

/// An ordered sample of PSD matrices of common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    dim: usize,
    items: Vec<SpdMatrix>,
}

impl MatrixSample {
    pub fn new(items: Vec<SpdMatrix>) -> Result<Self> {
        let dim = items.first().ok_or(Error::EmptySample)?.dim();
        if let Some(bad) = items.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { dim, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[SpdMatrix] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpdMatrix> {
        self.items.iter()
    }

    pub fn into_items(self) -> Vec<SpdMatrix> {
        self.items
    }

    /// Total order used to fix which sample is summed first.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            self.items
                .iter()
                .zip(&other.items)
                .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()))
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

impl<'a> IntoIterator for &'a MatrixSample {
    type Item = &'a SpdMatrix;
    type IntoIter = std::slice::Iter<'a, SpdMatrix>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// A computed statistic together with its scaled form.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticValue {
    pub raw: f64,
    pub scaled: f64,
    pub n1: usize,
    pub n2: usize,
    pub params: NcwParams,
}

impl StatisticValue {
    fn new(raw: f64, n1: usize, n2: usize, params: &NcwParams) -> Self {
        Self {
            raw,
            scaled: raw * scale_factor(n1, n2),
            n1,
            n2,
            params: params.clone(),
        }
    }
}

/// `n₁n₂/(n₁+n₂)`.
pub fn scale_factor(n1: usize, n2: usize) -> f64 {
    (n1 as f64 * n2 as f64) / (n1 + n2) as f64
}

pub fn scaled_statistic(v: &StatisticValue) -> f64 {
    v.raw * scale_factor(v.n1, v.n2)
}

fn check_inputs(x: &MatrixSample, y: &MatrixSample, p: &NcwParams) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    for s in [x, y] {
        if s.dim() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: s.dim(),
            });
        }
    }
    Ok(())
}

fn check_dims(ms: &[&SpdMatrix], d: usize) -> Result<()> {
    match ms.iter().find(|m| m.dim() != d) {
        Some(m) => Err(Error::DimensionMismatch {
            expected: d,
            found: m.dim(),
        }),
        None => Ok(()),
    }
}

fn psi_with(
    k: &LaplaceKernel,
    xi: &SpdMatrix,
    xj: &SpdMatrix,
    yk: &SpdMatrix,
    yl: &SpdMatrix,
) -> Result<f64> {
    let l = |a: &SpdMatrix, b: &SpdMatrix| k.eval_sum(a.as_slice(), b.as_slice());
    let cross = l(xi, yk)? + l(xi, yl)? + l(xj, yk)? + l(xj, yl)?;
    Ok(l(xi, xj)? + l(yk, yl)? - 0.5 * cross)
}

/// The symmetric kernel `Ψ(Xᵢ, Xⱼ; Yₖ, Yₗ)`.
pub fn kernel_psi(
    xi: &SpdMatrix,
    xj: &SpdMatrix,
    yk: &SpdMatrix,
    yl: &SpdMatrix,
    p: &NcwParams,
) -> Result<f64> {
    check_dims(&[xi, xj, yk, yl], p.dim())?;
    psi_with(&p.kernel()?, xi, xj, yk, yl)
}

/// Quadruple-sum form, `O(n₁²n₂²)`. Kept as an independent check on
/// [`statistic_fast`].
pub fn statistic_reference(
    x: &MatrixSample,
    y: &MatrixSample,
    p: &NcwParams,
) -> Result<StatisticValue> {
    check_inputs(x, y, p)?;
    let k = p.kernel()?;
    let mut acc = CompensatedSum::new();
    for xi in x {
        for xj in x {
            for yk in y {
                for yl in y {
                    acc.add(psi_with(&k, xi, xj, yk, yl)?);
                }
            }
        }
    }
    let (n1, n2) = (x.len(), y.len());
    let raw = acc.value() / ((n1 * n1) as f64 * (n2 * n2) as f64);
    Ok(StatisticValue::new(raw, n1, n2, p))
}

/// Expanded form, `O(n₁² + n₂² + n₁n₂)` transform evaluations.
///
/// Blocks are summed row by row with compensated accumulation and rows are
/// combined in index order, so the value is independent of thread count.
/// Arguments are put in a canonical order first, which makes the result
/// bit-identical under swapping `x` and `y`. Negative roundoff is clamped
/// to zero.
pub fn statistic_fast(x: &MatrixSample, y: &MatrixSample, p: &NcwParams) -> Result<StatisticValue> {
    check_inputs(x, y, p)?;
    let k = p.kernel()?;
    let (first, second) = if x.canonical_cmp(y) == Ordering::Greater {
        (y, x)
    } else {
        (x, y)
    };
    let a = same_block(&k, first)?;
    let b = same_block(&k, second)?;
    let c = cross_block(&k, first, second)?;
    let raw = (a + b - 2.0 * c).max(0.0);
    Ok(StatisticValue::new(raw, x.len(), y.len(), p))
}

/// Mean of `𝓛(Xᵢ+Xⱼ)` over all ordered pairs, evaluating each unordered
/// pair once.
fn same_block(k: &LaplaceKernel, s: &MatrixSample) -> Result<f64> {
    let n = s.len();
    let items = s.items();
    let upper_row = |i: usize| -> Result<Vec<f64>> {
        let xi = items[i].as_slice();
        items[i..]
            .iter()
            .map(|xj| k.eval_sum(xi, xj.as_slice()))
            .collect()
    };
    let upper: Vec<Vec<f64>> = if n * n >= 2 * PAR_MIN_CELLS {
        (0..n).into_par_iter().map(upper_row).collect::<Result<_>>()?
    } else {
        (0..n).map(upper_row).collect::<Result<_>>()?
    };
    let value = |i: usize, j: usize| {
        if j >= i {
            upper[i][j - i]
        } else {
            upper[j][i - j]
        }
    };
    let row_sum = |i: usize| (0..n).map(|j| value(i, j)).collect::<CompensatedSum>().value();
    let rows: Vec<f64> = if n * n >= 2 * PAR_MIN_CELLS {
        (0..n).into_par_iter().map(row_sum).collect()
    } else {
        (0..n).map(row_sum).collect()
    };
    let total: CompensatedSum = rows.into_iter().collect();
    Ok(total.value() / (n as f64 * n as f64))
}

fn cross_block(k: &LaplaceKernel, x: &MatrixSample, y: &MatrixSample) -> Result<f64> {
    let (n1, n2) = (x.len(), y.len());
    let row = |xi: &SpdMatrix| -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for yk in y {
            acc.add(k.eval_sum(xi.as_slice(), yk.as_slice())?);
        }
        Ok(acc.value())
    };
    let rows: Vec<f64> = if n1 * n2 >= PAR_MIN_CELLS {
        x.items().par_iter().map(row).collect::<Result<_>>()?
    } else {
        x.iter().map(row).collect::<Result<_>>()?
    };
    let total: CompensatedSum = rows.into_iter().collect();
    Ok(total.value() / (n1 as f64 * n2 as f64))
}
