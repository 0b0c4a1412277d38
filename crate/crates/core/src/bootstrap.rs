//! Warp-speed bootstrap power estimation and pooled-bootstrap p-values.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::NcwParams;
use crate::rng::RngStream;
use crate::samplers::ScenarioSpec;
use crate::statistic::{statistic_fast, MatrixSample};

/// Output of one warp-speed power run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpSpeedRun {
    pub n_reps: usize,
    pub alpha: f64,
    /// Statistic on each freshly drawn pair of samples.
    pub observed: Vec<f64>,
    /// Statistic on the single pooled resample of each replication.
    pub bootstrap: Vec<f64>,
    pub c_alpha: f64,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueResult {
    pub observed: f64,
    pub b_reps: usize,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<f64>>,
}

/// Sizes, replication count, level and seed of a power run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSetup {
    pub n1: usize,
    pub n2: usize,
    pub n_reps: usize,
    pub alpha: f64,
    pub seed: u64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Draws `n₁` then `n₂` matrices with replacement from the concatenation
/// of `x` and `y`.
pub fn pooled_resample<R: Rng + ?Sized>(
    x: &MatrixSample,
    y: &MatrixSample,
    rng: &mut R,
) -> Result<(MatrixSample, MatrixSample)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let (n1, n2) = (x.len(), y.len());
    let pool = n1 + n2;
    let mut pick = |n: usize| {
        let items = (0..n)
            .map(|_| {
                let i = rng.random_range(0..pool);
                if i < n1 {
                    x.items()[i].clone()
                } else {
                    y.items()[i - n1].clone()
                }
            })
            .collect();
        MatrixSample::new(items)
    };
    let xs = pick(n1)?;
    let ys = pick(n2)?;
    Ok((xs, ys))
}

/// Order statistic of rank `⌈(1−α)·N⌉` of the ascending-sorted values.
pub fn critical_value(stats: &[f64], alpha: f64) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::EmptyList);
    }
    check_alpha(alpha)?;
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // (1 − 0.05)·100 evaluates to 95.00000000000001; absorb that before ceil.
    let rank = (((1.0 - alpha) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Fraction of `observed` strictly above `c_alpha`.
pub fn rejection_rate(observed: &[f64], c_alpha: f64) -> f64 {
    observed.iter().filter(|&&l| l > c_alpha).count() as f64 / observed.len() as f64
}

/// Runs `setup.n_reps` replications, each on its own stream
/// `(seed, j)`: fresh samples from both scenarios, the statistic, one
/// pooled resample, and the statistic again.
pub fn warp_speed_power(
    spec_x: &ScenarioSpec,
    spec_y: &ScenarioSpec,
    params: &NcwParams,
    setup: &PowerSetup,
) -> Result<WarpSpeedRun> {
    if setup.n_reps == 0 {
        return Err(Error::InvalidReps);
    }
    if setup.n1 == 0 || setup.n2 == 0 {
        return Err(Error::EmptySample);
    }
    check_alpha(setup.alpha)?;
    let px = spec_x.prepare()?;
    let py = spec_y.prepare()?;

    let replicate = |j: usize| -> Result<(f64, f64)> {
        let mut rng = RngStream::new(setup.seed, j as u64);
        let x = MatrixSample::new(
            (0..setup.n1)
                .map(|_| px.draw(&mut rng))
                .collect::<Result<_>>()?,
        )?;
        let y = MatrixSample::new(
            (0..setup.n2)
                .map(|_| py.draw(&mut rng))
                .collect::<Result<_>>()?,
        )?;
        let observed = statistic_fast(&x, &y, params)?.raw;
        let (xs, ys) = pooled_resample(&x, &y, &mut rng)?;
        let boot = statistic_fast(&xs, &ys, params)?.raw;
        Ok((observed, boot))
    };

    let results: Vec<Result<(f64, f64)>> = (0..setup.n_reps).into_par_iter().map(replicate).collect();
    let mut observed = Vec::with_capacity(setup.n_reps);
    let mut bootstrap = Vec::with_capacity(setup.n_reps);
    for (j, r) in results.into_iter().enumerate() {
        let (o, b) = r.map_err(|e| Error::Replication {
            index: j as u64,
            source: Box::new(e),
        })?;
        observed.push(o);
        bootstrap.push(b);
    }
    let c_alpha = critical_value(&bootstrap, setup.alpha)?;
    Ok(WarpSpeedRun {
        n_reps: setup.n_reps,
        alpha: setup.alpha,
        rejection_rate: rejection_rate(&observed, c_alpha),
        observed,
        bootstrap,
        c_alpha,
    })
}

/// Pooled nonparametric bootstrap p-value `(1 + #{L*ᵇ ≥ L})/(B + 1)`.
pub fn bootstrap_pvalue(
    x: &MatrixSample,
    y: &MatrixSample,
    params: &NcwParams,
    b_reps: usize,
    seed: u64,
) -> Result<PValueResult> {
    bootstrap_pvalue_detailed(x, y, params, b_reps, seed, false)
}

/// As [`bootstrap_pvalue`], optionally keeping the replicate statistics.
pub fn bootstrap_pvalue_detailed(
    x: &MatrixSample,
    y: &MatrixSample,
    params: &NcwParams,
    b_reps: usize,
    seed: u64,
    keep_replicates: bool,
) -> Result<PValueResult> {
    if b_reps == 0 {
        return Err(Error::InvalidReps);
    }
    let observed = statistic_fast(x, y, params)?.raw;
    let results: Vec<Result<f64>> = (0..b_reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b as u64);
            let (xs, ys) = pooled_resample(x, y, &mut rng)?;
            Ok(statistic_fast(&xs, &ys, params)?.raw)
        })
        .collect();
    let mut replicates = Vec::with_capacity(b_reps);
    for (b, r) in results.into_iter().enumerate() {
        replicates.push(r.map_err(|e| Error::Replication {
            index: b as u64,
            source: Box::new(e),
        })?);
    }
    let exceed = replicates.iter().filter(|&&l| l >= observed).count();
    Ok(PValueResult {
        observed,
        b_reps,
        p_value: (1 + exceed) as f64 / (b_reps + 1) as f64,
        replicates: keep_replicates.then_some(replicates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::SpdMatrix;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn critical_value_rank() {
        let stats: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(critical_value(&stats, 0.05).unwrap(), 95.0);
        assert_eq!(critical_value(&[2.5; 17], 0.05).unwrap(), 2.5);
        assert_eq!(critical_value(&[3.0], 0.5).unwrap(), 3.0);
        assert!(matches!(critical_value(&[], 0.05), Err(Error::EmptyList)));
        assert!(matches!(critical_value(&[1.0], 0.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(critical_value(&[1.0], 1.0), Err(Error::InvalidAlpha(_))));
    }

    #[test]
    fn critical_value_normal_quantile() {
        let mut rng = RngStream::new(11, 0);
        let z: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let c = critical_value(&z, 0.05).unwrap();
        assert!((c - 1.645).abs() < 0.05, "{c}");
    }

    #[test]
    fn resample_shapes_and_replay() {
        let x = MatrixSample::new(vec![SpdMatrix::identity(2); 3]).unwrap();
        let y = MatrixSample::new(vec![SpdMatrix::identity(2); 5]).unwrap();
        let (a, b) = pooled_resample(&x, &y, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!((a.len(), b.len()), (3, 5));
        assert!(a.iter().chain(b.iter()).all(|m| m == &SpdMatrix::identity(2)));

        let x = MatrixSample::new((1..=4).map(|i| SpdMatrix::identity(1).scale(i as f64)).collect()).unwrap();
        let y = MatrixSample::new((5..=7).map(|i| SpdMatrix::identity(1).scale(i as f64)).collect()).unwrap();
        let trace = |seed| {
            let (a, b) = pooled_resample(&x, &y, &mut RngStream::new(seed, 0)).unwrap();
            a.iter().chain(b.iter()).map(|m| m.get(0, 0)).collect::<Vec<_>>()
        };
        assert_eq!(trace(3), trace(3));
        assert_ne!(trace(3), trace(4));
    }

    #[test]
    fn identical_samples_p_one() {
        let p = NcwParams::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let spec = ScenarioSpec::wishart_rate(2.5, SpdMatrix::identity(2));
        let prepared = spec.prepare().unwrap();
        let mut rng = RngStream::new(2, 0);
        let x = MatrixSample::new((0..10).map(|_| prepared.draw(&mut rng).unwrap()).collect()).unwrap();
        let r = bootstrap_pvalue(&x, &x.clone(), &p, 199, 7).unwrap();
        assert_eq!(r.observed, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(matches!(bootstrap_pvalue(&x, &x, &p, 0, 7), Err(Error::InvalidReps)));
    }

    #[test]
    fn separated_samples_small_p() {
        let p = NcwParams::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let x = MatrixSample::new(vec![SpdMatrix::identity(2).scale(0.1); 20]).unwrap();
        let y = MatrixSample::new(vec![SpdMatrix::identity(2).scale(10.0); 20]).unwrap();
        let r = bootstrap_pvalue_detailed(&x, &y, &p, 999, 3, true).unwrap();
        assert!(r.p_value <= 0.01, "{}", r.p_value);
        assert!(r.p_value >= 1.0 / 1000.0);
        assert_eq!(r.replicates.unwrap().len(), 999);
    }

    #[test]
    fn warp_speed_invariants() {
        let p = NcwParams::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let w = ScenarioSpec::wishart_rate(2.5, SpdMatrix::identity(2));
        let setup = PowerSetup {
            n1: 8,
            n2: 6,
            n_reps: 200,
            alpha: 0.05,
            seed: 99,
        };
        let run = warp_speed_power(&w, &w, &p, &setup).unwrap();
        assert_eq!(run.observed.len(), 200);
        assert_eq!(run.bootstrap.len(), 200);
        assert_eq!(run.c_alpha, critical_value(&run.bootstrap, 0.05).unwrap());
        assert_eq!(run.rejection_rate, rejection_rate(&run.observed, run.c_alpha));
        let again = warp_speed_power(&w, &w, &p, &setup).unwrap();
        assert_eq!(run, again);
        assert!(matches!(
            warp_speed_power(&w, &w, &p, &PowerSetup { n_reps: 0, ..setup }),
            Err(Error::InvalidReps)
        ));
    }
}
