//! Config-driven Monte Carlo studies: power tables, degrees-of-freedom
//! sweeps, null percentile tables of the scaled statistic, and two-sample
//! tests over a parameter grid.
//!
//! Every table cell draws from its own seed `derive_seed(seed, k)` where
//! `k` is the cell's position in the full grid, so results do not depend on
//! which cells are computed or on the number of worker threads.

mod config;
mod table;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    default_df_grid, ExperimentConfig, ExperimentKind, MatrixSpec, OutputFormat, ParamsConfig, ScenarioConfig,
    DEFAULT_ALPHA, DEFAULT_B_REPS, DEFAULT_N_REPS, DEFAULT_SWEEP_NOBS, DEFAULT_SWEEP_SIZES,
};
pub use table::{ResultTable, TableMetadata, ValueKind};

use crate::bootstrap::{bootstrap_pvalue, critical_value, warp_speed_power, PowerSetup};
use crate::error::{Error, Result};
use crate::laplace::{NcwParams, NcwParamsRecord};
use crate::rng::{derive_seed, RngStream};
use crate::samplers::ScenarioSpec;
use crate::spd::SpdMatrix;
use crate::statistic::{scale_factor, statistic_fast, MatrixSample};

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config {
            path: "kind".into(),
            message: format!("expected {kind:?}, found {:?}", cfg.kind),
        });
    }
    cfg.validate()
}

pub fn size_label(n1: usize, n2: usize) -> String {
    format!("n1={n1}, n2={n2}")
}

fn records(params: &[NcwParams]) -> Vec<NcwParamsRecord> {
    params.iter().map(NcwParams::to_record).collect()
}

/// Rejection percentages for every scenario pair, size pair and parameter
/// setting. Rows are `(sizes; params; X scenario)`, columns the `Y`
/// scenario. With equal sizes only the upper triangle is computed.
pub fn run_power_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::PowerTable)?;
    let specs = cfg.scenario_specs()?;
    let dim = specs[0].dim;
    let params = cfg.params(dim)?;
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let s = specs.len();

    let mut row_labels = Vec::new();
    for &(n1, n2) in &cfg.size_pairs {
        for p in &params {
            for name in &names {
                row_labels.push(format!("{}; {p}; {name}", size_label(n1, n2)));
            }
        }
    }
    let mut table = ResultTable::empty(
        format!("rejection percentage at alpha={}", cfg.alpha),
        "sizes; params; X \\ Y",
        ValueKind::Percent,
        row_labels,
        names,
        TableMetadata::new(cfg.seed, cfg.n_reps, cfg.alpha, records(&params)),
    );

    let mut block = 0;
    for &(n1, n2) in &cfg.size_pairs {
        for p in &params {
            for x in 0..s {
                for y in 0..s {
                    if n1 == n2 && y < x {
                        continue;
                    }
                    let k = ((block * s + x) * s + y) as u64;
                    let setup = PowerSetup {
                        n1,
                        n2,
                        n_reps: cfg.n_reps,
                        alpha: cfg.alpha,
                        seed: derive_seed(cfg.seed, k),
                    };
                    let run = warp_speed_power(&specs[x], &specs[y], p, &setup)?;
                    log::info!(
                        "{}; {p}; {} vs {}: {:.1}%",
                        size_label(n1, n2),
                        specs[x].name,
                        specs[y].name,
                        100.0 * run.rejection_rate
                    );
                    table.cells[block * s + x][y] = Some(100.0 * run.rejection_rate);
                }
            }
            block += 1;
        }
    }
    Ok(table)
}

/// Scenario pair of the degrees-of-freedom sweep:
/// `W_d(nobs, I)/(nobs − 1)` against `CMT_d(df, I)` from `nobs` vectors.
pub fn sweep_scenarios(dim: usize, nobs: usize, df: f64) -> (ScenarioSpec, ScenarioSpec) {
    let id = SpdMatrix::identity(dim);
    let x = ScenarioSpec::scaled_std_wishart(nobs as f64, id.clone(), 1.0 / (nobs - 1) as f64);
    let y = ScenarioSpec::cmt(df, id).with_nobs(nobs);
    (x, y)
}

/// One rejection percentage per degrees of freedom (rows) and per
/// `(sizes; params)` combination (columns).
pub fn run_df_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::DfSweep)?;
    let dim = cfg.effective_dim().unwrap_or(2);
    let nobs = cfg.nobs.unwrap_or(DEFAULT_SWEEP_NOBS);
    let grid = cfg.df_grid.clone().unwrap_or_else(default_df_grid);
    let params = cfg.params(dim)?;
    let sizes = if cfg.size_pairs.is_empty() {
        vec![DEFAULT_SWEEP_SIZES]
    } else {
        cfg.size_pairs.clone()
    };
    let mut col_labels = Vec::new();
    for &(n1, n2) in &sizes {
        for p in &params {
            col_labels.push(format!("{}; {p}", size_label(n1, n2)));
        }
    }
    let ncols = col_labels.len();
    let mut table = ResultTable::empty(
        format!("rejection percentage vs t degrees of freedom, nobs={nobs}, alpha={}", cfg.alpha),
        "df",
        ValueKind::Percent,
        grid.iter().map(|df| df.to_string()).collect(),
        col_labels,
        TableMetadata::new(cfg.seed, cfg.n_reps, cfg.alpha, records(&params)),
    );
    for (r, &df) in grid.iter().enumerate() {
        let (x, y) = sweep_scenarios(dim, nobs, df);
        let mut c = 0;
        for &(n1, n2) in &sizes {
            for p in &params {
                let setup = PowerSetup {
                    n1,
                    n2,
                    n_reps: cfg.n_reps,
                    alpha: cfg.alpha,
                    seed: derive_seed(cfg.seed, (r * ncols + c) as u64),
                };
                let run = warp_speed_power(&x, &y, p, &setup)?;
                log::info!("df={df}; {}; {p}: {:.1}%", size_label(n1, n2), 100.0 * run.rejection_rate);
                table.cells[r][c] = Some(100.0 * run.rejection_rate);
                c += 1;
            }
        }
    }
    Ok(table)
}

/// Null scenario used when a percentile config names none:
/// `W_d(d/2 + 3/2, I_d)`, i.e. `W₂(2.5, I₂)` and `W₃(3, I₃)`.
pub fn default_null_scenario(dim: usize) -> ScenarioSpec {
    ScenarioSpec::wishart_rate(dim as f64 / 2.0 + 1.5, SpdMatrix::identity(dim))
}

/// `n_reps` draws of the scaled statistic with both samples from `spec`;
/// draw `j` uses stream `(seed, j)`.
pub fn null_scaled_statistics(
    spec: &ScenarioSpec,
    n1: usize,
    n2: usize,
    params: &NcwParams,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_reps == 0 {
        return Err(Error::InvalidReps);
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::EmptySample);
    }
    let prepared = spec.prepare()?;
    let results: Vec<Result<f64>> = (0..n_reps)
        .into_par_iter()
        .map(|j| {
            let mut rng = RngStream::new(seed, j as u64);
            let mut draw = |n: usize| -> Result<MatrixSample> {
                MatrixSample::new((0..n).map(|_| prepared.draw(&mut rng)).collect::<Result<_>>()?)
            };
            let x = draw(n1)?;
            let y = draw(n2)?;
            Ok(statistic_fast(&x, &y, params)?.scaled)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(j, r)| {
            r.map_err(|e| Error::Replication {
                index: j as u64,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Upper `alpha` percentile of the scaled statistic under the null, per
/// size pair (rows) and parameter setting (columns).
pub fn run_percentile_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::PercentileTable)?;
    let null = match cfg.scenario_specs()?.into_iter().next() {
        Some(s) => s,
        None => default_null_scenario(cfg.effective_dim().unwrap_or(2)),
    };
    let params = cfg.params(null.dim)?;
    let mut table = ResultTable::empty(
        format!(
            "{}th percentile of the scaled statistic under {}",
            100.0 * (1.0 - cfg.alpha),
            null.name
        ),
        "sizes \\ params",
        ValueKind::Value,
        cfg.size_pairs.iter().map(|&(a, b)| size_label(a, b)).collect(),
        params.iter().map(|p| p.to_string()).collect(),
        TableMetadata::new(cfg.seed, cfg.n_reps, cfg.alpha, records(&params)),
    );
    for (r, &(n1, n2)) in cfg.size_pairs.iter().enumerate() {
        for (c, p) in params.iter().enumerate() {
            let seed = derive_seed(cfg.seed, (r * params.len() + c) as u64);
            let stats = null_scaled_statistics(&null, n1, n2, p, cfg.n_reps, seed)?;
            let q = critical_value(&stats, cfg.alpha)?;
            log::info!("{}; {p}: {q}", size_label(n1, n2));
            table.cells[r][c] = Some(q);
        }
    }
    Ok(table)
}

/// Outcome of the test for one parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub label: String,
    pub params: NcwParamsRecord,
    pub statistic: f64,
    pub scaled_statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n1: usize,
    pub n2: usize,
    pub b_reps: usize,
    pub seed: u64,
    pub entries: Vec<TestEntry>,
}

impl TestResult {
    /// One row of p-values, one column per parameter setting.
    pub fn to_table(&self, row_label: &str) -> ResultTable {
        let mut t = ResultTable::empty(
            format!("bootstrap p-values, B={}", self.b_reps),
            "samples \\ params",
            ValueKind::Value,
            vec![row_label.to_string()],
            self.entries.iter().map(|e| e.label.clone()).collect(),
            TableMetadata::new(
                self.seed,
                self.b_reps,
                DEFAULT_ALPHA,
                self.entries.iter().map(|e| e.params.clone()).collect(),
            ),
        );
        t.cells[0] = self.entries.iter().map(|e| Some(e.p_value)).collect();
        t
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::parse("test result", e))?;
        s.push('\n');
        Ok(s)
    }
}

/// Statistic and pooled-bootstrap p-value of `x` against `y` for every
/// parameter setting; setting `k` resamples with seed `derive_seed(seed, k)`.
pub fn run_two_sample_test(cfg: &ExperimentConfig, x: &MatrixSample, y: &MatrixSample) -> Result<TestResult> {
    expect_kind(cfg, ExperimentKind::TwoSampleTest)?;
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let params = cfg.params(x.dim())?;
    let b_reps = cfg.b_reps.unwrap_or(DEFAULT_B_REPS);
    let factor = scale_factor(x.len(), y.len());
    let entries = params
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let r = bootstrap_pvalue(x, y, p, b_reps, derive_seed(cfg.seed, k as u64))?;
            Ok(TestEntry {
                label: p.to_string(),
                params: p.to_record(),
                statistic: r.observed,
                scaled_statistic: r.observed * factor,
                p_value: r.p_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestResult {
        n1: x.len(),
        n2: y.len(),
        b_reps,
        seed: cfg.seed,
        entries,
    })
}

/// Dispatches on `cfg.kind` for the table-producing kinds.
pub fn run_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    match cfg.kind {
        ExperimentKind::PowerTable => run_power_table(cfg),
        ExperimentKind::DfSweep => run_df_sweep(cfg),
        ExperimentKind::PercentileTable => run_percentile_table(cfg),
        ExperimentKind::TwoSampleTest => {
            let load = |p: &Option<std::path::PathBuf>, field: &str| {
                p.as_deref()
                    .ok_or_else(|| Error::Config {
                        path: field.into(),
                        message: "required for two_sample_test".into(),
                    })
                    .and_then(crate::ingest::load_matrix_sample)
            };
            let x = load(&cfg.x_path, "x_path")?;
            let y = load(&cfg.y_path, "y_path")?;
            Ok(run_two_sample_test(cfg, &x, &y)?.to_table("X vs Y"))
        }
    }
}
