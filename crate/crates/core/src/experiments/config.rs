//! Declarative experiment description, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::NcwParams;
use crate::samplers::{k2, k3, ScenarioKind, ScenarioSpec};
use crate::spd::{Matrix, SpdMatrix};

pub const DEFAULT_N_REPS: usize = 2000;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_B_REPS: usize = 999;
pub const DEFAULT_SWEEP_NOBS: usize = 500;
pub const DEFAULT_SWEEP_SIZES: (usize, usize) = (20, 20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PowerTable,
    DfSweep,
    PercentileTable,
    TwoSampleTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// A matrix written either by name or as a list of rows.
///
/// Names: `identity` (or `I`), `identity*<c>`, `zero`, `K2`, `K3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec::Named("identity".into())
    }
}

impl MatrixSpec {
    /// Dimension fixed by the spec itself, if any.
    pub fn intrinsic_dim(&self) -> Option<usize> {
        match self {
            MatrixSpec::Rows(r) => Some(r.len()),
            MatrixSpec::Named(n) => match n.trim() {
                "K2" => Some(2),
                "K3" => Some(3),
                _ => None,
            },
        }
    }

    pub fn resolve(&self, dim: Option<usize>) -> Result<Matrix> {
        let need_dim = || dim.ok_or_else(|| Error::InvalidShape("dimension required to expand a named matrix".into()));
        let m = match self {
            MatrixSpec::Rows(rows) => Matrix::from_rows(rows)?,
            MatrixSpec::Named(name) => match name.trim() {
                "K2" => k2().into_matrix(),
                "K3" => k3().into_matrix(),
                "identity" | "I" => Matrix::identity(need_dim()?),
                "zero" | "0" => Matrix::zeros(need_dim()?, need_dim()?),
                other => {
                    let scale = other
                        .strip_prefix("identity*")
                        .and_then(|c| c.trim().parse::<f64>().ok())
                        .ok_or_else(|| Error::InvalidShape(format!("unknown matrix `{other}`")))?;
                    Matrix::scaled_identity(need_dim()?, scale)
                }
            },
        };
        if let Some(d) = dim {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.rows(),
                });
            }
        }
        Ok(m)
    }
}

/// Serializable form of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Shape, degrees of freedom, or vector count, depending on `kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(default)]
    pub scale: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<MatrixSpec>,
}

impl ScenarioConfig {
    pub fn to_spec(&self, default_dim: Option<usize>) -> Result<ScenarioSpec> {
        let dim = self
            .dim
            .or_else(|| self.scale.intrinsic_dim())
            .or_else(|| self.omega.as_ref().and_then(MatrixSpec::intrinsic_dim))
            .or(default_dim);
        let scale = SpdMatrix::new(self.scale.resolve(dim)?)?;
        let d = scale.dim();
        let shape = || {
            self.shape
                .ok_or_else(|| Error::InvalidShape(format!("{:?} scenario needs `shape`", self.kind)))
        };
        let mut spec = match self.kind {
            ScenarioKind::WishartRate => ScenarioSpec::wishart_rate(shape()?, scale),
            ScenarioKind::InvWishart => ScenarioSpec::inv_wishart(shape()?, scale),
            ScenarioKind::Cmu => ScenarioSpec::cmu(d),
            ScenarioKind::Cmt => ScenarioSpec::cmt(shape()?, scale),
            ScenarioKind::ScaledStdWishart => {
                ScenarioSpec::scaled_std_wishart(shape()?, scale, self.scale_factor.unwrap_or(1.0))
            }
            ScenarioKind::Ncw => {
                let omega = match &self.omega {
                    Some(o) => SpdMatrix::new(o.resolve(Some(d))?)?,
                    None => SpdMatrix::zeros(d),
                };
                let n = shape()?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::InvalidShape(format!("vector count {n} must be a positive integer")));
                }
                ScenarioSpec::ncw(n as usize, scale, omega)
            }
        };
        if let Some(n) = self.nobs {
            spec = spec.with_nobs(n);
        }
        if let Some(name) = &self.name {
            spec = spec.with_name(name.clone());
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Serializable form of the weight-measure parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub nu: f64,
    #[serde(default)]
    pub sigma: MatrixSpec,
    #[serde(default)]
    pub omega: MatrixSpec,
}

impl ParamsConfig {
    pub fn isotropic(nu: f64, omega_scale: f64) -> Self {
        Self {
            nu,
            sigma: MatrixSpec::default(),
            omega: MatrixSpec::Named(format!("identity*{omega_scale}")),
        }
    }

    pub fn to_params(&self, dim: Option<usize>) -> Result<NcwParams> {
        let dim = dim
            .or_else(|| self.sigma.intrinsic_dim())
            .or_else(|| self.omega.intrinsic_dim());
        let sigma = SpdMatrix::new(self.sigma.resolve(dim)?)?;
        let omega = SpdMatrix::new(self.omega.resolve(Some(sigma.dim()))?)?;
        NcwParams::new(self.nu, sigma, omega)
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Matrix dimension for named matrices that do not fix one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub size_pairs: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params_grid: Vec<ParamsConfig>,
    #[serde(default = "default_n_reps")]
    pub n_reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// df-sweep grid of t degrees of freedom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_grid: Option<Vec<f64>>,
    /// df-sweep observations per covariance matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nobs: Option<usize>,
    /// two-sample test inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_reps: Option<usize>,
}

fn default_n_reps() -> usize {
    DEFAULT_N_REPS
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// `1, 21, 41, …, 501`.
pub fn default_df_grid() -> Vec<f64> {
    (0..=25).map(|k| (1 + 20 * k) as f64).collect()
}

fn config_err(path: impl Into<String>, e: impl ToString) -> Error {
    Error::Config {
        path: path.into(),
        message: e.to_string(),
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            dim: None,
            scenarios: Vec::new(),
            size_pairs: Vec::new(),
            params_grid: Vec::new(),
            n_reps: DEFAULT_N_REPS,
            alpha: DEFAULT_ALPHA,
            output_path: None,
            output_format: OutputFormat::Csv,
            df_grid: None,
            nobs: None,
            x_path: None,
            y_path: None,
            b_reps: None,
        }
    }

    /// Parses and validates; errors carry the offending field path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(path, e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(".", e))
    }

    /// Dimension implied by `dim`, the scenarios, or the parameter grid.
    pub fn effective_dim(&self) -> Option<usize> {
        self.dim
            .or_else(|| {
                self.scenarios
                    .iter()
                    .find_map(|s| s.dim.or_else(|| s.scale.intrinsic_dim()))
            })
            .or_else(|| {
                self.params_grid
                    .iter()
                    .find_map(|p| p.sigma.intrinsic_dim().or_else(|| p.omega.intrinsic_dim()))
            })
    }

    pub fn scenario_specs(&self) -> Result<Vec<ScenarioSpec>> {
        let dim = self.effective_dim();
        self.scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| s.to_spec(dim).map_err(|e| config_err(format!("scenarios[{i}]"), e)))
            .collect()
    }

    /// The parameter grid, or `ν = 1, Σ = I, ω = I` when none is given.
    pub fn params(&self, dim: usize) -> Result<Vec<NcwParams>> {
        if self.params_grid.is_empty() {
            return Ok(vec![NcwParams::isotropic(dim, 1.0, 1.0, 1.0)?]);
        }
        self.params_grid
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let params = p
                    .to_params(Some(dim))
                    .map_err(|e| config_err(format!("params_grid[{i}]"), e))?;
                Ok(params)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(config_err("n_reps", "must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.dim == Some(0) {
            return Err(config_err("dim", "must be positive"));
        }
        for (i, &(n1, n2)) in self.size_pairs.iter().enumerate() {
            if n1 == 0 || n2 == 0 {
                return Err(config_err(format!("size_pairs[{i}]"), "sizes must be positive"));
            }
        }
        let specs = self.scenario_specs()?;
        let dim = specs.first().map(|s| s.dim).or(self.effective_dim());
        if let Some(d) = dim {
            for (i, s) in specs.iter().enumerate() {
                if s.dim != d {
                    return Err(config_err(
                        format!("scenarios[{i}]"),
                        format!("dimension {} differs from {d}", s.dim),
                    ));
                }
            }
            self.params(d)?;
        }
        if let Some(grid) = &self.df_grid {
            if grid.is_empty() {
                return Err(config_err("df_grid", "must not be empty"));
            }
            if let Some(i) = grid.iter().position(|&v| !(v > 0.0)) {
                return Err(config_err(format!("df_grid[{i}]"), "degrees of freedom must be positive"));
            }
        }
        if self.b_reps == Some(0) {
            return Err(config_err("b_reps", "must be positive"));
        }
        match self.kind {
            ExperimentKind::PowerTable => {
                if self.scenarios.is_empty() {
                    return Err(config_err("scenarios", "power_table needs at least one scenario"));
                }
                if self.size_pairs.is_empty() {
                    return Err(config_err("size_pairs", "power_table needs at least one size pair"));
                }
            }
            ExperimentKind::PercentileTable => {
                if self.size_pairs.is_empty() {
                    return Err(config_err("size_pairs", "percentile_table needs at least one size pair"));
                }
                if self.scenarios.len() > 1 {
                    return Err(config_err("scenarios", "percentile_table takes at most one null scenario"));
                }
            }
            ExperimentKind::DfSweep => {
                if self.nobs.is_some_and(|n| n < 3) {
                    return Err(config_err("nobs", "must be at least 3"));
                }
            }
            ExperimentKind::TwoSampleTest => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_power_config() {
        let text = r#"
            kind = "power_table"
            seed = 7
            dim = 2
            size_pairs = [[20, 20], [20, 50]]
            n_reps = 100

            [[scenarios]]
            kind = "wishart_rate"
            shape = 2.5

            [[scenarios]]
            kind = "cmt"
            shape = 3
            scale = "K2"

            [[params_grid]]
            nu = 1

            [[params_grid]]
            nu = 2
            omega = "identity*2"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let specs = cfg.scenario_specs().unwrap();
        assert_eq!(specs[0].name, "W2(2.5, I2)");
        assert_eq!(specs[1].name, "CMT2(3, K2)");
        let params = cfg.params(2).unwrap();
        assert_eq!(params[1].to_string(), "nu=2, Sigma=I, omega=2I");
        assert_eq!(cfg.alpha, 0.05);
    }

    #[test]
    fn errors_name_the_field() {
        let text = "kind = \"power_table\"\nseed = 1\nsize_pairs = [[1, 2]]\n[[scenarios]]\nkind = \"wishart_rate\"\nshape = \"big\"\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "scenarios[0].shape"),
            other => panic!("{other:?}"),
        }
        let text = "kind = \"power_table\"\nseed = 1\ndim = 2\nsize_pairs = [[1, 2]]\n[[scenarios]]\nkind = \"wishart_rate\"\nshape = 0.1\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "scenarios[0]"),
            other => panic!("{other:?}"),
        }
        let text = "kind = \"df_sweep\"\nseed = 1\nbogus = 3\n";
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config { .. })));
        let text = "kind = \"df_sweep\"\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { message, .. }) => assert!(message.contains("seed"), "{message}"),
            other => panic!("{other:?}"),
        }
        let text = "kind = \"percentile_table\"\nseed = 1\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "size_pairs"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matrix_specs() {
        let id2 = MatrixSpec::Named("identity*2".into()).resolve(Some(3)).unwrap();
        assert_eq!(id2, Matrix::scaled_identity(3, 2.0));
        assert!(MatrixSpec::Named("identity".into()).resolve(None).is_err());
        assert!(MatrixSpec::Named("K2".into()).resolve(Some(3)).is_err());
        assert!(MatrixSpec::Named("eye".into()).resolve(Some(2)).is_err());
        let rows = MatrixSpec::Rows(vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(rows.resolve(None).unwrap(), Matrix::diag(&[2.0, 1.0]));
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::PercentileTable, 3);
        cfg.size_pairs = vec![(100, 100)];
        cfg.params_grid = vec![ParamsConfig::isotropic(1.0, 1.0), ParamsConfig::isotropic(5.0, 2.0)];
        cfg.dim = Some(2);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
