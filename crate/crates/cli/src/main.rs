//! `mlt`: two-sample tests and Monte Carlo studies for samples of SPD
//! matrices.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use matrix_laplace_test::experiments::{
    self, ExperimentConfig, ExperimentKind, MatrixSpec, OutputFormat, ParamsConfig, ResultTable, DEFAULT_B_REPS,
};
use matrix_laplace_test::ingest;
use matrix_laplace_test::samplers::CovDivisor;
use matrix_laplace_test::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mlt", version, about = "Laplace-transform two-sample test for SPD matrix samples")]
struct Cli {
    /// Cap on worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test whether two matrix samples share a distribution.
    Test(TestArgs),
    /// Rejection-rate table over scenario pairs (config kind `power_table`).
    Power(RunArgs),
    /// Rejection rate against t degrees of freedom (config kind `df_sweep`).
    Sweep(RunArgs),
    /// Null percentiles of the scaled statistic (config kind `percentile_table`).
    Percentiles(RunArgs),
    /// Windowed covariance matrices of log returns of a price series.
    IngestReturns(IngestReturnsArgs),
    /// Per-group covariance matrices split into two samples.
    IngestGroups(IngestGroupsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Divisor {
    /// n − 1
    Unbiased,
    /// n
    N,
}

impl From<Divisor> for CovDivisor {
    fn from(d: Divisor) -> Self {
        match d {
            Divisor::Unbiased => CovDivisor::Unbiased,
            Divisor::N => CovDivisor::N,
        }
    }
}

#[derive(Debug, Args)]
struct TestArgs {
    /// First sample (matrix sample CSV: `dim,<d>` then one row-major matrix per line).
    #[arg(long)]
    x: PathBuf,
    /// Second sample, same format.
    #[arg(long)]
    y: PathBuf,
    /// Shape ν of the weight measure.
    #[arg(long, default_value_t = 1.0, conflicts_with = "config")]
    nu: f64,
    /// Σ: `identity`, `identity*<c>`, or a path to a matrix CSV.
    #[arg(long, default_value = "identity", conflicts_with = "config")]
    sigma: String,
    /// ω: `identity`, `identity*<c>`, or a path to a matrix CSV.
    #[arg(long, default_value = "identity", conflicts_with = "config")]
    omega: String,
    /// Bootstrap replications.
    #[arg(long)]
    boot: Option<usize>,
    /// Random seed.
    #[arg(long)]
    seed: u64,
    /// Write the result here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format for --out.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// `two_sample_test` config supplying a parameter grid and replication count.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Random seed; overrides the config's.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replications; overrides the config's.
    #[arg(long)]
    n_reps: Option<usize>,
    /// Output path; overrides the config's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; overrides the config's.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct IngestReturnsArgs {
    /// Price CSV: header row, timestamp in the first column.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated value columns (default: all).
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Price rows per covariance window.
    #[arg(long, default_value_t = 60)]
    window: usize,
    /// Covariance divisor.
    #[arg(long, value_enum, default_value = "unbiased")]
    divisor: Divisor,
    /// Output matrix sample CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestGroupsArgs {
    /// Records CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column holding the group label.
    #[arg(long)]
    group_col: String,
    /// Comma-separated feature columns (default: all others).
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Comma-separated labels routed to the first sample.
    #[arg(long, value_delimiter = ',', required_unless_present = "first_file", conflicts_with = "first_file")]
    first: Option<Vec<String>>,
    /// File listing labels routed to the first sample, one per line.
    #[arg(long)]
    first_file: Option<PathBuf>,
    /// Covariance divisor.
    #[arg(long, value_enum, default_value = "unbiased")]
    divisor: Divisor,
    /// Output for the first sample.
    #[arg(long)]
    out_a: PathBuf,
    /// Output for the second sample.
    #[arg(long)]
    out_b: PathBuf,
}

/// `identity`, `identity*<c>`, or a matrix file.
fn matrix_arg(text: &str) -> Result<MatrixSpec> {
    let t = text.trim();
    if t == "identity" || t.starts_with("identity*") {
        return Ok(MatrixSpec::Named(t.to_string()));
    }
    let m = ingest::load_matrix(Path::new(t))?;
    let rows = m.as_slice().chunks(m.cols()).map(<[f64]>::to_vec).collect();
    Ok(MatrixSpec::Rows(rows))
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run_test(a: TestArgs) -> Result<()> {
    let x = ingest::load_matrix_sample(&a.x)?;
    let y = ingest::load_matrix_sample(&a.y)?;
    let mut cfg = match &a.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.kind != ExperimentKind::TwoSampleTest {
                return Err(Error::Config {
                    path: "kind".into(),
                    message: "expected two_sample_test".into(),
                });
            }
            cfg
        }
        None => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::TwoSampleTest, a.seed);
            cfg.params_grid = vec![ParamsConfig {
                nu: a.nu,
                sigma: matrix_arg(&a.sigma)?,
                omega: matrix_arg(&a.omega)?,
            }];
            cfg
        }
    };
    cfg.seed = a.seed;
    if let Some(b) = a.boot {
        cfg.b_reps = Some(b);
    }
    cfg.b_reps.get_or_insert(DEFAULT_B_REPS);
    let result = experiments::run_two_sample_test(&cfg, &x, &y)?;
    for e in &result.entries {
        println!(
            "{}: L={:e} scaled={:e} p={:?} (n1={}, n2={}, B={})",
            e.label, e.statistic, e.scaled_statistic, e.p_value, result.n1, result.n2, result.b_reps
        );
    }
    if let Some(out) = &a.out {
        let text = match a.format {
            Format::Json => result.to_json()?,
            Format::Csv => result.to_table("X vs Y").to_csv()?,
        };
        write_output(out, &text)?;
    }
    Ok(())
}

fn run_experiment(kind: ExperimentKind, a: RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if cfg.kind != kind {
        return Err(Error::Config {
            path: "kind".into(),
            message: format!("this subcommand runs {kind:?}, config has {:?}", cfg.kind),
        });
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_reps {
        cfg.n_reps = n;
    }
    if let Some(f) = a.format {
        cfg.output_format = f.into();
    }
    if let Some(o) = a.out {
        cfg.output_path = Some(o);
    }
    let start = std::time::Instant::now();
    let table: ResultTable = experiments::run_table(&cfg)?;
    log::info!("finished in {:.1?}", start.elapsed());
    let text = table.render(cfg.output_format)?;
    match &cfg.output_path {
        Some(p) => write_output(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_ingest_returns(a: IngestReturnsArgs) -> Result<()> {
    let series = ingest::read_series_csv(&a.input, a.columns.as_deref())?;
    let sample = ingest::return_covariances(&series, a.window, a.divisor.into())?;
    ingest::save_matrix_sample(&sample, &a.out)?;
    println!(
        "{} price rows -> {} matrices of dimension {}",
        series.len(),
        sample.len(),
        sample.dim()
    );
    Ok(())
}

fn run_ingest_groups(a: IngestGroupsArgs) -> Result<()> {
    let records = ingest::read_grouped_csv(&a.input, &a.group_col, a.features.as_deref())?;
    let first: Vec<String> = match (&a.first, &a.first_file) {
        (Some(f), _) => f.iter().map(|s| s.trim().to_string()).collect(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect(),
        (None, None) => Vec::new(),
    };
    let (sa, sb) = ingest::group_covariances(&records, |l| first.iter().any(|f| f == l), a.divisor.into())?;
    ingest::save_matrix_sample(&sa, &a.out_a)?;
    ingest::save_matrix_sample(&sb, &a.out_b)?;
    println!("{} groups -> samples of {} and {}", sa.len() + sb.len(), sa.len(), sb.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_default_env()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Test(a) => run_test(a),
        Command::Power(a) => run_experiment(ExperimentKind::PowerTable, a),
        Command::Sweep(a) => run_experiment(ExperimentKind::DfSweep, a),
        Command::Percentiles(a) => run_experiment(ExperimentKind::PercentileTable, a),
        Command::IngestReturns(a) => run_ingest_returns(a),
        Command::IngestGroups(a) => run_ingest_groups(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
