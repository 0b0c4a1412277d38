//! Acceptance checks. Each test prints one `PASS`/`FAIL` line and then
//! asserts it. Run with `--nocapture` to see the lines.

use matrix_laplace_test::bootstrap::{bootstrap_pvalue, warp_speed_power, PowerSetup};
use matrix_laplace_test::experiments::{
    default_null_scenario, null_scaled_statistics, sweep_scenarios,
};
use matrix_laplace_test::ingest::{return_covariances, SeriesTable, Timestamp};
use matrix_laplace_test::samplers::{noncentrality_means, sample_ncw, sample_scenario, CovDivisor};
use matrix_laplace_test::spd::{validate_spd, Definiteness, ToleranceSet};
use matrix_laplace_test::{
    bootstrap::critical_value, ncw_laplace, statistic_fast, statistic_reference, Matrix, MatrixSample, NcwParams,
    RngStream, ScenarioSpec, SpdMatrix,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn report(id: &str, what: &str, pass: bool, detail: String) {
    println!("criterion {id} ({what}): {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn id2() -> SpdMatrix {
    SpdMatrix::identity(2)
}

fn w2() -> ScenarioSpec {
    ScenarioSpec::wishart_rate(2.5, id2())
}

fn power(x: &ScenarioSpec, y: &ScenarioSpec, nu: f64, n_reps: usize, seed: u64) -> f64 {
    let p = NcwParams::isotropic(2, nu, 1.0, 1.0).unwrap();
    let setup = PowerSetup {
        n1: 20,
        n2: 20,
        n_reps,
        alpha: 0.05,
        seed,
    };
    warp_speed_power(x, y, &p, &setup).unwrap().rejection_rate
}

fn binom_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn criterion_1_null_size() {
    let r = power(&w2(), &w2(), 1.0, 2000, 101);
    report("1", "null size", (0.02..=0.08).contains(&r), format!("rate={r:.4}, want [0.02, 0.08]"));
}

#[test]
fn criterion_2_strong_alternative() {
    let r = power(&w2(), &ScenarioSpec::cmu(2), 1.0, 2000, 102);
    report("2", "strong alternative", r >= 0.98, format!("rate={r:.4}, want >= 0.98"));
}

#[test]
fn criterion_3_moderate_alternative() {
    let iw = ScenarioSpec::inv_wishart(2.5, id2());
    let r1 = power(&w2(), &iw, 1.0, 2000, 103);
    let r2 = power(&w2(), &iw, 2.0, 2000, 104);
    let ok = (0.15..=0.30).contains(&r1) && (r2 - 0.24).abs() <= 0.08;
    report(
        "3",
        "moderate alternative",
        ok,
        format!("rate(nu=1)={r1:.4} want [0.15, 0.30]; rate(nu=2)={r2:.4} want 0.24 +/- 0.08"),
    );
}

#[test]
fn criterion_4_parameter_ordering() {
    let cmt = ScenarioSpec::cmt(5.0, id2());
    let n = 2000;
    let r1 = power(&w2(), &cmt, 1.0, n, 105);
    let r5 = power(&w2(), &cmt, 5.0, n, 106);
    let se = (binom_se(r1, n).powi(2) + binom_se(r5, n).powi(2)).sqrt();
    report(
        "4",
        "parameter ordering",
        r1 - r5 > 3.0 * se,
        format!("rate(nu=1)={r1:.4}, rate(nu=5)={r5:.4}, 3 SE={:.4}", 3.0 * se),
    );
}

#[test]
fn criterion_5_percentile_table() {
    let null = default_null_scenario(2);
    let n_reps = 1000;
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, (n, target)) in [(100usize, 0.0495), (1000, 0.0518)].into_iter().enumerate() {
        let pct = |nu: f64, seed: u64| {
            let p = NcwParams::isotropic(2, nu, 1.0, 1.0).unwrap();
            let stats = null_scaled_statistics(&null, n, n, &p, n_reps, seed).unwrap();
            critical_value(&stats, 0.05).unwrap()
        };
        let q1 = pct(1.0, 500 + 2 * k as u64);
        let q5 = pct(5.0, 501 + 2 * k as u64);
        let within = (q1 - target).abs() <= 0.2 * target;
        ok &= within && q5 < q1;
        lines.push(format!(
            "n={n}: q95(nu=1)={q1:.3e} want {target} +/- 20% [{}], q95(nu=5)={q5:.3e} < q95(nu=1) [{}]",
            if within { "ok" } else { "off" },
            if q5 < q1 { "ok" } else { "off" }
        ));
    }
    report("5", "percentile table", ok, lines.join("; "));
}

#[test]
fn criterion_6_df_sweep() {
    let n = 1000;
    let p = NcwParams::isotropic(2, 1.0, 1.0, 1.0).unwrap();
    let grid = [1.0, 101.0, 251.0, 501.0];
    let rates: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(i, &df)| {
            let (x, y) = sweep_scenarios(2, 500, df);
            let setup = PowerSetup {
                n1: 20,
                n2: 20,
                n_reps: n,
                alpha: 0.05,
                seed: 600 + i as u64,
            };
            warp_speed_power(&x, &y, &p, &setup).unwrap().rejection_rate
        })
        .collect();
    let monotone = rates.windows(2).all(|w| {
        let pbar = 0.5 * (w[0] + w[1]);
        w[1] <= w[0] + 3.0 * binom_se(pbar, n)
    });
    let ok = rates[0] >= 0.90 && (0.02..=0.09).contains(&rates[3]) && monotone;
    report(
        "6",
        "df sweep",
        ok,
        format!("rates at df {grid:?} = {rates:.4?}; want first >= 0.90, last in [0.02, 0.09], non-increasing within 3 SE"),
    );
}

fn random_sample(d: usize, n: usize, rng: &mut RngStream) -> MatrixSample {
    let spec = ScenarioSpec::wishart_rate(d as f64 / 2.0 + 0.5 + rng.random::<f64>() * 2.0, SpdMatrix::identity(d));
    MatrixSample::new((0..n).map(|_| sample_scenario(&spec, rng).unwrap()).collect()).unwrap()
}

fn random_spd(d: usize, rng: &mut RngStream, ridge: f64) -> SpdMatrix {
    let a: Vec<f64> = (0..d * d).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5).collect();
    let a = Matrix::from_row_major(d, d, a).unwrap();
    let m = a.matmul(&a.transpose()).unwrap().add(&Matrix::scaled_identity(d, ridge)).unwrap();
    SpdMatrix::new(m).unwrap()
}

#[test]
fn criterion_7a_reference_matches_fast() {
    let mut rng = RngStream::new(700, 0);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let n1 = rng.random_range(1..=6);
        let n2 = rng.random_range(1..=6);
        let x = random_sample(d, n1, &mut rng);
        let y = random_sample(d, n2, &mut rng);
        let nu = 0.25 + rng.random::<f64>() * 3.0;
        let p = NcwParams::new(nu, random_spd(d, &mut rng, 0.3), random_spd(d, &mut rng, 0.0)).unwrap();
        let a = statistic_reference(&x, &y, &p).unwrap().raw;
        let b = statistic_fast(&x, &y, &p).unwrap().raw;
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    report("7a", "reference = fast", worst <= 1e-10, format!("worst relative gap {worst:.3e} over 50 instances, want <= 1e-10"));
}

/// Means with `Σ mᵢmᵢᵀ = 2ω`, padded with zeros to `count` vectors.
fn oracle_means(omega: &SpdMatrix, count: usize) -> Vec<Vec<f64>> {
    let mut m = noncentrality_means(&omega.scale(2.0));
    assert!(m.len() <= count);
    m.resize(count, vec![0.0; omega.dim()]);
    m
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn criterion_7b_transform_matches_monte_carlo() {
    let mut rng = RngStream::new(701, 0);
    let draws = 200_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for (d, two_nu) in [(1usize, 1usize), (1, 2), (2, 2), (2, 4)] {
        let sigma = random_spd(d, &mut rng, 0.5);
        let omega = if two_nu == 1 && d == 1 {
            SpdMatrix::new(Matrix::diag(&[0.7])).unwrap()
        } else {
            random_spd(d, &mut rng, 0.2)
        };
        let s = random_spd(d, &mut rng, 0.3);
        let p = NcwParams::new(two_nu as f64 / 2.0, sigma.clone(), omega.clone()).unwrap();
        let exact = ncw_laplace(&s, &p).unwrap();
        let means = oracle_means(&omega, two_nu);
        let vals: Vec<f64> = (0..draws)
            .map(|_| {
                let t = sample_ncw(&sigma, &means, &mut rng).unwrap();
                let tr: f64 = t.as_slice().iter().zip(s.as_slice()).map(|(a, b)| a * b).sum();
                (-tr).exp()
            })
            .collect();
        let (mc, se) = mean_se(&vals);
        let good = (mc - exact).abs() <= 3.0 * se;
        ok &= good;
        lines.push(format!("(d={d}, 2nu={two_nu}) exact={exact:.5} mc={mc:.5} se={se:.1e}"));
    }
    report("7b", "transform vs MC", ok, lines.join("; "));
}

#[test]
fn criterion_7c_statistic_matches_monte_carlo() {
    let mut rng = RngStream::new(702, 0);
    let draws = 200_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, (d, two_nu)) in [(1usize, 1usize), (1, 3), (2, 2), (2, 3), (3, 4)].into_iter().enumerate() {
        let x = random_sample(d, 2 + i % 3, &mut rng);
        let y = random_sample(d, 3, &mut rng);
        let sigma = random_spd(d, &mut rng, 0.5);
        let omega = if d == 1 {
            SpdMatrix::new(Matrix::diag(&[0.4])).unwrap()
        } else {
            random_spd(d, &mut rng, 0.1)
        };
        let p = NcwParams::new(two_nu as f64 / 2.0, sigma.clone(), omega.clone()).unwrap();
        let exact = statistic_fast(&x, &y, &p).unwrap().raw;
        let means = oracle_means(&omega, two_nu);
        let emp = |s: &MatrixSample, t: &SpdMatrix| {
            s.iter()
                .map(|m| {
                    let tr: f64 = m.as_slice().iter().zip(t.as_slice()).map(|(a, b)| a * b).sum();
                    (-tr).exp()
                })
                .sum::<f64>()
                / s.len() as f64
        };
        let vals: Vec<f64> = (0..draws)
            .map(|_| {
                let t = sample_ncw(&sigma, &means, &mut rng).unwrap();
                (emp(&x, &t) - emp(&y, &t)).powi(2)
            })
            .collect();
        let (mc, se) = mean_se(&vals);
        let good = (mc - exact).abs() <= 3.0 * se;
        ok &= good;
        lines.push(format!("#{i} exact={exact:.3e} mc={mc:.3e} se={se:.1e}"));
    }
    report("7c", "statistic vs MC", ok, lines.join("; "));
}

#[test]
fn criterion_8_exact_trivia() {
    let mut rng = RngStream::new(800, 0);
    let x = random_sample(2, 7, &mut rng);
    let p = NcwParams::isotropic(2, 1.0, 1.0, 1.0).unwrap();
    let stat = statistic_fast(&x, &x, &p).unwrap().raw;
    let at_zero = ncw_laplace(&SpdMatrix::zeros(2), &p).unwrap();
    let pv = bootstrap_pvalue(&x, &x, &p, 999, 1).unwrap().p_value;
    let ok = stat.abs() <= 1e-12 && at_zero == 1.0 && pv == 1.0;
    report(
        "8",
        "exact trivia",
        ok,
        format!("L(X,X)={stat:e}, transform(0)={at_zero}, p(X,X)={pv}"),
    );
}

#[test]
fn criterion_9_ingest_windows() {
    let mut rng = RngStream::new(900, 0);
    let mut price = [30_000.0_f64, 2_000.0];
    let mut values = Vec::with_capacity(2880 * 2);
    for _ in 0..2880 {
        for p in price.iter_mut() {
            *p *= (0.001 * rng.sample::<f64, _>(StandardNormal)).exp();
        }
        values.extend_from_slice(&price);
    }
    let ts = (0..2880).map(|t| Timestamp::Integer(60 * t)).collect();
    let series = SeriesTable::new(ts, vec!["btc".into(), "eth".into()], values).unwrap();
    let sample = return_covariances(&series, 60, CovDivisor::Unbiased).unwrap();
    let tol = ToleranceSet::default();
    let all_psd = sample
        .iter()
        .all(|m| validate_spd(m.matrix(), Definiteness::Psd, &tol).is_ok());
    report(
        "9",
        "ingest windows",
        sample.len() == 48 && sample.dim() == 2 && all_psd,
        format!("{} matrices of dimension {}, all psd: {all_psd}; want 48", sample.len(), sample.dim()),
    );
}
