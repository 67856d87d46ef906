//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them all).

use std::time::Instant;

use nalgebra::{Complex, DMatrix};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use urnkit::analysis::{
    burkholder_check, coin_flip_martingale, exact_central_moment, exact_distribution,
    fit_growth, mc_central_moment, projected_moment, moment_bound_case, urn_martingale, DpOptions,
};
use urnkit::corpus;
use urnkit::products::{exact_mean, square_sum_slope, ProductChain};
use urnkit::sim::{martingale_residual, run_batch, run_path, SimOptions, StreamKey};
use urnkit::spectral::{
    classify_urn, decompose_intensity, eigen_decompose, opnorm, principal_pair,
    verify_spectral_identities, SpectralOptions,
};
use urnkit::UrnError;

struct Criterion {
    name: &'static str,
    passed: bool,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self { name, passed: true }
    }

    fn check(&mut self, ok: bool, detail: &str) {
        if !ok {
            self.passed = false;
            println!("  criterion {}: violated: {detail}", self.name);
        }
    }

    fn finish(self) {
        println!(
            "criterion {}: {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" }
        );
        assert!(self.passed, "criterion {} failed", self.name);
    }
}

/// Criterion 1: the pathwise decomposition identity
/// X_n = F_{0,n} X0 + sum_l F_{l,n} Y_l holds with relative residual at most
/// 1e-8 on a recorded path of n = 1000 for each corpus urn, in under a
/// second per urn.
#[test]
fn criterion_01_pathwise_decomposition() {
    let mut c = Criterion::new("01 pathwise-decomposition");
    let opts = SimOptions {
        record_increments: true,
        ..Default::default()
    };
    for (name, spec) in corpus::balanced_corpus() {
        let urn = spec.clone().balanced().unwrap();
        let chain = ProductChain::for_urn(&urn);
        let start = Instant::now();
        let traj = run_path(&spec, 1_000, StreamKey::new(42, 0), &opts).unwrap();
        let residual = martingale_residual(&traj, &chain).unwrap();
        let elapsed = start.elapsed();
        c.check(
            residual <= 1e-8,
            &format!("{name}: residual {residual:.3e}"),
        );
        c.check(
            elapsed.as_secs_f64() < 1.0,
            &format!("{name}: took {elapsed:?}"),
        );
    }
    c.finish();
}

/// Criterion 2: on every simulated corpus path, |a . (X_n - E X_n)| is at
/// most 1e-8 w_n at every checkpoint, and the same for the leading spectral
/// projection when lambda_1 is simple.
#[test]
fn criterion_02_projection_conservation() {
    let mut c = Criterion::new("02 theorem-t0");
    for (name, spec) in corpus::balanced_corpus() {
        let urn = spec.clone().balanced().unwrap();
        let spectrum = decompose_intensity(&urn.intensity_matrix()).unwrap();
        let lambda1_simple = spectrum.components[0].alg_mult == 1;
        let batch = run_batch(&spec, 4_096, 64, 1337, &SimOptions::default()).unwrap();
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        let mean_of: std::collections::HashMap<u64, _> =
            means.iter().map(|(n, m)| (*n, m)).collect();
        for t in &batch.trajectories {
            assert!(t.tenability_ok, "{name}: unexpected tenability failure");
            for (n, x) in &t.checkpoints {
                let d = x - mean_of[n];
                let w = urn.total_weight(*n);
                c.check(
                    urn.activities().dot(&d).abs() <= 1e-8 * w,
                    &format!("{name}: activity projection at n = {n}"),
                );
                if lambda1_simple {
                    let dc = d.map(|v| Complex::new(v, 0.0));
                    let proj = (&spectrum.components[0].projection * dc).norm();
                    c.check(
                        proj <= 1e-8 * w,
                        &format!("{name}: leading projection at n = {n}: {proj:.3e}"),
                    );
                }
            }
        }
    }
    c.finish();
}

/// Criterion 3: the spectral identities (projection completeness,
/// orthogonality, commutation, nilpotency, and the rank-one form of the
/// leading projection for simple lambda_1) hold with residuals at most
/// 1e-8 (1 + ||A||) on the corpus and on 100 random integer 3x3 and 4x4
/// matrices.
#[test]
fn criterion_03_spectral_identities() {
    let mut c = Criterion::new("03 spectral-identities");
    for (name, spec) in corpus::balanced_corpus() {
        let urn = spec.clone().balanced().unwrap();
        let a = urn.intensity_matrix();
        let spectrum = decompose_intensity(&a).unwrap();
        let tol = 1e-8 * (1.0 + spectrum.matrix_norm);
        let residual = verify_spectral_identities(&spectrum, a.as_matrix()).max();
        c.check(residual <= tol, &format!("{name}: residual {residual:.3e}"));
        // Rank-one form of the leading projection.
        match principal_pair(urn.activities(), a.as_matrix(), &spectrum, urn.b()) {
            Ok(_) => c.check(
                spectrum.components[0].alg_mult == 1,
                &format!("{name}: principal pair on multiple lambda_1"),
            ),
            Err(UrnError::NotSimple { .. }) => c.check(
                spectrum.components[0].alg_mult > 1,
                &format!("{name}: spurious NotSimple"),
            ),
            Err(e) => c.check(false, &format!("{name}: {e}")),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let q = if case % 2 == 0 { 3 } else { 4 };
        let a = DMatrix::from_fn(q, q, |_, _| rng.random_range(-3i64..=3) as f64);
        match eigen_decompose(&a, &SpectralOptions::default()) {
            Ok(spectrum) => {
                let tol = 1e-8 * (1.0 + opnorm(&a));
                let residual = verify_spectral_identities(&spectrum, &a).max();
                c.check(
                    residual <= tol,
                    &format!("random case {case}: residual {residual:.3e}"),
                );
            }
            Err(e) => c.check(false, &format!("random case {case}: {e}")),
        }
    }
    c.finish();
}

/// Criterion 4: oracle equivalence for the classical Pólya urn with
/// X0 = (1,1): the enumeration oracle's variance of X_{n,1} equals
/// (n^2 + 2n)/12 exactly for n <= 12, its mean matches the product-chain
/// mean within 1e-10, and a Monte Carlo estimate with 1e5 replicates lands
/// within three bootstrap standard errors — all in under 30 seconds.
#[test]
fn criterion_04_oracle_equivalence() {
    let start = Instant::now();
    let mut c = Criterion::new("04 oracle-equivalence");
    let spec = corpus::classical_polya();
    let urn = spec.clone().balanced().unwrap();
    for n in 1..=12u64 {
        let dist = exact_distribution(&spec, n, &DpOptions::default()).unwrap();
        let mean = exact_mean(&urn, n);
        let moment = exact_central_moment(&dist, &mean, 2.0).unwrap();
        let expected = BigRational::new(BigInt::from(n * n + 2 * n), BigInt::from(12));
        c.check(
            moment.variance[0] == expected && moment.variance[1] == expected,
            &format!("exact variance at n = {n}"),
        );
        c.check(
            moment.mean_deviation <= 1e-10,
            &format!("mean deviation {:.3e} at n = {n}", moment.mean_deviation),
        );
    }
    let n = 12u64;
    let batch = run_batch(&spec, n, 100_000, 41, &SimOptions::default()).unwrap();
    let mut chain = ProductChain::for_urn(&urn);
    let means = chain.mean_series(&batch.checkpoints());
    let dist = exact_distribution(&spec, n, &DpOptions::default()).unwrap();
    let oracle = exact_central_moment(&dist, &exact_mean(&urn, n), 2.0).unwrap();
    let report = mc_central_moment(&batch, &means, 2.0).unwrap();
    let pt = report.grid.last().unwrap();
    c.check(
        (pt.estimate - oracle.norm_p).abs() <= 3.0 * pt.stderr,
        &format!(
            "MC {} vs oracle {} (se {})",
            pt.estimate, oracle.norm_p, pt.stderr
        ),
    );
    let elapsed = start.elapsed();
    c.check(
        elapsed.as_secs_f64() < 30.0,
        &format!("took {elapsed:?}"),
    );
    c.finish();
}

fn fitted_exponent(
    spec: &urnkit::UrnSpec,
    n_max: u64,
    replicates: u64,
    seed: u64,
    p: f64,
    beta: f64,
) -> (f64, f64) {
    let urn = spec.clone().balanced().unwrap();
    let batch = run_batch(spec, n_max, replicates, seed, &SimOptions::default()).unwrap();
    let mut chain = ProductChain::for_urn(&urn);
    let means = chain.mean_series(&batch.checkpoints());
    let report = mc_central_moment(&batch, &means, p).unwrap();
    let window: Vec<(u64, f64)> = report
        .series()
        .into_iter()
        .filter(|(n, _)| *n >= 128)
        .collect();
    let fit = fit_growth(&window, beta).unwrap();
    (fit.alpha_hat, fit.stderr)
}

/// Criterion 5: small-urn moment scaling. Friedman (0,1)-urn over the grid
/// 2^7..2^17 with 1e4 replicates: the fitted exponent is 0.50 +- 0.05 for
/// p = 2 and p = 4, in under five minutes.
#[test]
fn criterion_05_small_urn_scaling() {
    let start = Instant::now();
    let mut c = Criterion::new("05 small-urn-scaling");
    let spec = corpus::friedman();
    let urn = spec.clone().balanced().unwrap();
    let batch = run_batch(&spec, 1 << 17, 10_000, 42, &SimOptions::default()).unwrap();
    let mut chain = ProductChain::for_urn(&urn);
    let means = chain.mean_series(&batch.checkpoints());
    for p in [2.0, 4.0] {
        let report = mc_central_moment(&batch, &means, p).unwrap();
        let window: Vec<(u64, f64)> = report
            .series()
            .into_iter()
            .filter(|(n, _)| *n >= 128)
            .collect();
        let fit = fit_growth(&window, 0.0).unwrap();
        c.check(
            (fit.alpha_hat - 0.5).abs() <= 0.05,
            &format!("p = {p}: fitted {:.4} (se {:.4})", fit.alpha_hat, fit.stderr),
        );
        println!("  small urn p = {p}: alpha_hat = {:.4}", fit.alpha_hat);
    }
    let elapsed = start.elapsed();
    c.check(
        elapsed.as_secs_f64() < 300.0,
        &format!("took {elapsed:?}"),
    );
    c.finish();
}

/// Criterion 6: large-urn moment scaling. A = [[4,1],[1,4]], b = 5: the
/// fitted p = 2 exponent is 0.60 +- 0.05, and the lambda_2-projected series
/// fits 0.60 +- 0.05 as well.
#[test]
fn criterion_06_large_urn_scaling() {
    let mut c = Criterion::new("06 large-urn-scaling");
    let spec = corpus::large();
    let urn = spec.clone().balanced().unwrap();
    let (alpha, se) = fitted_exponent(&spec, 1 << 14, 10_000, 42, 2.0, 0.0);
    c.check(
        (alpha - 0.6).abs() <= 0.05,
        &format!("p = 2: fitted {alpha:.4} (se {se:.4})"),
    );
    println!("  large urn p = 2: alpha_hat = {alpha:.4}");
    // Projected lambda_2 series.
    let spectrum = decompose_intensity(&urn.intensity_matrix()).unwrap();
    let batch = run_batch(&spec, 1 << 14, 10_000, 42, &SimOptions::default()).unwrap();
    let mut chain = ProductChain::for_urn(&urn);
    let means = chain.mean_series(&batch.checkpoints());
    let idx = spectrum.component_index_at(1);
    let report = projected_moment(&batch, &spectrum.components[idx], &means, 2.0).unwrap();
    let window: Vec<(u64, f64)> = report
        .series()
        .into_iter()
        .filter(|(n, _)| *n >= 128)
        .collect();
    let fit = fit_growth(&window, 0.0).unwrap();
    c.check(
        (fit.alpha_hat - 0.6).abs() <= 0.05,
        &format!("projected lambda_2: fitted {:.4}", fit.alpha_hat),
    );
    println!("  large urn projected: alpha_hat = {:.4}", fit.alpha_hat);
    c.finish();
}

/// Criterion 7: critical-urn moment scaling. A = [[3,1],[1,3]], b = 4, with
/// the log power fixed at 1/2: the fitted exponent is 0.50 +- 0.05.
#[test]
fn criterion_07_critical_urn_scaling() {
    let mut c = Criterion::new("07 critical-urn-scaling");
    let spec = corpus::critical();
    let urn = spec.clone().balanced().unwrap();
    let spectrum = decompose_intensity(&urn.intensity_matrix()).unwrap();
    let cls = classify_urn(&spectrum, urn.b()).unwrap();
    let (_, log_power) = moment_bound_case(&cls);
    assert_eq!(log_power, 0.5);
    let (alpha, se) = fitted_exponent(&spec, 1 << 14, 10_000, 42, 2.0, log_power);
    c.check(
        (alpha - 0.5).abs() <= 0.05,
        &format!("fitted {alpha:.4} (se {se:.4})"),
    );
    println!("  critical urn: alpha_hat = {alpha:.4}");
    c.finish();
}

/// Criterion 8: the projected product-norm square sums over n in 2^7..2^14
/// have log-log slopes within +-0.05 of the three case exponents (1 for the
/// small case, 1 with a log factor for the critical case, 2 Re lambda / b
/// for the large case), and exactly 2.000 +- 0.01 for A = I.
#[test]
fn criterion_08_square_sum_cases() {
    let mut c = Criterion::new("08 square-sum-cases");
    let grid: Vec<u64> = (7..=14).map(|k| 1u64 << k).collect();
    // A = I (classical Pólya): exact telescoping, slope 2.000 +- 0.01.
    let urn = corpus::classical_polya().balanced().unwrap();
    let chain = ProductChain::for_urn(&urn);
    let s = decompose_intensity(&urn.intensity_matrix()).unwrap();
    let fit = square_sum_slope(&chain, &s.components[0], &grid).unwrap();
    c.check(
        (fit.slope - 2.0).abs() <= 0.01,
        &format!("A = I: slope {:.4}", fit.slope),
    );
    println!("  A = I: slope {:.4}", fit.slope);
    // Small case: Friedman lambda = -1, expected slope 1.
    let urn = corpus::friedman().balanced().unwrap();
    let chain = ProductChain::for_urn(&urn);
    let s = decompose_intensity(&urn.intensity_matrix()).unwrap();
    let fit = square_sum_slope(&chain, &s.components[1], &grid).unwrap();
    c.check(
        (fit.slope - 1.0).abs() <= 0.05,
        &format!("small case: slope {:.4}", fit.slope),
    );
    println!("  small case (lambda = -1): slope {:.4}", fit.slope);
    // Critical case: lambda = 2, b = 4, expected slope 1 with log factor.
    let urn = corpus::critical().balanced().unwrap();
    let chain = ProductChain::for_urn(&urn);
    let s = decompose_intensity(&urn.intensity_matrix()).unwrap();
    let fit = square_sum_slope(&chain, &s.components[1], &grid).unwrap();
    c.check(
        fit.log_power == 1.0 && (fit.slope - 1.0).abs() <= 0.05,
        &format!("critical case: slope {:.4}", fit.slope),
    );
    println!("  critical case (lambda = 2, b = 4): slope {:.4}", fit.slope);
    // Large case: lambda = 3, b = 5, expected slope 1.2.
    let urn = corpus::large().balanced().unwrap();
    let chain = ProductChain::for_urn(&urn);
    let s = decompose_intensity(&urn.intensity_matrix()).unwrap();
    let fit = square_sum_slope(&chain, &s.components[1], &grid).unwrap();
    c.check(
        (fit.slope - 1.2).abs() <= 0.05,
        &format!("large case: slope {:.4}", fit.slope),
    );
    println!("  large case (lambda = 3, b = 5): slope {:.4}", fit.slope);
    c.finish();
}

/// Criterion 9: the coin-flip martingale attains Burkholder equality at
/// p = 2 within Monte Carlo error (C_2 = 1), and urn-derived martingales at
/// p in {2, 4} with 1e4 replicates satisfy
/// ||X_n||_p <= (p - 1) ||S_n||_p within four standard errors.
#[test]
fn criterion_09_burkholder() {
    let mut c = Criterion::new("09 burkholder");
    let sample = coin_flip_martingale(1_000, 10_000, 271828, 2.0);
    let verdict = burkholder_check(&sample, 271828).unwrap();
    c.check(verdict.burkholder_ok, "coin flip: inequality violated");
    c.check(
        (verdict.cp_empirical - 1.0).abs() <= 4.0 * verdict.slack_se.max(1e-3),
        &format!("coin flip: C_2 = {:.4}", verdict.cp_empirical),
    );
    println!("  coin flip: C_2 = {:.4}", verdict.cp_empirical);
    let urn = corpus::friedman().balanced().unwrap();
    for p in [2.0, 4.0] {
        let sample = urn_martingale(&urn, 1_000, 10_000, 31415, p).unwrap();
        let verdict = burkholder_check(&sample, 31415).unwrap();
        c.check(
            verdict.burkholder_ok,
            &format!(
                "urn p = {p}: ||X||_p = {:.4} vs (p-1)||S||_p = {:.4} (se {:.1e})",
                verdict.xn_p,
                (p - 1.0) * verdict.sn_p,
                verdict.slack_se
            ),
        );
        println!(
            "  urn p = {p}: ||X||_p = {:.4}, (p-1)||S||_p = {:.4}",
            verdict.xn_p,
            (p - 1.0) * verdict.sn_p
        );
    }
    c.finish();
}

/// Criterion 10: reproducibility. The `report` subcommand run twice with the
/// same seed produces byte-identical output, and one worker thread produces
/// the same bytes as eight.
#[test]
fn criterion_10_reproducibility() {
    let mut c = Criterion::new("10 reproducibility");
    let spec_path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("specs")
        .join("large.json");
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &std::path::Path| {
        let status = urnkit::cli::dispatch([
            "urnkit",
            "report",
            spec_path.to_str().unwrap(),
            "--n-max",
            "16384",
            "--replicates",
            "512",
            "--seed",
            "42",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(status, 0, "report exited with {status}");
        std::fs::read(out).unwrap()
    };
    let first = run("1", &dir.path().join("a.txt"));
    let second = run("1", &dir.path().join("b.txt"));
    c.check(first == second, "same seed, same threads: outputs differ");
    let eight = run("8", &dir.path().join("c.txt"));
    c.check(first == eight, "1 vs 8 workers: outputs differ");
    println!("  report output: {} bytes, stable across runs and workers", first.len());
    c.finish();
}
