//! Command-line orchestration: spec parsing, subcommand dispatch, CSV
//! reports, and the end-to-end verification pipeline.
//!
//! Exit status: 0 when all verdicts pass, 1 when any verdict fails, 2 on
//! input errors (bad flags, unreadable or invalid spec files, operations on
//! specs they do not apply to).
//!
//! Output is deterministic: identical argv and spec file produce
//! byte-identical output, regardless of the worker thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::analysis::{
    burkholder_check, covariance_series, fit_growth, mc_central_moment, projected_moment,
    projected_bound_case, moment_bound_case, covariance_normalization_check, urn_martingale, MomentReport,
};
use crate::error::{Result, UrnError};
use crate::io::{file_digest, load_spec};
use crate::products::{product_norm_grid, square_sum_slope, verify_product_norm, ProductChain};
use crate::sim::{
    checkpoint_grid, conditional_mean_check, conditional_mean_exact, martingale_residual,
    one_step_sd, run_batch, run_path, SimOptions, StreamKey,
};
use crate::spectral::{
    classify_urn, decompose_intensity, principal_pair, verify_spectral_identities,
};
use crate::urn::{BalancedUrn, UrnSpec};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Resolved run configuration; echoed in every banner. The worker thread
/// count is execution detail, not configuration, and never appears in
/// output.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec_path: PathBuf,
    pub n_max: u64,
    pub replicates: u64,
    pub master_seed: u64,
    pub checkpoint_ratio: f64,
    pub moment_orders: Vec<f64>,
    pub exponent_tol: f64,
    pub fit_min_n: u64,
    pub allow_unbalanced: bool,
    pub record_increments: bool,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

#[derive(Parser, Debug)]
#[command(
    name = "urnkit",
    version,
    about = "Simulation and verification toolkit for balanced generalized Pólya urns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Urn spec file (JSON).
    spec: PathBuf,
    /// Number of draws per path.
    #[arg(long, default_value_t = 16_384)]
    n_max: u64,
    /// Number of independent replicate paths.
    #[arg(long, default_value_t = 4_096)]
    replicates: u64,
    /// Master seed; replicate k uses stream (seed, k).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Ratio of the geometric checkpoint grid.
    #[arg(long, default_value_t = 2.0)]
    checkpoint_ratio: f64,
    /// Moment order (repeatable; default 2).
    #[arg(long = "p", value_name = "ORDER")]
    moment_orders: Vec<f64>,
    /// Tolerance on fitted growth exponents.
    #[arg(long, default_value_t = 0.05)]
    exponent_tol: f64,
    /// Smallest n included in growth fits.
    #[arg(long, default_value_t = 128)]
    fit_min_n: u64,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = rayon default). Does not affect output bytes.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl SimArgs {
    fn into_config(self, allow_unbalanced: bool, record_increments: bool) -> RunConfig {
        let moment_orders = if self.moment_orders.is_empty() {
            vec![2.0]
        } else {
            self.moment_orders.clone()
        };
        RunConfig {
            spec_path: self.spec,
            n_max: self.n_max,
            replicates: self.replicates,
            master_seed: self.seed,
            checkpoint_ratio: self.checkpoint_ratio,
            moment_orders,
            exponent_tol: self.exponent_tol,
            fit_min_n: self.fit_min_n,
            allow_unbalanced,
            record_increments,
            out: self.out,
            threads: self.threads,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a spec file: well-formedness, balance, tenability.
    Validate { spec: PathBuf },
    /// Eigenvalue table (CSV) and urn classification.
    Spectrum {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact means E X_n on a geometric grid (CSV).
    Mean {
        spec: PathBuf,
        #[arg(long, default_value_t = 16_384)]
        n_max: u64,
        #[arg(long, default_value_t = 2.0)]
        checkpoint_ratio: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate replicate paths; one CSV row per (replicate, checkpoint).
    Simulate {
        #[command(flatten)]
        args: SimArgs,
        /// Record martingale increments along each path.
        #[arg(long)]
        record_increments: bool,
        /// Simulate an unbalanced spec (mean and bound machinery stays off).
        #[arg(long)]
        allow_unbalanced: bool,
    },
    /// Monte Carlo central moments with fitted vs theoretical exponents (CSV).
    Moments {
        #[command(flatten)]
        args: SimArgs,
    },
    /// Run every theorem/lemma check and print one verdict line each.
    Verify {
        #[command(flatten)]
        args: SimArgs,
    },
    /// Per-eigenvalue product-norm bound verdicts (CSV).
    VerifyBounds {
        spec: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        exponent_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: spectrum, means, simulation, moments, verdicts.
    Report {
        #[command(flatten)]
        args: SimArgs,
    },
}

/// Parses argv and runs the requested subcommand, returning the process
/// exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help text.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(all_passed) => {
            if all_passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Validate { spec } => cmd_validate(&spec),
        Command::Spectrum { spec, out } => cmd_spectrum(&spec, out.as_deref()),
        Command::Mean {
            spec,
            n_max,
            checkpoint_ratio,
            out,
        } => cmd_mean(&spec, n_max, checkpoint_ratio, out.as_deref()),
        Command::Simulate {
            args,
            record_increments,
            allow_unbalanced,
        } => {
            let cfg = args.into_config(allow_unbalanced, record_increments);
            with_pool(cfg.threads, || cmd_simulate(&cfg))
        }
        Command::Moments { args } => {
            let cfg = args.into_config(false, false);
            with_pool(cfg.threads, || cmd_moments(&cfg))
        }
        Command::Verify { args } => {
            let cfg = args.into_config(false, false);
            with_pool(cfg.threads, || cmd_verify(&cfg))
        }
        Command::VerifyBounds {
            spec,
            exponent_tol,
            out,
        } => cmd_verify_bounds(&spec, exponent_tol, out.as_deref()),
        Command::Report { args } => {
            let cfg = args.into_config(false, false);
            with_pool(cfg.threads, || cmd_report(&cfg))
        }
    }
}

fn with_pool<F: FnOnce() -> Result<bool> + Send>(threads: usize, f: F) -> Result<bool> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| UrnError::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn banner(cmd: &str, spec_path: &Path, extra: &str) -> Result<String> {
    let digest = file_digest(spec_path)?;
    Ok(format!(
        "# urnkit v{VERSION} | cmd={cmd} | spec={digest} | {extra}\n"
    ))
}

fn config_echo(cfg: &RunConfig) -> String {
    let orders = cfg
        .moment_orders
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("/");
    format!(
        "seed={} | n_max={} | replicates={} | checkpoint_ratio={} | p={} | exponent_tol={} | fit_min_n={}",
        cfg.master_seed,
        cfg.n_max,
        cfg.replicates,
        cfg.checkpoint_ratio,
        orders,
        cfg.exponent_tol,
        cfg.fit_min_n
    )
}

// ---------------------------------------------------------------------------
// validate / spectrum / mean
// ---------------------------------------------------------------------------

fn cmd_validate(path: &Path) -> Result<bool> {
    let spec = load_spec(path)?;
    let cert = spec.balance();
    let tenability = spec.tenability();
    let line = if cert.balanced {
        format!("balanced, b={}, {tenability}", cert.b)
    } else {
        format!(
            "not balanced (worst deviation {} around b-estimate {}), {tenability}",
            cert.worst_deviation, cert.b
        )
    };
    println!("{line}");
    Ok(true)
}

fn cmd_spectrum(path: &Path, out: Option<&Path>) -> Result<bool> {
    let spec = load_spec(path)?;
    let spectrum = decompose_intensity(&spec.intensity_matrix())?;
    let mut text = banner("spectrum", path, "seed=n/a")?;
    text.push_str("lambda_re,lambda_im,mult,nu,is_lambda1\n");
    for (idx, c) in spectrum.components.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            c.lambda.re,
            c.lambda.im,
            c.alg_mult,
            c.nu,
            idx == 0
        );
    }
    let cert = spec.balance();
    if cert.balanced {
        let cls = classify_urn(&spectrum, cert.b)?;
        let _ = writeln!(
            text,
            "# classification: {} (ratio={}, nu2={}, b={})",
            cls.kind, cls.ratio, cls.nu2, cert.b
        );
    } else {
        let _ = writeln!(
            text,
            "# classification: not balanced (worst deviation {})",
            cert.worst_deviation
        );
    }
    emit(out, &text)?;
    Ok(true)
}

fn cmd_mean(path: &Path, n_max: u64, ratio: f64, out: Option<&Path>) -> Result<bool> {
    let spec = load_spec(path)?;
    let urn = BalancedUrn::new(spec)?;
    let mut chain = ProductChain::for_urn(&urn);
    let grid = checkpoint_grid(n_max, ratio);
    let mut text = banner("mean", path, "seed=n/a")?;
    let _ = write!(text, "n");
    for color in urn.spec().colors() {
        let _ = write!(text, ",ex_{color}");
    }
    text.push('\n');
    for (n, mean) in chain.mean_series(&grid) {
        let _ = write!(text, "{n}");
        for v in mean.iter() {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }
    emit(out, &text)?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(cfg: &RunConfig) -> Result<bool> {
    let spec = load_spec(&cfg.spec_path)?;
    let opts = SimOptions {
        checkpoint_ratio: cfg.checkpoint_ratio,
        record_increments: cfg.record_increments,
        allow_unbalanced: cfg.allow_unbalanced,
        ..Default::default()
    };
    let batch = run_batch(&spec, cfg.n_max, cfg.replicates, cfg.master_seed, &opts)?;
    let mut text = banner("simulate", &cfg.spec_path, &config_echo(cfg))?;
    let _ = write!(text, "replicate,n");
    for color in spec.colors() {
        let _ = write!(text, ",x_{color}");
    }
    text.push('\n');
    for t in &batch.trajectories {
        for (n, x) in &t.checkpoints {
            let _ = write!(text, "{},{n}", t.replicate);
            for v in x.iter() {
                let _ = write!(text, ",{v}");
            }
            text.push('\n');
        }
    }
    for t in &batch.trajectories {
        if let Some(v) = &t.violation {
            let _ = writeln!(
                text,
                "# replicate {}: tenability violation at step {}: {}",
                t.replicate, v.step, v.reason
            );
        }
    }
    emit(cfg.out.as_deref(), &text)?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

struct MomentsOutcome {
    csv: String,
    fits_ok: bool,
}

fn moments_table(cfg: &RunConfig, spec: &UrnSpec) -> Result<MomentsOutcome> {
    let urn = BalancedUrn::new(spec.clone())?;
    let spectrum = decompose_intensity(&urn.intensity_matrix())?;
    let classification = classify_urn(&spectrum, urn.b())?;
    let (exponent, log_power) = moment_bound_case(&classification);
    let opts = SimOptions {
        checkpoint_ratio: cfg.checkpoint_ratio,
        ..Default::default()
    };
    let batch = run_batch(spec, cfg.n_max, cfg.replicates, cfg.master_seed, &opts)?;
    let mut chain = ProductChain::for_urn(&urn);
    let means = chain.mean_series(&batch.checkpoints());

    let mut csv = String::from("n,p,estimate,stderr,theoretical_exponent,fitted_exponent\n");
    let mut fits_ok = true;
    for &p in &cfg.moment_orders {
        let report = mc_central_moment(&batch, &means, p)?;
        let window: Vec<(u64, f64)> = report
            .series()
            .into_iter()
            .filter(|(n, _)| *n >= cfg.fit_min_n)
            .collect();
        let fit = fit_growth(&window, log_power)?;
        if fit.alpha_hat > exponent + cfg.exponent_tol {
            fits_ok = false;
        }
        for pt in &report.grid {
            let _ = writeln!(
                csv,
                "{},{p},{},{},{exponent},{}",
                pt.n, pt.estimate, pt.stderr, fit.alpha_hat
            );
        }
    }
    Ok(MomentsOutcome { csv, fits_ok })
}

fn cmd_moments(cfg: &RunConfig) -> Result<bool> {
    let spec = load_spec(&cfg.spec_path)?;
    let outcome = moments_table(cfg, &spec)?;
    let mut text = banner("moments", &cfg.spec_path, &config_echo(cfg))?;
    text.push_str(&outcome.csv);
    emit(cfg.out.as_deref(), &text)?;
    Ok(outcome.fits_ok)
}

// ---------------------------------------------------------------------------
// verify-bounds
// ---------------------------------------------------------------------------

fn bounds_table(spec: &UrnSpec, exponent_tol: f64) -> Result<(String, bool)> {
    let urn = BalancedUrn::new(spec.clone())?;
    let chain = ProductChain::for_urn(&urn);
    let spectrum = decompose_intensity(&urn.intensity_matrix())?;
    let mut csv = String::from(
        "lambda_re,lambda_im,nu,exponent_theoretical,log_power,exponent_fitted,\
         constant_estimate,constant_stability,square_sum_slope,square_sum_expected,pass\n",
    );
    let mut all_ok = true;
    let square_sum_grid: Vec<u64> = (7..=14).map(|k| 1u64 << k).collect();
    for c in &spectrum.components {
        let grid = product_norm_grid(&chain, c.lambda.norm(), 3, 8);
        let verdict = verify_product_norm(&chain, c, &grid, exponent_tol, 10.0)?;
        let sum_fit = square_sum_slope(&chain, c, &square_sum_grid)?;
        let pass = verdict.pass && (sum_fit.slope - sum_fit.expected).abs() <= exponent_tol;
        all_ok &= pass;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.lambda.re,
            c.lambda.im,
            c.nu,
            verdict.exponent_theoretical,
            verdict.log_power_theoretical,
            verdict.exponent_fitted,
            verdict.constant_estimate,
            verdict.constant_stability,
            sum_fit.slope,
            sum_fit.expected,
            pass
        );
    }
    Ok((csv, all_ok))
}

fn cmd_verify_bounds(path: &Path, exponent_tol: f64, out: Option<&Path>) -> Result<bool> {
    let spec = load_spec(path)?;
    let (csv, all_ok) = bounds_table(&spec, exponent_tol)?;
    let mut text = banner("verify-bounds", path, "seed=n/a")?;
    text.push_str(&csv);
    emit(out, &text)?;
    Ok(all_ok)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct Verdicts {
    lines: String,
    passed: usize,
    failed: usize,
    skipped: usize,
}

impl Verdicts {
    fn new() -> Self {
        Self {
            lines: String::new(),
            passed: 0,
            failed: 0,
            skipped: 0,
        }
    }

    fn record(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
            let _ = writeln!(self.lines, "PASS {name}: {detail}");
        } else {
            self.failed += 1;
            let _ = writeln!(self.lines, "FAIL {name}: {detail}");
        }
    }

    fn skip(&mut self, name: &str, reason: String) {
        self.skipped += 1;
        let _ = writeln!(self.lines, "SKIP {name}: {reason}");
    }

    fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

fn verify_checks(cfg: &RunConfig, spec: &UrnSpec) -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let urn = BalancedUrn::new(spec.clone())?;
    let a = urn.intensity_matrix();
    let spectrum = decompose_intensity(&a)?;
    let tol_spec = 1e-8 * (1.0 + spectrum.matrix_norm);

    // Spectral identities.
    let residuals = verify_spectral_identities(&spectrum, a.as_matrix());
    v.record(
        "spectral_identities",
        residuals.max() <= tol_spec,
        format!("max residual {:.3e} (tol {:.1e})", residuals.max(), tol_spec),
    );

    // Leading eigenvalue equals b; classification.
    let classification = classify_urn(&spectrum, urn.b())?;
    v.record(
        "lambda1_equals_b",
        true,
        format!(
            "lambda1={}, b={}, classification {} (ratio={}, nu2={})",
            spectrum.lambda1().re,
            urn.b(),
            classification.kind,
            classification.ratio,
            classification.nu2
        ),
    );

    // Exact-arithmetic cross-check for integer intensity matrices.
    match crate::exact::validate_spectrum(a.as_matrix(), &spectrum) {
        Ok(exact) => v.record(
            "exact_arithmetic_crosscheck",
            exact.all_matched() && exact.worst_char_poly_residual <= 1e-8,
            format!(
                "{}/{} integer eigenvalues matched, char poly residual {:.3e}",
                exact.matched, exact.total_integer, exact.worst_char_poly_residual
            ),
        ),
        Err(_) => v.skip(
            "exact_arithmetic_crosscheck",
            "intensity matrix is not integer".into(),
        ),
    }

    // Rank-one form of the leading projection (simple lambda_1 only).
    let lambda1_simple = spectrum.components[0].alg_mult == 1;
    if lambda1_simple {
        match principal_pair(urn.activities(), a.as_matrix(), &spectrum, urn.b()) {
            Ok(pair) => v.record(
                "principal_projection_rank_one",
                true,
                format!("v1 = {:?}", pair.v1.iter().copied().collect::<Vec<_>>()),
            ),
            Err(e) => v.record("principal_projection_rank_one", false, e.to_string()),
        }
    } else {
        v.skip(
            "principal_projection_rank_one",
            format!(
                "lambda1 has multiplicity {}",
                spectrum.components[0].alg_mult
            ),
        );
    }

    // Pathwise decomposition identity on one recorded path.
    let chain = ProductChain::for_urn(&urn);
    let residual_n = cfg.n_max.min(1_000);
    let opts = SimOptions {
        checkpoint_ratio: cfg.checkpoint_ratio,
        record_increments: true,
        ..Default::default()
    };
    let traj = run_path(spec, residual_n, StreamKey::new(cfg.master_seed, 0), &opts)?;
    let residual = martingale_residual(&traj, &chain)?;
    v.record(
        "pathwise_decomposition",
        residual <= 1e-8,
        format!("relative residual {residual:.3e} at n = {residual_n}"),
    );

    // Main batch for the moment checks.
    let sim_opts = SimOptions {
        checkpoint_ratio: cfg.checkpoint_ratio,
        ..Default::default()
    };
    let batch = run_batch(spec, cfg.n_max, cfg.replicates, cfg.master_seed, &sim_opts)?;
    let mut mean_chain = ProductChain::for_urn(&urn);
    let means = mean_chain.mean_series(&batch.checkpoints());
    let mean_of: std::collections::HashMap<u64, &DVector<f64>> =
        means.iter().map(|(n, m)| (*n, m)).collect();

    // Conservation of activity: a . (X_n - E X_n) = 0.
    let mut worst_activity = 0.0_f64;
    for t in batch.trajectories.iter().filter(|t| t.tenability_ok) {
        for (n, x) in &t.checkpoints {
            let d = x - mean_of[n];
            let rel = urn.activities().dot(&d).abs() / urn.total_weight(*n);
            worst_activity = worst_activity.max(rel);
        }
    }
    v.record(
        "activity_projection",
        worst_activity <= 1e-8,
        format!("max |a.(X-EX)| / w_n = {worst_activity:.3e} over the batch"),
    );

    // Projection of residuals onto the leading eigenspace.
    if lambda1_simple {
        let p1 = &spectrum.components[0].projection;
        let mut worst = 0.0_f64;
        for t in batch.trajectories.iter().filter(|t| t.tenability_ok) {
            for (n, x) in &t.checkpoints {
                let d = (x - mean_of[n]).map(|x| nalgebra::Complex::new(x, 0.0));
                let rel = (p1 * d).norm() / urn.total_weight(*n);
                worst = worst.max(rel);
            }
        }
        v.record(
            "leading_projection",
            worst <= 1e-8,
            format!("max |P1 (X-EX)| / w_n = {worst:.3e} over the batch"),
        );
    } else {
        v.skip("leading_projection", "lambda1 is multiple".into());
    }

    // One-step conditional mean identity, exact and Monte Carlo.
    let exact_dev = conditional_mean_exact(spec, urn.initial());
    let m_samples = 100_000u64;
    let mc_dev = conditional_mean_check(
        spec,
        urn.initial(),
        m_samples,
        StreamKey::auxiliary(cfg.master_seed, 7, 0),
    )?;
    let sd = one_step_sd(spec, urn.initial());
    let mc_tol = 5.0 * sd / (m_samples as f64).sqrt();
    v.record(
        "conditional_mean_drift",
        exact_dev <= 1e-12 && (sd == 0.0 || mc_dev <= mc_tol),
        format!("exact deviation {exact_dev:.3e}, MC deviation {mc_dev:.3e} (tol {mc_tol:.3e})"),
    );

    // Martingale increments are centred. Rare-draw components (reducible
    // urns) make Y heavily skewed, so the 4 sd / sqrt(R) band needs a few
    // thousand replicates; paths are streamed and only the tested
    // increments retained.
    {
        let mini_r = cfg.replicates.clamp(100, 4_000);
        let mini_n = cfg.n_max.min(1_000);
        let test_indices = [(mini_n / 2) as usize, (mini_n - 1) as usize];
        let opts = SimOptions {
            checkpoint_ratio: cfg.checkpoint_ratio,
            record_increments: true,
            ..Default::default()
        };
        let mut samples = vec![vec![Vec::with_capacity(mini_r as usize); urn.q()]; 2];
        for rep in 0..mini_r {
            let t = run_path(spec, mini_n, StreamKey::new(cfg.master_seed, rep), &opts)?;
            let inc = t.increments.as_ref().expect("increments recorded");
            for (slot, &idx) in test_indices.iter().enumerate() {
                for comp in 0..urn.q() {
                    samples[slot][comp].push(inc[idx][comp]);
                }
            }
        }
        let r = mini_r as f64;
        let mut ok = true;
        let mut worst_ratio = 0.0_f64;
        for slot in &samples {
            for xs in slot {
                let mean = xs.iter().sum::<f64>() / r;
                let var =
                    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
                let sd = var.sqrt();
                if sd > 0.0 {
                    let ratio = mean.abs() / (4.0 * sd / r.sqrt());
                    worst_ratio = worst_ratio.max(ratio);
                    ok &= ratio <= 1.0;
                }
            }
        }
        v.record(
            "increment_centering",
            ok,
            format!("max |mean Y| / (4 sd / sqrt(R)) = {worst_ratio:.3} over {mini_r} replicates"),
        );
    }

    // Product-norm bounds per eigenvalue.
    let square_sum_grid: Vec<u64> = (7..=14).map(|k| 1u64 << k).collect();
    for c in &spectrum.components {
        let label = format!("lambda={}{:+}i", c.lambda.re, c.lambda.im);
        let grid = product_norm_grid(&chain, c.lambda.norm(), 3, 8);
        match verify_product_norm(&chain, c, &grid, cfg.exponent_tol, 10.0) {
            Ok(verdict) => v.record(
                &format!("product_norm[{label}]"),
                verdict.pass,
                format!(
                    "fitted {:.4} vs {:.4}, constant stability {:.2}",
                    verdict.exponent_fitted,
                    verdict.exponent_theoretical,
                    verdict.constant_stability
                ),
            ),
            Err(e) => v.record(&format!("product_norm[{label}]"), false, e.to_string()),
        }
        match square_sum_slope(&chain, c, &square_sum_grid) {
            Ok(fit) => v.record(
                &format!("square_sum[{label}]"),
                (fit.slope - fit.expected).abs() <= cfg.exponent_tol,
                format!("slope {:.4} vs {:.4}", fit.slope, fit.expected),
            ),
            Err(e) => v.record(&format!("square_sum[{label}]"), false, e.to_string()),
        }
    }

    // Moment growth: fitted exponents never exceed the theoretical bound.
    let (bound_exponent, bound_log_power) = moment_bound_case(&classification);
    let mut first_report: Option<MomentReport> = None;
    for &p in &cfg.moment_orders {
        let report = mc_central_moment(&batch, &means, p)?;
        let window: Vec<(u64, f64)> = report
            .series()
            .into_iter()
            .filter(|(n, _)| *n >= cfg.fit_min_n)
            .collect();
        match fit_growth(&window, bound_log_power) {
            Ok(fit) => v.record(
                &format!("moment_growth[p={p}]"),
                fit.alpha_hat <= bound_exponent + cfg.exponent_tol,
                format!(
                    "fitted {:.4} (se {:.4}) vs bound {:.4}",
                    fit.alpha_hat, fit.stderr, bound_exponent
                ),
            ),
            Err(e) => v.record(&format!("moment_growth[p={p}]"), false, e.to_string()),
        }
        if first_report.is_none() {
            first_report = Some(report);
        }
    }

    // Projected moment growth for the second eigenvalue class.
    {
        let idx = spectrum.component_index_at(1);
        let c = &spectrum.components[idx];
        let (proj_exponent, proj_log_power) = projected_bound_case(c, urn.b());
        let report = projected_moment(&batch, c, &means, 2.0)?;
        let window: Vec<(u64, f64)> = report
            .series()
            .into_iter()
            .filter(|(n, _)| *n >= cfg.fit_min_n)
            .collect();
        match fit_growth(&window, proj_log_power) {
            Ok(fit) => v.record(
                "projected_growth[lambda2]",
                fit.alpha_hat <= proj_exponent + cfg.exponent_tol,
                format!(
                    "fitted {:.4} (se {:.4}) vs bound {:.4}",
                    fit.alpha_hat, fit.stderr, proj_exponent
                ),
            ),
            Err(e) => v.record("projected_growth[lambda2]", false, e.to_string()),
        }
    }

    // Covariance normalization for small/critical urns. The Gaussian
    // normalization presumes the usual central-limit hypotheses, which
    // reducible (e.g. triangular) urns need not satisfy.
    if !a.is_irreducible() {
        v.skip(
            "covariance_normalization",
            "reducible urn: the Gaussian normalization hypothesis need not hold".into(),
        );
    } else {
        match covariance_normalization_check(&covariance_series(&batch, &means)?, &classification, None) {
            Ok(verdict) => v.record(
                "covariance_normalization",
                verdict.stabilized,
                format!(
                    "Cov/{} changed {:.1}% over the last decade",
                    verdict.normalizer,
                    100.0 * verdict.rel_change
                ),
            ),
            Err(UrnError::NotApplicable(reason)) => v.skip("covariance_normalization", reason),
            Err(e) => return Err(e),
        }
    }

    // Burkholder / weighted martingale inequality.
    for &p in &cfg.moment_orders {
        if p < 2.0 {
            v.skip(
                &format!("burkholder[p={p}]"),
                "square-function inequality needs p >= 2".into(),
            );
            continue;
        }
        let sample = urn_martingale(
            &urn,
            cfg.n_max.min(1_000),
            cfg.replicates.min(10_000),
            cfg.master_seed,
            p,
        )?;
        let verdict = burkholder_check(&sample, cfg.master_seed)?;
        v.record(
            &format!("burkholder[p={p}]"),
            verdict.burkholder_ok && verdict.ll2_ok,
            format!(
                "||X||_p={:.4} vs (p-1)||S||_p={:.4} (slack se {:.1e}), empirical C_p={:.3}",
                verdict.xn_p,
                (p - 1.0) * verdict.sn_p,
                verdict.slack_se,
                verdict.cp_empirical
            ),
        );
    }

    Ok(v)
}

fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    let spec = load_spec(&cfg.spec_path)?;
    let verdicts = verify_checks(cfg, &spec)?;
    let mut text = banner("verify", &cfg.spec_path, &config_echo(cfg))?;
    text.push_str(&verdicts.lines);
    let _ = writeln!(
        text,
        "# summary: {} passed, {} failed, {} skipped",
        verdicts.passed, verdicts.failed, verdicts.skipped
    );
    emit(cfg.out.as_deref(), &text)?;
    Ok(verdicts.all_passed())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(cfg: &RunConfig) -> Result<bool> {
    let spec = load_spec(&cfg.spec_path)?;
    let urn = BalancedUrn::new(spec.clone())?;
    let spectrum = decompose_intensity(&urn.intensity_matrix())?;
    let classification = classify_urn(&spectrum, urn.b())?;

    let mut text = banner("report", &cfg.spec_path, &config_echo(cfg))?;

    let _ = writeln!(text, "## spectrum");
    text.push_str("lambda_re,lambda_im,mult,nu,is_lambda1\n");
    for (idx, c) in spectrum.components.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            c.lambda.re,
            c.lambda.im,
            c.alg_mult,
            c.nu,
            idx == 0
        );
    }
    let _ = writeln!(
        text,
        "# classification: {} (ratio={}, nu2={}, b={})",
        classification.kind, classification.ratio, classification.nu2, urn.b()
    );

    let _ = writeln!(text, "## mean");
    let mut chain = ProductChain::for_urn(&urn);
    let grid = checkpoint_grid(cfg.n_max, cfg.checkpoint_ratio);
    let _ = write!(text, "n");
    for color in urn.spec().colors() {
        let _ = write!(text, ",ex_{color}");
    }
    text.push('\n');
    for (n, mean) in chain.mean_series(&grid) {
        let _ = write!(text, "{n}");
        for v in mean.iter() {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }

    let _ = writeln!(text, "## simulation");
    {
        let opts = SimOptions {
            checkpoint_ratio: cfg.checkpoint_ratio,
            ..Default::default()
        };
        let batch = run_batch(&spec, cfg.n_max, cfg.replicates, cfg.master_seed, &opts)?;
        let complete = batch
            .trajectories
            .iter()
            .filter(|t| t.tenability_ok)
            .count();
        let q = urn.q();
        let mut sample_mean = DVector::<f64>::zeros(q);
        for t in &batch.trajectories {
            sample_mean += &t.final_state;
        }
        sample_mean /= batch.trajectories.len() as f64;
        let exact = chain.mean(cfg.n_max);
        let _ = writeln!(
            text,
            "# {} replicates of {} draws, {} checkpoints each, {} completed",
            cfg.replicates,
            cfg.n_max,
            batch.checkpoints().len(),
            complete
        );
        let _ = write!(text, "quantity");
        for color in urn.spec().colors() {
            let _ = write!(text, ",{color}");
        }
        text.push('\n');
        let _ = write!(text, "sample_mean_final");
        for v in sample_mean.iter() {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
        let _ = write!(text, "exact_mean_final");
        for v in exact.iter() {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }

    let _ = writeln!(text, "## moments");
    let moments = moments_table(cfg, &spec)?;
    text.push_str(&moments.csv);

    let _ = writeln!(text, "## bounds");
    let (bounds_csv, bounds_ok) = bounds_table(&spec, cfg.exponent_tol)?;
    text.push_str(&bounds_csv);

    let _ = writeln!(text, "## verdicts");
    let verdicts = verify_checks(cfg, &spec)?;
    text.push_str(&verdicts.lines);

    let all_ok = verdicts.all_passed() && moments.fits_ok && bounds_ok;
    let _ = writeln!(
        text,
        "# summary: {} passed, {} failed, {} skipped | moments_ok={} bounds_ok={} | overall={}",
        verdicts.passed,
        verdicts.failed,
        verdicts.skipped,
        moments.fits_ok,
        bounds_ok,
        if all_ok { "PASS" } else { "FAIL" }
    );
    emit(cfg.out.as_deref(), &text)?;
    Ok(all_ok)
}
