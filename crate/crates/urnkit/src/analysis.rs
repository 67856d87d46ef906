//! Moment estimation and theorem-level verdicts: an exact-enumeration
//! oracle, Monte Carlo central moments with bootstrap errors, growth-rate
//! fitting, and checks of the moment-bound cases, the covariance
//! normalization, and the martingale square-function inequality.
//!
//! Centering always uses the exact mean from the product chain, never the
//! sample mean: sample-mean centering injects an O(n / sqrt(R)) bias that
//! swamps the n^{1/2} signal of small urns.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Result, UrnError};
use crate::products::{ols, ProductChain};
use crate::sim::{step, Batch, StreamKey};
use crate::spectral::{SpectralComponent, UrnClassification, UrnKind};
use crate::urn::{BalancedUrn, UrnSpec};

/// Auxiliary stream domains (see [`StreamKey::auxiliary`]).
const DOMAIN_MOMENT_BOOTSTRAP: u32 = 1;
const DOMAIN_COV_BOOTSTRAP: u32 = 2;
const DOMAIN_BURKHOLDER_BOOTSTRAP: u32 = 4;

/// Default number of bootstrap resamples for standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

// ---------------------------------------------------------------------------
// Exact distribution oracle
// ---------------------------------------------------------------------------

/// Options for the exact-enumeration oracle.
#[derive(Debug, Clone, Copy)]
pub struct DpOptions {
    /// Hard cap on the number of reachable states.
    pub state_cap: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self { state_cap: 1_000_000 }
    }
}

/// The exact law of `X_n` for an integer-valued urn, as a finite support of
/// integer states with exact rational probabilities.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub n: u64,
    /// Sorted by state for deterministic iteration.
    pub support: Vec<(Vec<i64>, BigRational)>,
}

fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| UrnError::InvalidArgument(format!("cannot represent {x} exactly")))
}

fn integer_vector(v: &DVector<f64>, what: &str) -> Result<Vec<i64>> {
    v.iter()
        .map(|&x| {
            let r = x.round();
            if (x - r).abs() <= 1e-9 && r.abs() < 9e15 {
                Ok(r as i64)
            } else {
                Err(UrnError::InvalidArgument(format!(
                    "{what} entry {x} is not an integer; the exact oracle needs integer-valued urns"
                )))
            }
        })
        .collect()
}

/// Forward dynamic programming over reachable states: pushes the mass
/// `(a_j x_j / w) p_atom` along every (colour, atom) edge, in exact rational
/// arithmetic. Atom probabilities are normalized by their exact sum so the
/// total mass is exactly one.
pub fn exact_distribution(spec: &UrnSpec, n: u64, opts: &DpOptions) -> Result<ExactDistribution> {
    let q = spec.q();
    let x0 = integer_vector(spec.initial(), "initial state")?;
    let activities: Vec<BigRational> = spec
        .activities()
        .iter()
        .map(|&a| rational_from_f64(a))
        .collect::<Result<_>>()?;
    // (probability, integer replacement vector) per colour, normalized.
    let mut laws: Vec<Vec<(BigRational, Vec<i64>)>> = Vec::with_capacity(q);
    for law in spec.replacements() {
        let mut atoms = Vec::with_capacity(law.atoms().len());
        let mut mass = BigRational::zero();
        for atom in law.atoms() {
            let p = rational_from_f64(atom.p)?;
            mass += &p;
            atoms.push((p, integer_vector(&atom.v, "replacement atom")?));
        }
        for (p, _) in &mut atoms {
            *p /= mass.clone();
        }
        laws.push(atoms);
    }

    let mut current: HashMap<Vec<i64>, BigRational> = HashMap::new();
    current.insert(x0, BigRational::from_integer(BigInt::from(1)));
    for step_idx in 0..n {
        let mut next: HashMap<Vec<i64>, BigRational> = HashMap::new();
        for (state, prob) in &current {
            let weights: Vec<BigRational> = (0..q)
                .map(|j| &activities[j] * BigRational::from_integer(BigInt::from(state[j])))
                .collect();
            let total: BigRational = weights.iter().cloned().fold(BigRational::zero(), |s, w| s + w);
            if !total.is_positive() {
                return Err(UrnError::Tenability {
                    step: step_idx,
                    reason: format!("state {state:?} has nonpositive total activity"),
                });
            }
            for (j, weight) in weights.iter().enumerate() {
                if !weight.is_positive() {
                    continue;
                }
                let p_draw = weight / &total;
                for (p_atom, v) in &laws[j] {
                    let mut new_state = state.clone();
                    for (c, dv) in new_state.iter_mut().zip(v) {
                        *c += dv;
                        if *c < 0 {
                            return Err(UrnError::Tenability {
                                step: step_idx + 1,
                                reason: format!(
                                    "state {state:?} reaches a negative count via colour {j}"
                                ),
                            });
                        }
                    }
                    let mass = prob * &p_draw * p_atom;
                    *next.entry(new_state).or_insert_with(BigRational::zero) += mass;
                }
            }
        }
        if next.len() > opts.state_cap {
            return Err(UrnError::StateCapExceeded {
                states: next.len(),
                step: step_idx + 1,
                cap: opts.state_cap,
            });
        }
        current = next;
    }

    let mut support: Vec<(Vec<i64>, BigRational)> = current.into_iter().collect();
    support.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ExactDistribution { n, support })
}

impl ExactDistribution {
    pub fn total_mass(&self) -> BigRational {
        self.support
            .iter()
            .fold(BigRational::zero(), |s, (_, p)| s + p)
    }

    /// Exact componentwise mean.
    pub fn mean(&self) -> Vec<BigRational> {
        let q = self.support[0].0.len();
        let mut mean = vec![BigRational::zero(); q];
        for (state, p) in &self.support {
            for (m, &x) in mean.iter_mut().zip(state) {
                *m += p * BigRational::from_integer(BigInt::from(x));
            }
        }
        mean
    }

    /// Exact componentwise variance.
    pub fn componentwise_variance(&self) -> Vec<BigRational> {
        let mean = self.mean();
        let q = mean.len();
        let mut var = vec![BigRational::zero(); q];
        for (state, p) in &self.support {
            for i in 0..q {
                let d = BigRational::from_integer(BigInt::from(state[i])) - &mean[i];
                var[i] += p * (&d * &d);
            }
        }
        var
    }
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact central moment of an [`ExactDistribution`]: the p-norm
/// `(sum_x prob |x - mean|^p)^{1/p}` (Euclidean norm inside), plus the exact
/// componentwise variance, centered at the distribution's own exact mean.
/// `float_mean` is the product-chain mean, cross-checked against the exact
/// one; the worst componentwise deviation is reported.
#[derive(Debug, Clone)]
pub struct ExactMoment {
    pub p: f64,
    pub norm_p: f64,
    pub variance: Vec<BigRational>,
    /// Worst |rational mean - float mean| over components.
    pub mean_deviation: f64,
}

pub fn exact_central_moment(
    dist: &ExactDistribution,
    float_mean: &DVector<f64>,
    p: f64,
) -> Result<ExactMoment> {
    if p < 1.0 {
        return Err(UrnError::InvalidArgument(format!("need p >= 1, got {p}")));
    }
    let mean = dist.mean();
    let mut mean_deviation = 0.0_f64;
    for (m, &f) in mean.iter().zip(float_mean.iter()) {
        mean_deviation = mean_deviation.max((rational_to_f64(m) - f).abs());
    }
    let mut acc = 0.0_f64;
    for (state, prob) in &dist.support {
        let mut sq = BigRational::zero();
        for (x, m) in state.iter().zip(&mean) {
            let d = BigRational::from_integer(BigInt::from(*x)) - m;
            sq += &d * &d;
        }
        acc += rational_to_f64(prob) * rational_to_f64(&sq).powf(p / 2.0);
    }
    Ok(ExactMoment {
        p,
        norm_p: acc.powf(1.0 / p),
        variance: dist.componentwise_variance(),
        mean_deviation,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo moments
// ---------------------------------------------------------------------------

/// One grid point of a moment report.
#[derive(Debug, Clone, Copy)]
pub struct MomentPoint {
    pub n: u64,
    pub estimate: f64,
    pub stderr: f64,
}

/// A Monte Carlo estimate of a central p-norm along the checkpoint grid.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub p: f64,
    pub grid: Vec<MomentPoint>,
}

impl MomentReport {
    pub fn series(&self) -> Vec<(u64, f64)> {
        self.grid.iter().map(|pt| (pt.n, pt.estimate)).collect()
    }
}

fn mean_lookup(means: &[(u64, DVector<f64>)]) -> HashMap<u64, &DVector<f64>> {
    means.iter().map(|(n, v)| (*n, v)).collect()
}

/// Deviations `|X_n - E X_n|` per replicate at one checkpoint, in replicate
/// order (sorting by replicate index keeps the float summation order
/// independent of how the batch was assembled).
fn deviations_at(
    batch: &Batch,
    mean: &DVector<f64>,
    checkpoint_pos: usize,
    transform: &dyn Fn(&DVector<f64>) -> f64,
) -> Vec<f64> {
    let mut rows: Vec<(u64, f64)> = batch
        .trajectories
        .iter()
        .filter(|t| t.tenability_ok)
        .map(|t| {
            let (_, x) = &t.checkpoints[checkpoint_pos];
            (t.replicate, transform(&(x - mean)))
        })
        .collect();
    rows.sort_by_key(|(r, _)| *r);
    rows.into_iter().map(|(_, v)| v).collect()
}

fn p_norm_estimate(values: &[f64], p: f64) -> f64 {
    let mean = values.iter().map(|v| v.powf(p)).sum::<f64>() / values.len() as f64;
    mean.powf(1.0 / p)
}

fn bootstrap_se(
    values: &[f64],
    p: f64,
    resamples: usize,
    key: StreamKey,
) -> f64 {
    let r = values.len();
    let mut rng = key.rng();
    let mut estimates = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..r {
            let idx = rng.random_range(0..r);
            acc += values[idx].powf(p);
        }
        estimates.push((acc / r as f64).powf(1.0 / p));
    }
    let mean = estimates.iter().sum::<f64>() / resamples as f64;
    let var = estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        / (resamples as f64 - 1.0);
    var.sqrt()
}

fn moment_report(
    batch: &Batch,
    means: &[(u64, DVector<f64>)],
    p: f64,
    transform: &dyn Fn(&DVector<f64>) -> f64,
) -> Result<MomentReport> {
    if p < 1.0 {
        return Err(UrnError::InvalidArgument(format!("need p >= 1, got {p}")));
    }
    let complete = batch
        .trajectories
        .iter()
        .filter(|t| t.tenability_ok)
        .count();
    if complete < 100 {
        return Err(UrnError::InvalidArgument(format!(
            "need at least 100 complete replicates for bootstrap errors, got {complete}"
        )));
    }
    let lookup = mean_lookup(means);
    let checkpoints = batch.checkpoints();
    let mut grid = Vec::with_capacity(checkpoints.len());
    for (pos, n) in checkpoints.iter().enumerate() {
        let mean = lookup.get(n).ok_or_else(|| {
            UrnError::InvalidArgument(format!("no exact mean supplied for checkpoint n = {n}"))
        })?;
        let values = deviations_at(batch, mean, pos, transform);
        let estimate = p_norm_estimate(&values, p);
        let stderr = bootstrap_se(
            &values,
            p,
            BOOTSTRAP_RESAMPLES,
            StreamKey::auxiliary(batch.master_seed, DOMAIN_MOMENT_BOOTSTRAP, pos as u32),
        );
        grid.push(MomentPoint {
            n: *n,
            estimate,
            stderr,
        });
    }
    Ok(MomentReport { p, grid })
}

/// Monte Carlo central p-norm `||X_n - E X_n||_p` along the checkpoint grid,
/// centered at the supplied exact means, with bootstrap standard errors.
pub fn mc_central_moment(
    batch: &Batch,
    means: &[(u64, DVector<f64>)],
    p: f64,
) -> Result<MomentReport> {
    moment_report(batch, means, p, &|d: &DVector<f64>| d.norm())
}

/// The same estimator applied to the projected residual
/// `P_lambda (X_n - E X_n)` (complex modulus).
pub fn projected_moment(
    batch: &Batch,
    component: &SpectralComponent,
    means: &[(u64, DVector<f64>)],
    p: f64,
) -> Result<MomentReport> {
    let projection = component.projection.clone();
    moment_report(batch, means, p, &move |d: &DVector<f64>| {
        let dc = d.map(|x| nalgebra::Complex::new(x, 0.0));
        (&projection * dc).norm()
    })
}

// ---------------------------------------------------------------------------
// Growth fitting and theorem cases
// ---------------------------------------------------------------------------

/// A fitted moment growth rate: `log m_n = alpha log n + beta log log n + c`
/// with `beta` fixed from theory.
#[derive(Debug, Clone, Copy)]
pub struct GrowthFit {
    pub alpha_hat: f64,
    pub beta_fixed: f64,
    pub stderr: f64,
    pub window: (u64, u64),
}

/// Least squares for the growth exponent over a geometric grid. Requires at
/// least five points spanning at least two decades, and positive estimates.
pub fn fit_growth(series: &[(u64, f64)], beta_fixed: f64) -> Result<GrowthFit> {
    if series.len() < 5 {
        return Err(UrnError::InvalidArgument(format!(
            "growth fit needs >= 5 grid points, got {}",
            series.len()
        )));
    }
    let n_min = series.iter().map(|(n, _)| *n).min().unwrap();
    let n_max = series.iter().map(|(n, _)| *n).max().unwrap();
    if n_min < 2 {
        return Err(UrnError::InvalidArgument(
            "growth fit needs n >= 2 (log log n)".into(),
        ));
    }
    if (n_max as f64) < 100.0 * n_min as f64 {
        return Err(UrnError::InvalidArgument(format!(
            "growth fit needs >= 2 decades, got n in [{n_min}, {n_max}]"
        )));
    }
    let mut xs = Vec::with_capacity(series.len());
    let mut ys = Vec::with_capacity(series.len());
    for &(n, m) in series {
        if !(m > 0.0) {
            return Err(UrnError::InvalidArgument(format!(
                "nonpositive series value {m} at n = {n}"
            )));
        }
        let ln_n = (n as f64).ln();
        xs.push(ln_n);
        ys.push(m.ln() - beta_fixed * ln_n.ln());
    }
    let (slope, intercept) = ols(&xs, &ys);
    // OLS slope standard error.
    let m = xs.len() as f64;
    let xb = xs.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xb) * (x - xb)).sum();
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum();
    let stderr = (rss / (m - 2.0) / sxx).sqrt();
    Ok(GrowthFit {
        alpha_hat: slope,
        beta_fixed,
        stderr,
        window: (n_min, n_max),
    })
}

/// The theoretical `(exponent, log power)` of the central moment bound
/// `||X_n - E X_n||_p`, by classification: `(1/2, 0)` for strictly small
/// urns, `(1/2, nu2 + 1/2)` for critical ones, `(Re lambda_2 / lambda_1,
/// nu2)` beyond (including the degenerate `Re lambda_2 = lambda_1` case,
/// where the exponent is 1). The bound shape does not depend on p.
pub fn moment_bound_case(classification: &UrnClassification) -> (f64, f64) {
    match classification.kind {
        UrnKind::SmallStrict => (0.5, 0.0),
        UrnKind::Critical => (0.5, classification.nu2 as f64 + 0.5),
        UrnKind::Large => (classification.ratio, classification.nu2 as f64),
        UrnKind::DegenerateLambda2EqLambda1 => (1.0, classification.nu2 as f64),
    }
}

/// The per-eigenvalue `(exponent, log power)` of the projected moment bound
/// `||P_lambda (X_n - E X_n)||_p`.
pub fn projected_bound_case(component: &SpectralComponent, b: f64) -> (f64, f64) {
    let gamma = component.lambda.re / b;
    let crit_tol = 1e-9;
    if gamma < 0.5 - crit_tol {
        (0.5, 0.0)
    } else if gamma <= 0.5 + crit_tol {
        (0.5, component.nu as f64 + 0.5)
    } else {
        (gamma, component.nu as f64)
    }
}

// ---------------------------------------------------------------------------
// Covariance normalization (moment convergence check)
// ---------------------------------------------------------------------------

/// Covariance estimates `(1/R) sum (X - E X)(X - E X)'` along the grid,
/// centered at the exact mean.
pub fn covariance_series(
    batch: &Batch,
    means: &[(u64, DVector<f64>)],
) -> Result<Vec<(u64, DMatrix<f64>)>> {
    let lookup = mean_lookup(means);
    let checkpoints = batch.checkpoints();
    let mut out = Vec::with_capacity(checkpoints.len());
    for (pos, n) in checkpoints.iter().enumerate() {
        let mean = lookup.get(n).ok_or_else(|| {
            UrnError::InvalidArgument(format!("no exact mean supplied for checkpoint n = {n}"))
        })?;
        let mut rows: Vec<(u64, DVector<f64>)> = batch
            .trajectories
            .iter()
            .filter(|t| t.tenability_ok)
            .map(|t| (t.replicate, &t.checkpoints[pos].1 - *mean))
            .collect();
        rows.sort_by_key(|(r, _)| *r);
        let q = mean.len();
        let mut cov = DMatrix::<f64>::zeros(q, q);
        for (_, d) in &rows {
            cov.syger(1.0, d, d, 1.0);
        }
        cov /= rows.len() as f64;
        // syger fills the lower triangle; mirror it.
        for i in 0..q {
            for j in (i + 1)..q {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        out.push((*n, cov));
    }
    Ok(out)
}

/// Bootstrap standard errors of the covariance entries at one checkpoint.
pub fn covariance_se_at(
    batch: &Batch,
    means: &[(u64, DVector<f64>)],
    n: u64,
    resamples: usize,
) -> Result<DMatrix<f64>> {
    let lookup = mean_lookup(means);
    let mean = lookup.get(&n).ok_or_else(|| {
        UrnError::InvalidArgument(format!("no exact mean supplied for checkpoint n = {n}"))
    })?;
    let pos = batch
        .checkpoints()
        .iter()
        .position(|m| *m == n)
        .ok_or_else(|| UrnError::InvalidArgument(format!("n = {n} is not a checkpoint")))?;
    let mut rows: Vec<(u64, DVector<f64>)> = batch
        .trajectories
        .iter()
        .filter(|t| t.tenability_ok)
        .map(|t| (t.replicate, &t.checkpoints[pos].1 - *mean))
        .collect();
    rows.sort_by_key(|(r, _)| *r);
    let deviations: Vec<DVector<f64>> = rows.into_iter().map(|(_, d)| d).collect();
    let r = deviations.len();
    let q = mean.len();
    let mut rng = StreamKey::auxiliary(batch.master_seed, DOMAIN_COV_BOOTSTRAP, pos as u32).rng();
    let mut sum = DMatrix::<f64>::zeros(q, q);
    let mut sum_sq = DMatrix::<f64>::zeros(q, q);
    for _ in 0..resamples {
        let mut cov = DMatrix::<f64>::zeros(q, q);
        for _ in 0..r {
            let d = &deviations[rng.random_range(0..r)];
            cov.syger(1.0, d, d, 1.0);
        }
        cov /= r as f64;
        for i in 0..q {
            for j in (i + 1)..q {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        sum += &cov;
        sum_sq += cov.component_mul(&cov);
    }
    let mean_boot = sum / resamples as f64;
    let var = sum_sq / resamples as f64 - mean_boot.component_mul(&mean_boot);
    Ok(var.map(|v| v.max(0.0).sqrt()))
}

/// Verdict of the covariance-normalization check: the normalized covariance
/// must change by at most 10% (Frobenius, relative) over the last decade of
/// checkpoints, and optionally agree entrywise with an external reference
/// within three standard errors.
#[derive(Debug, Clone)]
pub struct CovarianceVerdict {
    pub normalizer: &'static str,
    pub rel_change: f64,
    pub stabilized: bool,
    /// Normalized covariance at the final checkpoint.
    pub normalized_cov: DMatrix<f64>,
    pub reference_ok: Option<bool>,
}

/// Checks `Cov[X_n] / n` (strictly small urns) or
/// `Cov[X_n] / (n (log n)^{2 nu2 + 1})` (critical urns) for stabilization.
/// Errors on large or degenerate classifications, where no Gaussian
/// normalization applies.
pub fn covariance_normalization_check(
    cov_series: &[(u64, DMatrix<f64>)],
    classification: &UrnClassification,
    reference: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<CovarianceVerdict> {
    let (normalizer_name, normalize): (&'static str, Box<dyn Fn(u64) -> f64>) =
        match classification.kind {
            UrnKind::SmallStrict => ("n", Box::new(|n: u64| n as f64)),
            UrnKind::Critical => {
                let power = 2 * classification.nu2 as i32 + 1;
                (
                    "n (log n)^(2 nu2 + 1)",
                    Box::new(move |n: u64| (n as f64) * (n as f64).ln().powi(power)),
                )
            }
            UrnKind::Large | UrnKind::DegenerateLambda2EqLambda1 => {
                return Err(UrnError::NotApplicable(
                    "covariance normalization applies to small and critical urns only; \
                     this urn is large/degenerate"
                        .into(),
                ))
            }
        };
    let usable: Vec<(u64, DMatrix<f64>)> = cov_series
        .iter()
        .filter(|(n, _)| *n >= 2)
        .map(|(n, c)| (*n, c / normalize(*n)))
        .collect();
    let (n_last, c_last) = usable
        .last()
        .ok_or_else(|| UrnError::InvalidArgument("empty covariance series".into()))?;
    let earlier = usable
        .iter()
        .rev()
        .find(|(n, _)| (*n as f64) <= *n_last as f64 / 10.0)
        .ok_or_else(|| {
            UrnError::InvalidArgument(
                "covariance series does not span a full decade of checkpoints".into(),
            )
        })?;
    let rel_change = (c_last - &earlier.1).norm() / c_last.norm();
    let stabilized = rel_change <= 0.10;
    let reference_ok = reference.map(|(sigma, se)| {
        let norm_last = normalize(*n_last);
        let mut ok = true;
        for i in 0..sigma.nrows() {
            for j in 0..sigma.ncols() {
                let diff = (c_last[(i, j)] - sigma[(i, j)]).abs();
                if diff > 3.0 * se[(i, j)] / norm_last {
                    ok = false;
                }
            }
        }
        ok
    });
    Ok(CovarianceVerdict {
        normalizer: normalizer_name,
        rel_change,
        stabilized,
        normalized_cov: c_last.clone(),
        reference_ok,
    })
}

// ---------------------------------------------------------------------------
// Burkholder / weighted martingale inequality
// ---------------------------------------------------------------------------

/// Monte Carlo sample of a weighted martingale `X = sum_i A_i Y_i`: per
/// replicate the modulus of the final sum and the square function
/// `S = (sum_i |A_i Y_i|^2)^{1/2}`, plus the weight mass `sum_i ||A_i||^2`
/// and the estimated `sup_i ||Y_i||_p`.
#[derive(Debug, Clone)]
pub struct MartingaleSample {
    pub p: f64,
    pub final_abs: Vec<f64>,
    pub square_fn: Vec<f64>,
    pub weight_sq_sum: f64,
    pub sup_increment_norm_p: f64,
}

/// The +-1 coin-flip martingale with uniform weights `A_i = 1/sqrt(n)`, so
/// the square function is identically one and Burkholder's inequality is an
/// equality at p = 2.
pub fn coin_flip_martingale(n: u64, r: u64, master_seed: u64, p: f64) -> MartingaleSample {
    let scale = 1.0 / (n as f64).sqrt();
    let mut final_abs = Vec::with_capacity(r as usize);
    let square = 1.0;
    for rep in 0..r {
        let mut rng = StreamKey::new(master_seed, rep).rng();
        let mut sum = 0.0;
        for _ in 0..n {
            let flip: bool = rng.random();
            sum += if flip { scale } else { -scale };
        }
        final_abs.push(sum.abs());
    }
    MartingaleSample {
        p,
        final_abs,
        square_fn: vec![square; r as usize],
        weight_sq_sum: 1.0,
        sup_increment_norm_p: 1.0,
    }
}

/// Urn-derived weighted martingale: increments `Y_l` from simulated paths,
/// weights `A_l = F_{l,n} / c` with `c^2 = sum_l ||F_{l,n}||^2`, so the sum
/// is the normalized residual `(X_n - E X_n) / c` and the weight mass is
/// exactly one.
pub fn urn_martingale(
    urn: &BalancedUrn,
    n: u64,
    r: u64,
    master_seed: u64,
    p: f64,
) -> Result<MartingaleSample> {
    if p < 2.0 {
        return Err(UrnError::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    let spec = urn.spec();
    let chain = ProductChain::for_urn(urn);
    let intensity = urn.intensity_matrix().into_inner();
    let q = urn.q();
    // F_{l,n} for l = 1..=n, built backward.
    let mut factors: Vec<DMatrix<f64>> = Vec::with_capacity(n as usize);
    let mut g = DMatrix::<f64>::identity(q, q);
    for l in (1..=n).rev() {
        if l < n {
            g = &g * chain.factor(l);
        }
        factors.push(g.clone());
    }
    factors.reverse(); // factors[l - 1] = F_{l,n}
    let weight_sq_sum: f64 = factors
        .iter()
        .map(|f| {
            let s = crate::spectral::opnorm(f);
            s * s
        })
        .sum();
    let c = weight_sq_sum.sqrt();

    let mut final_abs = Vec::with_capacity(r as usize);
    let mut square_fn = Vec::with_capacity(r as usize);
    let mut y_pow_sums = vec![0.0_f64; n as usize];
    for rep in 0..r {
        let mut rng = StreamKey::new(master_seed, rep).rng();
        let mut state = spec.initial().clone();
        let mut sum = DVector::<f64>::zeros(q);
        let mut sq = 0.0_f64;
        for l in 1..=n {
            let w = urn.total_weight(l - 1);
            let drift = &intensity * &state / w;
            let before = state.clone();
            step(&mut state, spec, &mut rng)?;
            let y = &state - before - drift;
            let weighted = &factors[(l - 1) as usize] * &y / c;
            sum += &weighted;
            sq += weighted.norm_squared();
            y_pow_sums[(l - 1) as usize] += y.norm().powf(p);
        }
        final_abs.push(sum.norm());
        square_fn.push(sq.sqrt());
    }
    let sup_increment_norm_p = y_pow_sums
        .iter()
        .map(|s| (s / r as f64).powf(1.0 / p))
        .fold(0.0, f64::max);
    Ok(MartingaleSample {
        p,
        final_abs,
        square_fn,
        weight_sq_sum: 1.0,
        sup_increment_norm_p,
    })
}

/// Verdict of the square-function inequality and the weighted-sum bound.
#[derive(Debug, Clone, Copy)]
pub struct BurkholderVerdict {
    pub p: f64,
    /// Monte Carlo `||X_n||_p`.
    pub xn_p: f64,
    /// Monte Carlo `||S_n||_p`.
    pub sn_p: f64,
    /// `(p - 1) ||S_n||_p - ||X_n||_p`; the inequality predicts >= 0.
    pub slack: f64,
    pub slack_se: f64,
    /// `slack >= -4 slack_se`.
    pub burkholder_ok: bool,
    /// Empirical constant `||X||_p / ((sum ||A_i||^2)^{1/2} sup_i ||Y_i||_p)`.
    pub cp_empirical: f64,
    /// `cp_empirical <= (p - 1)` within four standard errors.
    pub ll2_ok: bool,
}

/// Checks `||X_n||_p <= (p - 1) ||S_n(X)||_p` by Monte Carlo with a
/// bootstrap standard error on the slack, and reports the empirical constant
/// of the weighted-sum bound
/// `||sum A_i Y_i||_p <= C_p (sum ||A_i||^2)^{1/2} sup_i ||Y_i||_p`.
pub fn burkholder_check(
    sample: &MartingaleSample,
    master_seed: u64,
) -> Result<BurkholderVerdict> {
    let p = sample.p;
    if p < 2.0 {
        return Err(UrnError::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    let r = sample.final_abs.len();
    if r < 100 {
        return Err(UrnError::InvalidArgument(format!(
            "need at least 100 replicates, got {r}"
        )));
    }
    let xn_p = p_norm_estimate(&sample.final_abs, p);
    let sn_p = p_norm_estimate(&sample.square_fn, p);
    let slack = (p - 1.0) * sn_p - xn_p;
    // Joint bootstrap of the slack: resample replicate indices once per
    // resample, evaluating both norms on the same draw.
    let mut rng = StreamKey::auxiliary(master_seed, DOMAIN_BURKHOLDER_BOOTSTRAP, 0).rng();
    let mut slacks = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut xp = 0.0;
        let mut sp = 0.0;
        for _ in 0..r {
            let idx = rng.random_range(0..r);
            xp += sample.final_abs[idx].powf(p);
            sp += sample.square_fn[idx].powf(p);
        }
        let x = (xp / r as f64).powf(1.0 / p);
        let s = (sp / r as f64).powf(1.0 / p);
        slacks.push((p - 1.0) * s - x);
    }
    let mean = slacks.iter().sum::<f64>() / slacks.len() as f64;
    let var = slacks
        .iter()
        .map(|s| (s - mean) * (s - mean))
        .sum::<f64>()
        / (slacks.len() as f64 - 1.0);
    let slack_se = var.sqrt();
    let burkholder_ok = slack >= -4.0 * slack_se;

    let denom = sample.weight_sq_sum.sqrt() * sample.sup_increment_norm_p;
    let cp_empirical = xn_p / denom;
    let ll2_ok = cp_empirical <= (p - 1.0) + 4.0 * slack_se / denom;

    Ok(BurkholderVerdict {
        p,
        xn_p,
        sn_p,
        slack,
        slack_se,
        burkholder_ok,
        cp_empirical,
        ll2_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::products::exact_mean;
    use crate::sim::{run_batch, SimOptions};
    use crate::spectral::decompose_intensity;
    use approx::assert_relative_eq;
    use num_traits::One;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn polya_two_step_distribution_is_uniform() {
        // Enumerating the four draw sequences: X_{2,1} in {1,2,3}, each 1/3.
        let dist = exact_distribution(&corpus::classical_polya(), 2, &DpOptions::default())
            .unwrap();
        assert_eq!(dist.support.len(), 3);
        for (state, p) in &dist.support {
            assert_eq!(state[0] + state[1], 4);
            assert_eq!(*p, rational(1, 3));
        }
        assert!(dist.total_mass().is_one());
    }

    #[test]
    fn zero_steps_is_point_mass() {
        let dist =
            exact_distribution(&corpus::friedman(), 0, &DpOptions::default()).unwrap();
        assert_eq!(dist.support.len(), 1);
        assert_eq!(dist.support[0].0, vec![1, 1]);
        assert!(dist.support[0].1.is_one());
        // Central moments of a point mass vanish.
        let urn = corpus::friedman().balanced().unwrap();
        let moment = exact_central_moment(&dist, &exact_mean(&urn, 0), 2.0).unwrap();
        assert_eq!(moment.norm_p, 0.0);
        assert!(moment.variance.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn friedman_single_draw_split() {
        let dist =
            exact_distribution(&corpus::friedman(), 1, &DpOptions::default()).unwrap();
        assert_eq!(
            dist.support,
            vec![
                (vec![1, 2], rational(1, 2)),
                (vec![2, 1], rational(1, 2)),
            ]
        );
    }

    #[test]
    fn state_cap_is_enforced() {
        let opts = DpOptions { state_cap: 2 };
        let err = exact_distribution(&corpus::classical_polya(), 3, &opts).unwrap_err();
        assert!(matches!(err, UrnError::StateCapExceeded { .. }));
    }

    #[test]
    fn polya_variance_closed_form() {
        // X_{n,1} is uniform on {1, ..., n+1}: Var = (n^2 + 2n) / 12,
        // exactly, for every n up to 12.
        let spec = corpus::classical_polya();
        let urn = spec.clone().balanced().unwrap();
        for n in 1..=12u64 {
            let dist = exact_distribution(&spec, n, &DpOptions::default()).unwrap();
            let mean = exact_mean(&urn, n);
            let moment = exact_central_moment(&dist, &mean, 2.0).unwrap();
            let expected = rational((n * n + 2 * n) as i64, 12);
            assert_eq!(moment.variance[0], expected, "n = {n}");
            assert_eq!(moment.variance[1], expected, "n = {n}");
            assert!(moment.mean_deviation <= 1e-10, "n = {n}");
        }
    }

    #[test]
    fn dp_mean_matches_product_chain_on_corpus() {
        for (name, spec) in corpus::balanced_corpus() {
            let urn = spec.clone().balanced().unwrap();
            let dist = exact_distribution(&spec, 8, &DpOptions::default()).unwrap();
            let float_mean = exact_mean(&urn, 8);
            let dp_mean = dist.mean();
            for (m, f) in dp_mean.iter().zip(float_mean.iter()) {
                assert!(
                    (rational_to_f64(m) - f).abs() <= 1e-10,
                    "mean mismatch for {name}"
                );
            }
        }
    }

    #[test]
    fn mc_moment_matches_dp_oracle_for_polya() {
        let spec = corpus::classical_polya();
        let urn = spec.clone().balanced().unwrap();
        let n = 12u64;
        let batch = run_batch(&spec, n, 20_000, 515, &SimOptions::default()).unwrap();
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        let dist = exact_distribution(&spec, n, &DpOptions::default()).unwrap();
        for p in [2.0, 3.0, 4.0] {
            let report = mc_central_moment(&batch, &means, p).unwrap();
            let pt = report.grid.last().unwrap();
            assert_eq!(pt.n, n);
            let oracle = exact_central_moment(&dist, &exact_mean(&urn, n), p).unwrap();
            assert!(
                (pt.estimate - oracle.norm_p).abs() <= 3.0 * pt.stderr,
                "p = {p}: mc {} vs dp {} (se {})",
                pt.estimate,
                oracle.norm_p,
                pt.stderr
            );
        }
    }

    #[test]
    fn moment_report_refuses_tiny_batches() {
        let spec = corpus::classical_polya();
        let urn = spec.clone().balanced().unwrap();
        let batch = run_batch(&spec, 4, 50, 1, &SimOptions::default()).unwrap();
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        assert!(mc_central_moment(&batch, &means, 2.0).is_err());
    }

    #[test]
    fn activity_projection_of_residuals_vanishes() {
        // a . (X_n - E X_n) = 0 pathwise for balanced urns.
        let spec = corpus::critical();
        let urn = spec.clone().balanced().unwrap();
        let batch = run_batch(&spec, 256, 200, 10, &SimOptions::default()).unwrap();
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        let lookup = mean_lookup(&means);
        for t in &batch.trajectories {
            for (n, x) in &t.checkpoints {
                let d = x - *lookup.get(n).unwrap();
                let along_a = urn.activities().dot(&d).abs();
                assert!(along_a <= 1e-8 * urn.total_weight(*n));
            }
        }
    }

    #[test]
    fn fit_growth_recovers_synthetic_exponents() {
        // m_n = 3 n^{0.6}.
        let series: Vec<(u64, f64)> = (7..=17).map(|k| {
            let n = 1u64 << k;
            (n, 3.0 * (n as f64).powf(0.6))
        })
        .collect();
        let fit = fit_growth(&series, 0.0).unwrap();
        assert!((fit.alpha_hat - 0.6).abs() <= 1e-6);
        assert!(fit.stderr <= 1e-6);
        // m_n = n^{1/2} (log n)^{1/2} with the log power fixed at 1/2.
        let series: Vec<(u64, f64)> = (7..=17).map(|k| {
            let n = 1u64 << k;
            (n, (n as f64).sqrt() * (n as f64).ln().sqrt())
        })
        .collect();
        let fit = fit_growth(&series, 0.5).unwrap();
        assert!((fit.alpha_hat - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn fit_growth_rejects_bad_grids() {
        let short: Vec<(u64, f64)> = vec![(128, 1.0), (256, 2.0), (512, 3.0)];
        assert!(fit_growth(&short, 0.0).is_err());
        let narrow: Vec<(u64, f64)> = (0..6).map(|k| (128 + k, 1.0 + k as f64)).collect();
        assert!(fit_growth(&narrow, 0.0).is_err());
        let negative: Vec<(u64, f64)> = (7..=17).map(|k| (1u64 << k, -1.0)).collect();
        assert!(fit_growth(&negative, 0.0).is_err());
    }

    #[test]
    fn moment_bound_cases_on_corpus() {
        let cases = [
            (corpus::friedman(), (0.5, 0.0)),
            (corpus::critical(), (0.5, 0.5)),
            (corpus::large(), (0.6, 0.0)),
            (corpus::classical_polya(), (1.0, 0.0)),
        ];
        for (spec, expected) in cases {
            let urn = spec.balanced().unwrap();
            let spectrum = decompose_intensity(&urn.intensity_matrix()).unwrap();
            let cls = crate::spectral::classify_urn(&spectrum, urn.b()).unwrap();
            let (e, l) = moment_bound_case(&cls);
            assert_relative_eq!(e, expected.0, max_relative = 1e-12);
            assert_relative_eq!(l, expected.1, max_relative = 1e-12);
        }
    }

    #[test]
    fn friedman_growth_exponent_is_half() {
        let spec = corpus::friedman();
        let urn = spec.clone().balanced().unwrap();
        let batch = run_batch(&spec, 1 << 13, 2_000, 808, &SimOptions::default()).unwrap();
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        let report = mc_central_moment(&batch, &means, 2.0).unwrap();
        let series: Vec<(u64, f64)> = report
            .series()
            .into_iter()
            .filter(|(n, _)| *n >= 64)
            .collect();
        let fit = fit_growth(&series, 0.0).unwrap();
        assert!(
            (fit.alpha_hat - 0.5).abs() <= 0.05,
            "fitted exponent {:.4}",
            fit.alpha_hat
        );
    }

    #[test]
    fn projected_moment_of_lambda1_vanishes() {
        // Theorem: P_{lambda_1}(X_n - E X_n) = 0 when lambda_1 is simple.
        let spec = corpus::friedman();
        let urn = spec.clone().balanced().unwrap();
        let spectrum = decompose_intensity(&urn.intensity_matrix()).unwrap();
        let batch = run_batch(&spec, 512, 200, 3, &SimOptions::default()).unwrap();
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        let report = projected_moment(&batch, &spectrum.components[0], &means, 2.0).unwrap();
        for pt in &report.grid {
            assert!(
                pt.estimate <= 1e-8 * urn.total_weight(pt.n),
                "lambda_1 projection at n = {}: {}",
                pt.n,
                pt.estimate
            );
        }
    }

    #[test]
    fn friedman_covariance_over_n_stabilizes() {
        let spec = corpus::friedman();
        let urn = spec.clone().balanced().unwrap();
        let spectrum = decompose_intensity(&urn.intensity_matrix()).unwrap();
        let cls = crate::spectral::classify_urn(&spectrum, urn.b()).unwrap();
        let batch = run_batch(&spec, 1 << 13, 4_000, 99, &SimOptions::default()).unwrap();
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        let covs = covariance_series(&batch, &means).unwrap();
        // External reference: the limit covariance of this urn, computed
        // from the exact variance recursion Var D_{n+1} = Var D_n (1 - 2/w_n)
        // + 1 (D = X_1 - X_2), which gives Var D_n / n -> 1/3 and hence
        // Cov/n -> [[1/12, -1/12], [-1/12, 1/12]].
        let sigma = DMatrix::from_row_slice(
            2,
            2,
            &[1.0 / 12.0, -1.0 / 12.0, -1.0 / 12.0, 1.0 / 12.0],
        );
        let se = covariance_se_at(&batch, &means, 1 << 13, BOOTSTRAP_RESAMPLES).unwrap();
        let verdict = covariance_normalization_check(&covs, &cls, Some((&sigma, &se))).unwrap();
        assert!(
            verdict.stabilized,
            "rel change {:.3}",
            verdict.rel_change
        );
        assert_eq!(verdict.reference_ok, Some(true));
        assert!((verdict.normalized_cov[(0, 0)] - 1.0 / 12.0).abs() <= 0.01);
    }

    #[test]
    fn covariance_check_rejects_large_and_degenerate_urns() {
        for spec in [corpus::large(), corpus::classical_polya()] {
            let urn = spec.clone().balanced().unwrap();
            let spectrum = decompose_intensity(&urn.intensity_matrix()).unwrap();
            let cls = crate::spectral::classify_urn(&spectrum, urn.b()).unwrap();
            let covs = vec![(128u64, DMatrix::identity(2, 2)), (1280, DMatrix::identity(2, 2))];
            assert!(matches!(
                covariance_normalization_check(&covs, &cls, None),
                Err(UrnError::NotApplicable(_))
            ));
        }
    }

    #[test]
    fn coin_flip_attains_burkholder_equality_at_p_2() {
        let sample = coin_flip_martingale(400, 4_000, 2718, 2.0);
        let verdict = burkholder_check(&sample, 2718).unwrap();
        // ||X||_2 = ||S||_2 = 1 exactly; the MC estimate sits within noise.
        assert!(verdict.burkholder_ok);
        assert!((verdict.sn_p - 1.0).abs() <= 1e-12);
        assert!((verdict.xn_p - 1.0).abs() <= 4.0 * verdict.slack_se);
        assert!((verdict.cp_empirical - 1.0).abs() <= 4.0 * verdict.slack_se);
    }

    #[test]
    fn single_weight_reduces_to_trivial_inequality() {
        // One nonzero weight A_1 = I: X = Y_1, S = |Y_1|, and the inequality
        // is ||Y_1||_p <= (p - 1) ||Y_1||_p.
        let values: Vec<f64> = (0..200).map(|k| 1.0 + (k % 7) as f64).collect();
        let sample = MartingaleSample {
            p: 2.0,
            final_abs: values.clone(),
            square_fn: values,
            weight_sq_sum: 1.0,
            sup_increment_norm_p: 1.0,
        };
        let verdict = burkholder_check(&sample, 0).unwrap();
        assert!(verdict.burkholder_ok);
        assert_relative_eq!(verdict.slack, verdict.sn_p - verdict.xn_p);
    }

    #[test]
    fn urn_martingale_satisfies_inequality_with_margin() {
        let urn = corpus::friedman().balanced().unwrap();
        for p in [2.0, 4.0] {
            let sample = urn_martingale(&urn, 300, 2_000, 1001, p).unwrap();
            let verdict = burkholder_check(&sample, 1001).unwrap();
            assert!(
                verdict.burkholder_ok,
                "p = {p}: slack {} (se {})",
                verdict.slack,
                verdict.slack_se
            );
            assert!(verdict.ll2_ok, "p = {p}: C_p {}", verdict.cp_empirical);
            assert!(verdict.cp_empirical <= p - 1.0 + 0.5);
        }
    }
}
