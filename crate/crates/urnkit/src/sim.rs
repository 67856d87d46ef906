//! Seeded, reproducible simulation of the urn process, with optional
//! recording of drawn colours and martingale increments, and pathwise
//! verification of the decomposition identity.
//!
//! Randomness comes from counter-based ChaCha streams keyed by
//! `(master_seed, replicate_index)`: replicate streams are independent and a
//! path is reproduced bit-for-bit by its key, regardless of how many other
//! paths run concurrently.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, UrnError};
use crate::products::ProductChain;
use crate::urn::UrnSpec;

/// Counts this far below zero are treated as tenability violations; counts
/// in `[-TENABILITY_TOL, 0)` are clamped to zero as floating-point dust.
pub const TENABILITY_TOL: f64 = 1e-9;

/// Key of one random stream: `(master_seed, replicate_index)` pairs map to
/// independent ChaCha streams. Replicate indices below 2^32 are reserved for
/// simulation paths; higher domains derive auxiliary streams (bootstrap
/// resampling and the like).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replicate_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        Self {
            master_seed,
            replicate_index,
        }
    }

    /// Auxiliary stream for non-path randomness, separated from path streams
    /// by a domain tag.
    pub fn auxiliary(master_seed: u64, domain: u32, index: u32) -> Self {
        Self {
            master_seed,
            replicate_index: ((domain as u64 + 1) << 32) | index as u64,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replicate_index);
        rng
    }
}

/// Reason a path stopped before completing its draws.
#[derive(Debug, Clone, PartialEq)]
pub struct TenabilityViolation {
    pub step: u64,
    pub reason: String,
}

/// One simulated path, with states at geometric checkpoints and optional
/// draw/increment recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub replicate: u64,
    /// `(n, X_n)` on the checkpoint grid (plus the final step).
    pub checkpoints: Vec<(u64, DVector<f64>)>,
    /// Colour of the n-th draw (0-based colours), when recorded.
    pub drawn: Option<Vec<usize>>,
    /// Martingale increments `Y_n = Delta X_{n-1} - A X_{n-1} / w_{n-1}` for
    /// `n = 1..=steps`, when recorded.
    pub increments: Option<Vec<DVector<f64>>>,
    pub tenability_ok: bool,
    pub violation: Option<TenabilityViolation>,
    /// Number of draws actually performed.
    pub steps: u64,
    pub final_state: DVector<f64>,
}

/// Simulation options.
#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Ratio of the geometric checkpoint grid (from n = 1; n_max is always
    /// included).
    pub checkpoint_ratio: f64,
    pub record_drawn: bool,
    pub record_increments: bool,
    /// Unbalanced specs simulate only with this explicit opt-in.
    pub allow_unbalanced: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            checkpoint_ratio: 2.0,
            record_drawn: false,
            record_increments: false,
            allow_unbalanced: false,
        }
    }
}

/// The geometric checkpoint grid: 1, then successive multiplications by
/// `ratio` (rounded, strictly increasing), capped and terminated by `n_max`.
pub fn checkpoint_grid(n_max: u64, ratio: f64) -> Vec<u64> {
    let mut grid = Vec::new();
    if n_max == 0 {
        return vec![0];
    }
    let mut n = 1u64;
    while n < n_max {
        grid.push(n);
        let next = ((n as f64) * ratio).round() as u64;
        n = next.max(n + 1);
    }
    grid.push(n_max);
    grid
}

/// Samples an index proportionally to the (nonnegative) weights. The caller
/// guarantees a positive total; zero-weight entries are never selected.
fn sample_index(weights: &DVector<f64>, total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding pushed u past the last bin; take the last positive weight.
    weights
        .iter()
        .rposition(|w| *w > 0.0)
        .expect("positive total weight")
}

/// Outcome of a single draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub colour: usize,
    pub atom: usize,
}

/// Performs one draw-and-replace step in place: a colour is sampled with
/// probability `a_j X_j / (a . X)`, an atom of its replacement law is
/// sampled independently, and the state is incremented.
pub fn step(state: &mut DVector<f64>, spec: &UrnSpec, rng: &mut ChaCha8Rng) -> Result<StepRecord> {
    let weights = state.component_mul(spec.activities());
    let total = weights.sum();
    if !(total > 0.0) {
        return Err(UrnError::Tenability {
            step: 0,
            reason: format!("total activity {total} is not positive"),
        });
    }
    let colour = sample_index(&weights, total, rng);
    let law = &spec.replacements()[colour];
    let atom = if law.is_deterministic() {
        0
    } else {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = law.atoms().len() - 1;
        for (k, a) in law.atoms().iter().enumerate() {
            acc += a.p;
            if u < acc {
                chosen = k;
                break;
            }
        }
        chosen
    };
    *state += &law.atoms()[atom].v;
    Ok(StepRecord { colour, atom })
}

/// Runs one path of `n_max` draws keyed by `key`.
///
/// Tenability is monitored at every step: a count below `-TENABILITY_TOL`
/// or a nonpositive total activity marks the trajectory and stops the
/// simulation; counts in `[-TENABILITY_TOL, 0)` are clamped to zero.
pub fn run_path(
    spec: &UrnSpec,
    n_max: u64,
    key: StreamKey,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let cert = spec.balance();
    if !cert.balanced && !opts.allow_unbalanced {
        return Err(UrnError::NotBalanced {
            b_estimate: cert.b,
            worst_deviation: cert.worst_deviation,
        });
    }
    let intensity = opts
        .record_increments
        .then(|| spec.intensity_matrix().into_inner());
    let grid = checkpoint_grid(n_max, opts.checkpoint_ratio);
    let mut grid_iter = grid.iter().copied().peekable();

    let mut rng = key.rng();
    let mut state = spec.initial().clone();
    let mut drawn = opts.record_drawn.then(Vec::new);
    let mut increments = opts.record_increments.then(Vec::new);
    let mut checkpoints = Vec::with_capacity(grid.len());
    let mut violation = None;
    let mut steps = 0;

    while grid_iter.peek() == Some(&0) {
        grid_iter.next();
        checkpoints.push((0, state.clone()));
    }

    for n in 0..n_max {
        let drift = intensity.as_ref().map(|a| {
            let w = spec.activities().dot(&state);
            a * &state / w
        });
        let before = opts.record_increments.then(|| state.clone());
        let record = match step(&mut state, spec, &mut rng) {
            Ok(r) => r,
            Err(UrnError::Tenability { reason, .. }) => {
                violation = Some(TenabilityViolation { step: n + 1, reason });
                break;
            }
            Err(e) => return Err(e),
        };
        steps = n + 1;
        if let Some(d) = drawn.as_mut() {
            d.push(record.colour);
        }
        if let (Some(inc), Some(before), Some(drift)) = (increments.as_mut(), before, drift) {
            inc.push(&state - before - drift);
        }
        // Tenability monitor: clamp floating dust, flag real violations.
        let mut bad = None;
        for i in 0..state.len() {
            if state[i] < -TENABILITY_TOL {
                bad = Some(format!(
                    "count of colour {i} dropped to {} at step {}",
                    state[i],
                    n + 1
                ));
            } else if state[i] < 0.0 {
                state[i] = 0.0;
            }
        }
        if let Some(reason) = bad {
            violation = Some(TenabilityViolation { step: n + 1, reason });
            break;
        }
        if grid_iter.peek() == Some(&(n + 1)) {
            grid_iter.next();
            checkpoints.push((n + 1, state.clone()));
        }
    }

    Ok(Trajectory {
        replicate: key.replicate_index,
        checkpoints,
        drawn,
        increments,
        tenability_ok: violation.is_none(),
        violation,
        steps,
        final_state: state,
    })
}

/// A batch of independent replicates of one spec, keyed by replicate index.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub master_seed: u64,
    pub n_max: u64,
    pub trajectories: Vec<Trajectory>,
}

impl Batch {
    /// Checkpoint grid shared by all complete trajectories.
    pub fn checkpoints(&self) -> Vec<u64> {
        self.trajectories
            .iter()
            .find(|t| t.tenability_ok)
            .map(|t| t.checkpoints.iter().map(|(n, _)| *n).collect())
            .unwrap_or_default()
    }
}

/// Runs replicates `0..r` in parallel. The result is keyed by replicate
/// index and identical regardless of thread count or execution order;
/// per-path tenability failures are recorded without aborting the rest.
pub fn run_batch(
    spec: &UrnSpec,
    n_max: u64,
    r: u64,
    master_seed: u64,
    opts: &SimOptions,
) -> Result<Batch> {
    run_batch_range(spec, n_max, 0..r, master_seed, opts)
}

/// Runs an explicit range of replicate indices (used to split a batch into
/// deterministic sub-batches).
pub fn run_batch_range(
    spec: &UrnSpec,
    n_max: u64,
    replicates: std::ops::Range<u64>,
    master_seed: u64,
    opts: &SimOptions,
) -> Result<Batch> {
    if replicates.is_empty() {
        return Err(UrnError::InvalidArgument(
            "batch needs at least one replicate".into(),
        ));
    }
    let trajectories: Result<Vec<Trajectory>> = replicates
        .clone()
        .into_par_iter()
        .map(|idx| run_path(spec, n_max, StreamKey::new(master_seed, idx), opts))
        .collect();
    Ok(Batch {
        master_seed,
        n_max,
        trajectories: trajectories?,
    })
}

/// Relative residual of the pathwise decomposition identity
/// `X_n = F_{0,n} X0 + sum_l F_{l,n} Y_l`, evaluated at the end of the
/// trajectory with a backward-accumulated product (cost O(n) matrix
/// multiplications). The identity is exact, so the result is floating-point
/// noise.
pub fn martingale_residual(trajectory: &Trajectory, chain: &ProductChain) -> Result<f64> {
    let increments = trajectory
        .increments
        .as_ref()
        .ok_or(UrnError::MissingIncrements)?;
    let n = trajectory.steps;
    if increments.len() != n as usize {
        return Err(UrnError::InvalidArgument(format!(
            "{} increments recorded for {n} steps",
            increments.len()
        )));
    }
    let q = chain.q();
    let mut g = DMatrix::<f64>::identity(q, q);
    let mut weighted_sum = DVector::<f64>::zeros(q);
    // g holds F_{l,n}; descend l = n..1, then finish with g = F_{0,n}.
    for l in (1..=n).rev() {
        weighted_sum += &g * &increments[(l - 1) as usize];
        g = &g * chain.factor(l - 1);
    }
    let x0 = chain.initial().ok_or_else(|| {
        UrnError::InvalidArgument("martingale residual needs an urn-backed chain".into())
    })?;
    let x_n = &trajectory.final_state;
    let reconstructed = &g * x0 + weighted_sum;
    Ok((x_n - reconstructed).norm() / (1.0 + x_n.norm()))
}

/// Exact one-step conditional-mean identity: the mean of `Delta X` under the
/// draw-and-replace law at state `x`, minus `A x / (a . x)`. This is an
/// algebraic identity, so the result is floating-point noise.
pub fn conditional_mean_exact(spec: &UrnSpec, x: &DVector<f64>) -> f64 {
    let weights = x.component_mul(spec.activities());
    let total = weights.sum();
    let mut expected = DVector::zeros(spec.q());
    for (j, law) in spec.replacements().iter().enumerate() {
        if weights[j] > 0.0 {
            expected.axpy(weights[j] / total, &law.mean(), 1.0);
        }
    }
    let drift = spec.intensity_matrix().as_matrix() * x / total;
    (expected - drift).norm()
}

/// Exact standard deviation of the one-step replacement around its
/// conditional mean at state `x`: `sqrt(E |Delta X - E(Delta X | x)|^2)`.
/// Zero for states whose next step is deterministic.
pub fn one_step_sd(spec: &UrnSpec, x: &DVector<f64>) -> f64 {
    let weights = x.component_mul(spec.activities());
    let total = weights.sum();
    let mut mean = DVector::<f64>::zeros(spec.q());
    let mut second = 0.0_f64;
    for (j, law) in spec.replacements().iter().enumerate() {
        if weights[j] <= 0.0 {
            continue;
        }
        let p_draw = weights[j] / total;
        for atom in law.atoms() {
            mean.axpy(p_draw * atom.p, &atom.v, 1.0);
            second += p_draw * atom.p * atom.v.norm_squared();
        }
    }
    (second - mean.norm_squared()).max(0.0).sqrt()
}

/// Monte Carlo check of the same identity: the empirical mean of `m` one-step
/// replacements from state `x`, minus `A x / (a . x)`. Returns the Euclidean
/// deviation, which should be O(m^{-1/2}).
pub fn conditional_mean_check(
    spec: &UrnSpec,
    x: &DVector<f64>,
    m: u64,
    key: StreamKey,
) -> Result<f64> {
    if m < 1_000 {
        return Err(UrnError::InvalidArgument(format!(
            "need at least 1000 samples, got {m}"
        )));
    }
    let mut rng = key.rng();
    let mut sum = DVector::<f64>::zeros(spec.q());
    let mut state = x.clone();
    for _ in 0..m {
        state.copy_from(x);
        step(&mut state, spec, &mut rng)?;
        sum += &state - x;
    }
    let empirical = sum / m as f64;
    let total = x.component_mul(spec.activities()).sum();
    let drift = spec.intensity_matrix().as_matrix() * x / total;
    Ok((empirical - drift).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::products::exact_mean;
    use nalgebra::dvector;

    #[test]
    fn checkpoint_grid_shape() {
        assert_eq!(checkpoint_grid(8, 2.0), vec![1, 2, 4, 8]);
        assert_eq!(checkpoint_grid(10, 2.0), vec![1, 2, 4, 8, 10]);
        assert_eq!(checkpoint_grid(1, 2.0), vec![1]);
        // Ratio close to 1 still advances.
        let g = checkpoint_grid(5, 1.01);
        assert_eq!(g, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn step_draws_only_positive_weights() {
        // X = (0, 3): colour 2 with probability one.
        let spec = corpus::classical_polya();
        let mut rng = StreamKey::new(7, 0).rng();
        for _ in 0..50 {
            let mut state = dvector![0.0, 3.0];
            let rec = step(&mut state, &spec, &mut rng).unwrap();
            assert_eq!(rec.colour, 1);
        }
        // Zero-activity colour is never drawn.
        let spec = crate::urn::UrnSpec::with_default_colors(
            dvector![1.0, 0.0],
            dvector![2.0, 5.0],
            vec![
                crate::urn::ReplacementDistribution::deterministic(dvector![1.0, 0.0]),
                crate::urn::ReplacementDistribution::deterministic(dvector![0.0, 1.0]),
            ],
        )
        .unwrap();
        for _ in 0..50 {
            let mut state = dvector![2.0, 5.0];
            let rec = step(&mut state, &spec, &mut rng).unwrap();
            assert_eq!(rec.colour, 0);
        }
    }

    #[test]
    fn identical_keys_reproduce_paths_bitwise() {
        let spec = corpus::classical_polya();
        let opts = SimOptions {
            record_drawn: true,
            record_increments: true,
            ..Default::default()
        };
        let a = run_path(&spec, 5_000, StreamKey::new(42, 3), &opts).unwrap();
        let b = run_path(&spec, 5_000, StreamKey::new(42, 3), &opts).unwrap();
        assert_eq!(a, b);
        // A different replicate index diverges.
        let c = run_path(&spec, 5_000, StreamKey::new(42, 4), &opts).unwrap();
        assert_ne!(a.final_state, c.final_state);
    }

    #[test]
    fn balance_conservation_along_paths() {
        for (name, spec) in corpus::balanced_corpus() {
            let urn = spec.clone().balanced().unwrap();
            let traj = run_path(&spec, 1_000, StreamKey::new(11, 0), &SimOptions::default())
                .unwrap();
            assert!(traj.tenability_ok);
            for (n, x) in &traj.checkpoints {
                let w = spec.activities().dot(x);
                let expected = urn.total_weight(*n);
                assert!(
                    (w - expected).abs() <= 1e-9 * expected,
                    "activity drifted for {name} at n = {n}"
                );
            }
        }
    }

    #[test]
    fn friedman_counts_never_fall_below_one() {
        let spec = corpus::friedman();
        let traj = run_path(&spec, 2_000, StreamKey::new(5, 9), &SimOptions::default()).unwrap();
        assert!(traj.tenability_ok);
        assert!(traj.final_state.iter().all(|x| *x >= 1.0));
    }

    #[test]
    fn broken_spec_flags_tenability_violation() {
        // xi_1 = (-2, 3) from X0 = (1, 1): the first draw of colour 1 takes
        // that count to -1.
        let spec = crate::urn::UrnSpec::with_default_colors(
            dvector![1.0, 1.0],
            dvector![1.0, 1.0],
            vec![
                crate::urn::ReplacementDistribution::deterministic(dvector![-2.0, 3.0]),
                crate::urn::ReplacementDistribution::deterministic(dvector![1.0, 0.0]),
            ],
        )
        .unwrap();
        let mut seen_violation = false;
        for rep in 0..20 {
            let traj = run_path(&spec, 50, StreamKey::new(1, rep), &SimOptions::default())
                .unwrap();
            if let Some(v) = &traj.violation {
                assert!(!traj.tenability_ok);
                // The violating step is the first draw of colour 1.
                assert!(v.reason.contains("colour 0"));
                seen_violation = true;
            }
        }
        assert!(seen_violation);
    }

    #[test]
    fn unbalanced_requires_opt_in() {
        let spec = corpus::unbalanced();
        let err = run_path(&spec, 10, StreamKey::new(0, 0), &SimOptions::default());
        assert!(matches!(err, Err(UrnError::NotBalanced { .. })));
        let opts = SimOptions {
            allow_unbalanced: true,
            ..Default::default()
        };
        let traj = run_path(&spec, 10, StreamKey::new(0, 0), &opts).unwrap();
        assert!(traj.tenability_ok);
    }

    #[test]
    fn batch_is_deterministic_and_splittable() {
        let spec = corpus::friedman();
        let opts = SimOptions::default();
        let full = run_batch(&spec, 256, 32, 99, &opts).unwrap();
        let again = run_batch(&spec, 256, 32, 99, &opts).unwrap();
        assert_eq!(full, again);
        // Split into two ranges with the same master seed and concatenate.
        let lo = run_batch_range(&spec, 256, 0..10, 99, &opts).unwrap();
        let hi = run_batch_range(&spec, 256, 10..32, 99, &opts).unwrap();
        let glued: Vec<_> = lo
            .trajectories
            .iter()
            .chain(hi.trajectories.iter())
            .cloned()
            .collect();
        assert_eq!(full.trajectories, glued);
        // R = 1 batch equals run_path with the same key.
        let single = run_batch(&spec, 256, 1, 7, &opts).unwrap();
        let path = run_path(&spec, 256, StreamKey::new(7, 0), &opts).unwrap();
        assert_eq!(single.trajectories[0], path);
    }

    #[test]
    fn batch_keeps_running_past_per_path_violations() {
        // Some replicates of this spec die at their first draw of colour 1;
        // the batch reports them and completes the rest.
        let spec = crate::urn::UrnSpec::with_default_colors(
            dvector![1.0, 1.0],
            dvector![1.0, 1.0],
            vec![
                crate::urn::ReplacementDistribution::deterministic(dvector![-2.0, 3.0]),
                crate::urn::ReplacementDistribution::deterministic(dvector![1.0, 0.0]),
            ],
        )
        .unwrap();
        let batch = run_batch(&spec, 30, 24, 3, &SimOptions::default()).unwrap();
        assert_eq!(batch.trajectories.len(), 24);
        let failed = batch.trajectories.iter().filter(|t| !t.tenability_ok).count();
        assert!(failed > 0 && failed < 24, "failed = {failed}");
        for t in batch.trajectories.iter().filter(|t| t.tenability_ok) {
            assert_eq!(t.steps, 30);
        }
    }

    #[test]
    fn batch_mean_tracks_exact_mean() {
        // 2000 replicates of the classical Pólya urn at n = 1000: the sample
        // mean of X_{n,1} lands within 3 standard errors of (n + 2) / 2.
        let spec = corpus::classical_polya();
        let urn = spec.clone().balanced().unwrap();
        let batch = run_batch(&spec, 1_000, 2_000, 1234, &SimOptions::default()).unwrap();
        let values: Vec<f64> = batch
            .trajectories
            .iter()
            .map(|t| t.final_state[0])
            .collect();
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
        let se = (var / r).sqrt();
        let exact = exact_mean(&urn, 1_000)[0];
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "sample mean {mean} vs exact {exact} (se {se})"
        );
    }

    #[test]
    fn martingale_identity_residual_is_noise() {
        for (name, spec) in corpus::balanced_corpus() {
            let urn = spec.clone().balanced().unwrap();
            let chain = ProductChain::for_urn(&urn);
            let opts = SimOptions {
                record_increments: true,
                ..Default::default()
            };
            let traj = run_path(&spec, 1_000, StreamKey::new(2024, 0), &opts).unwrap();
            let residual = martingale_residual(&traj, &chain).unwrap();
            assert!(
                residual <= 1e-8,
                "decomposition residual {residual:.3e} for {name}"
            );
        }
    }

    #[test]
    fn martingale_residual_requires_increments() {
        let spec = corpus::friedman();
        let urn = spec.clone().balanced().unwrap();
        let chain = ProductChain::for_urn(&urn);
        let traj = run_path(&spec, 100, StreamKey::new(0, 0), &SimOptions::default()).unwrap();
        assert!(matches!(
            martingale_residual(&traj, &chain),
            Err(UrnError::MissingIncrements)
        ));
    }

    #[test]
    fn conditional_mean_identities() {
        // Exact enumeration: deviation is floating-point zero.
        let spec = corpus::classical_polya();
        assert!(conditional_mean_exact(&spec, &dvector![1.0, 1.0]) <= 1e-14);
        let spec = corpus::random_replacement();
        assert!(conditional_mean_exact(&spec, &dvector![2.0, 3.0]) <= 1e-14);
        // Monte Carlo from Friedman state (2,1): the one-step replacement has
        // exact conditional sd 2/3, so 5 sigma / sqrt(M) bounds the deviation.
        let spec = corpus::friedman();
        let m = 100_000u64;
        let dev =
            conditional_mean_check(&spec, &dvector![2.0, 1.0], m, StreamKey::new(77, 0)).unwrap();
        let sigma = 2.0 / 3.0;
        assert!(
            dev <= 5.0 * sigma / (m as f64).sqrt(),
            "deviation {dev:.3e} too large"
        );
    }

    #[test]
    fn empirical_increment_mean_is_centred() {
        // E(Y_n | F_{n-1}) = 0: across replicates at fixed n the sample mean
        // of each Y component is within 4 sd / sqrt(R) of zero.
        let spec = corpus::friedman();
        let opts = SimOptions {
            record_increments: true,
            ..Default::default()
        };
        let batch = run_batch(&spec, 200, 400, 31, &opts).unwrap();
        let r = batch.trajectories.len() as f64;
        for n in [10usize, 100, 199] {
            for comp in 0..2 {
                let xs: Vec<f64> = batch
                    .trajectories
                    .iter()
                    .map(|t| t.increments.as_ref().unwrap()[n][comp])
                    .collect();
                let mean = xs.iter().sum::<f64>() / r;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
                let sd = var.sqrt();
                assert!(
                    mean.abs() <= 4.0 * sd / r.sqrt(),
                    "Y mean {mean:.4e} at n = {n}, comp {comp} (sd {sd:.3e})"
                );
            }
        }
    }
}
