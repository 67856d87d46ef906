//! Urn specifications: finite-support replacement laws, balance and
//! tenability checks, and the intensity matrix.
//!
//! An urn over `q` colours holds a nonnegative real count of balls of each
//! colour. Each colour `i` carries an activity `a_i >= 0` and a replacement
//! law: when a ball of colour `i` is drawn, a vector sampled from that law is
//! added to the urn. The urn is *balanced* when the activity added per draw,
//! `a . xi_i`, is one fixed constant `b > 0` for every colour and every atom.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UrnError};

/// Relative tolerance for the balance check: deviations up to
/// `BALANCE_TOL * max(1, |b|)` are treated as zero.
pub const BALANCE_TOL: f64 = 1e-12;

/// Tolerance for "atom probabilities sum to one".
pub const PROB_TOL: f64 = 1e-12;

/// Entries within this distance of an integer are treated as integers by the
/// static tenability check.
pub const INTEGER_TOL: f64 = 1e-9;

/// One atom of a finite-support replacement law: with probability `p` the
/// drawn ball is returned together with `v[j]` balls of colour `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub p: f64,
    pub v: DVector<f64>,
}

/// Finite-support law of the replacement vector for one colour.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementDistribution {
    atoms: Vec<Atom>,
}

impl ReplacementDistribution {
    /// Builds a distribution from its atoms, checking that the list is
    /// non-empty, all probabilities lie in (0, 1], all atom vectors have the
    /// same dimension, and the probabilities sum to one within [`PROB_TOL`].
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(UrnError::InvalidSpec(
                "replacement distribution has no atoms".into(),
            ));
        }
        let dim = atoms[0].v.len();
        let mut mass = 0.0;
        for atom in &atoms {
            if atom.v.len() != dim {
                return Err(UrnError::InvalidSpec(format!(
                    "replacement atoms have mixed dimensions ({} vs {dim})",
                    atom.v.len()
                )));
            }
            if !atom.p.is_finite() || atom.p <= 0.0 || atom.p > 1.0 {
                return Err(UrnError::InvalidSpec(format!(
                    "atom probability {} outside (0, 1]",
                    atom.p
                )));
            }
            if atom.v.iter().any(|x| !x.is_finite()) {
                return Err(UrnError::InvalidSpec(
                    "atom vector has non-finite entries".into(),
                ));
            }
            mass += atom.p;
        }
        if (mass - 1.0).abs() > PROB_TOL {
            return Err(UrnError::InvalidSpec(format!("probability mass {mass}")));
        }
        Ok(Self { atoms })
    }

    /// A deterministic replacement: the single atom `v` with probability one.
    pub fn deterministic(v: DVector<f64>) -> Self {
        Self {
            atoms: vec![Atom { p: 1.0, v }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_deterministic(&self) -> bool {
        self.atoms.len() == 1
    }

    /// Mean replacement vector `E xi = sum_k p_k v_k`.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.atoms[0].v.len());
        for atom in &self.atoms {
            m.axpy(atom.p, &atom.v, 1.0);
        }
        m
    }
}

/// A generalized Pólya urn specification: colour names, activities, the
/// nonrandom initial state, and one replacement law per colour.
#[derive(Debug, Clone, PartialEq)]
pub struct UrnSpec {
    colors: Vec<String>,
    activities: DVector<f64>,
    initial: DVector<f64>,
    replacements: Vec<ReplacementDistribution>,
}

impl UrnSpec {
    /// Builds and validates a spec. Validation enforces: at least two
    /// colours, matching dimensions throughout, nonnegative activities,
    /// nonnegative initial counts, and positive initial activity `a . X0`.
    pub fn new(
        colors: Vec<String>,
        activities: DVector<f64>,
        initial: DVector<f64>,
        replacements: Vec<ReplacementDistribution>,
    ) -> Result<Self> {
        let q = colors.len();
        if q < 2 {
            return Err(UrnError::InvalidSpec(format!(
                "need at least 2 colours, got {q}"
            )));
        }
        if activities.len() != q || initial.len() != q || replacements.len() != q {
            return Err(UrnError::InvalidSpec(format!(
                "dimension mismatch: {q} colours, {} activities, {} initial counts, {} replacement laws",
                activities.len(),
                initial.len(),
                replacements.len()
            )));
        }
        for law in &replacements {
            if law.atoms()[0].v.len() != q {
                return Err(UrnError::InvalidSpec(format!(
                    "replacement vectors have dimension {}, expected {q}",
                    law.atoms()[0].v.len()
                )));
            }
        }
        if activities.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(UrnError::InvalidSpec("negative activity".into()));
        }
        if initial.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(UrnError::InvalidSpec(
                "negative initial ball count".into(),
            ));
        }
        if activities.dot(&initial) <= 0.0 {
            return Err(UrnError::InvalidSpec("zero total activity".into()));
        }
        Ok(Self {
            colors,
            activities,
            initial,
            replacements,
        })
    }

    /// Convenience constructor with colour names `c0, c1, ...`.
    pub fn with_default_colors(
        activities: DVector<f64>,
        initial: DVector<f64>,
        replacements: Vec<ReplacementDistribution>,
    ) -> Result<Self> {
        let names = (0..activities.len()).map(|i| format!("c{i}")).collect();
        Self::new(names, activities, initial, replacements)
    }

    pub fn q(&self) -> usize {
        self.colors.len()
    }

    pub fn colors(&self) -> &[String] {
        &self.colors
    }

    pub fn activities(&self) -> &DVector<f64> {
        &self.activities
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn replacements(&self) -> &[ReplacementDistribution] {
        &self.replacements
    }

    /// Initial total activity `w0 = a . X0`.
    pub fn initial_weight(&self) -> f64 {
        self.activities.dot(&self.initial)
    }

    /// Checks whether every atom of every colour adds the same activity.
    ///
    /// The reported `b` is the common value when balanced; otherwise it is
    /// the plain mean of `a . v` over all atoms of all colours, and
    /// `worst_deviation` is the largest distance of any atom from that mean.
    pub fn balance(&self) -> BalanceCertificate {
        let mut added: Vec<f64> = Vec::new();
        for law in &self.replacements {
            for atom in law.atoms() {
                added.push(self.activities.dot(&atom.v));
            }
        }
        let b = added.iter().sum::<f64>() / added.len() as f64;
        let worst_deviation = added
            .iter()
            .map(|x| (x - b).abs())
            .fold(0.0_f64, f64::max);
        let balanced = worst_deviation <= BALANCE_TOL * b.abs().max(1.0) && b > 0.0;
        BalanceCertificate {
            balanced,
            b,
            worst_deviation,
        }
    }

    /// Static sufficient tenability check.
    ///
    /// Two provable cases:
    /// * every atom of every colour is componentwise nonnegative (nothing is
    ///   ever removed, so counts and total activity can only grow);
    /// * all entries are integers, off-diagonal atom entries are nonnegative,
    ///   the urn is balanced with `b > 0`, and for each colour `i` the
    ///   largest removal `-xi_ii` is at most `d_i = gcd(X0_i, all xi_ji
    ///   entries)`, so colour `i` stays a nonnegative multiple of `d_i`.
    ///
    /// Everything else is reported as [`Tenability::Unknown`].
    pub fn tenability(&self) -> Tenability {
        let all_nonneg = self
            .replacements
            .iter()
            .all(|law| law.atoms().iter().all(|a| a.v.iter().all(|x| *x >= 0.0)));
        if all_nonneg {
            return Tenability::ProvablyTenable;
        }

        // Divisibility route: integer entries only.
        let as_int = |x: f64| -> Option<i64> {
            let r = x.round();
            if (x - r).abs() <= INTEGER_TOL && r.abs() < 9e15 {
                Some(r as i64)
            } else {
                None
            }
        };
        let mut initial_int = Vec::with_capacity(self.q());
        for &x in self.initial.iter() {
            match as_int(x) {
                Some(v) => initial_int.push(v),
                None => return Tenability::Unknown,
            }
        }
        // atom_int[j][k] = integer entries of atom k of colour j
        let mut atom_int: Vec<Vec<Vec<i64>>> = Vec::with_capacity(self.q());
        for law in &self.replacements {
            let mut per_law = Vec::new();
            for atom in law.atoms() {
                let mut entries = Vec::with_capacity(self.q());
                for &x in atom.v.iter() {
                    match as_int(x) {
                        Some(v) => entries.push(v),
                        None => return Tenability::Unknown,
                    }
                }
                per_law.push(entries);
            }
            atom_int.push(per_law);
        }
        // Off-diagonal removals are never covered by this argument.
        for (j, per_law) in atom_int.iter().enumerate() {
            for entries in per_law {
                for (i, &e) in entries.iter().enumerate() {
                    if i != j && e < 0 {
                        return Tenability::Unknown;
                    }
                }
            }
        }
        // Removals make the total activity nondeterministic in general; we
        // only certify the case where balance keeps it positive forever.
        let cert = self.balance();
        if !cert.balanced {
            return Tenability::Unknown;
        }
        fn gcd(a: i64, b: i64) -> i64 {
            let (mut a, mut b) = (a.abs(), b.abs());
            while b != 0 {
                let t = a % b;
                a = b;
                b = t;
            }
            a
        }
        for i in 0..self.q() {
            let max_removal = atom_int[i]
                .iter()
                .map(|entries| (-entries[i]).max(0))
                .max()
                .unwrap_or(0);
            if max_removal == 0 {
                continue;
            }
            let mut g = initial_int[i];
            for per_law in &atom_int {
                for entries in per_law {
                    g = gcd(g, entries[i]);
                }
            }
            if g < max_removal {
                return Tenability::Unknown;
            }
        }
        Tenability::ProvablyTenable
    }

    /// The intensity matrix `A` with `A[i][j] = a_j * E xi_j[i]`: the mean
    /// inflow of colour `i` per draw of colour `j`, weighted by `j`'s
    /// activity. Note the transpose convention: columns index the drawn
    /// colour.
    pub fn intensity_matrix(&self) -> IntensityMatrix {
        let q = self.q();
        let mut a = DMatrix::zeros(q, q);
        for j in 0..q {
            let mean = self.replacements[j].mean();
            for i in 0..q {
                a[(i, j)] = self.activities[j] * mean[i];
            }
        }
        IntensityMatrix(a)
    }

    /// Promotes the spec to a [`BalancedUrn`], or reports the deviation.
    pub fn balanced(self) -> Result<BalancedUrn> {
        BalancedUrn::new(self)
    }
}

/// Verdict of the balance check. `b` is the common added activity when
/// `balanced`, and the mean added activity otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceCertificate {
    pub balanced: bool,
    pub b: f64,
    pub worst_deviation: f64,
}

/// Verdict of the static tenability check. `Unknown` means the sufficient
/// condition does not apply; the simulator still monitors tenability at
/// runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tenability {
    ProvablyTenable,
    Unknown,
}

impl std::fmt::Display for Tenability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tenability::ProvablyTenable => write!(f, "provably tenable"),
            Tenability::Unknown => write!(f, "tenability unknown"),
        }
    }
}

/// The q x q intensity matrix of an urn.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMatrix(DMatrix<f64>);

impl IntensityMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// True when every colour feeds every other through the mean dynamics:
    /// the directed graph with an edge j -> i whenever `A[i][j] != 0` is
    /// strongly connected. Reducible (e.g. triangular) urns fall outside the
    /// usual central-limit hypotheses.
    pub fn is_irreducible(&self) -> bool {
        let q = self.0.nrows();
        let mut reach = vec![vec![false; q]; q];
        for i in 0..q {
            reach[i][i] = true;
            for j in 0..q {
                if self.0[(i, j)] != 0.0 {
                    reach[j][i] = true;
                }
            }
        }
        for k in 0..q {
            for i in 0..q {
                for j in 0..q {
                    reach[i][j] |= reach[i][k] && reach[k][j];
                }
            }
        }
        reach.iter().all(|row| row.iter().all(|r| *r))
    }
}

impl std::ops::Deref for IntensityMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// A validated, provably balanced urn. Construction is the only place the
/// balance requirement is checked; all balanced-only operations take this
/// type.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedUrn {
    spec: UrnSpec,
    b: f64,
    w0: f64,
}

impl BalancedUrn {
    pub fn new(spec: UrnSpec) -> Result<Self> {
        let cert = spec.balance();
        if !cert.balanced {
            return Err(UrnError::NotBalanced {
                b_estimate: cert.b,
                worst_deviation: cert.worst_deviation,
            });
        }
        let w0 = spec.initial_weight();
        Ok(Self {
            spec,
            b: cert.b,
            w0,
        })
    }

    pub fn spec(&self) -> &UrnSpec {
        &self.spec
    }

    /// Activity added per draw.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Initial total activity `w0 = a . X0`.
    pub fn initial_weight(&self) -> f64 {
        self.w0
    }

    /// Deterministic total activity after `n` draws: `w_n = w0 + n b`.
    pub fn total_weight(&self, n: u64) -> f64 {
        self.w0 + n as f64 * self.b
    }

    pub fn q(&self) -> usize {
        self.spec.q()
    }

    pub fn activities(&self) -> &DVector<f64> {
        self.spec.activities()
    }

    pub fn initial(&self) -> &DVector<f64> {
        self.spec.initial()
    }

    pub fn intensity_matrix(&self) -> IntensityMatrix {
        self.spec.intensity_matrix()
    }
}
