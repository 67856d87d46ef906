//! Eigenstructure of the intensity matrix: eigenvalue clustering, Jordan
//! indices, spectral projections, and urn classification.
//!
//! For a q x q matrix `A` the complex space splits into generalized
//! eigenspaces. For each distinct eigenvalue `lambda` there is a projection
//! `P` commuting with `A` such that the projections sum to the identity,
//! `P_lambda P_mu = 0` for distinct eigenvalues, and
//! `A P = P A = lambda P + N` with `N` nilpotent. The index `nu` is the
//! largest integer with `N^nu != 0` (largest Jordan block size minus one).
//!
//! Everything here is plain numerical linear algebra on small dense
//! matrices; all arithmetic is complex even for real input, and all rank and
//! clustering decisions go through explicit configurable tolerances.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Result, UrnError};
use crate::urn::IntensityMatrix;

pub type CMatrix = DMatrix<Complex<f64>>;

/// Tolerances for eigenvalue clustering and rank decisions.
#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Eigenvalues within `cluster_tol_rel * (1 + ||A||)` of each other are
    /// treated as one eigenvalue (absolute override below).
    pub cluster_tol_rel: f64,
    /// Absolute clustering tolerance; overrides the relative rule when set.
    pub cluster_tol_abs: Option<f64>,
    /// Singular values below `rank_tol_rel * (1 + ||M||)` of the matrix `M`
    /// under test count as zero.
    pub rank_tol_rel: f64,
    /// Condition-number ceiling for the generalized-eigenbasis; beyond this
    /// the decomposition fails explicitly rather than returning garbage.
    pub max_condition: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            cluster_tol_rel: 1e-8,
            cluster_tol_abs: None,
            rank_tol_rel: 1e-10,
            max_condition: 1e12,
        }
    }
}

/// One distinct eigenvalue with its spectral projection and nilpotent part.
#[derive(Debug, Clone)]
pub struct SpectralComponent {
    pub lambda: Complex<f64>,
    pub alg_mult: usize,
    /// Largest Jordan block size minus one.
    pub nu: usize,
    pub projection: CMatrix,
    pub nilpotent: CMatrix,
}

/// Full spectral decomposition of a matrix, with eigenvalues ordered by
/// decreasing real part, ties by decreasing `nu`, further ties by decreasing
/// imaginary part.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub components: Vec<SpectralComponent>,
    /// Eigenvalues repeated by algebraic multiplicity, in component order.
    pub ordered_eigenvalues: Vec<Complex<f64>>,
    /// Operator 2-norm of the decomposed matrix (used for tolerance scaling).
    pub matrix_norm: f64,
}

impl Spectrum {
    pub fn lambda1(&self) -> Complex<f64> {
        self.ordered_eigenvalues[0]
    }

    pub fn lambda2(&self) -> Complex<f64> {
        self.ordered_eigenvalues[1]
    }

    /// Index of the component that the k-th ordered eigenvalue belongs to.
    pub fn component_index_at(&self, k: usize) -> usize {
        let mut acc = 0;
        for (idx, c) in self.components.iter().enumerate() {
            acc += c.alg_mult;
            if k < acc {
                return idx;
            }
        }
        self.components.len() - 1
    }

    /// The component whose eigenvalue is closest to `lambda`, if within
    /// `tol`.
    pub fn component_of(&self, lambda: Complex<f64>, tol: f64) -> Option<&SpectralComponent> {
        self.components
            .iter()
            .min_by(|x, y| {
                (x.lambda - lambda)
                    .norm()
                    .total_cmp(&(y.lambda - lambda).norm())
            })
            .filter(|c| (c.lambda - lambda).norm() <= tol)
    }

    /// True when every `nu` is zero, i.e. the matrix is diagonalizable.
    pub fn is_diagonalizable(&self) -> bool {
        self.components.iter().all(|c| c.nu == 0)
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

/// Operator 2-norm (largest singular value).
pub fn opnorm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    m.clone().singular_values()[0]
}

/// Operator 2-norm of a complex matrix.
pub fn opnorm_c(m: &CMatrix) -> f64 {
    if m.iter().all(|x| x.norm() == 0.0) {
        return 0.0;
    }
    m.clone().singular_values()[0]
}

/// Numerical rank: singular values above `rank_tol_rel * (1 + sigma_max)`.
fn rank_with_tol(m: &CMatrix, rank_tol_rel: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    if sv.is_empty() {
        return 0;
    }
    let tol = rank_tol_rel * (1.0 + sv[0]);
    sv.iter().filter(|s| **s > tol).count()
}

/// Orthonormal basis of the (numerical) null space of `m`, assuming its
/// dimension is exactly `dim`: the right singular vectors of the `dim`
/// smallest singular values.
fn null_space_basis(m: &CMatrix, dim: usize) -> Result<CMatrix> {
    let q = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| UrnError::Spectral("SVD did not return right singular vectors".into()))?;
    // Rows of v_t are conjugated right singular vectors, largest sigma first.
    let mut basis = CMatrix::zeros(q, dim);
    for j in 0..dim {
        let row = v_t.row(q - dim + j);
        for i in 0..q {
            basis[(i, j)] = row[i].conj();
        }
    }
    Ok(basis)
}

struct Cluster {
    lambda: Complex<f64>,
    mult: usize,
    nu: usize,
    basis: CMatrix,
}

/// Decomposes a real square matrix into spectral components.
///
/// Eigenvalues are computed, clustered within the configured tolerance, and
/// for each cluster the Jordan index is read off the rank deficiencies of
/// `(A - lambda I)^k`. The generalized eigenspaces (null spaces of
/// `(A - lambda I)^mult`) are assembled into a basis `S`, and the projection
/// of each cluster is `S E S^{-1}` with `E` the coordinate selector.
///
/// The result is self-checked against the defining identities. Defective
/// matrices can scatter a multiple eigenvalue wider than the requested
/// cluster tolerance, which would make split clusters nearly collinear; when
/// the self-check fails, the clustering tolerance is escalated (x10, three
/// times) before giving up with an explicit error. An explicit absolute
/// tolerance disables the escalation.
pub fn eigen_decompose(a: &DMatrix<f64>, opts: &SpectralOptions) -> Result<Spectrum> {
    let norm = opnorm(a);
    let base_tol = opts
        .cluster_tol_abs
        .unwrap_or(opts.cluster_tol_rel * (1.0 + norm));
    let check_tol = 1e-9 * (1.0 + norm);
    let attempts = if opts.cluster_tol_abs.is_some() { 1 } else { 4 };
    let mut last_err = None;
    for attempt in 0..attempts {
        let cluster_tol = base_tol * 10f64.powi(attempt);
        match eigen_decompose_with_tol(a, cluster_tol, opts) {
            Ok(spectrum) => {
                let residual = verify_spectral_identities(&spectrum, a).max();
                if residual <= check_tol {
                    return Ok(spectrum);
                }
                last_err = Some(UrnError::Spectral(format!(
                    "self-check residual {residual:.3e} exceeds {check_tol:.3e} \
                     at cluster tolerance {cluster_tol:.3e}"
                )));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn eigen_decompose_with_tol(
    a: &DMatrix<f64>,
    cluster_tol: f64,
    opts: &SpectralOptions,
) -> Result<Spectrum> {
    let q = a.nrows();
    if q == 0 || a.ncols() != q {
        return Err(UrnError::InvalidArgument(format!(
            "expected a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(UrnError::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    let norm = opnorm(a);

    let eigs: Vec<Complex<f64>> = a.clone().complex_eigenvalues().iter().copied().collect();

    // Union-find clustering of eigenvalues within cluster_tol.
    let mut parent: Vec<usize> = (0..q).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut i = i;
        while parent[i] != root {
            let next = parent[i];
            parent[i] = root;
            i = next;
        }
        root
    }
    for i in 0..q {
        for j in (i + 1)..q {
            if (eigs[i] - eigs[j]).norm() <= cluster_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for i in 0..q {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }

    let ac = to_complex(a);
    let identity = CMatrix::identity(q, q);
    let mut clusters = Vec::with_capacity(groups.len());
    for members in groups.values() {
        let mult = members.len();
        let lambda = members.iter().map(|&i| eigs[i]).sum::<Complex<f64>>() / mult as f64;
        let shifted = &ac - &identity * Complex::new(lambda.re, lambda.im);
        // Jordan index from rank deficiencies of powers of (A - lambda I).
        let mut power = identity.clone();
        let mut nu = None;
        for k in 1..=mult {
            power = &power * &shifted;
            let nullity = q - rank_with_tol(&power, opts.rank_tol_rel);
            if nullity >= mult {
                if nullity > mult {
                    return Err(UrnError::Spectral(format!(
                        "nullity of (A - {lambda} I)^{k} is {nullity}, exceeds cluster multiplicity {mult}; \
                         clustering/rank tolerances are inconsistent for this matrix"
                    )));
                }
                nu = Some(k - 1);
                break;
            }
        }
        let nu = nu.ok_or_else(|| {
            UrnError::Spectral(format!(
                "generalized eigenspace of {lambda} never reaches dimension {mult}; \
                 clustering/rank tolerances are inconsistent for this matrix"
            ))
        })?;
        // Generalized eigenspace: null space of (A - lambda I)^mult.
        let mut full_power = identity.clone();
        for _ in 0..mult {
            full_power = &full_power * &shifted;
        }
        let basis = null_space_basis(&full_power, mult)?;
        clusters.push(Cluster {
            lambda,
            mult,
            nu,
            basis,
        });
    }

    // Order: decreasing Re, ties by decreasing nu, then decreasing Im.
    clusters.sort_by(|x, y| {
        y.lambda
            .re
            .total_cmp(&x.lambda.re)
            .then(y.nu.cmp(&x.nu))
            .then(y.lambda.im.total_cmp(&x.lambda.im))
    });

    // Assemble the basis change S and check its conditioning.
    let mut s = CMatrix::zeros(q, q);
    let mut col = 0;
    let mut ranges = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        ranges.push(col..col + cluster.mult);
        for j in 0..cluster.mult {
            s.set_column(col, &cluster.basis.column(j));
            col += 1;
        }
    }
    let sv = s.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv[0], sv[sv.len() - 1]);
    if smin <= 0.0 || smax / smin > opts.max_condition {
        return Err(UrnError::Spectral(format!(
            "generalized-eigenbasis condition number {:.3e} exceeds {:.1e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY },
            opts.max_condition
        )));
    }
    let s_inv = s.clone().lu().try_inverse().ok_or_else(|| {
        UrnError::Spectral("generalized-eigenbasis is numerically singular".into())
    })?;

    let mut components = Vec::with_capacity(clusters.len());
    let mut ordered = Vec::with_capacity(q);
    for (cluster, range) in clusters.iter().zip(ranges) {
        let cols = s.columns(range.start, cluster.mult);
        let rows = s_inv.rows(range.start, cluster.mult);
        let projection = cols * rows;
        let shifted = &ac - &identity * cluster.lambda;
        let nilpotent = &shifted * &projection;
        for _ in 0..cluster.mult {
            ordered.push(cluster.lambda);
        }
        components.push(SpectralComponent {
            lambda: cluster.lambda,
            alg_mult: cluster.mult,
            nu: cluster.nu,
            projection,
            nilpotent,
        });
    }

    Ok(Spectrum {
        components,
        ordered_eigenvalues: ordered,
        matrix_norm: norm,
    })
}

/// Decomposes an intensity matrix with default tolerances.
pub fn decompose_intensity(a: &IntensityMatrix) -> Result<Spectrum> {
    eigen_decompose(a.as_matrix(), &SpectralOptions::default())
}

/// Small / critical / large classification of a balanced urn by the ratio
/// `Re lambda_2 / lambda_1` against 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrnKind {
    SmallStrict,
    Critical,
    Large,
    /// `Re lambda_2 = lambda_1`, e.g. the classical Pólya urn where b is a
    /// multiple eigenvalue.
    DegenerateLambda2EqLambda1,
}

impl std::fmt::Display for UrnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UrnKind::SmallStrict => write!(f, "small_strict"),
            UrnKind::Critical => write!(f, "critical"),
            UrnKind::Large => write!(f, "large"),
            UrnKind::DegenerateLambda2EqLambda1 => write!(f, "degenerate_Relambda2_eq_lambda1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrnClassification {
    pub kind: UrnKind,
    /// `Re lambda_2 / lambda_1`.
    pub ratio: f64,
    /// Jordan index of the lambda_2 tie class.
    pub nu2: usize,
}

/// Classifies a balanced urn's spectrum, enforcing `lambda_1 = b`.
pub fn classify_urn(spectrum: &Spectrum, b: f64) -> Result<UrnClassification> {
    let lambda1 = spectrum.lambda1();
    let tol = 1e-8 * (1.0 + spectrum.matrix_norm);
    if (lambda1 - Complex::new(b, 0.0)).norm() > tol {
        return Err(UrnError::LeadingEigenvalueMismatch {
            lambda1_re: lambda1.re,
            lambda1_im: lambda1.im,
            b,
        });
    }
    let lambda2 = spectrum.lambda2();
    let ratio = lambda2.re / lambda1.re;
    let nu2 = spectrum.components[spectrum.component_index_at(1)].nu;
    let kind = if (lambda2.re - lambda1.re).abs() <= tol {
        UrnKind::DegenerateLambda2EqLambda1
    } else if (lambda2.re - lambda1.re / 2.0).abs() <= tol {
        UrnKind::Critical
    } else if lambda2.re < lambda1.re / 2.0 {
        UrnKind::SmallStrict
    } else {
        UrnKind::Large
    };
    Ok(UrnClassification { kind, ratio, nu2 })
}

/// Left/right principal eigenvector pair for a simple leading eigenvalue:
/// `u1 = a` and the right eigenvector `v1` normalized so `a . v1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPair {
    pub u1: DVector<f64>,
    pub v1: DVector<f64>,
}

impl PrincipalPair {
    /// The rank-one projection `v1 u1'`.
    pub fn projection(&self) -> DMatrix<f64> {
        &self.v1 * self.u1.transpose()
    }
}

/// Computes the principal pair of a balanced urn with simple `lambda_1 = b`,
/// and checks the rank-one identity `P_{lambda_1} = v1 a'` against the
/// computed spectral projection.
pub fn principal_pair(
    activities: &DVector<f64>,
    a: &DMatrix<f64>,
    spectrum: &Spectrum,
    b: f64,
) -> Result<PrincipalPair> {
    let top = &spectrum.components[0];
    let tol = 1e-8 * (1.0 + spectrum.matrix_norm);
    if (top.lambda - Complex::new(b, 0.0)).norm() > tol {
        return Err(UrnError::LeadingEigenvalueMismatch {
            lambda1_re: top.lambda.re,
            lambda1_im: top.lambda.im,
            b,
        });
    }
    if top.alg_mult != 1 {
        return Err(UrnError::NotSimple {
            lambda: top.lambda.re,
            mult: top.alg_mult,
        });
    }
    // Right eigenvector: null vector of the real matrix A - b I.
    let shifted = a - DMatrix::identity(a.nrows(), a.nrows()) * b;
    let svd = shifted.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| UrnError::Spectral("SVD did not return right singular vectors".into()))?;
    let v: DVector<f64> = v_t.row(v_t.nrows() - 1).transpose();
    let scale = activities.dot(&v);
    if scale.abs() < 1e-12 {
        return Err(UrnError::Spectral(
            "principal right eigenvector is orthogonal to the activity vector".into(),
        ));
    }
    let v1 = v / scale;
    let rank_one = to_complex(&(&v1 * activities.transpose()));
    let residual = opnorm_c(&(&rank_one - &top.projection));
    if residual > tol {
        return Err(UrnError::Spectral(format!(
            "P_lambda1 deviates from v1 a' by {residual:.3e} (tolerance {tol:.3e})"
        )));
    }
    Ok(PrincipalPair {
        u1: activities.clone(),
        v1,
    })
}

/// Maximum residuals of the defining identities of a spectral decomposition.
#[derive(Debug, Clone, Copy)]
pub struct SpectralResiduals {
    /// `|| sum P_lambda - I ||`
    pub completeness: f64,
    /// `max ||P_lambda P_mu||` over distinct eigenvalue pairs
    pub orthogonality: f64,
    /// `max ||A P - P A||`
    pub commutation: f64,
    /// `max ||(A - lambda) P - N||`
    pub definition: f64,
    /// `max ||N^(nu+1)||`
    pub nilpotency: f64,
    /// `|| sum (lambda P + N) - A ||`
    pub reconstruction: f64,
    /// `max ||P^2 - P||`
    pub idempotency: f64,
}

impl SpectralResiduals {
    pub fn max(&self) -> f64 {
        [
            self.completeness,
            self.orthogonality,
            self.commutation,
            self.definition,
            self.nilpotency,
            self.reconstruction,
            self.idempotency,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluates all spectral identities of a computed decomposition against the
/// original matrix and reports the worst residual of each kind.
pub fn verify_spectral_identities(spectrum: &Spectrum, a: &DMatrix<f64>) -> SpectralResiduals {
    let q = a.nrows();
    let ac = to_complex(a);
    let identity = CMatrix::identity(q, q);

    let mut sum_p = CMatrix::zeros(q, q);
    let mut sum_rec = CMatrix::zeros(q, q);
    let mut orthogonality = 0.0_f64;
    let mut commutation = 0.0_f64;
    let mut definition = 0.0_f64;
    let mut nilpotency = 0.0_f64;
    let mut idempotency = 0.0_f64;

    for (i, c) in spectrum.components.iter().enumerate() {
        sum_p += &c.projection;
        sum_rec += &c.projection * c.lambda + &c.nilpotent;
        idempotency =
            idempotency.max(opnorm_c(&(&c.projection * &c.projection - &c.projection)));
        commutation = commutation.max(opnorm_c(&(&ac * &c.projection - &c.projection * &ac)));
        let shifted = &ac - &identity * c.lambda;
        definition = definition.max(opnorm_c(&(&shifted * &c.projection - &c.nilpotent)));
        let mut npow = c.nilpotent.clone();
        for _ in 0..c.nu {
            npow = &npow * &c.nilpotent;
        }
        nilpotency = nilpotency.max(opnorm_c(&npow));
        for (j, d) in spectrum.components.iter().enumerate() {
            if i != j {
                orthogonality = orthogonality.max(opnorm_c(&(&c.projection * &d.projection)));
            }
        }
    }

    SpectralResiduals {
        completeness: opnorm_c(&(&sum_p - &identity)),
        orthogonality,
        commutation,
        definition,
        nilpotency,
        reconstruction: opnorm_c(&(&sum_rec - &ac)),
        idempotency,
    }
}
