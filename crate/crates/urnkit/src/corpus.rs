//! Built-in urn corpus used by the examples, the CLI docs, and the test
//! suite. Each constructor matches the JSON file of the same name under
//! `specs/`.

use nalgebra::dvector;

use crate::urn::{Atom, ReplacementDistribution, UrnSpec};

fn det(v: nalgebra::DVector<f64>) -> ReplacementDistribution {
    ReplacementDistribution::deterministic(v)
}

/// Classical Pólya urn: the drawn colour is reinforced by one ball of the
/// same colour. Intensity matrix `I`, so b = 1 is a double eigenvalue.
pub fn classical_polya() -> UrnSpec {
    UrnSpec::new(
        vec!["white".into(), "black".into()],
        dvector![1.0, 1.0],
        dvector![1.0, 1.0],
        vec![det(dvector![1.0, 0.0]), det(dvector![0.0, 1.0])],
    )
    .expect("corpus spec is valid")
}

/// Friedman (0,1)-urn: each draw adds one ball of the opposite colour.
/// `A = [[0,1],[1,0]]`, eigenvalues 1 and -1: a strictly small urn.
pub fn friedman() -> UrnSpec {
    UrnSpec::new(
        vec!["white".into(), "black".into()],
        dvector![1.0, 1.0],
        dvector![1.0, 1.0],
        vec![det(dvector![0.0, 1.0]), det(dvector![1.0, 0.0])],
    )
    .expect("corpus spec is valid")
}

/// Critical urn: `A = [[3,1],[1,3]]` with b = 4, eigenvalues 4 and 2, so
/// Re lambda_2 = lambda_1 / 2 exactly.
pub fn critical() -> UrnSpec {
    UrnSpec::new(
        vec!["white".into(), "black".into()],
        dvector![1.0, 1.0],
        dvector![1.0, 1.0],
        vec![det(dvector![3.0, 1.0]), det(dvector![1.0, 3.0])],
    )
    .expect("corpus spec is valid")
}

/// Large urn: `A = [[4,1],[1,4]]` with b = 5, eigenvalues 5 and 3, so
/// Re lambda_2 / lambda_1 = 0.6 > 1/2.
pub fn large() -> UrnSpec {
    UrnSpec::new(
        vec!["white".into(), "black".into()],
        dvector![1.0, 1.0],
        dvector![1.0, 1.0],
        vec![det(dvector![4.0, 1.0]), det(dvector![1.0, 4.0])],
    )
    .expect("corpus spec is valid")
}

/// Balanced urn with a genuinely random replacement: drawing colour 1 adds
/// two balls of a uniformly random colour, drawing colour 2 adds two black.
/// `A = [[1,0],[1,2]]` with b = 2, eigenvalues 2 and 1: critical.
pub fn random_replacement() -> UrnSpec {
    let xi1 = ReplacementDistribution::new(vec![
        Atom {
            p: 0.5,
            v: dvector![2.0, 0.0],
        },
        Atom {
            p: 0.5,
            v: dvector![0.0, 2.0],
        },
    ])
    .expect("corpus spec is valid");
    UrnSpec::new(
        vec!["white".into(), "black".into()],
        dvector![1.0, 1.0],
        dvector![1.0, 1.0],
        vec![xi1, det(dvector![0.0, 2.0])],
    )
    .expect("corpus spec is valid")
}

/// Triangular small urn: colour 1 only begets itself, colour 2 feeds both.
/// `A = [[3,2],[0,1]]` with b = 3, eigenvalues 3 and 1: small but reducible,
/// so only the upper moment bounds are asserted for it.
pub fn triangular() -> UrnSpec {
    UrnSpec::new(
        vec!["white".into(), "black".into()],
        dvector![1.0, 1.0],
        dvector![1.0, 1.0],
        vec![det(dvector![3.0, 0.0]), det(dvector![2.0, 1.0])],
    )
    .expect("corpus spec is valid")
}

/// Deliberately unbalanced spec: draws of colour 1 add activity 1, draws of
/// colour 2 add activity 2. Simulable with the opt-in flag; every
/// balanced-only operation refuses it.
pub fn unbalanced() -> UrnSpec {
    UrnSpec::new(
        vec!["white".into(), "black".into()],
        dvector![1.0, 1.0],
        dvector![1.0, 1.0],
        vec![det(dvector![1.0, 0.0]), det(dvector![2.0, 0.0])],
    )
    .expect("corpus spec is valid")
}

/// Three-colour cyclic urn: each draw adds one ball of the next colour.
/// A is the cyclic permutation matrix with eigenvalues 1 and a complex
/// conjugate pair at Re = -1/2; exercises complex spectral components.
/// Test-corpus extra, not shipped as a JSON spec.
pub fn cyclic3() -> UrnSpec {
    UrnSpec::new(
        vec!["red".into(), "green".into(), "blue".into()],
        dvector![1.0, 1.0, 1.0],
        dvector![1.0, 1.0, 1.0],
        vec![
            det(dvector![0.0, 1.0, 0.0]),
            det(dvector![0.0, 0.0, 1.0]),
            det(dvector![1.0, 0.0, 0.0]),
        ],
    )
    .expect("corpus spec is valid")
}

/// The named balanced corpus urns, in reporting order.
pub fn balanced_corpus() -> Vec<(&'static str, UrnSpec)> {
    vec![
        ("polya", classical_polya()),
        ("friedman", friedman()),
        ("critical", critical()),
        ("large", large()),
        ("random_replacement", random_replacement()),
        ("triangular", triangular()),
    ]
}

/// All corpus urns including the deliberately unbalanced one.
pub fn all() -> Vec<(&'static str, UrnSpec)> {
    let mut v = balanced_corpus();
    v.push(("unbalanced", unbalanced()));
    v
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    #[test]
    fn json_files_match_constructors() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs");
        for (name, spec) in super::all() {
            let path = dir.join(format!("{name}.json"));
            let loaded = crate::io::load_spec(&path)
                .unwrap_or_else(|e| panic!("cannot load {}: {e}", path.display()));
            assert_eq!(loaded, spec, "specs/{name}.json drifted from corpus::{name}()");
        }
    }
}
