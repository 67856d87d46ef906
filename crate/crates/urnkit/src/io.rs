//! JSON urn specification files.
//!
//! ```json
//! {
//!   "colors": ["white", "black"],
//!   "activities": [1.0, 1.0],
//!   "initial": [1.0, 1.0],
//!   "replacements": [
//!     {"deterministic": [0.0, 1.0]},
//!     {"atoms": [{"p": 0.5, "v": [2.0, 0.0]}, {"p": 0.5, "v": [0.0, 2.0]}]}
//!   ]
//! }
//! ```
//!
//! Parsing followed by serialization followed by parsing is the identity on
//! specs; a single atom with probability one is written back in the compact
//! `deterministic` form.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::urn::{Atom, ReplacementDistribution, UrnSpec};

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    colors: Vec<String>,
    activities: Vec<f64>,
    initial: Vec<f64>,
    replacements: Vec<ReplacementFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ReplacementFile {
    Deterministic { deterministic: Vec<f64> },
    Atoms { atoms: Vec<AtomFile> },
}

#[derive(Debug, Serialize, Deserialize)]
struct AtomFile {
    p: f64,
    v: Vec<f64>,
}

fn spec_from_file(file: SpecFile) -> Result<UrnSpec> {
    let mut replacements = Vec::with_capacity(file.replacements.len());
    for law in file.replacements {
        replacements.push(match law {
            ReplacementFile::Deterministic { deterministic } => {
                ReplacementDistribution::deterministic(DVector::from_vec(deterministic))
            }
            ReplacementFile::Atoms { atoms } => ReplacementDistribution::new(
                atoms
                    .into_iter()
                    .map(|a| Atom {
                        p: a.p,
                        v: DVector::from_vec(a.v),
                    })
                    .collect(),
            )?,
        });
    }
    UrnSpec::new(
        file.colors,
        DVector::from_vec(file.activities),
        DVector::from_vec(file.initial),
        replacements,
    )
}

fn file_from_spec(spec: &UrnSpec) -> SpecFile {
    let replacements = spec
        .replacements()
        .iter()
        .map(|law| {
            if law.is_deterministic() && law.atoms()[0].p == 1.0 {
                ReplacementFile::Deterministic {
                    deterministic: law.atoms()[0].v.iter().copied().collect(),
                }
            } else {
                ReplacementFile::Atoms {
                    atoms: law
                        .atoms()
                        .iter()
                        .map(|a| AtomFile {
                            p: a.p,
                            v: a.v.iter().copied().collect(),
                        })
                        .collect(),
                }
            }
        })
        .collect();
    SpecFile {
        colors: spec.colors().to_vec(),
        activities: spec.activities().iter().copied().collect(),
        initial: spec.initial().iter().copied().collect(),
        replacements,
    }
}

/// Parses a spec from JSON text.
pub fn parse_spec(json: &str) -> Result<UrnSpec> {
    let file: SpecFile = serde_json::from_str(json)?;
    spec_from_file(file)
}

/// Serializes a spec to pretty-printed JSON.
pub fn serialize_spec(spec: &UrnSpec) -> String {
    serde_json::to_string_pretty(&file_from_spec(spec)).expect("spec serialization cannot fail")
}

/// Loads and validates a spec file from disk.
pub fn load_spec(path: &Path) -> Result<UrnSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        UrnError::InvalidArgument(format!("cannot read {}: {e}", path.display()))
    })?;
    parse_spec(&text)
}

/// Short hex digest of a spec file's bytes, echoed in every CSV banner so a
/// report can be traced back to its exact input.
pub fn file_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn parse_serialize_parse_is_identity_on_corpus() {
        for (name, spec) in corpus::all() {
            let json = serialize_spec(&spec);
            let reparsed = parse_spec(&json).unwrap();
            assert_eq!(spec, reparsed, "round trip failed for {name}");
            let again = parse_spec(&serialize_spec(&reparsed)).unwrap();
            assert_eq!(spec, again, "second round trip failed for {name}");
        }
    }

    #[test]
    fn parse_rejects_malformed_specs() {
        // Probability mass off by 0.1.
        let bad = r#"{
            "colors": ["a", "b"],
            "activities": [1.0, 1.0],
            "initial": [1.0, 1.0],
            "replacements": [
                {"atoms": [{"p": 0.5, "v": [1.0, 0.0]}, {"p": 0.4, "v": [0.0, 1.0]}]},
                {"deterministic": [0.0, 1.0]}
            ]
        }"#;
        let err = parse_spec(bad).unwrap_err();
        assert!(err.to_string().contains("probability mass"));
        // Not JSON at all.
        assert!(parse_spec("not json").is_err());
    }

    #[test]
    fn deterministic_form_is_preserved() {
        let spec = corpus::friedman();
        let json = serialize_spec(&spec);
        assert!(json.contains("deterministic"));
        assert!(!json.contains("atoms"));
        let spec = corpus::random_replacement();
        let json = serialize_spec(&spec);
        assert!(json.contains("deterministic"));
        assert!(json.contains("atoms"));
    }
}
