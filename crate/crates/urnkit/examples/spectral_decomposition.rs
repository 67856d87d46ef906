//! Spectral structure of the corpus urns: eigenvalues, Jordan indices,
//! projections, classification, and the exact-arithmetic cross-check.
//!
//! Run: `cargo run --example spectral_decomposition`

use urnkit::corpus;
use urnkit::exact::validate_spectrum;
use urnkit::spectral::{classify_urn, decompose_intensity, verify_spectral_identities};

fn main() -> urnkit::Result<()> {
    for (name, spec) in corpus::balanced_corpus() {
        let urn = spec.balanced()?;
        let a = urn.intensity_matrix();
        let spectrum = decompose_intensity(&a)?;
        let classification = classify_urn(&spectrum, urn.b())?;
        println!("{name}: b = {}", urn.b());
        for c in &spectrum.components {
            println!(
                "  lambda = {:.4}{:+.4}i  mult = {}  nu = {}",
                c.lambda.re, c.lambda.im, c.alg_mult, c.nu
            );
        }
        println!(
            "  classification: {} (Re lambda2 / lambda1 = {:.3})",
            classification.kind, classification.ratio
        );
        let residuals = verify_spectral_identities(&spectrum, a.as_matrix());
        println!("  worst identity residual: {:.3e}", residuals.max());
        let exact = validate_spectrum(a.as_matrix(), &spectrum)?;
        println!(
            "  exact-arithmetic check: {}/{} integer eigenvalues matched, char poly residual {:.1e}",
            exact.matched, exact.total_integer, exact.worst_char_poly_residual
        );
    }
    Ok(())
}
