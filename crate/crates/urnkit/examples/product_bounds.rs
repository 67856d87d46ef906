//! Product-norm bound verification: fits ||P_lambda F_{i,j}|| against the
//! growth shape (j/i)^{Re lambda / b} (1 + log(j/i))^nu, and the square sums
//! sum_i ||P_lambda F_{i,n}||^2 against their three-case exponents.
//!
//! Run: `cargo run --example product_bounds`

use urnkit::corpus;
use urnkit::products::{product_norm_grid, square_sum_slope, verify_product_norm, ProductChain};
use urnkit::spectral::decompose_intensity;

fn main() -> urnkit::Result<()> {
    let square_sum_ns: Vec<u64> = (7..=14).map(|k| 1u64 << k).collect();
    for (name, spec) in corpus::balanced_corpus() {
        let urn = spec.balanced()?;
        let chain = ProductChain::for_urn(&urn);
        let spectrum = decompose_intensity(&urn.intensity_matrix())?;
        println!("{name}:");
        for c in &spectrum.components {
            let grid = product_norm_grid(&chain, c.lambda.norm(), 3, 8);
            let verdict = verify_product_norm(&chain, c, &grid, 0.05, 10.0)?;
            let sum_fit = square_sum_slope(&chain, c, &square_sum_ns)?;
            println!(
                "  lambda = {:>5.2}{:+.2}i: norm exponent {:.4} (theory {:.4}), \
                 C <= {:.3}, square-sum slope {:.4} (theory {:.4}) -> {}",
                c.lambda.re,
                c.lambda.im,
                verdict.exponent_fitted,
                verdict.exponent_theoretical,
                verdict.constant_estimate,
                sum_fit.slope,
                sum_fit.expected,
                if verdict.pass { "ok" } else { "VIOLATED" }
            );
        }
    }
    Ok(())
}
