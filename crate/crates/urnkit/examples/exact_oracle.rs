//! The exact-enumeration oracle: the full law of X_n in rational arithmetic
//! for integer urns, cross-checked against the product-chain mean and a
//! closed-form variance.
//!
//! Run: `cargo run --example exact_oracle`

use urnkit::analysis::{exact_central_moment, exact_distribution, rational_to_f64, DpOptions};
use urnkit::corpus;
use urnkit::products::exact_mean;

fn main() -> urnkit::Result<()> {
    let spec = corpus::classical_polya();
    let urn = spec.clone().balanced()?;

    let dist = exact_distribution(&spec, 2, &DpOptions::default())?;
    println!("classical Pólya, n = 2 (all draw sequences enumerated):");
    for (state, p) in &dist.support {
        println!("  X = {state:?} with probability {p}");
    }

    println!("\nVar X_(n,1) against the closed form (n^2 + 2n) / 12:");
    for n in [4u64, 8, 12] {
        let dist = exact_distribution(&spec, n, &DpOptions::default())?;
        let moment = exact_central_moment(&dist, &exact_mean(&urn, n), 2.0)?;
        println!(
            "  n = {n:>2}: exact {} = {:.6}, closed form {:.6}, states {}",
            moment.variance[0],
            rational_to_f64(&moment.variance[0]),
            (n * n + 2 * n) as f64 / 12.0,
            dist.support.len()
        );
    }
    Ok(())
}
