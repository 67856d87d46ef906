//! Central-moment growth rates against the three-case bound: simulate,
//! estimate ||X_n - E X_n||_2 on a geometric grid, and fit the exponent.
//!
//! Run: `cargo run --release --example moment_scaling`

use urnkit::analysis::{fit_growth, mc_central_moment, moment_bound_case};
use urnkit::corpus;
use urnkit::products::ProductChain;
use urnkit::sim::{run_batch, SimOptions};
use urnkit::spectral::{classify_urn, decompose_intensity};

fn main() -> urnkit::Result<()> {
    let n_max = 1u64 << 14;
    let replicates = 4_000;
    println!(
        "{:>20} {:>16} {:>10} {:>10} {:>8}",
        "urn", "classification", "bound", "fitted", "se"
    );
    for (name, spec) in corpus::balanced_corpus() {
        let urn = spec.clone().balanced()?;
        let spectrum = decompose_intensity(&urn.intensity_matrix())?;
        let classification = classify_urn(&spectrum, urn.b())?;
        let (exponent, log_power) = moment_bound_case(&classification);
        let batch = run_batch(&spec, n_max, replicates, 42, &SimOptions::default())?;
        let mut chain = ProductChain::for_urn(&urn);
        let means = chain.mean_series(&batch.checkpoints());
        let report = mc_central_moment(&batch, &means, 2.0)?;
        let window: Vec<(u64, f64)> = report
            .series()
            .into_iter()
            .filter(|(n, _)| *n >= 128)
            .collect();
        let fit = fit_growth(&window, log_power)?;
        println!(
            "{name:>20} {:>16} {exponent:>10.3} {:>10.4} {:>8.4}",
            classification.kind.to_string(),
            fit.alpha_hat,
            fit.stderr
        );
    }
    println!("\n(the bound is an upper bound; reducible urns may grow strictly slower)");
    Ok(())
}
