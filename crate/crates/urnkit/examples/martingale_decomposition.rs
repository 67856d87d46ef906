//! The pathwise decomposition X_n = F_{0,n} X0 + sum_l F_{l,n} Y_l is an
//! algebraic identity: its residual on recorded paths is floating-point
//! noise. Also checks the one-step drift E(Delta X | state) = A X / (a . X).
//!
//! Run: `cargo run --example martingale_decomposition`

use urnkit::corpus;
use urnkit::products::ProductChain;
use urnkit::sim::{
    conditional_mean_check, conditional_mean_exact, martingale_residual, run_path, SimOptions,
    StreamKey,
};

fn main() -> urnkit::Result<()> {
    let opts = SimOptions {
        record_increments: true,
        record_drawn: true,
        ..Default::default()
    };
    for (name, spec) in corpus::balanced_corpus() {
        let urn = spec.clone().balanced()?;
        let chain = ProductChain::for_urn(&urn);
        let traj = run_path(&spec, 1_000, StreamKey::new(42, 0), &opts)?;
        let residual = martingale_residual(&traj, &chain)?;
        let drawn = traj.drawn.as_ref().unwrap();
        let colour0 = drawn.iter().filter(|c| **c == 0).count();
        println!(
            "{name:>20}: decomposition residual {residual:.3e} \
             ({colour0}/{} draws of colour 0)",
            drawn.len()
        );
    }

    let spec = corpus::friedman();
    let x = nalgebra::dvector![2.0, 1.0];
    let exact = conditional_mean_exact(&spec, &x);
    let mc = conditional_mean_check(&spec, &x, 100_000, StreamKey::new(9, 0))?;
    println!("\nconditional mean at (2,1): exact deviation {exact:.1e}, MC deviation {mc:.2e}");
    Ok(())
}
