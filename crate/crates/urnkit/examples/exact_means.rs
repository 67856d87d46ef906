//! Exact means E X_n = F_{0,n} X0 from the deterministic product chain,
//! with the activity identity a . E X_n = w_n checked along the way.
//!
//! Run: `cargo run --example exact_means`

use urnkit::corpus;
use urnkit::products::ProductChain;
use urnkit::sim::checkpoint_grid;

fn main() -> urnkit::Result<()> {
    let urn = corpus::friedman().balanced()?;
    let mut chain = ProductChain::for_urn(&urn);
    let grid = checkpoint_grid(1 << 12, 4.0);
    println!("Friedman (0,1)-urn from X0 = (1,1):");
    println!("{:>8} {:>14} {:>14} {:>10}", "n", "E X_n[white]", "E X_n[black]", "w_n");
    for (n, mean) in chain.mean_series(&grid) {
        println!(
            "{n:>8} {:>14.6} {:>14.6} {:>10}",
            mean[0],
            mean[1],
            urn.total_weight(n)
        );
    }

    // The left activity vector telescopes: a' F_{i,j} = (w_j / w_i) a'.
    let f = chain.product(3, 48)?;
    let lhs = urn.activities().transpose() * f;
    let ratio = urn.total_weight(48) / urn.total_weight(3);
    println!("\na' F_(3,48) = ({:.6}, {:.6}); w_48 / w_3 = {ratio:.6}", lhs[0], lhs[1]);
    Ok(())
}
