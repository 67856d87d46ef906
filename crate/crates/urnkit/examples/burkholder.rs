//! The square-function inequality ||X_n||_p <= (p - 1) ||S_n(X)||_p for
//! weighted martingales: equality for the +-1 coin flip at p = 2, strict
//! slack for urn-derived martingale increments at p = 4.
//!
//! Run: `cargo run --example burkholder`

use urnkit::analysis::{burkholder_check, coin_flip_martingale, urn_martingale};
use urnkit::corpus;

fn main() -> urnkit::Result<()> {
    let sample = coin_flip_martingale(1_000, 10_000, 7, 2.0);
    let verdict = burkholder_check(&sample, 7)?;
    println!(
        "coin flip, p = 2: ||X||_2 = {:.4}, ||S||_2 = {:.4}, empirical C_2 = {:.4}",
        verdict.xn_p, verdict.sn_p, verdict.cp_empirical
    );

    let urn = corpus::friedman().balanced()?;
    for p in [2.0, 4.0] {
        let sample = urn_martingale(&urn, 1_000, 5_000, 11, p)?;
        let verdict = burkholder_check(&sample, 11)?;
        println!(
            "friedman urn, p = {p}: ||X||_p = {:.4} vs (p-1)||S||_p = {:.4} \
             (slack {:+.4} +- {:.4}) -> {}",
            verdict.xn_p,
            (p - 1.0) * verdict.sn_p,
            verdict.slack,
            verdict.slack_se,
            if verdict.burkholder_ok { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
