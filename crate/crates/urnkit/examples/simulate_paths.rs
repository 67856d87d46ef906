//! Seeded, reproducible urn paths: identical stream keys give bit-identical
//! trajectories, and a batch splits into deterministic sub-batches.
//!
//! Run: `cargo run --example simulate_paths`

use urnkit::corpus;
use urnkit::sim::{run_batch, run_batch_range, run_path, SimOptions, StreamKey};

fn main() -> urnkit::Result<()> {
    let spec = corpus::large();
    let opts = SimOptions::default();

    let a = run_path(&spec, 10_000, StreamKey::new(42, 0), &opts)?;
    let b = run_path(&spec, 10_000, StreamKey::new(42, 0), &opts)?;
    println!("same key twice: final states match = {}", a == b);
    println!("checkpoints of replicate 0:");
    for (n, x) in &a.checkpoints {
        println!("  n = {n:>6}: X = ({:>8.1}, {:>8.1})", x[0], x[1]);
    }

    let full = run_batch(&spec, 1_000, 16, 7, &opts)?;
    let lo = run_batch_range(&spec, 1_000, 0..6, 7, &opts)?;
    let hi = run_batch_range(&spec, 1_000, 6..16, 7, &opts)?;
    let glued: Vec<_> = lo
        .trajectories
        .iter()
        .chain(hi.trajectories.iter())
        .cloned()
        .collect();
    println!(
        "batch of 16 equals two glued sub-batches: {}",
        full.trajectories == glued
    );

    // Unbalanced specs need the explicit opt-in.
    let unbalanced = corpus::unbalanced();
    match run_path(&unbalanced, 10, StreamKey::new(0, 0), &opts) {
        Err(e) => println!("unbalanced spec without opt-in: {e}"),
        Ok(_) => unreachable!(),
    }
    let opts = SimOptions {
        allow_unbalanced: true,
        ..Default::default()
    };
    let t = run_path(&unbalanced, 10, StreamKey::new(0, 0), &opts)?;
    println!("with --allow-unbalanced: final state ({}, {})", t.final_state[0], t.final_state[1]);
    Ok(())
}
