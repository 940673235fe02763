//! Two-action bandit with deterministic rewards (+1 right arm, -1 wrong arm)
//! trained by batch REINFORCE. Prints P(right arm) over the updates.
//!
//! ```text
//! cargo run --example bandit -- [seeds]
//! ```

use convqa::bandit::{run_bandit, BanditConfig};

fn main() -> convqa::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cfg = BanditConfig::default();
    let mut converged = 0;
    for seed in 0..seeds {
        let trace = run_bandit(seed, &cfg)?;
        let first = trace.iter().position(|&p| p > 0.95);
        if first.is_some() {
            converged += 1;
        }
        let at = |i: usize| trace[i.min(trace.len() - 1)];
        println!(
            "seed {seed:2}: p0 {:.3}  p50 {:.3}  p100 {:.3}  p200 {:.3}  first>0.95 {:?}",
            at(0),
            at(50),
            at(100),
            at(200),
            first
        );
    }
    println!("{converged}/{seeds} seeds passed 0.95 within {} updates", cfg.updates);
    Ok(())
}
