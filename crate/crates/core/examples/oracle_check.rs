//! Streaming probe against the dense brute-force distance.
//!
//! ```bash
//! cargo run --release --example oracle_check
//! ```
//!
//! On a 7^3 cube the Krylov support reaches the boundary after three
//! steps, so the comparison covers the truncated operator as well.

use deloc::lanczos::{probe, ProbeOptions};
use deloc::oracle::brute_force_distance;
use deloc::{Convention, LatticeSpec, Potential, TruncationPolicy};

fn main() -> deloc::Result<()> {
    let spec = LatticeSpec::new(3, 3)?;
    let opts = ProbeOptions {
        truncation: TruncationPolicy::Record,
        record_coefficients: false,
    };
    for seed in 1..=5 {
        let op = Potential::sample(spec, 2.0, seed, Convention::Half)?;
        let fast = probe(&op, &[0, 0, 0], &[1, 1, 1], 30, opts)?;
        let slow = brute_force_distance(&op, &[0, 0, 0], &[1, 1, 1], 30)?;
        let worst = fast
            .values
            .iter()
            .zip(&slow.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "seed {seed}: D^30 = {:.12}, max difference {worst:.2e}, truncated = {}",
            fast.last(),
            fast.meta.truncation_flag
        );
    }
    Ok(())
}
