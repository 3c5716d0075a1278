//! One disorder realization: distance series, fit and bookkeeping.
//!
//! ```bash
//! cargo run --release --example disordered_probe -- <c> <seed> <n_max>
//! ```
//!
//! Defaults to `c = 1`, seed 7, 100 steps. The cube is the smallest that
//! keeps the Krylov support away from its boundary.

use deloc::lanczos::required_half_width;
use deloc::scaling::default_crop;
use deloc::{optimal_a, probe, Convention, LatticeSpec, Mesh, Potential, ProbeOptions};

fn main() -> deloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let c: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let n_max: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);

    let (source, target) = ([0, 0, 0], [1, 1, 1]);
    let spec = LatticeSpec::new(3, required_half_width(&source, &target, n_max))?;
    let op = Potential::sample(spec, c, seed, Convention::Half)?;
    let series = probe(&op, &source, &target, n_max, ProbeOptions::default())?;

    println!("c = {c}, seed = {seed}, M = {}", spec.half_width());
    for n in (0..=n_max).step_by((n_max / 10).max(1)) {
        println!("  D^{n:<4} = {:.10}", series.values[n]);
    }
    println!(
        "alpha[0..4] = {:?}",
        &series.meta.alpha[..4.min(series.meta.alpha.len())]
    );
    println!(
        "truncated = {}, breakdown = {:?}",
        series.meta.truncation_flag, series.meta.breakdown_step
    );

    let fit = optimal_a(&series.values, default_crop(n_max), &Mesh::default())?;
    println!(
        "a = {:.2}  y = {:.8}  L = {:.8}  usable = {}",
        fit.a, fit.intercept_y, fit.intercept_l, fit.usable
    );
    Ok(())
}
