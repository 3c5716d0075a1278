//! Distance of δ(1,1,1) to the orbit of δ(0,0,0) under the free operator.
//!
//! ```bash
//! cargo run --release --example free_operator -- 200
//! ```
//!
//! Prints every tenth distance, the rescaled fit, and checks the series
//! against the lower bound √7/(2√2) that holds for every step.

use std::time::Instant;

use deloc::scaling::default_crop;
use deloc::{optimal_a, probe, LatticeSpec, Mesh, Potential, ProbeOptions};

fn main() -> deloc::Result<()> {
    let n_max: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(120);
    let spec = LatticeSpec::new(3, n_max + 1)?;
    let op = Potential::zero(spec);

    let start = Instant::now();
    let series = probe(&op, &[0, 0, 0], &[1, 1, 1], n_max, ProbeOptions::default())?;
    println!("{n_max} steps on a {}^3 cube in {:.1?}", spec.side(), start.elapsed());

    for (n, d) in series.values.iter().enumerate().step_by(10) {
        println!("D^{n:<4} = {d:.10}");
    }
    let bound = 7f64.sqrt() / (2.0 * 2f64.sqrt());
    let min = series.values.iter().copied().fold(f64::INFINITY, f64::min);
    println!("min D = {min:.10} (bound {bound:.10})");

    let crop = default_crop(n_max);
    let fit = optimal_a(&series.values, crop, &Mesh::default())?;
    println!(
        "crop {crop}: a = {:.2}, y = {:.8}, L = {:.8}, residual = {:.3e}",
        fit.a, fit.intercept_y, fit.intercept_l, fit.residual
    );
    Ok(())
}
