//! Long free-operator run on the reflection-reduced octant.
//!
//! ```bash
//! cargo run --release --example free_limit -- 500
//! ```
//!
//! Storing only `{0..M}^3` needs about `3 * (M+1)^3 * 8` bytes, an eighth of
//! the full cube, so 500 steps fit in roughly 3 GB.

use std::time::Instant;

use deloc::free::free_octant_probe;
use deloc::scaling::default_crop;
use deloc::{optimal_a, Mesh};

fn main() -> deloc::Result<()> {
    let n_max: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let start = Instant::now();
    let series = free_octant_probe([1, 1, 1], n_max, n_max + 1)?;
    println!("{n_max} steps in {:.1?}", start.elapsed());
    println!("D^{n_max} = {:.10}", series.last());
    let crop = default_crop(n_max);
    let fit = optimal_a(&series.values, crop, &Mesh::default())?;
    println!(
        "crop {crop}: a = {:.2}, y = {:.8}, L = {:.8}",
        fit.a, fit.intercept_y, fit.intercept_l
    );
    Ok(())
}
