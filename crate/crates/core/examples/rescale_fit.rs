//! The `n^(-a)` extrapolation on synthetic data with a known limit.
//!
//! ```bash
//! cargo run --example rescale_fit
//! ```

use deloc::scaling::{rescale_fit, worst_case_intercept};
use deloc::{optimal_a, Mesh};

fn series(f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..=500).map(|n| if n == 0 { 1.0 } else { f(n as f64) }).collect()
}

fn main() -> deloc::Result<()> {
    let mesh = Mesh::default();

    // Exact power law: the mesh search lands on the true exponent.
    let exact = series(|n| 0.95 + 0.3 * n.powf(-1.25));
    println!("residual against a for 0.95 + 0.3 n^-1.25:");
    for a in [0.5, 1.0, 1.2, 1.25, 1.3, 1.5, 2.0] {
        println!("  a = {a:<4}  residual = {:.3e}", rescale_fit(&exact, 44, a)?.residual);
    }
    let fit = optimal_a(&exact, 44, &mesh)?;
    println!(
        "optimal a = {}, y = {:.12}, L = {:.12}\n",
        fit.a, fit.intercept_y, fit.intercept_l
    );

    // A sum of two powers is convex in x = n^-a, so the secants all cut
    // the axis below the limit.
    let mixed = series(|n| 0.9 + 0.2 / n + 0.5 / (n * n));
    let fit = optimal_a(&mixed, 44, &mesh)?;
    println!(
        "0.9 + 0.2/n + 0.5/n^2: a = {:.2}, y = {:.8}, L = {:.8} (L <= 0.9: {})",
        fit.a,
        fit.intercept_y,
        fit.intercept_l,
        worst_case_intercept(&mixed, 44, fit.a)? <= 0.9
    );

    // Slowly decaying data that stay concave at the smallest exponent are
    // not extrapolated.
    let slow = series(|n| 3.0 * n.powf(-0.05).sqrt() - 2.0);
    let fit = optimal_a(&slow, 44, &mesh)?;
    println!(
        "concave data: a = {:.2}, concave at floor = {}, usable = {}",
        fit.a, fit.concave_at_floor, fit.usable
    );
    Ok(())
}
