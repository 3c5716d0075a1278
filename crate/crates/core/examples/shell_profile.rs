//! How the mass of the n-th Krylov vector spreads over taxicab shells.
//!
//! ```bash
//! cargo run --release --example shell_profile -- 60
//! ```
//!
//! At `c = 0` every other shell is empty. Disorder fills them in and, when
//! strong, pulls the peak back toward the origin.

use deloc::bulk::{averaged_profile, peak_shell, profile_evolved, VectorKind};
use deloc::{Convention, LatticeSpec, Potential};

fn main() -> deloc::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let spec = LatticeSpec::new(3, n)?;
    for c in [0.0, 1.0, 3.0] {
        let mut profiles = Vec::new();
        for seed in 0..3 {
            let op = Potential::sample(spec, c, seed, Convention::Half)?;
            profiles.push(profile_evolved(&op, &[0, 0, 0], n, VectorKind::LanczosBasisVector)?);
        }
        let avg = averaged_profile(&profiles)?;
        let tail: Vec<String> = avg.values[n.saturating_sub(5)..]
            .iter()
            .map(|e| format!("{e:.3}"))
            .collect();
        println!(
            "c = {c}: peak at l = {}, E(l) for the last shells: {}",
            peak_shell(&avg.values),
            tail.join(" ")
        );
    }
    Ok(())
}
