//! Loss of orthogonality of plain Lanczos, `Q = ||KᵀK - I||_∞`.
//!
//! ```bash
//! cargo run --release --example orthogonality -- 40 150
//! ```
//!
//! Keeps every Krylov vector, so memory is `(n_max + 1) * (2M+1)^3 * 8`
//! bytes (about 640 MB for the defaults).

use deloc::lanczos::{ortho_diagnostic, probe_with_basis, ProbeOptions, DEFAULT_BASIS_BUDGET};
use deloc::{Convention, LatticeSpec, Potential, TruncationPolicy};

fn main() -> deloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let n_max: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(150);
    let spec = LatticeSpec::new(3, m)?;
    let opts = ProbeOptions {
        truncation: TruncationPolicy::Record,
        record_coefficients: false,
    };
    for c in [0.0, 1.0, 2.0, 3.5] {
        let op = Potential::sample(spec, c, 11, Convention::Half)?;
        let (series, basis) = probe_with_basis(&op, &[0, 0, 0], &[1, 1, 1], n_max, opts, DEFAULT_BASIS_BUDGET)?;
        println!(
            "c = {c:<3}  Q = {:.3e}  D^{n_max} = {:.8}  truncated = {}",
            ortho_diagnostic(&basis)?,
            series.last(),
            series.meta.truncation_flag
        );
    }
    Ok(())
}
