//! A configured sweep over disorder strengths and realizations.
//!
//! ```bash
//! cargo run --release --example sweep -- crates/core/examples/sweep.toml
//! ```
//!
//! Output goes to `output_dir` from the file, else `$DELOC_OUTPUT_DIR`,
//! else `./deloc-out`. The report is reprinted from disk.

use std::path::PathBuf;

use deloc::runner::{report, run_sweep, ExperimentConfig};

fn main() -> deloc::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sweep.toml")));
    let cfg = ExperimentConfig::load(&path)?;
    let outcome = run_sweep(&cfg)?;
    println!(
        "{} cells on {} workers, {} failed",
        outcome.manifest.cells.len(),
        outcome.manifest.concurrency,
        outcome.failed()
    );
    for r in &outcome.results {
        println!(
            "  c = {:<4} r = {}  a = {:.2}  y = {:.6}  L = {:.6}",
            r.fit.c, r.realization, r.fit.a, r.fit.y, r.fit.l
        );
    }
    let dir = cfg.output_dir();
    report(&dir)?;
    print!(
        "{}",
        std::fs::read_to_string(dir.join("report.txt")).unwrap_or_default()
    );
    Ok(())
}
