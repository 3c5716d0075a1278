use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use deloc::bulk::{self, VectorKind};
use deloc::io;
use deloc::lanczos::{self, ProbeOptions, DEFAULT_BASIS_BUDGET};
use deloc::plot::{self, Curve};
use deloc::runner::{self, ExperimentConfig, OUTPUT_DIR_ENV};
use deloc::scaling::{self, Mesh};
use deloc::{Convention, LatticeSpec, Potential, TruncationPolicy};

#[derive(Parser)]
#[command(name = "deloc", version, about = "Krylov-orbit distance experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lanczos,
    Power,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a TOML file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Distance series of a single realization.
    Probe {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 200)]
        n_max: usize,
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cube half-width; defaults to the smallest truncation-free value.
        #[arg(long)]
        half_width: Option<usize>,
        #[arg(long, default_value_t = Convention::Half)]
        convention: Convention,
        /// Series CSV to write (a JSON sidecar is written next to it).
        #[arg(long, env = OUTPUT_DIR_ENV, default_value = "series.csv")]
        out: PathBuf,
        /// First step kept in the fit.
        #[arg(long)]
        crop: Option<usize>,
        /// Also draw the series as an SVG chart.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Refit stored series files.
    Analyze {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        crop: Option<usize>,
    },
    /// Rebuild the report of a sweep directory.
    Report { dir: PathBuf },
    /// Taxicab-shell profile of the n-th evolved vector.
    Bulk {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of realizations averaged, with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, value_enum, default_value_t = Kind::Lanczos)]
        kind: Kind,
        #[arg(long, default_value_t = Convention::Half)]
        convention: Convention,
        /// Profile CSV to write.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Orthogonality loss of a stored Krylov basis.
    Ortho {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 40)]
        half_width: usize,
        #[arg(long, default_value_t = 150)]
        n_max: usize,
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn write_file(path: &std::path::Path, text: &str) -> deloc::Result<()> {
    std::fs::write(path, text).map_err(|source| deloc::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn corner(d: usize, v: i32) -> Vec<i32> {
    vec![v; d]
}

fn execute(cmd: Command) -> deloc::Result<bool> {
    match cmd {
        Command::Run { config, out, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            if let Some(w) = workers {
                cfg.worker_count = w;
            }
            let outcome = runner::run_sweep(&cfg)?;
            let text = std::fs::read_to_string(cfg.output_dir().join("report.txt")).unwrap_or_default();
            print!("{text}");
            for cell in outcome.manifest.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!(
                    "cell c={} r={} failed: {}",
                    cell.c,
                    cell.realization,
                    cell.error.as_deref().unwrap_or_default()
                );
            }
            Ok(outcome.failed() == 0)
        }
        Command::Probe {
            d,
            n_max,
            c,
            seed,
            half_width,
            convention,
            out,
            crop,
            svg,
        } => {
            let (source, target) = (corner(d, 0), corner(d, 1));
            let m = half_width.unwrap_or_else(|| lanczos::required_half_width(&source, &target, n_max));
            let pot = Potential::sample(LatticeSpec::new(d, m)?, c, seed, convention)?;
            let series = lanczos::probe(&pot, &source, &target, n_max, ProbeOptions::default())?;
            let out = if out.extension().is_none() {
                out.join("series.csv")
            } else {
                out
            };
            io::write_series(&out, &series)?;
            let fit = scaling::optimal_a(
                &series.values,
                crop.unwrap_or_else(|| scaling::default_crop(n_max)),
                &Mesh::default(),
            )?;
            println!("D^{n_max} = {:.10}", series.last());
            println!(
                "a = {:.2}  y = {:.8}  L = {:.8}  usable = {}  truncated = {}",
                fit.a, fit.intercept_y, fit.intercept_l, fit.usable, series.meta.truncation_flag
            );
            println!("wrote {}", out.display());
            if let Some(path) = svg {
                let chart = plot::line_chart(
                    &format!("c = {c}, seed {seed}"),
                    "n",
                    "D^n",
                    &[Curve::indexed("D", &series.values)],
                );
                write_file(&path, &chart)?;
            }
            Ok(true)
        }
        Command::Analyze { files, crop } => {
            let mut ok = true;
            println!("file,c,seed,crop,a,y,L,residual,usable");
            for item in runner::analyze(&files, crop, &Mesh::default()) {
                match item.outcome {
                    Ok(f) => println!(
                        "{},{},{},{},{},{},{},{},{}",
                        item.path.display(),
                        f.c,
                        f.seed,
                        f.crop,
                        f.a,
                        io::fmt_f64(f.y),
                        io::fmt_f64(f.l),
                        io::fmt_f64(f.residual),
                        f.usable
                    ),
                    Err(e) => {
                        ok = false;
                        eprintln!("{}: {e}", item.path.display());
                    }
                }
            }
            Ok(ok)
        }
        Command::Report { dir } => {
            runner::report(&dir)?;
            print!(
                "{}",
                std::fs::read_to_string(dir.join("report.txt")).unwrap_or_default()
            );
            Ok(true)
        }
        Command::Bulk {
            d,
            n,
            c,
            seed,
            count,
            kind,
            convention,
            out,
            svg,
        } => {
            let kind = match kind {
                Kind::Lanczos => VectorKind::LanczosBasisVector,
                Kind::Power => VectorKind::NormalizedPower,
            };
            let spec = LatticeSpec::new(d, n.max(1))?;
            let source = corner(d, 0);
            let mut profiles = Vec::new();
            for s in seed..seed + count.max(1) {
                let pot = Potential::sample(spec, c, s, convention)?;
                profiles.push(bulk::profile_evolved(&pot, &source, n, kind)?);
            }
            let avg = bulk::averaged_profile(&profiles)?;
            println!("l,E");
            for (l, e) in avg.values.iter().enumerate() {
                println!("{l},{}", io::fmt_f64(*e));
            }
            eprintln!("peak shell {} of {}", bulk::peak_shell(&avg.values), n);
            if let Some(path) = out {
                io::write_profile(&path, &avg.values)?;
            }
            if let Some(path) = svg {
                let chart = plot::line_chart(
                    &format!("shell profile, n = {n}, c = {c}"),
                    "l",
                    "E(l)",
                    &[Curve::indexed("E", &avg.values)],
                );
                write_file(&path, &chart)?;
            }
            Ok(true)
        }
        Command::Ortho {
            d,
            half_width,
            n_max,
            c,
            seed,
        } => {
            let pot = Potential::sample(LatticeSpec::new(d, half_width)?, c, seed, Convention::Half)?;
            let opts = ProbeOptions {
                truncation: TruncationPolicy::Record,
                record_coefficients: false,
            };
            let (series, basis) =
                lanczos::probe_with_basis(&pot, &corner(d, 0), &corner(d, 1), n_max, opts, DEFAULT_BASIS_BUDGET)?;
            let q = lanczos::ortho_diagnostic(&basis)?;
            println!(
                "Q = {q:.3e} over {} vectors (truncated = {})",
                basis.columns.len(),
                series.meta.truncation_flag
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
