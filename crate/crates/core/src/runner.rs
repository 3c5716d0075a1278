//! Configured sweeps over disorder strengths and realizations.
//!
//! Layout of an output directory:
//!
//! ```text
//! config.json                 the validated configuration
//! manifest.json               one entry per cell, with status and timing
//! c=<c>/r=<r>/series.csv      distance series (+ series.json metadata)
//! c=<c>/r=<r>/result.json     fit of that realization
//! c=<c>/average.csv           pointwise mean series
//! c=<c>/distance.svg          chart of all series (when `svg` is set)
//! report.csv, averages.csv, report.txt
//! ```
//!
//! Everything except `manifest.json` is a pure function of the
//! configuration, whatever the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Convention, Potential, TruncationPolicy};
use crate::io::{self, FitRecord};
use crate::lanczos::{self, DistanceSeries, ProbeOptions};
use crate::lattice::LatticeSpec;
use crate::plot::{self, Curve};
use crate::rng::cell_seed;
use crate::scaling::{self, CriterionVerdict, Mesh, RescaleFit, Thresholds};

/// Environment variable supplying the default output directory.
pub const OUTPUT_DIR_ENV: &str = "DELOC_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "deloc-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_max: usize,
    /// Cube half-width; `n_max + |source|_1` when absent.
    pub half_width: Option<usize>,
    pub c_values: Vec<f64>,
    pub realizations_per_c: usize,
    pub master_seed: u64,
    /// First step index kept in fits; chosen from `n_max` when absent.
    pub crop: Option<usize>,
    pub mesh: Mesh,
    pub thresholds: Thresholds,
    pub convention: Convention,
    pub source: Option<Vec<i32>>,
    pub target: Option<Vec<i32>>,
    pub output_dir: Option<PathBuf>,
    /// Upper bound on concurrently running cells.
    pub worker_count: usize,
    /// Keep every Krylov vector and record the orthogonality loss.
    pub store_basis: bool,
    /// Bytes available to concurrently running cells; read from the
    /// system when absent.
    pub memory_budget: Option<u64>,
    /// Accept runs where the Krylov support reaches the cube boundary.
    pub allow_truncation: bool,
    /// Also draw `c=<c>/distance.svg` for every disorder strength.
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 3,
            n_max: 200,
            half_width: None,
            c_values: vec![0.0],
            realizations_per_c: 1,
            master_seed: 0,
            crop: None,
            mesh: Mesh::default(),
            thresholds: Thresholds::default(),
            convention: Convention::default(),
            source: None,
            target: None,
            output_dir: None,
            worker_count: 1,
            store_basis: false,
            memory_budget: None,
            allow_truncation: false,
            svg: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn source(&self) -> Vec<i32> {
        self.source.clone().unwrap_or_else(|| vec![0; self.d])
    }

    pub fn target(&self) -> Vec<i32> {
        self.target.clone().unwrap_or_else(|| vec![1; self.d])
    }

    pub fn half_width(&self) -> usize {
        self.half_width
            .unwrap_or_else(|| lanczos::required_half_width(&self.source(), &self.target(), self.n_max))
    }

    pub fn crop(&self) -> usize {
        self.crop.unwrap_or_else(|| scaling::default_crop(self.n_max))
    }

    /// Explicit setting, then the environment, then `./deloc-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
    }

    pub fn truncation(&self) -> TruncationPolicy {
        if self.allow_truncation {
            TruncationPolicy::Record
        } else {
            TruncationPolicy::Error
        }
    }

    /// Bytes one running cell holds: three Lanczos vectors and the
    /// potential, plus the basis when it is stored.
    pub fn cell_footprint(&self) -> Result<u128> {
        let spec = LatticeSpec::new(self.d, self.half_width())?;
        let mut bytes = 4 * spec.field_bytes();
        if self.store_basis {
            bytes += spec.field_bytes() * (self.n_max as u128 + 1);
        }
        Ok(bytes)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d != 2 && self.d != 3 {
            return bad(format!("d must be 2 or 3, got {}", self.d));
        }
        if self.n_max < 3 {
            return bad(format!("n_max must be at least 3, got {}", self.n_max));
        }
        if self.c_values.is_empty() {
            return bad("c_values is empty".into());
        }
        if let Some(c) = self.c_values.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return bad(format!("disorder strengths must be finite and non-negative, got {c}"));
        }
        let mut sorted = self.c_values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("c_values contains duplicates".into());
        }
        if self.realizations_per_c == 0 {
            return bad("realizations_per_c must be positive".into());
        }
        if self.worker_count == 0 {
            return bad("worker_count must be positive".into());
        }
        let (source, target) = (self.source(), self.target());
        if source.len() != self.d || target.len() != self.d {
            return bad(format!("source and target need {} coordinates", self.d));
        }
        if source == target {
            return bad("source and target coincide".into());
        }
        if self.crop() + 2 > self.n_max {
            return bad(format!(
                "crop {} leaves fewer than three points up to n_max {}",
                self.crop(),
                self.n_max
            ));
        }
        self.mesh.points()?;
        let t = &self.thresholds;
        if !(t.fraction > 0.0 && t.fraction <= 1.0) || !(t.gap >= 0.0) || !t.min_l.is_finite() {
            return bad(format!("invalid thresholds {t:?}"));
        }
        let required = lanczos::required_half_width(&source, &target, self.n_max);
        if !self.allow_truncation && self.half_width() < required {
            return bad(format!(
                "half_width {} is below the {required} needed for {} truncation-free steps; \
                 enlarge it or set allow_truncation",
                self.half_width(),
                self.n_max
            ));
        }
        let footprint = self.cell_footprint()?;
        let budget = self.memory_budget();
        if footprint > budget {
            return Err(Error::Sizing {
                what: "one sweep cell",
                requested: footprint,
                budget,
            });
        }
        Ok(())
    }

    pub fn memory_budget(&self) -> u128 {
        self.memory_budget
            .map(u128::from)
            .or_else(available_memory)
            .unwrap_or(4 << 30)
    }

    /// Cells that run at the same time, bounded by memory and workers.
    pub fn concurrency(&self) -> Result<usize> {
        let per_cell = self.cell_footprint()?.max(1);
        let fit = (self.memory_budget() / per_cell).max(1) as usize;
        Ok(fit.min(self.worker_count))
    }
}

/// `MemAvailable` from `/proc/meminfo`, when readable.
pub fn available_memory() -> Option<u128> {
    let text = fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kib: u128 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib * 1024)
}

/// Peak resident set size of this process (`VmHWM`), when readable.
pub fn peak_rss() -> Option<u128> {
    let text = fs::read_to_string("/proc/self/status").ok()?;
    let line = text.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: u128 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib * 1024)
}

/// Resets the peak RSS counter so that [`peak_rss`] measures from now on.
pub fn reset_peak_rss() -> bool {
    fs::write("/proc/self/clear_refs", "5").is_ok()
}

pub fn cell_dir(root: &Path, c: f64, realization: usize) -> PathBuf {
    root.join(format!("c={c}")).join(format!("r={realization}"))
}

/// Fit and bookkeeping of one finished realization; also `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub c_index: usize,
    pub realization: usize,
    #[serde(flatten)]
    pub fit: FitRecord,
    pub n_max: usize,
    pub half_width: usize,
    pub last_distance: f64,
    pub truncated: bool,
    pub breakdown_step: Option<usize>,
    /// Orthogonality loss of the stored basis, when kept.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ortho_q: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub c: f64,
    pub c_index: usize,
    pub realization: usize,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub wall_seconds: f64,
    pub memory_estimate_bytes: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub concurrency: usize,
    pub cells: Vec<ManifestEntry>,
}

/// Verdict and averaged-series fit for one disorder strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub c: f64,
    pub expected: usize,
    pub completed: usize,
    pub verdict: Option<CriterionVerdict>,
    /// Fit of the pointwise mean series.
    pub averaged: Option<RescaleFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub thresholds: Thresholds,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub manifest: Manifest,
    pub results: Vec<RealizationResult>,
    pub report: Report,
}

impl SweepOutcome {
    pub fn failed(&self) -> usize {
        self.manifest
            .cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .count()
    }
}

struct Cell {
    c: f64,
    c_index: usize,
    realization: usize,
    seed: u64,
}

fn run_cell(cfg: &ExperimentConfig, spec: LatticeSpec, root: &Path, cell: &Cell) -> Result<RealizationResult> {
    let pot = Potential::sample(spec, cell.c, cell.seed, cfg.convention)?;
    let (source, target) = (cfg.source(), cfg.target());
    let opts = ProbeOptions {
        truncation: cfg.truncation(),
        record_coefficients: true,
    };
    let (series, ortho_q) = if cfg.store_basis {
        let budget = cfg.memory_budget();
        let (s, basis) = lanczos::probe_with_basis(&pot, &source, &target, cfg.n_max, opts, budget)?;
        let q = lanczos::ortho_diagnostic(&basis)?;
        (s, Some(q))
    } else {
        (lanczos::probe(&pot, &source, &target, cfg.n_max, opts)?, None)
    };
    drop(pot);
    let fit = scaling::optimal_a(&series.values, cfg.crop(), &cfg.mesh)?;
    let dir = cell_dir(root, cell.c, cell.realization);
    io::write_series(&dir.join("series.csv"), &series)?;
    let result = RealizationResult {
        c_index: cell.c_index,
        realization: cell.realization,
        fit: FitRecord::new(cell.c, cell.seed, &fit),
        n_max: cfg.n_max,
        half_width: spec.half_width(),
        last_distance: series.last(),
        truncated: series.meta.truncation_flag,
        breakdown_step: series.meta.breakdown_step,
        ortho_q,
    };
    io::write_json(&dir.join("result.json"), &result)?;
    Ok(result)
}

/// Runs every `(c, realization)` cell, writes all outputs and the report.
///
/// A failing cell is recorded in the manifest and does not stop the
/// others; configuration errors are returned before any work starts.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let root = cfg.output_dir();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    io::write_json(&root.join("config.json"), cfg)?;
    let spec = LatticeSpec::new(cfg.d, cfg.half_width())?;
    let concurrency = cfg.concurrency()?;
    let footprint = cfg.cell_footprint()?;

    let cells: Vec<Cell> = cfg
        .c_values
        .iter()
        .enumerate()
        .flat_map(|(ci, &c)| {
            (0..cfg.realizations_per_c).map(move |r| Cell {
                c,
                c_index: ci,
                realization: r,
                seed: cell_seed(cfg.master_seed, ci as u64, r as u64),
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    // Chunking caps the number of live cells even when rayon steals work
    // from inside a cell's own parallel kernels.
    let mut outcomes = Vec::with_capacity(cells.len());
    for chunk in cells.chunks(concurrency) {
        let done: Vec<(Result<RealizationResult>, f64)> = pool.install(|| {
            chunk
                .par_iter()
                .map(|cell| {
                    let t = Instant::now();
                    let r = run_cell(cfg, spec, &root, cell);
                    (r, t.elapsed().as_secs_f64())
                })
                .collect()
        });
        outcomes.extend(done);
    }

    let mut entries = Vec::with_capacity(cells.len());
    let mut results = Vec::new();
    for (cell, (outcome, secs)) in cells.iter().zip(outcomes) {
        let (status, error) = match outcome {
            Ok(r) => {
                results.push(r);
                (CellStatus::Done, None)
            }
            Err(e) => (CellStatus::Failed, Some(e.to_string())),
        };
        entries.push(ManifestEntry {
            c: cell.c,
            c_index: cell.c_index,
            realization: cell.realization,
            seed: cell.seed,
            status,
            error,
            wall_seconds: secs,
            memory_estimate_bytes: footprint,
        });
    }
    let manifest = Manifest {
        concurrency,
        cells: entries,
    };
    io::write_json(&root.join("manifest.json"), &manifest)?;
    let report = report(&root)?;
    Ok(SweepOutcome {
        manifest,
        results,
        report,
    })
}

/// Fit of one series file, as produced by [`analyze`].
#[derive(Debug)]
pub struct AnalyzedSeries {
    pub path: PathBuf,
    pub outcome: Result<FitRecord>,
}

/// Refits stored series. Each file succeeds or fails independently.
pub fn analyze(paths: &[PathBuf], crop: Option<usize>, mesh: &Mesh) -> Vec<AnalyzedSeries> {
    paths
        .iter()
        .map(|path| {
            let outcome = io::read_series(path).and_then(|s| {
                let crop = crop.unwrap_or_else(|| scaling::default_crop(s.n_max()));
                let fit = scaling::optimal_a(&s.values, crop, mesh)?;
                Ok(FitRecord::new(s.meta.c, s.meta.seed, &fit))
            });
            AnalyzedSeries {
                path: path.clone(),
                outcome,
            }
        })
        .collect()
}

fn sorted_subdirs(dir: &Path, prefix: &str) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix(prefix) {
            if entry.path().is_dir() {
                out.push((rest.to_string(), entry.path()));
            }
        }
    }
    Ok(out)
}

/// Rebuilds the report of an output directory from its `result.json` and
/// series files, writing `report.csv`, `averages.csv` and `report.txt`.
pub fn report(root: &Path) -> Result<Report> {
    let config: Option<ExperimentConfig> = {
        let p = root.join("config.json");
        if p.exists() {
            Some(io::read_json(&p)?)
        } else {
            None
        }
    };
    let thresholds = config.as_ref().map(|c| c.thresholds).unwrap_or_default();
    let mesh = config.as_ref().map(|c| c.mesh).unwrap_or_default();
    let expected = config.as_ref().map(|c| c.realizations_per_c).unwrap_or(0);
    let svg = config.as_ref().is_some_and(|c| c.svg);

    let mut by_c: BTreeMap<u64, (f64, Vec<RealizationResult>, Vec<DistanceSeries>)> = BTreeMap::new();
    let key = |c: f64| c.to_bits();
    if let Some(cfg) = &config {
        for &c in &cfg.c_values {
            by_c.entry(key(c)).or_insert((c, vec![], vec![]));
        }
    }
    for (c_text, c_dir) in sorted_subdirs(root, "c=")? {
        let c: f64 = c_text.parse().map_err(|_| Error::Schema {
            path: c_dir.clone(),
            message: format!("directory name does not hold a disorder strength: {c_text:?}"),
        })?;
        let slot = by_c.entry(key(c)).or_insert((c, vec![], vec![]));
        let mut cells = sorted_subdirs(&c_dir, "r=")?;
        cells.sort_by_key(|(r, _)| r.parse::<usize>().unwrap_or(usize::MAX));
        for (_, cell) in cells {
            let result_path = cell.join("result.json");
            if !result_path.exists() {
                continue;
            }
            slot.1.push(io::read_json(&result_path)?);
            slot.2.push(io::read_series(&cell.join("series.csv"))?);
        }
    }
    if by_c.is_empty() {
        return Err(Error::Analysis(format!("no results found under {}", root.display())));
    }

    let mut rows: Vec<ReportRow> = Vec::new();
    for (c, results, series) in by_c.into_values() {
        let fits: Vec<RescaleFit> = results.iter().map(|r| r.fit.to_fit()).collect();
        let verdict = if fits.is_empty() {
            None
        } else {
            Some(scaling::evaluate_criterion(c, &fits, &thresholds)?)
        };
        let averaged = if series.is_empty() {
            None
        } else {
            let mean = scaling::average_series(&series)?;
            let c_dir = root.join(format!("c={c}"));
            io::write_series(&c_dir.join("average.csv"), &mean)?;
            if svg {
                let mut curves: Vec<Curve> = results
                    .iter()
                    .zip(&series)
                    .map(|(r, s)| Curve::indexed(format!("r={}", r.realization), &s.values))
                    .collect();
                curves.push(Curve::indexed("mean", &mean.values));
                let chart = plot::line_chart(&format!("distance series, c = {c}"), "n", "D^n", &curves);
                let path = c_dir.join("distance.svg");
                fs::write(&path, chart).map_err(|e| Error::io(&path, e))?;
            }
            Some(scaling::optimal_a(&mean.values, fits[0].crop, &mesh)?)
        };
        rows.push(ReportRow {
            c,
            expected: expected.max(results.len()),
            completed: results.len(),
            verdict,
            averaged,
        });
    }
    rows.sort_by(|a, b| a.c.total_cmp(&b.c));
    let report = Report { thresholds, rows };
    write_report_files(root, &report)?;
    Ok(report)
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.digits$}"))
}

fn write_report_files(root: &Path, report: &Report) -> Result<()> {
    let mut csv = String::from("c,P,y_min,L_min,gap_at_minima,fraction_passing,delocalized,completed,expected\n");
    let mut avg = String::from("c,a_tilde,y_tilde,L_tilde,usable\n");
    let mut txt = String::new();
    txt.push_str(&format!(
        "Per-realization criterion: usable exponent, L > {}, y - L <= {}; \
         delocalized when at least {:.0}% pass.\n\n",
        report.thresholds.min_l,
        report.thresholds.gap,
        100.0 * report.thresholds.fraction
    ));
    txt.push_str(&format!(
        "{:>8} {:>9} {:>8} {:>8} {:>10} {:>10} {:>9}   {:>5} {:>10} {:>10}\n",
        "c", "done", "P", "passing", "min y", "min L", "verdict", "a~", "y~", "L~"
    ));
    for row in &report.rows {
        let v = row.verdict.as_ref();
        let verdict = match v {
            Some(v) if v.delocalized => "yes",
            Some(_) => "no*",
            None => "N/A",
        };
        let usable_avg = row.averaged.as_ref().filter(|f| f.usable);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.c,
            opt(v.map(|v| v.fraction_usable), 4),
            opt(v.map(|v| v.min_y), 8),
            opt(v.map(|v| v.min_l), 8),
            opt(v.map(|v| v.gap_at_minima), 8),
            opt(v.map(|v| v.fraction_passing), 4),
            v.map_or("N/A".to_string(), |v| v.delocalized.to_string()),
            row.completed,
            row.expected,
        ));
        avg.push_str(&format!(
            "{},{},{},{},{}\n",
            row.c,
            opt(usable_avg.map(|f| f.a), 2),
            opt(usable_avg.map(|f| f.intercept_y), 8),
            opt(usable_avg.map(|f| f.intercept_l), 8),
            row.averaged.as_ref().is_some_and(|f| f.usable),
        ));
        txt.push_str(&format!(
            "{:>8} {:>9} {:>8} {:>8} {:>10} {:>10} {:>9}   {:>5} {:>10} {:>10}\n",
            row.c,
            format!("{}/{}", row.completed, row.expected),
            opt(v.map(|v| v.fraction_usable), 2),
            opt(v.map(|v| v.fraction_passing), 2),
            opt(v.map(|v| v.min_y), 6),
            opt(v.map(|v| v.min_l), 6),
            verdict,
            opt(usable_avg.map(|f| f.a), 2),
            opt(usable_avg.map(|f| f.intercept_y), 6),
            opt(usable_avg.map(|f| f.intercept_l), 6),
        ));
    }
    txt.push_str(
        "\n* A failed criterion is inconclusive. A distance that tends to zero is \
         compatible with continuous spectrum, so it is no evidence of localization.\n",
    );
    for (name, text) in [("report.csv", csv), ("averages.csv", avg), ("report.txt", txt)] {
        let path = root.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
