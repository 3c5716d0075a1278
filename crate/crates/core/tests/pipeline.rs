use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use deloc::io::{self, FitRecord};
use deloc::runner::{self, cell_dir, CellStatus, ExperimentConfig, RealizationResult};
use deloc::scaling::Mesh;

fn config(out: &Path, workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        d: 3,
        n_max: 40,
        c_values: vec![0.5, 2.0, 3.5],
        realizations_per_c: 3,
        master_seed: 77,
        worker_count: workers,
        output_dir: Some(out.to_path_buf()),
        memory_budget: Some(1 << 30),
        ..Default::default()
    }
}

/// Every file under `root` except the timing-bearing manifest.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "manifest.json" && path.file_name().unwrap() != "config.json" {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    let one = runner::run_sweep(&config(a.path(), 1)).unwrap();
    let three = runner::run_sweep(&config(b.path(), 3)).unwrap();
    let again = runner::run_sweep(&config(c.path(), 1)).unwrap();
    assert_eq!(one.results, three.results);
    assert_eq!(one.report, three.report);
    let snap = snapshot(a.path());
    assert!(snap.len() > 30);
    assert_eq!(snap, snapshot(b.path()));
    assert_eq!(snap, snapshot(c.path()));
    assert_eq!(one.results, again.results);
}

#[test]
fn manifest_lists_every_cell_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 2);
    let out = runner::run_sweep(&cfg).unwrap();
    let manifest: runner::Manifest = io::read_json(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest, out.manifest);
    let mut keys: Vec<(usize, usize)> = manifest.cells.iter().map(|e| (e.c_index, e.realization)).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 9);
    assert_eq!(manifest.cells.len(), 9);
    assert!(manifest.cells.iter().all(|e| e.status == CellStatus::Done));
    let seeds: std::collections::HashSet<u64> = manifest.cells.iter().map(|e| e.seed).collect();
    assert_eq!(seeds.len(), 9);
}

#[test]
fn analyze_reproduces_sweep_fits_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1);
    let out = runner::run_sweep(&cfg).unwrap();
    let paths: Vec<PathBuf> = out
        .results
        .iter()
        .map(|r| cell_dir(dir.path(), r.fit.c, r.realization).join("series.csv"))
        .collect();
    let refit = runner::analyze(&paths, Some(cfg.crop()), &Mesh::default());
    for (result, item) in out.results.iter().zip(refit) {
        let fit: FitRecord = item.outcome.unwrap();
        assert_eq!(fit, result.fit);
        let stored: RealizationResult =
            io::read_json(&cell_dir(dir.path(), result.fit.c, result.realization).join("result.json")).unwrap();
        assert_eq!(&stored, result);
    }
}

#[test]
fn analyze_reports_bad_files_individually() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    let values: Vec<f64> = (0..=60).map(|n| 0.9 + 0.1 / (n as f64 + 1.0)).collect();
    io::write_series(&good, &deloc::DistanceSeries::synthetic(values)).unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "n,distance\n0,1\n1,oops\n").unwrap();
    let out = runner::analyze(&[good, bad, dir.path().join("absent.csv")], None, &Mesh::default());
    assert!(out[0].outcome.is_ok());
    assert!(matches!(out[1].outcome, Err(deloc::Error::Schema { .. })));
    assert!(matches!(out[2].outcome, Err(deloc::Error::Io { .. })));
}

#[test]
fn failed_cell_is_recorded_and_others_finish() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1);
    // A plain file where a cell directory should go makes that cell fail.
    let blocked = cell_dir(dir.path(), 2.0, 1);
    fs::create_dir_all(blocked.parent().unwrap()).unwrap();
    fs::write(&blocked, "").unwrap();
    let out = runner::run_sweep(&cfg).unwrap();
    assert_eq!(out.failed(), 1);
    assert_eq!(out.results.len(), 8);
    let failed = out
        .manifest
        .cells
        .iter()
        .find(|e| e.status == CellStatus::Failed)
        .unwrap();
    assert_eq!((failed.c, failed.realization), (2.0, 1));
    assert!(failed.error.is_some());
    let row = out.report.rows.iter().find(|r| r.c == 2.0).unwrap();
    assert_eq!((row.completed, row.expected), (2, 3));
}

#[test]
fn report_marks_missing_strengths() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 1);
    cfg.c_values = vec![1.0];
    cfg.realizations_per_c = 1;
    runner::run_sweep(&cfg).unwrap();
    cfg.c_values = vec![1.0, 4.0];
    io::write_json(&dir.path().join("config.json"), &cfg).unwrap();
    let report = runner::report(dir.path()).unwrap();
    let missing = report.rows.iter().find(|r| r.c == 4.0).unwrap();
    assert!(missing.verdict.is_none() && missing.averaged.is_none());
    let text = fs::read_to_string(dir.path().join("averages.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("4,N/A")));
}
