//! On-disk formats.
//!
//! - distance series: `series.csv` with header `n,distance`, one row per
//!   step, values with 17 significant digits, plus a JSON sidecar holding
//!   [`SeriesMeta`] at the same path with extension `json`;
//! - fit records: JSON objects of [`FitRecord`];
//! - shell profiles: CSV with header `l,E`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{DistanceSeries, SeriesMeta};
use crate::scaling::RescaleFit;

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `series.csv`-style data to `csv` and the metadata sidecar.
pub fn write_series(csv: &Path, series: &DistanceSeries) -> Result<()> {
    let mut text = String::with_capacity(32 * series.values.len());
    text.push_str("n,distance\n");
    for (n, v) in series.values.iter().enumerate() {
        text.push_str(&format!("{n},{}\n", fmt_f64(*v)));
    }
    write_text(csv, &text)?;
    write_json(&sidecar_path(csv), &series.meta)
}

/// Reads a series CSV; the sidecar is used when present, otherwise the
/// metadata is a placeholder.
pub fn read_series(csv: &Path) -> Result<DistanceSeries> {
    let schema = |message: String| Error::Schema {
        path: csv.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(csv)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(csv, io),
            other => schema(format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| schema(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["n", "distance"] {
        return Err(schema(format!(
            "expected header `n,distance`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema(e.to_string()))?;
        if record.len() != 2 {
            return Err(schema(format!("row {row}: expected 2 fields, found {}", record.len())));
        }
        let n: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| schema(format!("row {row}: bad step index {:?}", &record[0])))?;
        if n != row {
            return Err(schema(format!("row {row}: step index {n} out of sequence")));
        }
        let d: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| schema(format!("row {row}: bad distance {:?}", &record[1])))?;
        if !d.is_finite() {
            return Err(schema(format!("row {row}: non-finite distance")));
        }
        values.push(d);
    }
    if values.is_empty() {
        return Err(schema("no data rows".into()));
    }
    let side = sidecar_path(csv);
    let meta = if side.exists() {
        let meta: SeriesMeta = read_json(&side)?;
        if meta.n_max + 1 != values.len() {
            return Err(schema(format!(
                "sidecar says n_max = {}, file has {} rows",
                meta.n_max,
                values.len()
            )));
        }
        meta
    } else {
        SeriesMeta::synthetic(values.len() - 1)
    };
    Ok(DistanceSeries { meta, values })
}

/// Persisted fit of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub c: f64,
    pub seed: u64,
    pub crop: usize,
    pub a: f64,
    pub slope: f64,
    pub y: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub residual: f64,
    pub usable: bool,
    pub concave_at_floor: bool,
}

impl FitRecord {
    pub fn new(c: f64, seed: u64, fit: &RescaleFit) -> Self {
        Self {
            c,
            seed,
            crop: fit.crop,
            a: fit.a,
            slope: fit.slope,
            y: fit.intercept_y,
            l: fit.intercept_l,
            residual: fit.residual,
            usable: fit.usable,
            concave_at_floor: fit.concave_at_floor,
        }
    }

    pub fn to_fit(&self) -> RescaleFit {
        RescaleFit {
            a: self.a,
            slope: self.slope,
            intercept_y: self.y,
            intercept_l: self.l,
            residual: self.residual,
            usable: self.usable,
            concave_at_floor: self.concave_at_floor,
            crop: self.crop,
        }
    }
}

/// Writes `l,E` rows.
pub fn write_profile(path: &Path, values: &[f64]) -> Result<()> {
    let mut text = String::from("l,E\n");
    for (l, e) in values.iter().enumerate() {
        text.push_str(&format!("{l},{}\n", fmt_f64(*e)));
    }
    write_text(path, &text)
}
