//! The random Schrödinger operator `H = -Δ + V_ω` applied matrix-free.
//!
//! On every site `x` of the truncated cube,
//!
//! ```text
//! (H f)(x) = (2d + ω_x) f(x) - Σ_{|e|=1} f(x + e)
//! ```
//!
//! with `f ≡ 0` outside the cube (zero Dirichlet truncation).

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{for_each_slab_mut, Field, LatticeSpec};
use crate::rng::{site_key, splitmix_at, unit_f64};

/// Which interval the on-site values are drawn from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `[-c/2, c/2]`
    #[default]
    Half,
    /// `[-c, c]`
    Full,
}

impl Convention {
    pub fn interval(self, c: f64) -> (f64, f64) {
        match self {
            Convention::Half => (-0.5 * c, 0.5 * c),
            Convention::Full => (-c, c),
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convention::Half => "half",
            Convention::Full => "full",
        })
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Convention::Half),
            "full" => Ok(Convention::Full),
            _ => Err(Error::Config(format!("unknown convention {s:?} (half|full)"))),
        }
    }
}

/// What to do when a field's support reaches the cube boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TruncationPolicy {
    /// Fail with [`Error::Truncation`].
    Error,
    /// Apply the Dirichlet-truncated operator and report it.
    #[default]
    Record,
}

/// One disorder realization.
#[derive(Debug, Clone)]
pub struct Potential {
    spec: LatticeSpec,
    omega: Vec<f64>,
    c: f64,
    seed: u64,
    convention: Convention,
    is_zero: bool,
}

/// Sidecar metadata written next to a potential dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialMeta {
    pub c: f64,
    pub seed: u64,
    pub convention: Convention,
}

impl Potential {
    /// Draws `ω_x` i.i.d. uniform on the convention's interval.
    ///
    /// Site `x` receives `lo + (hi - lo) * u`, where `u` is the top 53 bits
    /// of the SplitMix64 output at counter [`site_key`]`(x)` in the stream
    /// seeded by `seed`. A given (seed, c, convention) therefore fixes the
    /// value at each site independently of the cube size.
    pub fn sample(spec: LatticeSpec, c: f64, seed: u64, convention: Convention) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("disorder strength must be >= 0, got {c}")));
        }
        let mut omega = vec![0.0; spec.total_sites()];
        if c > 0.0 {
            let (lo, hi) = convention.interval(c);
            let width = hi - lo;
            let plane = spec.plane_len();
            omega.par_chunks_mut(plane).enumerate().for_each(|(p, slab)| {
                for (q, w) in slab.iter_mut().enumerate() {
                    let site = spec.site(p * plane + q);
                    *w = lo + width * unit_f64(splitmix_at(seed, site_key(&site)));
                }
            });
        }
        Ok(Self {
            spec,
            omega,
            c,
            seed,
            convention,
            is_zero: c == 0.0,
        })
    }

    /// The free operator (`ω ≡ 0`).
    pub fn zero(spec: LatticeSpec) -> Self {
        Self {
            spec,
            omega: vec![0.0; spec.total_sites()],
            c: 0.0,
            seed: 0,
            convention: Convention::Half,
            is_zero: true,
        }
    }

    /// Wraps explicit values; each must lie in the convention's interval.
    pub fn from_values(spec: LatticeSpec, omega: Vec<f64>, c: f64, seed: u64, convention: Convention) -> Result<Self> {
        if omega.len() != spec.total_sites() {
            return Err(Error::Contract(format!(
                "expected {} potential values, got {}",
                spec.total_sites(),
                omega.len()
            )));
        }
        let (lo, hi) = convention.interval(c);
        if let Some(bad) = omega.iter().find(|w| !(lo..=hi).contains(*w)) {
            return Err(Error::Domain(format!("potential value {bad} outside [{lo}, {hi}]")));
        }
        let is_zero = omega.iter().all(|w| *w == 0.0);
        Ok(Self {
            spec,
            omega,
            c,
            seed,
            convention,
            is_zero,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn meta(&self) -> PotentialMeta {
        PotentialMeta {
            c: self.c,
            seed: self.seed,
            convention: self.convention,
        }
    }

    /// Field-format binary dump of `ω` plus a JSON sidecar at
    /// `path.with_extension("json")`.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let field = Field::from_values(self.spec, self.omega.clone())?;
        field.write_dump(path)?;
        let sidecar = path.with_extension("json");
        let json = serde_json::to_string_pretty(&self.meta())?;
        std::fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn read_dump(path: &Path) -> Result<Self> {
        let field = Field::read_dump(path)?;
        let sidecar = path.with_extension("json");
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: PotentialMeta = serde_json::from_str(&text)?;
        Potential::from_values(
            *field.spec(),
            field.values().to_vec(),
            meta.c,
            meta.seed,
            meta.convention,
        )
    }

    /// `out <- H f`. Returns `true` when the support of `f` touched the
    /// cube boundary, i.e. the truncated operator differs from the
    /// infinite-lattice one on this input.
    ///
    /// `out.active_radius` becomes `f.active_radius + 1` (capped at `d*M`).
    pub fn apply(&self, f: &Field, out: &mut Field, policy: TruncationPolicy) -> Result<bool> {
        let spec = self.spec;
        if *f.spec() != spec || *out.spec() != spec {
            return Err(Error::Contract("operator and fields live on different lattices".into()));
        }
        let m = spec.half_width();
        let radius = f.active_radius();
        let truncated = radius + 1 > m;
        if truncated && policy == TruncationPolicy::Error {
            return Err(Error::Truncation { radius, half_width: m });
        }
        let out_radius = (radius + 1).min(spec.max_radius());
        if out.active_radius() > out_radius {
            out.clear();
        }

        let side = spec.side();
        let plane = spec.plane_len();
        let diag = 2.0 * spec.dim() as f64;
        let zero_row = vec![0.0; side];
        let fv = f.values();
        let omega = (!self.is_zero).then_some(self.omega.as_slice());
        let three_d = spec.dim() == 3;

        for_each_slab_mut(&spec, out.values_mut(), out_radius, |p, slab, rows| {
            let f_slab = &fv[p * plane..(p + 1) * plane];
            let prev_slab = (p > 0).then(|| &fv[(p - 1) * plane..p * plane]);
            let next_slab = (p + 1 < side).then(|| &fv[(p + 1) * plane..(p + 2) * plane]);
            let w_slab = omega.map(|w| &w[p * plane..(p + 1) * plane]);
            for &(s, l) in rows {
                let (row_base, a) = if three_d { (s / side * side, s % side) } else { (0, s) };
                let row = row_base..row_base + side;
                let prev = prev_slab.map_or(&zero_row[..], |x| &x[row.clone()]);
                let next = next_slab.map_or(&zero_row[..], |x| &x[row.clone()]);
                let neighbors = if three_d {
                    [
                        if row_base > 0 {
                            &f_slab[row_base - side..row_base]
                        } else {
                            &zero_row[..]
                        },
                        if row_base + side < plane {
                            &f_slab[row_base + side..row_base + 2 * side]
                        } else {
                            &zero_row[..]
                        },
                        prev,
                        next,
                    ]
                } else {
                    [prev, next, &zero_row[..], &zero_row[..]]
                };
                stencil_row(
                    &mut slab[row.clone()],
                    &f_slab[row.clone()],
                    neighbors,
                    w_slab.map(|w| &w[row.clone()]),
                    a,
                    a + l,
                    diag,
                );
            }
        });
        out.set_active_radius(out_radius);
        Ok(truncated)
    }
}

/// `out[t] = (diag + ω[t]) c[t] - (c[t-1] + c[t+1] + Σ nb[t])` for `t` in
/// `a..b`, with `c` zero beyond the row ends.
#[inline]
fn stencil_row(out: &mut [f64], c: &[f64], nb: [&[f64]; 4], omega: Option<&[f64]>, a: usize, b: usize, diag: f64) {
    let side = c.len();
    let point = |t: usize| {
        let left = if t > 0 { c[t - 1] } else { 0.0 };
        let right = if t + 1 < side { c[t + 1] } else { 0.0 };
        let sum = left + right + nb[0][t] + nb[1][t] + nb[2][t] + nb[3][t];
        let d = diag + omega.map_or(0.0, |w| w[t]);
        d * c[t] - sum
    };
    let lo = a.max(1);
    let hi = b.min(side - 1);
    if a < lo {
        out[a] = point(a);
    }
    if lo < hi {
        let n = hi - lo;
        let cl = &c[lo - 1..lo - 1 + n];
        let cc = &c[lo..lo + n];
        let cr = &c[lo + 1..lo + 1 + n];
        let (n0, n1, n2, n3) = (&nb[0][lo..hi], &nb[1][lo..hi], &nb[2][lo..hi], &nb[3][lo..hi]);
        let o = &mut out[lo..hi];
        match omega {
            None => {
                for q in 0..n {
                    let sum = cl[q] + cr[q] + n0[q] + n1[q] + n2[q] + n3[q];
                    o[q] = diag * cc[q] - sum;
                }
            }
            Some(w) => {
                let w = &w[lo..hi];
                for q in 0..n {
                    let sum = cl[q] + cr[q] + n0[q] + n1[q] + n2[q] + n3[q];
                    o[q] = (diag + w[q]) * cc[q] - sum;
                }
            }
        }
    }
    if hi < b {
        out[hi] = point(hi);
    }
}

/// Largest lattice for which [`dense_matrix`] will build a matrix.
pub const DENSE_SITE_CAP: usize = 5000;

/// Explicit matrix of the truncated operator, assembled entry by entry
/// from the stencil definition (not from [`Potential::apply`]).
pub fn dense_matrix(pot: &Potential) -> Result<DMatrix<f64>> {
    let spec = pot.spec;
    let n = spec.total_sites();
    if n > DENSE_SITE_CAP {
        return Err(Error::Sizing {
            what: "dense operator matrix",
            requested: (n as u128).pow(2) * 8,
            budget: (DENSE_SITE_CAP as u128).pow(2) * 8,
        });
    }
    let m = spec.half_width() as i32;
    let mut a = DMatrix::zeros(n, n);
    for x in 0..n {
        a[(x, x)] = 2.0 * spec.dim() as f64 + pot.omega[x];
        let site = spec.site(x);
        for axis in 0..spec.dim() {
            for step in [-1, 1] {
                let mut y = site.clone();
                y[axis] += step;
                if y[axis].abs() <= m {
                    a[(x, spec.offset(&y)?)] = -1.0;
                }
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec3(m: usize) -> LatticeSpec {
        LatticeSpec::new(3, m).unwrap()
    }

    #[test]
    fn free_apply_3d() {
        let spec = spec3(1);
        let pot = Potential::sample(spec, 0.0, 99, Convention::Half).unwrap();
        let f = Field::delta(spec, &[0, 0, 0]).unwrap();
        let mut out = Field::zeros(spec);
        let truncated = pot.apply(&f, &mut out, TruncationPolicy::Error).unwrap();
        assert!(!truncated);
        assert_eq!(out.entry_at(&[0, 0, 0]).unwrap(), 6.0);
        for e in [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]] {
            assert_eq!(out.entry_at(&e).unwrap(), -1.0);
        }
        assert!((out.norm() - 42f64.sqrt()).abs() < 1e-14);
        assert_eq!(out.active_radius(), 1);
        assert!(out.check_support());
    }

    #[test]
    fn free_apply_2d() {
        let spec = LatticeSpec::new(2, 2).unwrap();
        let pot = Potential::zero(spec);
        let f = Field::delta(spec, &[0, 0]).unwrap();
        let mut out = Field::zeros(spec);
        pot.apply(&f, &mut out, TruncationPolicy::Error).unwrap();
        assert_eq!(out.entry_at(&[0, 0]).unwrap(), 4.0);
        for e in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            assert_eq!(out.entry_at(&e).unwrap(), -1.0);
        }
        assert!((out.norm() - 20f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn on_site_value_enters_diagonal() {
        let spec = spec3(1);
        let mut omega = vec![0.0; 27];
        omega[spec.offset(&[0, 0, 0]).unwrap()] = 0.7;
        let pot = Potential::from_values(spec, omega, 2.0, 0, Convention::Half).unwrap();
        let f = Field::delta(spec, &[0, 0, 0]).unwrap();
        let mut out = Field::zeros(spec);
        pot.apply(&f, &mut out, TruncationPolicy::Error).unwrap();
        assert!((out.entry_at(&[0, 0, 0]).unwrap() - 6.7).abs() < 1e-15);
        assert_eq!(out.entry_at(&[0, 1, 0]).unwrap(), -1.0);
        let a = dense_matrix(&pot).unwrap();
        let o = spec.offset(&[0, 0, 0]).unwrap();
        assert!((a[(o, o)] - 6.7).abs() < 1e-15);
    }

    #[test]
    fn truncation_policy() {
        let spec = spec3(1);
        let pot = Potential::zero(spec);
        let f = Field::delta(spec, &[1, 0, 0]).unwrap();
        let mut out = Field::zeros(spec);
        assert!(matches!(
            pot.apply(&f, &mut out, TruncationPolicy::Error),
            Err(Error::Truncation { .. })
        ));
        assert!(pot.apply(&f, &mut out, TruncationPolicy::Record).unwrap());
        // Neighbor (2,0,0) falls outside the cube and is dropped.
        assert_eq!(out.entry_at(&[1, 0, 0]).unwrap(), 6.0);
        assert_eq!(out.entry_at(&[0, 0, 0]).unwrap(), -1.0);
        assert!((out.norm_sq() - 41.0).abs() < 1e-13);
    }

    #[test]
    fn out_buffer_with_wider_support_is_cleared() {
        let spec = spec3(3);
        let pot = Potential::zero(spec);
        let mut out = Field::delta(spec, &[1, 1, 1]).unwrap();
        out.axpy(1.0, &Field::delta(spec, &[0, 0, 3]).unwrap()).unwrap();
        let f = Field::delta(spec, &[0, 0, 0]).unwrap();
        pot.apply(&f, &mut out, TruncationPolicy::Error).unwrap();
        assert_eq!(out.entry_at(&[1, 1, 1]).unwrap(), 0.0);
        assert_eq!(out.entry_at(&[0, 0, 3]).unwrap(), 0.0);
        assert!(out.check_support());
    }

    #[test]
    fn sampling() {
        let spec = spec3(2);
        assert!(matches!(
            Potential::sample(spec, -1.0, 0, Convention::Half),
            Err(Error::Domain(_))
        ));
        let zero = Potential::sample(spec, 0.0, 12345, Convention::Full).unwrap();
        assert!(zero.omega().iter().all(|w| *w == 0.0));
        let a = Potential::sample(spec, 1.0, 5, Convention::Half).unwrap();
        let b = Potential::sample(spec, 1.0, 5, Convention::Half).unwrap();
        assert_eq!(a.omega(), b.omega());
        assert!(a.omega().iter().all(|w| (-0.5..=0.5).contains(w)));
        let full = Potential::sample(spec, 1.0, 5, Convention::Full).unwrap();
        assert!(full.omega().iter().all(|w| (-1.0..=1.0).contains(w)));
        assert!(full.omega().iter().any(|w| w.abs() > 0.5));
    }

    #[test]
    fn sampling_independent_of_cube_size() {
        let small = Potential::sample(spec3(2), 3.0, 77, Convention::Half).unwrap();
        let large = Potential::sample(spec3(5), 3.0, 77, Convention::Half).unwrap();
        for site in [[0, 0, 0], [1, -2, 2], [-2, -2, -2]] {
            let a = small.omega()[small.spec().offset(&site).unwrap()];
            let b = large.omega()[large.spec().offset(&site).unwrap()];
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dense_matrix_properties() {
        let spec = spec3(1);
        let a = dense_matrix(&Potential::zero(spec)).unwrap();
        assert_eq!(a.nrows(), 27);
        assert!((0..27).all(|i| a[(i, i)] == 6.0));
        assert_eq!((&a - a.transpose()).amax(), 0.0);
        assert!(matches!(
            dense_matrix(&Potential::zero(spec3(9))),
            Err(Error::Sizing { .. })
        ));
    }

    #[test]
    fn dump_roundtrip() {
        let spec = spec3(2);
        let pot = Potential::sample(spec, 2.5, 31, Convention::Full).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pot.bin");
        pot.write_dump(&path).unwrap();
        let back = Potential::read_dump(&path).unwrap();
        assert_eq!(back.omega(), pot.omega());
        assert_eq!(back.meta(), pot.meta());
    }
}
