//! Truncated cubic lattice `{-M..M}^d` and real fields on it.
//!
//! Storage is a dense row-major cube: coordinate axis 0 varies slowest and
//! the last axis is contiguous, so
//!
//! ```text
//! offset(x) = sum_k (x_k + M) * stride_k,   stride_k = (2M+1)^(d-1-k)
//! ```
//!
//! Every field carries an `active_radius`: a taxicab radius outside of
//! which all entries are exactly zero. Vector operations only visit the
//! diamond `|x|_1 <= active_radius`, which is what keeps the cost of a
//! Krylov step proportional to the size of the current support rather than
//! to the size of the cube.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default per-field memory budget (16 GiB).
pub const DEFAULT_FIELD_BUDGET: u128 = 16 << 30;

/// Geometry of the truncated cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    dim: usize,
    half_width: usize,
}

impl LatticeSpec {
    /// Lattice of dimension `dim` and half-width `half_width`, checked
    /// against [`DEFAULT_FIELD_BUDGET`].
    pub fn new(dim: usize, half_width: usize) -> Result<Self> {
        Self::with_budget(dim, half_width, DEFAULT_FIELD_BUDGET)
    }

    /// Like [`LatticeSpec::new`] but with an explicit byte budget for one
    /// field buffer.
    pub fn with_budget(dim: usize, half_width: usize, budget: u128) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Domain(format!("dimension must be 2 or 3, got {dim}")));
        }
        if half_width < 1 {
            return Err(Error::Domain("half-width must be at least 1".into()));
        }
        if half_width >= 1 << 20 {
            return Err(Error::Domain(format!("half-width {half_width} is too large")));
        }
        let side = 2 * half_width as u128 + 1;
        let requested = side.pow(dim as u32) * 8;
        if requested > budget {
            return Err(Error::Sizing {
                what: "lattice field",
                requested,
                budget,
            });
        }
        Ok(Self { dim, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Cube side `2M + 1`.
    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn total_sites(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    /// Bytes of one dense field buffer.
    pub fn field_bytes(&self) -> u128 {
        self.total_sites() as u128 * 8
    }

    /// Largest taxicab radius inside the cube, `d * M`.
    pub fn max_radius(&self) -> usize {
        self.dim * self.half_width
    }

    /// Offset step when moving by +1 along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side().pow((self.dim - 1 - axis) as u32)
    }

    /// Number of sites in one slab of fixed first coordinate.
    pub fn plane_len(&self) -> usize {
        self.stride(0)
    }

    pub fn contains(&self, site: &[i32]) -> bool {
        site.len() == self.dim && site.iter().all(|&x| x.unsigned_abs() as usize <= self.half_width)
    }

    /// Layout offset of `site`.
    pub fn offset(&self, site: &[i32]) -> Result<usize> {
        if site.len() != self.dim {
            return Err(Error::Domain(format!(
                "site {site:?} has {} coordinates, lattice has dimension {}",
                site.len(),
                self.dim
            )));
        }
        if !self.contains(site) {
            return Err(Error::Domain(format!(
                "site {site:?} lies outside the cube of half-width {}",
                self.half_width
            )));
        }
        let m = self.half_width as i64;
        let side = self.side() as i64;
        Ok(site.iter().fold(0i64, |acc, &x| acc * side + x as i64 + m) as usize)
    }

    /// Inverse of [`LatticeSpec::offset`].
    pub fn site(&self, offset: usize) -> Vec<i32> {
        let side = self.side();
        let m = self.half_width as i32;
        let mut rest = offset;
        let mut site = vec![0; self.dim];
        for slot in site.iter_mut().rev() {
            *slot = (rest % side) as i32 - m;
            rest /= side;
        }
        site
    }

    /// Offsets of every site with taxicab norm exactly `radius`, in layout
    /// order. Empty when `radius > d * M`.
    pub fn shell_indices(&self, radius: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.half_width as i64;
        let r = radius as i64;
        let lo = (-m).max(-r);
        let hi = m.min(r);
        let dim = self.dim;
        let side = self.side() as i64;
        (lo..=hi).flat_map(move |i| {
            let rem_i = r - i.abs();
            let inner: Box<dyn Iterator<Item = usize>> = if dim == 2 {
                // |j| = rem_i
                let js: Vec<i64> = match rem_i {
                    x if x > m => vec![],
                    0 => vec![0],
                    x => vec![-x, x],
                };
                Box::new(js.into_iter().map(move |j| ((i + m) * side + j + m) as usize))
            } else {
                let jlim = rem_i.min(m);
                Box::new((-jlim..=jlim).flat_map(move |j| {
                    let rem_j = rem_i - j.abs();
                    let ks: Vec<i64> = match rem_j {
                        x if x > m => vec![],
                        0 => vec![0],
                        x => vec![-x, x],
                    };
                    ks.into_iter()
                        .map(move |k| (((i + m) * side + j + m) * side + k + m) as usize)
                }))
            };
            inner
        })
    }

    /// Contiguous runs of the diamond `|x|_1 <= radius` inside the slab
    /// with first coordinate `i`, as `(start, len)` relative to the slab.
    pub(crate) fn slab_rows(&self, i: i64, radius: usize, rows: &mut Vec<(usize, usize)>) {
        rows.clear();
        let m = self.half_width as i64;
        let rem_i = radius as i64 - i.abs();
        if rem_i < 0 || i.abs() > m {
            return;
        }
        let side = self.side();
        if self.dim == 2 {
            let jj = rem_i.min(m);
            rows.push(((m - jj) as usize, (2 * jj + 1) as usize));
        } else {
            let jlim = rem_i.min(m);
            for j in -jlim..=jlim {
                let kk = (rem_i - j.abs()).min(m);
                let base = (j + m) as usize * side;
                rows.push((base + (m - kk) as usize, (2 * kk + 1) as usize));
            }
        }
    }

    /// Slab indices (0-based) intersecting the diamond of `radius`.
    pub(crate) fn slab_range(&self, radius: usize) -> std::ops::Range<usize> {
        let m = self.half_width;
        let r = radius.min(m);
        (m - r)..(m + r + 1)
    }
}

/// Taxicab norm of a site.
pub fn taxicab(site: &[i32]) -> usize {
    site.iter().map(|x| x.unsigned_abs() as usize).sum()
}

/// One real-valued function on the truncated lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    spec: LatticeSpec,
    values: Vec<f64>,
    active_radius: usize,
}

impl Field {
    /// The zero field.
    pub fn zeros(spec: LatticeSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.total_sites()],
            active_radius: 0,
        }
    }

    /// The unit vector at `site`.
    pub fn delta(spec: LatticeSpec, site: &[i32]) -> Result<Self> {
        let offset = spec.offset(site)?;
        let mut f = Self::zeros(spec);
        f.values[offset] = 1.0;
        f.active_radius = taxicab(site);
        Ok(f)
    }

    /// Builds a field from dense values; the active radius is computed by
    /// scanning for the outermost nonzero entry.
    pub fn from_values(spec: LatticeSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total_sites() {
            return Err(Error::Contract(format!(
                "expected {} values, got {}",
                spec.total_sites(),
                values.len()
            )));
        }
        let active_radius = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(o, _)| taxicab(&spec.site(o)))
            .max()
            .unwrap_or(0);
        Ok(Self {
            spec,
            values,
            active_radius,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn active_radius(&self) -> usize {
        self.active_radius
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn set_active_radius(&mut self, radius: usize) {
        self.active_radius = radius.min(self.spec.max_radius());
    }

    pub fn entry_at(&self, site: &[i32]) -> Result<f64> {
        Ok(self.values[self.spec.offset(site)?])
    }

    fn check_spec(&self, other: &Field) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Contract(format!(
                "lattice mismatch: {:?} vs {:?}",
                self.spec, other.spec
            )));
        }
        Ok(())
    }

    /// Zeros the active diamond and resets the radius.
    pub fn clear(&mut self) {
        let spec = self.spec;
        let radius = self.active_radius;
        for_each_slab_mut(&spec, &mut self.values, radius, |_, slab, rows| {
            for &(s, l) in rows {
                slab[s..s + l].fill(0.0);
            }
        });
        self.active_radius = 0;
    }

    /// Overwrites `self` with `other`.
    pub fn copy_from(&mut self, other: &Field) -> Result<()> {
        self.check_spec(other)?;
        if self.active_radius > other.active_radius {
            self.clear();
        }
        let spec = self.spec;
        let src = &other.values;
        let plane = spec.plane_len();
        for_each_slab_mut(&spec, &mut self.values, other.active_radius, |p, slab, rows| {
            let base = p * plane;
            for &(s, l) in rows {
                slab[s..s + l].copy_from_slice(&src[base + s..base + s + l]);
            }
        });
        self.active_radius = other.active_radius;
        Ok(())
    }

    /// Euclidean inner product.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_spec(other)?;
        let radius = self.active_radius.min(other.active_radius);
        let (a, b) = (&self.values, &other.values);
        Ok(reduce_slabs(&self.spec, radius, |s, l| {
            a[s..s + l].iter().zip(&b[s..s + l]).map(|(x, y)| x * y).sum()
        }))
    }

    pub fn norm_sq(&self) -> f64 {
        let a = &self.values;
        reduce_slabs(&self.spec, self.active_radius, |s, l| {
            a[s..s + l].iter().map(|x| x * x).sum()
        })
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self <- self + alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Field) -> Result<()> {
        self.check_spec(x)?;
        let spec = self.spec;
        let src = &x.values;
        let plane = spec.plane_len();
        for_each_slab_mut(&spec, &mut self.values, x.active_radius, |p, slab, rows| {
            let base = p * plane;
            for &(s, l) in rows {
                for (y, xv) in slab[s..s + l].iter_mut().zip(&src[base + s..base + s + l]) {
                    *y += alpha * xv;
                }
            }
        });
        self.active_radius = self.active_radius.max(x.active_radius);
        Ok(())
    }

    /// `self <- alpha * self`.
    pub fn scale(&mut self, alpha: f64) {
        let spec = self.spec;
        for_each_slab_mut(&spec, &mut self.values, self.active_radius, |_, slab, rows| {
            for &(s, l) in rows {
                slab[s..s + l].iter_mut().for_each(|v| *v *= alpha);
            }
        });
        if alpha == 0.0 {
            self.active_radius = 0;
        }
    }

    /// True when every entry outside the active diamond is zero and all
    /// entries are finite. Scans the whole cube.
    pub fn check_support(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(o, v)| v.is_finite() && (*v == 0.0 || taxicab(&self.spec.site(o)) <= self.active_radius))
    }

    /// Writes the binary dump: `d` and `M` as little-endian `u32`, eight
    /// reserved zero bytes, then every value as little-endian `f64` in
    /// layout order.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            w.write_all(&(self.spec.dim as u32).to_le_bytes())?;
            w.write_all(&(self.spec.half_width as u32).to_le_bytes())?;
            w.write_all(&[0u8; 8])?;
            for v in &self.values {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn read_dump(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let schema = |message: &str| Error::Schema {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if bytes.len() < 16 {
            return Err(schema("file shorter than the 16-byte header"));
        }
        let dim = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let spec = LatticeSpec::new(dim, m)?;
        let body = &bytes[16..];
        if body.len() != spec.total_sites() * 8 {
            return Err(schema("payload length does not match header"));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Field::from_values(spec, values)
    }
}

/// Runs `f(slab_index, slab, rows)` over every slab meeting the diamond of
/// `radius`, in parallel. `rows` are the diamond runs inside that slab.
pub(crate) fn for_each_slab_mut<F>(spec: &LatticeSpec, values: &mut [f64], radius: usize, f: F)
where
    F: Fn(usize, &mut [f64], &[(usize, usize)]) + Sync,
{
    let range = spec.slab_range(radius);
    let plane = spec.plane_len();
    let m = spec.half_width() as i64;
    values[range.start * plane..range.end * plane]
        .par_chunks_mut(plane)
        .enumerate()
        .for_each_init(Vec::new, |rows, (q, slab)| {
            let p = range.start + q;
            spec.slab_rows(p as i64 - m, radius, rows);
            f(p, slab, rows);
        });
}

/// Sums `row_sum(start, len)` over all diamond runs of `radius`, with
/// absolute offsets. Per-slab partial sums are combined in slab order so the
/// result does not depend on the thread count.
pub(crate) fn reduce_slabs<F>(spec: &LatticeSpec, radius: usize, row_sum: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let plane = spec.plane_len();
    let m = spec.half_width() as i64;
    let partials: Vec<f64> = spec
        .slab_range(radius)
        .into_par_iter()
        .map_init(Vec::new, |rows, p| {
            spec.slab_rows(p as i64 - m, radius, rows);
            let base = p * plane;
            rows.iter().map(|&(s, l)| row_sum(base + s, l)).sum()
        })
        .collect();
    partials.iter().sum()
}
