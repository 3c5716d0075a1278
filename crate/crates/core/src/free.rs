//! Reflection-reduced probe for the free operator in three dimensions.
//!
//! With `ω ≡ 0` and the source at the origin every Krylov vector is even
//! in each coordinate, so it is determined by its values on the octant
//! `{0..M}^3`. Storing only the octant cuts memory by a factor of eight,
//! which is what makes long free-operator runs (several hundred steps)
//! feasible on a workstation. The inner product carries the multiplicity
//! `2^(number of nonzero coordinates)` of each octant site; the operator
//! mirrors `f(-1, j, k) = f(1, j, k)` across each coordinate plane.
//!
//! This is an independent route to the same distance series the general
//! probe produces at `c = 0`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::Convention;
use crate::lanczos::{DistanceSeries, SeriesMeta, BREAKDOWN_TOL};

#[derive(Clone)]
struct OctantField {
    m: usize,
    values: Vec<f64>,
    radius: usize,
}

impl OctantField {
    fn zeros(m: usize) -> Self {
        Self {
            m,
            values: vec![0.0; (m + 1).pow(3)],
            radius: 0,
        }
    }

    fn side(&self) -> usize {
        self.m + 1
    }

    /// Rows `(start_in_slab, len)` of the diamond `i+j+k <= r` in slab `i`.
    fn rows(m: usize, i: usize, r: usize) -> impl Iterator<Item = (usize, usize)> {
        let side = m + 1;
        let rem = r.saturating_sub(i);
        let live = i <= r;
        (0..=rem.min(m))
            .filter(move |_| live)
            .map(move |j| (j * side, (rem - j).min(m) + 1))
    }

    fn slabs(&self, r: usize) -> std::ops::Range<usize> {
        0..r.min(self.m) + 1
    }

    fn weighted_sum(&self, r: usize, row: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
        let plane = self.side() * self.side();
        let m = self.m;
        let partial: Vec<f64> = self
            .slabs(r)
            .into_par_iter()
            .map(|i| {
                let wi = if i > 0 { 2.0 } else { 1.0 };
                Self::rows(m, i, r)
                    .enumerate()
                    .map(|(j, (s, l))| {
                        let wj = if j > 0 { 2.0 } else { 1.0 };
                        wi * wj * row(i * plane + s, l)
                    })
                    .sum::<f64>()
            })
            .collect();
        partial.iter().sum()
    }

    fn inner(&self, other: &Self) -> f64 {
        let (a, b) = (&self.values, &other.values);
        self.weighted_sum(self.radius.min(other.radius), |s, l| {
            let head = a[s] * b[s];
            let tail: f64 = a[s + 1..s + l].iter().zip(&b[s + 1..s + l]).map(|(x, y)| x * y).sum();
            head + 2.0 * tail
        })
    }

    fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn for_each_row_mut(&mut self, r: usize, f: impl Fn(usize, usize, &mut [f64]) + Sync) {
        let plane = self.side() * self.side();
        let m = self.m;
        let slabs = self.slabs(r);
        self.values[..slabs.end * plane]
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(i, slab)| {
                for (s, l) in Self::rows(m, i, r) {
                    f(i * plane + s, l, &mut slab[s..s + l]);
                }
            });
    }

    fn axpy(&mut self, alpha: f64, x: &Self) {
        let src = &x.values;
        self.for_each_row_mut(x.radius, |abs, l, row| {
            for (y, xv) in row.iter_mut().zip(&src[abs..abs + l]) {
                *y += alpha * xv;
            }
        });
        self.radius = self.radius.max(x.radius);
    }

    fn scale(&mut self, alpha: f64) {
        let r = self.radius;
        self.for_each_row_mut(r, |_, _, row| row.iter_mut().for_each(|v| *v *= alpha));
    }

    /// `out <- H_0 f` with even reflection across each coordinate plane.
    fn apply(&self, out: &mut Self) -> Result<()> {
        let m = self.m;
        if self.radius + 1 > m {
            return Err(Error::Truncation {
                radius: self.radius,
                half_width: m,
            });
        }
        let r_out = self.radius + 1;
        let side = self.side();
        let plane = side * side;
        let f = &self.values;
        let zero = vec![0.0; side];
        let row_of = |i: usize, j: usize| -> &[f64] {
            if i > m || j > m {
                &zero[..]
            } else {
                let s = i * plane + j * side;
                &f[s..s + side]
            }
        };
        out.for_each_row_mut(r_out, |abs, l, row| {
            let i = abs / plane;
            let j = abs % plane / side;
            let c = row_of(i, j);
            let im = row_of(if i == 0 { 1 } else { i - 1 }, j);
            let ip = row_of(i + 1, j);
            let jm = row_of(i, if j == 0 { 1 } else { j - 1 });
            let jp = row_of(i, j + 1);
            for (k, o) in row.iter_mut().enumerate().take(l) {
                let left = if k == 0 { c[1] } else { c[k - 1] };
                let right = if k < m { c[k + 1] } else { 0.0 };
                let sum = left + right + im[k] + ip[k] + jm[k] + jp[k];
                *o = 6.0 * c[k] - sum;
            }
        });
        out.radius = r_out;
        Ok(())
    }
}

/// Distance series of `target` to the orbit of the origin under the free
/// three-dimensional operator on `{-M..M}^3`, computed on the octant.
/// Requires `half_width >= n_max` so that no truncation occurs.
pub fn free_octant_probe(target: [i32; 3], n_max: usize, half_width: usize) -> Result<DistanceSeries> {
    if target == [0, 0, 0] {
        return Err(Error::Domain("source and target sites must differ".into()));
    }
    let m = half_width;
    if m < n_max.max(1) || target.iter().any(|x| x.unsigned_abs() as usize > m) {
        return Err(Error::Domain(format!(
            "half-width {m} too small for {n_max} truncation-free steps"
        )));
    }
    let side = m + 1;
    let t = target.map(|x| x.unsigned_abs() as usize);
    let t_off = (t[0] * side + t[1]) * side + t[2];

    let mut v_prev = OctantField::zeros(m);
    let mut v_curr = OctantField::zeros(m);
    let mut work = OctantField::zeros(m);
    v_curr.values[0] = 1.0;

    let mut values = vec![1.0];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut dist_sq = 1.0f64;
    let mut breakdown = None;
    for k in 0..n_max {
        v_curr.apply(&mut work)?;
        let hv = work.norm();
        let a = work.inner(&v_curr);
        alpha.push(a);
        work.axpy(-a, &v_curr);
        if let Some(&b) = beta.last() {
            work.axpy(-b, &v_prev);
        }
        let b = work.norm();
        if !(b >= BREAKDOWN_TOL * hv) || b == 0.0 {
            breakdown = Some(k + 1);
            break;
        }
        beta.push(b);
        work.scale(1.0 / b);
        std::mem::swap(&mut v_prev, &mut v_curr);
        std::mem::swap(&mut v_curr, &mut work);
        let c = v_curr.values[t_off];
        dist_sq -= c * c;
        values.push(dist_sq.max(0.0).sqrt());
    }
    let last = *values.last().unwrap();
    values.resize(n_max + 1, last);
    let mut meta = SeriesMeta::synthetic(n_max);
    meta.d = 3;
    meta.half_width = m;
    meta.convention = Convention::Half;
    meta.source = vec![0, 0, 0];
    meta.target = target.to_vec();
    meta.breakdown_step = breakdown;
    meta.alpha = alpha;
    meta.beta = beta;
    Ok(DistanceSeries { meta, values })
}
