//! Distribution of a normalized field over taxicab shells.
//!
//! `E(l) = sqrt(Σ_{|x|_1 = l} f(x)^2)`; for a unit vector `Σ_l E(l)^2 = 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Potential, TruncationPolicy};
use crate::lanczos::Lanczos;
use crate::lattice::Field;

/// Tolerance on `||f|| = 1` accepted by [`shell_profile`].
pub const NORM_TOL: f64 = 1e-10;

/// Which vector is profiled after `n` operator applications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    /// The `n`-th orthonormal Lanczos vector.
    #[default]
    LanczosBasisVector,
    /// `H^n δ / ||H^n δ||`.
    NormalizedPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellProfile {
    pub n: usize,
    pub c: f64,
    pub seed: u64,
    pub kind: VectorKind,
    /// `E(0), ..., E(l_max)`.
    pub values: Vec<f64>,
}

/// Shell norms of a unit vector, for `l = 0..=active_radius`.
pub fn shell_profile(f: &Field) -> Result<Vec<f64>> {
    let norm = f.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Contract(format!(
            "shell profile needs a unit vector, norm is {norm}"
        )));
    }
    let spec = *f.spec();
    let radius = f.active_radius();
    let side = spec.side();
    let plane = spec.plane_len();
    let m = spec.half_width() as i64;
    let values = f.values();
    let partials: Vec<Vec<f64>> = spec
        .slab_range(radius)
        .into_par_iter()
        .map_init(Vec::new, |rows, p| {
            let mut acc = vec![0.0; radius + 1];
            let i = p as i64 - m;
            spec.slab_rows(i, radius, rows);
            for &(s, l) in rows.iter() {
                let (j, k0) = if spec.dim() == 3 {
                    ((s / side) as i64 - m, (s % side) as i64 - m)
                } else {
                    (0, s as i64 - m)
                };
                let base = (i.abs() + j.abs()) as usize;
                for (t, v) in values[p * plane + s..p * plane + s + l].iter().enumerate() {
                    acc[base + (k0 + t as i64).unsigned_abs() as usize] += v * v;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; radius + 1];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total.into_iter().map(f64::sqrt).collect())
}

/// Profile of the `n`-th evolved vector started from `δ_source`.
pub fn profile_evolved(op: &Potential, source: &[i32], n: usize, kind: VectorKind) -> Result<ShellProfile> {
    let spec = *op.spec();
    let values = match kind {
        VectorKind::LanczosBasisVector => {
            let mut lz = Lanczos::untargeted(op, source, TruncationPolicy::Record)?;
            while lz.step_index() < n {
                if !lz.step()? {
                    return Err(Error::Analysis(format!(
                        "Krylov space became invariant at step {} before reaching {n}",
                        lz.step_index() + 1
                    )));
                }
            }
            shell_profile(lz.current())?
        }
        VectorKind::NormalizedPower => {
            let mut f = Field::delta(spec, source)?;
            let mut g = Field::zeros(spec);
            for _ in 0..n {
                op.apply(&f, &mut g, TruncationPolicy::Record)?;
                let norm = g.norm();
                g.scale(1.0 / norm);
                std::mem::swap(&mut f, &mut g);
            }
            shell_profile(&f)?
        }
    };
    Ok(ShellProfile {
        n,
        c: op.c(),
        seed: op.seed(),
        kind,
        values,
    })
}

/// Pointwise mean of `E` over profiles with the same `n`, `c` and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedProfile {
    pub n: usize,
    pub c: f64,
    pub count: usize,
    pub values: Vec<f64>,
}

pub fn averaged_profile(profiles: &[ShellProfile]) -> Result<AveragedProfile> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::Analysis("cannot average an empty list of profiles".into()))?;
    for p in profiles {
        if p.n != first.n || p.c != first.c || p.values.len() != first.values.len() {
            return Err(Error::Analysis(format!(
                "profile shapes differ: (n={}, c={}, len={}) vs (n={}, c={}, len={})",
                p.n,
                p.c,
                p.values.len(),
                first.n,
                first.c,
                first.values.len()
            )));
        }
    }
    let k = profiles.len() as f64;
    let values = (0..first.values.len())
        .map(|l| profiles.iter().map(|p| p.values[l]).sum::<f64>() / k)
        .collect();
    Ok(AveragedProfile {
        n: first.n,
        c: first.c,
        count: profiles.len(),
        values,
    })
}

/// Shell index of the largest `E(l)`.
pub fn peak_shell(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (l, v)| if *v > best.1 { (l, *v) } else { best },
        )
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    #[test]
    fn delta_profile() {
        let spec = LatticeSpec::new(3, 2).unwrap();
        let f = Field::delta(spec, &[0, 0, 0]).unwrap();
        assert_eq!(shell_profile(&f).unwrap(), vec![1.0]);
        let g = Field::delta(spec, &[1, -1, 0]).unwrap();
        assert_eq!(shell_profile(&g).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn power_of_delta() {
        let spec = LatticeSpec::new(3, 3).unwrap();
        let op = Potential::zero(spec);
        let p = profile_evolved(&op, &[0, 0, 0], 1, VectorKind::NormalizedPower).unwrap();
        let s42 = 42f64.sqrt();
        assert!((p.values[0] - 6.0 / s42).abs() < 1e-15);
        assert!((p.values[1] - 6f64.sqrt() / s42).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        let spec = LatticeSpec::new(3, 2).unwrap();
        let mut f = Field::delta(spec, &[0, 0, 0]).unwrap();
        f.scale(2.0);
        assert!(matches!(shell_profile(&f), Err(Error::Contract(_))));
    }

    #[test]
    fn two_d_profile() {
        let spec = LatticeSpec::new(2, 4).unwrap();
        let op = Potential::zero(spec);
        let p = profile_evolved(&op, &[0, 0], 3, VectorKind::LanczosBasisVector).unwrap();
        let total: f64 = p.values.iter().map(|e| e * e).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(p.values.len(), 4);
    }

    #[test]
    fn averages() {
        let one_hot = |l: usize| ShellProfile {
            n: 2,
            c: 0.1,
            seed: 0,
            kind: VectorKind::LanczosBasisVector,
            values: (0..3).map(|i| if i == l { 1.0 } else { 0.0 }).collect(),
        };
        let avg = averaged_profile(&[one_hot(0), one_hot(2)]).unwrap();
        assert_eq!(avg.values, vec![0.5, 0.0, 0.5]);
        let same = averaged_profile(&[one_hot(1), one_hot(1)]).unwrap();
        assert_eq!(same.values, one_hot(1).values);
        let mut other = one_hot(1);
        other.n = 3;
        assert!(averaged_profile(&[one_hot(1), other]).is_err());
        assert_eq!(peak_shell(&avg.values), 0);
    }
}
