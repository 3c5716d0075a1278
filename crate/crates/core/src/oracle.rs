//! Dense reference computations for small lattices.
//!
//! These routines are deliberately independent of the stencil kernel and
//! of the three-term recurrence: the operator comes from
//! [`dense_matrix`], the Krylov basis is built column by column with full
//! (twice-repeated) Gram-Schmidt against all previous columns, and the
//! distance is the norm of an explicitly maintained residual vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{dense_matrix, Potential};
use crate::lanczos::{DistanceSeries, SeriesMeta};

/// Columns whose norm after orthogonalization falls below this fraction of
/// their norm before it are treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Exact distance of `δ_target` to `span{δ_source, Hδ_source, ..., H^n δ_source}`
/// for `n = 0..=n_max`.
///
/// Each new direction is `A q_{n-1}` (which spans the same space as the
/// monomial `A^n δ_source` once the earlier columns are included) so the
/// factorization stays well conditioned. When a new direction is dependent
/// on the previous columns the rank has saturated and the distance stays
/// constant from then on.
pub fn brute_force_distance(op: &Potential, source: &[i32], target: &[i32], n_max: usize) -> Result<DistanceSeries> {
    let spec = op.spec();
    let a: DMatrix<f64> = dense_matrix(op)?;
    let dim = spec.total_sites();
    let s = spec.offset(source)?;
    let t = spec.offset(target)?;
    if s == t {
        return Err(Error::Domain("source and target sites must differ".into()));
    }

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n_max + 1);
    let mut residual = DVector::zeros(dim);
    residual[t] = 1.0;
    let mut values = Vec::with_capacity(n_max + 1);
    let mut saturated_at = None;

    let mut candidate = DVector::zeros(dim);
    candidate[s] = 1.0;
    for n in 0..=n_max {
        if n > 0 && saturated_at.is_none() {
            candidate = &a * basis.last().unwrap();
        }
        if saturated_at.is_none() {
            let before = candidate.norm();
            for _ in 0..2 {
                for q in &basis {
                    let proj = q.dot(&candidate);
                    candidate.axpy(-proj, q, 1.0);
                }
            }
            let after = candidate.norm();
            if after <= RANK_TOL * before {
                saturated_at = Some(n);
            } else {
                let q = &candidate / after;
                let proj = q.dot(&residual);
                residual.axpy(-proj, &q, 1.0);
                // Second pass keeps the residual orthogonal to rounding.
                for q in basis.iter().chain(std::iter::once(&q)) {
                    let proj = q.dot(&residual);
                    residual.axpy(-proj, q, 1.0);
                }
                basis.push(q);
            }
        }
        values.push(residual.norm());
    }

    let mut meta = SeriesMeta::synthetic(n_max);
    meta.c = op.c();
    meta.seed = op.seed();
    meta.d = spec.dim();
    meta.half_width = spec.half_width();
    meta.convention = op.convention();
    meta.source = source.to_vec();
    meta.target = target.to_vec();
    meta.breakdown_step = saturated_at;
    Ok(DistanceSeries { meta, values })
}
