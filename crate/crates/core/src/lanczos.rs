//! Streaming Lanczos recurrence producing the distance from a target unit
//! vector to the Krylov orbit of a source unit vector.
//!
//! With `v_0 = δ_source` the recurrence
//!
//! ```text
//! w       = H v_k - α_k v_k - β_k v_{k-1},   α_k = <H v_k, v_k>
//! β_{k+1} = ||w||,                           v_{k+1} = w / β_{k+1}
//! ```
//!
//! yields an orthonormal basis of `span{H^j δ_source : j <= k}`. Because the
//! basis is orthonormal, the squared distance of `δ_target` to the span is
//! `1 - Σ_j v_j(target)^2`, which is updated in place as each vector is
//! produced. Only three field buffers are alive at any time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Convention, Potential, TruncationPolicy};
use crate::lattice::{taxicab, Field};

/// Relative breakdown tolerance: iteration stops when
/// `β_{k+1} < BREAKDOWN_TOL * ||H v_k||`.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Metadata persisted next to a distance series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub c: f64,
    pub seed: u64,
    pub d: usize,
    #[serde(rename = "M")]
    pub half_width: usize,
    pub n_max: usize,
    pub convention: Convention,
    pub source: Vec<i32>,
    pub target: Vec<i32>,
    pub truncation_flag: bool,
    pub breakdown_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
}

impl SeriesMeta {
    /// Placeholder metadata for series that did not come from a probe.
    pub fn synthetic(n_max: usize) -> Self {
        Self {
            c: 0.0,
            seed: 0,
            d: 3,
            half_width: 0,
            n_max,
            convention: Convention::Half,
            source: vec![],
            target: vec![],
            truncation_flag: false,
            breakdown_step: None,
            alpha: vec![],
            beta: vec![],
        }
    }
}

/// `D^0, D^1, ..., D^{n_max}` for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSeries {
    pub meta: SeriesMeta,
    pub values: Vec<f64>,
}

impl DistanceSeries {
    /// Wraps raw values; `n_max` is `values.len() - 1`.
    pub fn synthetic(values: Vec<f64>) -> Self {
        Self {
            meta: SeriesMeta::synthetic(values.len().saturating_sub(1)),
            values,
        }
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("series is never empty")
    }

    /// True when no value exceeds its predecessor by more than `tol`.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Options shared by the probe entry points.
#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    pub truncation: TruncationPolicy,
    /// Keep α and β in the series metadata.
    pub record_coefficients: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            truncation: TruncationPolicy::Record,
            record_coefficients: true,
        }
    }
}

/// State of the three-term recurrence.
pub struct Lanczos<'a> {
    op: &'a Potential,
    truncation: TruncationPolicy,
    target_offset: Option<usize>,
    v_prev: Field,
    v_curr: Field,
    work: Field,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    proj_coeffs: Vec<f64>,
    dist_sq: f64,
    k: usize,
    truncated: bool,
    breakdown: Option<usize>,
}

impl<'a> Lanczos<'a> {
    pub fn new(op: &'a Potential, source: &[i32], target: &[i32], truncation: TruncationPolicy) -> Result<Self> {
        let target_offset = op.spec().offset(target)?;
        Self::build(op, source, Some(target_offset), truncation)
    }

    /// Recurrence without distance bookkeeping, for inspecting the basis.
    pub fn untargeted(op: &'a Potential, source: &[i32], truncation: TruncationPolicy) -> Result<Self> {
        Self::build(op, source, None, truncation)
    }

    fn build(
        op: &'a Potential,
        source: &[i32],
        target_offset: Option<usize>,
        truncation: TruncationPolicy,
    ) -> Result<Self> {
        let spec = *op.spec();
        let v_curr = Field::delta(spec, source)?;
        let c0 = target_offset.map_or(0.0, |t| v_curr.values()[t]);
        Ok(Self {
            op,
            truncation,
            target_offset,
            v_prev: Field::zeros(spec),
            v_curr,
            work: Field::zeros(spec),
            alpha: Vec::new(),
            beta: Vec::new(),
            proj_coeffs: vec![c0],
            dist_sq: 1.0 - c0 * c0,
            k: 0,
            truncated: false,
            breakdown: None,
        })
    }

    /// Index of the current basis vector.
    pub fn step_index(&self) -> usize {
        self.k
    }

    /// The current orthonormal basis vector `v_k`.
    pub fn current(&self) -> &Field {
        &self.v_curr
    }

    /// Distance of the target to `span{v_0..v_k}`.
    pub fn distance(&self) -> f64 {
        self.dist_sq.max(0.0).sqrt()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `β_1, β_2, ...` (the off-diagonal of the tridiagonal matrix).
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `v_j(target)` for `j = 0..=k`.
    pub fn proj_coeffs(&self) -> &[f64] {
        &self.proj_coeffs
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Step at which the Krylov space became invariant, if it did.
    pub fn breakdown_step(&self) -> Option<usize> {
        self.breakdown
    }

    /// Advances to `v_{k+1}`. Returns `false` (and leaves `v_k` current)
    /// once the recurrence has broken down.
    pub fn step(&mut self) -> Result<bool> {
        if self.breakdown.is_some() {
            return Ok(false);
        }
        self.truncated |= self.op.apply(&self.v_curr, &mut self.work, self.truncation)?;
        let hv_norm = self.work.norm();
        let alpha = self.work.inner(&self.v_curr)?;
        self.alpha.push(alpha);
        self.work.axpy(-alpha, &self.v_curr)?;
        if let Some(&beta_k) = self.beta.last() {
            self.work.axpy(-beta_k, &self.v_prev)?;
        }
        let beta = self.work.norm();
        if !(beta >= BREAKDOWN_TOL * hv_norm) || beta == 0.0 {
            self.breakdown = Some(self.k + 1);
            return Ok(false);
        }
        self.beta.push(beta);
        self.work.scale(1.0 / beta);
        std::mem::swap(&mut self.v_prev, &mut self.v_curr);
        std::mem::swap(&mut self.v_curr, &mut self.work);
        self.k += 1;
        let c = self.target_offset.map_or(0.0, |t| self.v_curr.values()[t]);
        self.proj_coeffs.push(c);
        self.dist_sq -= c * c;
        Ok(true)
    }
}

fn check_endpoints(op: &Potential, source: &[i32], target: &[i32]) -> Result<()> {
    if source == target {
        return Err(Error::Domain("source and target sites must differ".into()));
    }
    let spec = op.spec();
    spec.offset(source)?;
    spec.offset(target)?;
    Ok(())
}

/// Half-width needed for a truncation-free run of `n_max` steps from
/// `source`: the last operator application acts on `v_{n_max-1}`.
pub fn required_half_width(source: &[i32], target: &[i32], n_max: usize) -> usize {
    (n_max + taxicab(source)).max(target.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0))
}

fn run(
    op: &Potential,
    source: &[i32],
    target: &[i32],
    n_max: usize,
    opts: ProbeOptions,
    mut on_vector: impl FnMut(&Field) -> Result<()>,
) -> Result<DistanceSeries> {
    check_endpoints(op, source, target)?;
    let mut lz = Lanczos::new(op, source, target, opts.truncation)?;
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(lz.distance());
    on_vector(lz.current())?;
    while values.len() <= n_max {
        if !lz.step()? {
            break;
        }
        values.push(lz.distance());
        on_vector(lz.current())?;
    }
    let last = *values.last().unwrap();
    values.resize(n_max + 1, last);
    let spec = op.spec();
    let meta = SeriesMeta {
        c: op.c(),
        seed: op.seed(),
        d: spec.dim(),
        half_width: spec.half_width(),
        n_max,
        convention: op.convention(),
        source: source.to_vec(),
        target: target.to_vec(),
        truncation_flag: lz.truncated(),
        breakdown_step: lz.breakdown_step(),
        alpha: if opts.record_coefficients {
            lz.alpha().to_vec()
        } else {
            vec![]
        },
        beta: if opts.record_coefficients {
            lz.beta().to_vec()
        } else {
            vec![]
        },
    };
    Ok(DistanceSeries { meta, values })
}

/// Distance series `D^0..D^{n_max}` of `δ_target` to the Krylov orbit of
/// `δ_source`. After a breakdown the series is padded with its last value.
pub fn probe(
    op: &Potential,
    source: &[i32],
    target: &[i32],
    n_max: usize,
    opts: ProbeOptions,
) -> Result<DistanceSeries> {
    run(op, source, target, n_max, opts, |_| Ok(()))
}

/// The Krylov basis vectors kept by [`probe_with_basis`], one per column.
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    pub columns: Vec<Field>,
}

/// Default byte budget for a stored basis (4 GiB).
pub const DEFAULT_BASIS_BUDGET: u128 = 4 << 30;

/// Same series as [`probe`], additionally retaining every `v_k`.
pub fn probe_with_basis(
    op: &Potential,
    source: &[i32],
    target: &[i32],
    n_max: usize,
    opts: ProbeOptions,
    budget: u128,
) -> Result<(DistanceSeries, KrylovBasis)> {
    let requested = op.spec().field_bytes() * (n_max as u128 + 1);
    if requested > budget {
        return Err(Error::Sizing {
            what: "stored Krylov basis",
            requested,
            budget,
        });
    }
    let mut columns = Vec::with_capacity(n_max + 1);
    let series = run(op, source, target, n_max, opts, |v| {
        columns.push(v.clone());
        Ok(())
    })?;
    Ok((series, KrylovBasis { columns }))
}

/// `Q = ||KᵀK - I||_∞`, the largest absolute row sum of the Gram matrix's
/// deviation from the identity.
pub fn ortho_diagnostic(basis: &KrylovBasis) -> Result<f64> {
    let cols = &basis.columns;
    if cols.is_empty() {
        return Err(Error::Domain("empty Krylov basis".into()));
    }
    let n = cols.len();
    let mut dev = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let g = cols[i].inner(&cols[j])?;
            let e = if i == j { (g - 1.0).abs() } else { g.abs() };
            dev[i * n + j] = e;
            dev[j * n + i] = e;
        }
    }
    Ok(dev.chunks(n).map(|row| row.iter().sum::<f64>()).fold(0.0, f64::max))
}
