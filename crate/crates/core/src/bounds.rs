//! Inner spectral bounds (Rayleigh–Ritz, power refinement) and outer bounds
//! from Q*-convex translation operators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::composite::LocalOperator;
use crate::error::{Error, Result};
use crate::field::{self, ComplexField};
use crate::linalg::{self, cr, CMat, CVec, C64};
use crate::operator::{IntervalKind, OperatorHandle, OperatorTag, SpectrumInterval};
use crate::par;
use crate::projector::{build_gamma, ProjectorSpec};

/// Q*-convexity holds on the samples when the minimum is at least −QSTAR_TOL.
pub const QSTAR_TOL: f64 = 1e-10;
pub const DEFAULT_SPHERE_DIRECTIONS: usize = 10_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RayleighRitzResult {
    pub c_minus_rr: f64,
    pub c_plus_rr: f64,
    pub s_minus: ComplexField,
    pub s_plus: ComplexField,
    pub subspace_dim: usize,
}

/// Extreme values of (As, s)/|s|² over the span of `basis` projected onto
/// the range of Γ₁.
pub fn rayleigh_ritz(a: &OperatorHandle, proj: &ProjectorSpec, basis: &[ComplexField]) -> Result<RayleighRitzResult> {
    let n = a.dim();
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let p = proj.operator();
    let template = &basis[0];
    let cols: Vec<Vec<C64>> = basis
        .iter()
        .map(|b| {
            if b.len() != n {
                return Err(Error::ShapeMismatch { expected: n, got: b.len() });
            }
            Ok(p.apply_raw(&b.values))
        })
        .collect::<Result<_>>()?;
    let v = CMat::from_fn(n, cols.len(), |i, j| cols[j][i]);
    // orthonormalize through the Gram matrix, dropping dependent directions
    let gram = v.adjoint() * &v;
    let (vals, vecs) = linalg::hermitian_eigen(&gram).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?;
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> =
        (0..vals.len()).filter(|&i| vals[i] > 1e-12 * top.max(f64::MIN_POSITIVE) && vals[i] > 0.0).collect();
    if keep.is_empty() || top <= 0.0 {
        return Err(Error::EmptyBasis);
    }
    let w = CMat::from_fn(n, keep.len(), |i, j| {
        let k = keep[j];
        (0..v.ncols()).map(|c| v[(i, c)] * vecs[(c, k)]).sum::<C64>() / cr(vals[k].sqrt())
    });
    let aw_cols = par::map_range(w.ncols(), |j| a.apply_raw(w.column(j).as_slice()));
    let aw = CMat::from_fn(n, w.ncols(), |i, j| aw_cols[j][i]);
    let h = w.adjoint() * aw;
    let (ritz, y) = linalg::hermitian_eigen(&h).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?;
    let last = ritz.len() - 1;
    let vec_of = |k: usize| -> ComplexField {
        let s = &w * y.column(k);
        let f = template.with_values(s.iter().copied().collect());
        let nrm = f.norm();
        f.scaled(cr(1.0 / nrm))
    };
    Ok(RayleighRitzResult {
        c_minus_rr: ritz[0],
        c_plus_rr: ritz[last],
        s_minus: vec_of(0),
        s_plus: vec_of(last),
        subspace_dim: keep.len(),
    })
}

/// Krylov basis {s, As, …, A^{k−1}s} of a start vector projected onto 𝓔.
pub fn krylov_basis(
    a: &OperatorHandle,
    proj: &ProjectorSpec,
    start: &ComplexField,
    k: usize,
) -> Result<Vec<ComplexField>> {
    let p = proj.operator();
    let mut cur = p.apply(start)?;
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let nrm = cur.norm();
        if nrm == 0.0 {
            break;
        }
        cur = cur.scaled(cr(1.0 / nrm));
        out.push(cur.clone());
        cur = p.apply(&a.apply(&cur)?)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerRefinement {
    pub n: usize,
    pub interval: SpectrumInterval,
    /// Power-refined values before the validity gate.
    pub c_plus_raw: f64,
    pub c_minus_raw: f64,
    /// Validity of each side, judged with the outer bounds (if supplied).
    pub valid_plus: bool,
    pub valid_minus: bool,
    /// No outer bounds were supplied, so validity could not be checked.
    pub provisional: bool,
}

/// ((A − cI)ⁿs, s) for a unit field s.
fn power_moment(a: &OperatorHandle, s: &ComplexField, c: f64, n: usize) -> Result<C64> {
    let mut v = s.clone();
    for _ in 0..n {
        let av = a.apply(&v)?;
        v = av.lin_comb(cr(1.0), &v, cr(-c));
    }
    Ok(v.inner(s))
}

/// Power-method improvement of the Rayleigh–Ritz interval:
/// c⁺ = c⁻_RR + |((A − c⁻_RR)ⁿs⁺, s⁺)|^{1/n} and symmetrically for c⁻.
///
/// The true validity conditions involve the unknown spectrum endpoints; with
/// outer bounds [a⁻, a⁺] they are checked conservatively as
/// c⁺_RR − c⁻_RR > c⁻_RR − a⁻ (upper side) and c⁺_RR − c⁻_RR > a⁺ − c⁺_RR
/// (lower side). A side that fails keeps its Rayleigh–Ritz value.
pub fn power_refine(
    a: &OperatorHandle,
    rr: &RayleighRitzResult,
    n: usize,
    outer: Option<&SpectrumInterval>,
) -> Result<PowerRefinement> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("power refinement needs an even n ≥ 2, got {n}")));
    }
    let nf = n as f64;
    let c_plus_raw = rr.c_minus_rr + power_moment(a, &rr.s_plus, rr.c_minus_rr, n)?.norm().powf(1.0 / nf);
    let c_minus_raw = rr.c_plus_rr - power_moment(a, &rr.s_minus, rr.c_plus_rr, n)?.norm().powf(1.0 / nf);
    let spread = rr.c_plus_rr - rr.c_minus_rr;
    let (valid_plus, valid_minus, provisional) = match outer {
        Some(o) => (spread > rr.c_minus_rr - o.lower, spread > o.upper - rr.c_plus_rr, false),
        None => (true, true, true),
    };
    let upper = if valid_plus { c_plus_raw.max(rr.c_plus_rr) } else { rr.c_plus_rr };
    let lower = if valid_minus { c_minus_raw.min(rr.c_minus_rr) } else { rr.c_minus_rr };
    Ok(PowerRefinement {
        n,
        interval: SpectrumInterval::new(lower, upper, IntervalKind::Inner),
        c_plus_raw,
        c_minus_raw,
        valid_plus,
        valid_minus,
        provisional,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificationLabel {
    /// Checked on every frequency of the grid.
    GridCertified,
    /// Grid check plus a dense set of directions on the unit sphere.
    SphereSampled,
    /// Checked on the materialized Γ₁TΓ₁.
    Materialized,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QStarReport {
    /// Smallest eigenvalue of Herm(Γ₁(k)TΓ₁(k)) on the range of Γ₁(k).
    pub min: f64,
    /// Frequency index attaining the grid minimum.
    pub argmin: Option<usize>,
    pub samples: usize,
    pub sphere_min: Option<f64>,
    pub sphere_samples: usize,
    pub label: CertificationLabel,
}

impl QStarReport {
    pub fn certified(&self) -> bool {
        self.min >= -QSTAR_TOL
    }
}

/// Unit directions: 2 in 1D, equispaced on the circle in 2D, a Fibonacci
/// lattice on the sphere in 3D.
pub fn sphere_directions(dims: usize, count: usize) -> Vec<Vec<f64>> {
    match dims {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * j as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
    }
}

fn restricted_min(block: &CMat, t: &CMat) -> Result<Option<f64>> {
    let q = linalg::projector_range_basis(block).ok_or(Error::EigenFailure { tag: OperatorTag::FourierLocal })?;
    if q.ncols() == 0 {
        return Ok(None);
    }
    let m = q.adjoint() * t * &q;
    linalg::lambda_min(&m).map(Some).ok_or(Error::EigenFailure { tag: OperatorTag::FourierLocal })
}

fn constant_block(t: &LocalOperator) -> Option<&CMat> {
    let first = t.block(0);
    t.blocks().iter().all(|b| b == first).then_some(first)
}

/// Checks Γ₁TΓ₁ ≥ 0. A constant T on a Fourier projector is checked per
/// frequency (frequencies where Γ₁(k) = 0 carry no constraint); otherwise
/// the materialized operator restricted to the range of Γ₁ is used.
/// `sphere` adds that many extra directions for homogeneous families.
pub fn qstar_check(t: &LocalOperator, proj: &ProjectorSpec, sphere: Option<usize>) -> Result<QStarReport> {
    if t.dim() != proj.dim() {
        return Err(Error::ShapeMismatch { expected: proj.dim(), got: t.dim() });
    }
    match (constant_block(t), proj.as_fourier()) {
        (Some(tb), Some(f)) if tb.nrows() == f.components() => {
            let mins = par::map_slice(f.blocks(), |b| restricted_min(b, tb));
            let mut min = f64::INFINITY;
            let mut argmin = None;
            let mut samples = 0;
            for (k, r) in mins.into_iter().enumerate() {
                if let Some(v) = r? {
                    samples += 1;
                    if v < min {
                        min = v;
                        argmin = Some(k);
                    }
                }
            }
            let mut report = QStarReport {
                min,
                argmin,
                samples,
                sphere_min: None,
                sphere_samples: 0,
                label: CertificationLabel::GridCertified,
            };
            if let (Some(count), true) = (sphere, f.is_homogeneous()) {
                let dirs = sphere_directions(f.grid().dims, count);
                let mins = par::map_slice(&dirs, |d| {
                    let block = f.block_at_direction(d).expect("homogeneous family");
                    restricted_min(&block, tb)
                });
                let mut smin = f64::INFINITY;
                for r in mins {
                    if let Some(v) = r? {
                        smin = smin.min(v);
                    }
                }
                report.sphere_min = Some(smin);
                report.sphere_samples = dirs.len();
                report.min = report.min.min(smin);
                report.label = CertificationLabel::SphereSampled;
            }
            Ok(report)
        }
        _ => {
            let q = proj.range_basis()?;
            let m = q.adjoint() * t.materialize() * &q;
            let min = linalg::lambda_min(&m).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?;
            Ok(QStarReport {
                min,
                argmin: None,
                samples: 1,
                sphere_min: None,
                sphere_samples: 0,
                label: CertificationLabel::Materialized,
            })
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoupledData {
    pub ell: usize,
    pub nu: f64,
    /// Stacked V = (v₁; …; v_ℓ).
    pub v: Vec<C64>,
    pub l0: CMat,
    /// min over k of Σᵢ vᵢ·Γ(k)vᵢ.
    pub inverse_nu: f64,
}

/// Outer bounds together with everything needed to re-audit them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranslationCertificate {
    /// Blocks of T for the lower bound (one block when T is constant).
    pub t_minus: Vec<CMat>,
    pub t_plus: Option<Vec<CMat>>,
    pub a_minus: Option<f64>,
    pub a_plus: Option<f64>,
    pub qstar_minus: QStarReport,
    pub qstar_plus: Option<QStarReport>,
    /// min over x of λ_min(Herm(B(x) − T(x)) − a⁻I).
    pub x_sample_min: f64,
    pub coupled: Option<CoupledData>,
}

impl TranslationCertificate {
    pub fn interval(&self) -> Option<SpectrumInterval> {
        Some(SpectrumInterval::new(self.a_minus?, self.a_plus?, IntervalKind::Outer))
    }

    pub fn k_sample_min(&self) -> f64 {
        self.qstar_minus.min
    }
}

fn compact_blocks(t: &LocalOperator) -> Vec<CMat> {
    match constant_block(t) {
        Some(b) => vec![b.clone()],
        None => t.blocks().to_vec(),
    }
}

fn min_over_points(blocks: &[CMat], f: impl Fn(&CMat) -> Option<f64> + Sync + Send) -> Result<f64> {
    par::map_slice(blocks, f)
        .into_iter()
        .map(|v| v.ok_or(Error::EigenFailure { tag: OperatorTag::RealLocal }))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}

/// a⁻ = min_x λ_min(Herm(B(x) − T(x))) and, with a second Q*-convex T',
/// a⁺ = max_x λ_max(Herm(B(x) + T'(x))). Both T must pass the Q*-check.
pub fn translation_bounds(
    b: &LocalOperator,
    t_minus: &LocalOperator,
    t_plus: Option<&LocalOperator>,
    proj: &ProjectorSpec,
) -> Result<TranslationCertificate> {
    let qm = qstar_check(t_minus, proj, None)?;
    if !qm.certified() {
        return Err(Error::UncertifiedT { min: qm.min });
    }
    let diff = b.sub(t_minus)?;
    let a_minus = min_over_points(diff.blocks(), linalg::lambda_min)?;
    let x_sample_min = min_over_points(diff.blocks(), |blk| {
        let m = blk.nrows();
        linalg::lambda_min(&(blk - CMat::identity(m, m) * cr(a_minus)))
    })?;
    let (t_plus_blocks, qp, a_plus) = match t_plus {
        Some(tp) => {
            let q = qstar_check(tp, proj, None)?;
            if !q.certified() {
                return Err(Error::UncertifiedT { min: q.min });
            }
            let sum = b.add(tp)?;
            let hi = -min_over_points(sum.blocks(), |blk| linalg::lambda_max(blk).map(|v| -v))?;
            (Some(compact_blocks(tp)), Some(q), hi)
        }
        None => {
            let hi = -min_over_points(b.blocks(), |blk| linalg::lambda_max(blk).map(|v| -v))?;
            (None, None, hi)
        }
    };
    Ok(TranslationCertificate {
        t_minus: compact_blocks(t_minus),
        t_plus: t_plus_blocks,
        a_minus: Some(a_minus),
        a_plus: Some(a_plus),
        qstar_minus: qm,
        qstar_plus: qp,
        x_sample_min,
        coupled: None,
    })
}

/// Averages two lower-bound certificates for the same B: T = ½(T₁ + T₂),
/// a⁻ = ½(a₁⁻ + a₂⁻). The pointwise inequality is re-checked directly.
pub fn average_certificates(
    b: &LocalOperator,
    c1: &TranslationCertificate,
    c2: &TranslationCertificate,
    proj: &ProjectorSpec,
) -> Result<TranslationCertificate> {
    let expand = |blocks: &[CMat]| -> Result<LocalOperator> {
        if blocks.len() == 1 {
            LocalOperator::constant(b.grid.clone(), b.points(), &blocks[0])
        } else {
            LocalOperator::new(b.grid.clone(), b.components, blocks.to_vec())
        }
    };
    let t = expand(&c1.t_minus)?.add(&expand(&c2.t_minus)?)?.scaled(cr(0.5));
    let a_minus = 0.5 * (c1.a_minus.unwrap_or(f64::NAN) + c2.a_minus.unwrap_or(f64::NAN));
    let qm = qstar_check(&t, proj, None)?;
    let diff = b.sub(&t)?;
    let x_sample_min = min_over_points(diff.blocks(), |blk| {
        let m = blk.nrows();
        linalg::lambda_min(&(blk - CMat::identity(m, m) * cr(a_minus)))
    })?;
    Ok(TranslationCertificate {
        t_minus: compact_blocks(&t),
        t_plus: None,
        a_minus: Some(a_minus),
        a_plus: None,
        qstar_minus: qm,
        qstar_plus: None,
        x_sample_min,
        coupled: None,
    })
}

/// min over frequencies with Γ₁(k) ≠ 0 of Σᵢ vᵢ·Γ(k)vᵢ.
pub fn inverse_nu(proj: &ProjectorSpec, l0: &CMat, vs: &[CVec]) -> Result<f64> {
    let gamma = build_gamma(proj, l0)?;
    let f = proj
        .as_fourier()
        .ok_or_else(|| Error::InvalidArgument("coupled translation needs a Fourier projector".into()))?;
    let blocks = gamma.blocks().expect("Fourier projector gives Γ blocks");
    let vals: Vec<Option<f64>> = par::map_range(blocks.len(), |k| {
        if linalg::max_abs(f.block(k)) == 0.0 {
            return None;
        }
        Some(vs.iter().map(|v| (v.adjoint() * &blocks[k] * v)[(0, 0)].re).sum())
    });
    Ok(vals.into_iter().flatten().fold(f64::INFINITY, f64::min))
}

/// 𝕋 = diag(L₀, …, L₀) − νVV† with 1/ν = min_k Σᵢ vᵢ·Γ(k)vᵢ, checked for
/// Q*-convexity against diag(Γ₁, …, Γ₁), and the block bound
/// a⁻ = min_x λ_min(diag(B(x), …) − 𝕋), which bounds the spectrum of A.
pub fn coupled_translation(
    b: &LocalOperator,
    ell: usize,
    l0: &CMat,
    vs: &[CVec],
    proj: &ProjectorSpec,
) -> Result<TranslationCertificate> {
    let m = proj.components();
    if ell == 0 || vs.len() != ell || vs.iter().any(|v| v.len() != m) {
        return Err(Error::InvalidArgument(format!("need {ell} vectors of length {m}")));
    }
    if vs.iter().all(|v| v.norm() == 0.0) {
        return Err(Error::InvalidArgument("V must be nonzero".into()));
    }
    let inv_nu = inverse_nu(proj, l0, vs)?;
    if !(inv_nu > 1e-14) {
        return Err(Error::NuInfinite { min: inv_nu });
    }
    let nu = 1.0 / inv_nu;
    let stacked = CVec::from_iterator(ell * m, vs.iter().flat_map(|v| v.iter().copied()));
    let tt = linalg::kron(&CMat::identity(ell, ell), l0) - &stacked * stacked.adjoint() * cr(nu);
    let big_proj = proj.replicate(ell)?;
    let t_op = LocalOperator::constant(b.grid.clone(), b.points(), &tt)?;
    let qm = qstar_check(&t_op, &big_proj, None)?;
    if !qm.certified() {
        return Err(Error::UncertifiedT { min: qm.min });
    }
    let id = CMat::identity(ell, ell);
    let diffs: Vec<CMat> = b.blocks().iter().map(|blk| linalg::kron(&id, blk) - &tt).collect();
    let a_minus = min_over_points(&diffs, linalg::lambda_min)?;
    Ok(TranslationCertificate {
        t_minus: vec![tt],
        t_plus: None,
        a_minus: Some(a_minus),
        a_plus: None,
        qstar_minus: qm,
        qstar_plus: None,
        x_sample_min: 0.0,
        coupled: Some(CoupledData {
            ell,
            nu,
            v: stacked.iter().copied().collect(),
            l0: l0.clone(),
            inverse_nu: inv_nu,
        }),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorBound {
    pub theta: f64,
    pub a_minus: f64,
    pub qstar: QStarReport,
}

/// a⁻(θ) = min_x λ_min(Herm(e^{iθ}B(x)) − Herm T(x)), a lower bound for
/// Herm(e^{iθ}A) on the range of Γ₁.
pub fn sector_bound(b: &LocalOperator, t: &LocalOperator, theta: f64, proj: &ProjectorSpec) -> Result<SectorBound> {
    let q = qstar_check(t, proj, None)?;
    if !q.certified() {
        return Err(Error::UncertifiedT { min: q.min });
    }
    let rot = C64::from_polar(1.0, theta);
    let diffs: Vec<CMat> = b
        .blocks()
        .iter()
        .zip(t.blocks())
        .map(|(bb, tb)| linalg::hermitian_part(&(bb * rot)) - linalg::hermitian_part(tb))
        .collect();
    let a_minus = min_over_points(&diffs, linalg::lambda_min)?;
    Ok(SectorBound { theta, a_minus, qstar: q })
}

/// Unit-norm random fields in the layout of a projector.
pub fn random_basis<R: rand::Rng + ?Sized>(rng: &mut R, proj: &ProjectorSpec, k: usize) -> Vec<ComplexField> {
    let m = proj.components();
    (0..k)
        .map(|_| {
            let f = ComplexField::random(rng, proj.dim() / m, m, proj.cell_volume());
            let n = field::norm_raw(&f.values);
            f.scaled(cr(1.0 / n))
        })
        .collect()
}
