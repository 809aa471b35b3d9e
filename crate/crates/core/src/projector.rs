//! Projectors acting locally in Fourier space, their catalog, and the
//! reference-medium operator Γ = Γ₁(Γ₁L₀Γ₁)⁻¹Γ₁.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{FftPlan, PeriodicGrid};
use crate::linalg::{self, cr, CMat, CVec, C64};
use crate::operator::{LinearOperator, OperatorHandle, OperatorTag};
use crate::par;

/// Tolerance for the Hermitian-idempotent check on supplied blocks.
pub const PROJECTOR_LAW_TOL: f64 = 1e-12;
/// Relative singular-value threshold for rank decisions on reference blocks.
pub const RANK_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroModePolicy {
    /// Γ₁(0) = 0: constant fields live outside the range.
    Annihilate,
    /// Γ₁(0) = I.
    Identity,
    /// Γ₁(0) given explicitly.
    Custom(CMat),
}

/// Which catalog entry produced a projector family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectorFamily {
    /// Γ₁(k) = k⊗k/|k|² (curl-free vector fields).
    Conductivity,
    /// Γ₁(k) = I ⊗ k⊗k/|k|² on d×d matrices (gradients of vector fields).
    VectorGradient,
    Identity,
    Custom,
}

/// Pointwise multiplier in Fourier space: one m×m block per frequency.
#[derive(Clone, Debug)]
pub struct FourierMultiplier {
    pub grid: PeriodicGrid,
    pub components: usize,
    blocks: Arc<Vec<CMat>>,
    plan: FftPlan,
    hermitian: bool,
}

impl FourierMultiplier {
    pub fn new(grid: &PeriodicGrid, components: usize, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != grid.points() {
            return Err(Error::ShapeMismatch { expected: grid.points(), got: blocks.len() });
        }
        if let Some(b) = blocks.iter().find(|b| b.nrows() != components || b.ncols() != components) {
            return Err(Error::ShapeMismatch { expected: components, got: b.nrows() });
        }
        let hermitian = blocks.iter().all(|b| linalg::hermiticity_defect(b) == 0.0);
        Ok(Self { grid: grid.clone(), components, blocks: Arc::new(blocks), plan: FftPlan::new(grid), hermitian })
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.grid.points() * self.components
    }

    fn apply_with(&self, x: &[C64], adjoint: bool) -> Vec<C64> {
        let p = self.grid.points();
        let m = self.components;
        // per-component spectra
        let mut spectra: Vec<Vec<C64>> = par::map_range(m, |comp| {
            let mut buf: Vec<C64> = (0..p).map(|i| x[i * m + comp]).collect();
            self.plan.forward(&mut buf);
            buf
        });
        let mixed: Vec<Vec<C64>> = par::map_range(p, |k| {
            let b = &self.blocks[k];
            (0..m)
                .map(|r| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (col, spec) in spectra.iter().enumerate() {
                        let coeff = if adjoint { b[(col, r)].conj() } else { b[(r, col)] };
                        acc += coeff * spec[k];
                    }
                    acc
                })
                .collect()
        });
        for (comp, spec) in spectra.iter_mut().enumerate() {
            for (k, v) in spec.iter_mut().enumerate() {
                *v = mixed[k][comp];
            }
        }
        let comps: Vec<Vec<C64>> = par::map_range(m, |comp| {
            let mut buf = spectra[comp].clone();
            self.plan.inverse(&mut buf);
            buf
        });
        let mut out = vec![C64::new(0.0, 0.0); p * m];
        for (comp, buf) in comps.iter().enumerate() {
            for (i, v) in buf.iter().enumerate() {
                out[i * m + comp] = *v;
            }
        }
        out
    }

    /// Dense matrix assembled from explicit exponential sums, without any
    /// FFT. The operator is block-circulant: the (x, y) block depends on
    /// x − y only.
    pub fn dense_blockwise(&self) -> CMat {
        let g = &self.grid;
        let p = g.points();
        let m = self.components;
        let n = g.n as i64;
        let kernels: Vec<CMat> = par::map_range(p, |r| {
            let rc = g.coords(r);
            let mut acc = CMat::zeros(m, m);
            for (k, b) in self.blocks.iter().enumerate() {
                let kc = g.coords(k);
                let dot: i64 = kc.iter().zip(&rc).map(|(&a, &b)| (a as i64 * b as i64) % n).sum();
                let phase = 2.0 * PI * (dot % n) as f64 / n as f64;
                acc += b * C64::from_polar(1.0, phase);
            }
            acc / cr(p as f64)
        });
        let mut out = CMat::zeros(p * m, p * m);
        for x in 0..p {
            let xc = g.coords(x);
            for y in 0..p {
                let yc = g.coords(y);
                let diff: Vec<usize> = xc.iter().zip(&yc).map(|(&a, &b)| (a + g.n - b) % g.n).collect();
                let r = g.index(&diff);
                out.view_mut((x * m, y * m), (m, m)).copy_from(&kernels[r]);
            }
        }
        out
    }
}

impl LinearOperator for FourierMultiplier {
    fn dim(&self) -> usize {
        FourierMultiplier::dim(self)
    }
    fn tag(&self) -> OperatorTag {
        OperatorTag::FourierLocal
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.apply_with(x, false)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.apply_with(x, !self.hermitian)
    }
}

/// Γ₁ given as a k-indexed family of Hermitian idempotent blocks on a grid.
#[derive(Debug)]
pub struct FourierProjector {
    pub family: ProjectorFamily,
    pub zero_mode: ZeroModePolicy,
    /// True when this is I − Γ₁ of a catalog family.
    pub complemented: bool,
    multiplier: FourierMultiplier,
    basis: OnceLock<CMat>,
}

impl FourierProjector {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.multiplier.grid
    }

    pub fn components(&self) -> usize {
        self.multiplier.components
    }

    pub fn blocks(&self) -> &[CMat] {
        self.multiplier.blocks()
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.multiplier.blocks()[k]
    }

    pub fn multiplier(&self) -> &FourierMultiplier {
        &self.multiplier
    }

    /// Block evaluated at an arbitrary direction (unit wavevector), for the
    /// homogeneous catalog families. `None` for custom families.
    pub fn block_at_direction(&self, khat: &[f64]) -> Option<CMat> {
        let m = self.components();
        let base = match self.family {
            ProjectorFamily::Conductivity => Some(outer_unit(khat)),
            ProjectorFamily::VectorGradient => {
                Some(linalg::kron(&CMat::identity(khat.len(), khat.len()), &outer_unit(khat)))
            }
            ProjectorFamily::Identity => Some(CMat::identity(m, m)),
            ProjectorFamily::Custom => None,
        }?;
        Some(if self.complemented { CMat::identity(m, m) - base } else { base })
    }

    pub fn is_homogeneous(&self) -> bool {
        self.family != ProjectorFamily::Custom
    }
}

#[derive(Debug)]
pub struct DenseProjector {
    pub matrix: CMat,
    /// Components per point, used to expand constant reference blocks.
    pub components: usize,
    basis: OnceLock<CMat>,
}

/// A projector Γ₁: either Fourier-local on a grid or an abstract dense one.
#[derive(Clone, Debug)]
pub enum ProjectorSpec {
    Fourier(Arc<FourierProjector>),
    Dense(Arc<DenseProjector>),
}

impl ProjectorSpec {
    /// Abstract projector from a dense Hermitian idempotent matrix.
    pub fn dense(matrix: CMat) -> Result<Self> {
        Self::dense_with_components(matrix, 1)
    }

    pub fn dense_with_components(matrix: CMat, components: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || components == 0 || !matrix.nrows().is_multiple_of(components) {
            return Err(Error::ShapeMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let defect = projector_defect(&matrix);
        if defect > PROJECTOR_LAW_TOL * 10.0 {
            return Err(Error::InvalidArgument(format!("matrix is not a Hermitian idempotent (defect {defect:.3e})")));
        }
        Ok(ProjectorSpec::Dense(Arc::new(DenseProjector { matrix, components, basis: OnceLock::new() })))
    }

    /// Fourier projector from explicit blocks; the zero-mode block is taken
    /// from `zero_mode`, overriding `blocks[0]`.
    pub fn fourier(
        grid: &PeriodicGrid,
        components: usize,
        mut blocks: Vec<CMat>,
        zero_mode: ZeroModePolicy,
        family: ProjectorFamily,
    ) -> Result<Self> {
        if blocks.len() != grid.points() {
            return Err(Error::ShapeMismatch { expected: grid.points(), got: blocks.len() });
        }
        blocks[0] = match &zero_mode {
            ZeroModePolicy::Annihilate => CMat::zeros(components, components),
            ZeroModePolicy::Identity => CMat::identity(components, components),
            ZeroModePolicy::Custom(b) => b.clone(),
        };
        for (k, b) in blocks.iter().enumerate() {
            if b.nrows() != components || b.ncols() != components {
                return Err(Error::ShapeMismatch { expected: components, got: b.nrows() });
            }
            let defect = projector_defect(b);
            if defect > PROJECTOR_LAW_TOL {
                return Err(Error::InvalidArgument(format!(
                    "block at frequency index {k} is not a Hermitian idempotent (defect {defect:.3e})"
                )));
            }
        }
        let multiplier = FourierMultiplier::new(grid, components, blocks)?;
        Ok(ProjectorSpec::Fourier(Arc::new(FourierProjector {
            family,
            zero_mode,
            complemented: false,
            multiplier,
            basis: OnceLock::new(),
        })))
    }

    pub fn dim(&self) -> usize {
        match self {
            ProjectorSpec::Fourier(f) => f.multiplier.dim(),
            ProjectorSpec::Dense(d) => d.matrix.nrows(),
        }
    }

    pub fn components(&self) -> usize {
        match self {
            ProjectorSpec::Fourier(f) => f.components(),
            ProjectorSpec::Dense(d) => d.components,
        }
    }

    pub fn grid(&self) -> Option<&PeriodicGrid> {
        match self {
            ProjectorSpec::Fourier(f) => Some(f.grid()),
            ProjectorSpec::Dense(_) => None,
        }
    }

    pub fn as_fourier(&self) -> Option<&FourierProjector> {
        match self {
            ProjectorSpec::Fourier(f) => Some(f),
            ProjectorSpec::Dense(_) => None,
        }
    }

    /// Cell volume used for fields living on this projector's space.
    pub fn cell_volume(&self) -> f64 {
        self.grid().map_or(1.0, PeriodicGrid::cell_volume)
    }

    pub fn operator(&self) -> OperatorHandle {
        match self {
            ProjectorSpec::Fourier(f) => OperatorHandle::new(f.multiplier.clone()),
            ProjectorSpec::Dense(d) => OperatorHandle::dense(d.matrix.clone()),
        }
    }

    /// Dense matrix of the projector. Fourier projectors use the FFT path.
    pub fn materialize(&self) -> Result<CMat> {
        match self {
            ProjectorSpec::Fourier(_) => crate::operator::materialize(&self.operator()),
            ProjectorSpec::Dense(d) => Ok(d.matrix.clone()),
        }
    }

    /// Orthonormal basis of the range, cached after the first call.
    pub fn range_basis(&self) -> Result<CMat> {
        let cell = match self {
            ProjectorSpec::Fourier(f) => &f.basis,
            ProjectorSpec::Dense(d) => &d.basis,
        };
        if let Some(b) = cell.get() {
            return Ok(b.clone());
        }
        let q = match self {
            ProjectorSpec::Fourier(f) => fourier_range_basis(f),
            ProjectorSpec::Dense(d) => {
                linalg::projector_range_basis(&d.matrix).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?
            }
        };
        Ok(cell.get_or_init(|| q).clone())
    }

    pub fn rank(&self) -> Result<usize> {
        Ok(self.range_basis()?.ncols())
    }

    /// Γ₂ = I − Γ₁.
    pub fn complement(&self) -> ProjectorSpec {
        match self {
            ProjectorSpec::Fourier(f) => {
                let m = f.components();
                let blocks: Vec<CMat> = f.blocks().iter().map(|b| CMat::identity(m, m) - b).collect();
                let multiplier = FourierMultiplier::new(f.grid(), m, blocks).expect("shape preserved");
                let zero_mode = ZeroModePolicy::Custom(multiplier.blocks()[0].clone());
                ProjectorSpec::Fourier(Arc::new(FourierProjector {
                    family: f.family,
                    zero_mode,
                    complemented: !f.complemented,
                    multiplier,
                    basis: OnceLock::new(),
                }))
            }
            ProjectorSpec::Dense(d) => {
                let n = d.matrix.nrows();
                ProjectorSpec::Dense(Arc::new(DenseProjector {
                    matrix: CMat::identity(n, n) - &d.matrix,
                    components: d.components,
                    basis: OnceLock::new(),
                }))
            }
        }
    }

    /// Block-diagonal replication diag(Γ₁, …, Γ₁) acting on ℓ·m components
    /// per point (ℓ copies of each field interleaved pointwise).
    pub fn replicate(&self, copies: usize) -> Result<ProjectorSpec> {
        if copies == 0 {
            return Err(Error::InvalidArgument("need at least one copy".into()));
        }
        match self {
            ProjectorSpec::Fourier(f) => {
                let id = CMat::identity(copies, copies);
                let blocks: Vec<CMat> = f.blocks().iter().map(|b| linalg::kron(&id, b)).collect();
                let zero = blocks[0].clone();
                let multiplier = FourierMultiplier::new(f.grid(), copies * f.components(), blocks)?;
                Ok(ProjectorSpec::Fourier(Arc::new(FourierProjector {
                    family: ProjectorFamily::Custom,
                    zero_mode: ZeroModePolicy::Custom(zero),
                    complemented: false,
                    multiplier,
                    basis: OnceLock::new(),
                })))
            }
            ProjectorSpec::Dense(d) => {
                let m = d.components;
                let p = d.matrix.nrows() / m;
                // reorder to point-major layout with ℓ·m components per point
                let n = d.matrix.nrows() * copies;
                let idx = |copy: usize, flat: usize| (flat / m) * (copies * m) + copy * m + flat % m;
                let mut out = CMat::zeros(n, n);
                for copy in 0..copies {
                    for r in 0..p * m {
                        for col in 0..p * m {
                            out[(idx(copy, r), idx(copy, col))] = d.matrix[(r, col)];
                        }
                    }
                }
                ProjectorSpec::dense_with_components(out, copies * m)
            }
        }
    }

    /// Max-abs defects of Γ² = Γ and Γ = Γ† on the materialized matrix.
    pub fn law_defects(&self) -> Result<(f64, f64)> {
        let p = self.materialize()?;
        Ok((linalg::max_abs_diff(&(&p * &p), &p), linalg::hermiticity_defect(&p)))
    }
}

fn projector_defect(b: &CMat) -> f64 {
    linalg::max_abs_diff(&(b * b), b).max(linalg::hermiticity_defect(b))
}

fn outer_unit(k: &[f64]) -> CMat {
    let n2: f64 = k.iter().map(|v| v * v).sum();
    let d = k.len();
    CMat::from_fn(d, d, |i, j| cr(k[i] * k[j] / n2))
}

/// Range basis assembled analytically: each frequency contributes the
/// Fourier mode times an orthonormal basis of its block's range.
fn fourier_range_basis(f: &FourierProjector) -> CMat {
    let g = f.grid();
    let p = g.points();
    let m = f.components();
    let n = g.n as i64;
    let per_k: Vec<CMat> =
        par::map_range(p, |k| linalg::projector_range_basis(f.block(k)).expect("small Hermitian eigenproblem"));
    let rank: usize = per_k.iter().map(CMat::ncols).sum();
    let mut q = CMat::zeros(p * m, rank);
    let norm = 1.0 / (p as f64).sqrt();
    let mut col = 0;
    for (k, bk) in per_k.iter().enumerate() {
        let kc = g.coords(k);
        for j in 0..bk.ncols() {
            for x in 0..p {
                let xc = g.coords(x);
                let dot: i64 = kc.iter().zip(&xc).map(|(&a, &b)| (a as i64 * b as i64) % n).sum();
                let ph = C64::from_polar(norm, 2.0 * PI * (dot % n) as f64 / n as f64);
                for comp in 0..m {
                    q[(x * m + comp, col)] = ph * bk[(comp, j)];
                }
            }
            col += 1;
        }
    }
    q
}

/// Γ₁(k) = k⊗k/|k|² with the zero mode annihilated.
pub fn conductivity_projector(grid: &PeriodicGrid) -> Result<ProjectorSpec> {
    conductivity_projector_with(grid, ZeroModePolicy::Annihilate)
}

pub fn conductivity_projector_with(grid: &PeriodicGrid, zero_mode: ZeroModePolicy) -> Result<ProjectorSpec> {
    let d = grid.dims;
    let blocks =
        (0..grid.points()).map(|k| if k == 0 { CMat::zeros(d, d) } else { outer_unit(&grid.wavevector(k)) }).collect();
    ProjectorSpec::fourier(grid, d, blocks, zero_mode, ProjectorFamily::Conductivity)
}

/// Γ₁(k) = I ⊗ k⊗k/|k|² on d×d matrix fields (row-major): the range is the
/// set of gradients ∇u of periodic vector fields.
pub fn vector_gradient_projector(grid: &PeriodicGrid) -> Result<ProjectorSpec> {
    let d = grid.dims;
    let id = CMat::identity(d, d);
    let blocks = (0..grid.points())
        .map(|k| if k == 0 { CMat::zeros(d * d, d * d) } else { linalg::kron(&id, &outer_unit(&grid.wavevector(k))) })
        .collect();
    ProjectorSpec::fourier(grid, d * d, blocks, ZeroModePolicy::Annihilate, ProjectorFamily::VectorGradient)
}

pub fn identity_projector(grid: &PeriodicGrid, components: usize) -> Result<ProjectorSpec> {
    let blocks = vec![CMat::identity(components, components); grid.points()];
    ProjectorSpec::fourier(grid, components, blocks, ZeroModePolicy::Identity, ProjectorFamily::Identity)
}

/// Applies a Fourier-local projector through the FFT.
pub fn apply_fourier_local(proj: &ProjectorSpec, field: &ComplexField) -> Result<ComplexField> {
    let f = proj.as_fourier().ok_or_else(|| Error::InvalidArgument("projector is not Fourier-local".into()))?;
    if field.components != f.components() || field.len() != f.multiplier.dim() {
        return Err(Error::ShapeMismatch { expected: f.multiplier.dim(), got: field.len() });
    }
    Ok(field.with_values(f.multiplier.apply(&field.values)))
}

/// Γ = Γ₁(Γ₁L₀Γ₁)⁻¹Γ₁ for a constant Hermitian reference L₀.
#[derive(Clone, Debug)]
pub struct GammaOperator {
    pub proj: ProjectorSpec,
    pub reference: CMat,
    op: OperatorHandle,
    /// Per-frequency blocks when the projector is Fourier-local.
    blocks: Option<Vec<CMat>>,
}

impl GammaOperator {
    pub fn operator(&self) -> OperatorHandle {
        self.op.clone()
    }

    pub fn blocks(&self) -> Option<&[CMat]> {
        self.blocks.as_deref()
    }

    pub fn materialize(&self) -> Result<CMat> {
        crate::operator::materialize(&self.op)
    }
}

/// Expands a constant m×m reference into the full operator matrix for a
/// dense projector (identity across points), or accepts a full matrix.
pub fn expand_constant(proj: &ProjectorSpec, l0: &CMat) -> Result<CMat> {
    let n = proj.dim();
    let m = proj.components();
    if l0.nrows() == n && l0.ncols() == n {
        Ok(l0.clone())
    } else if l0.nrows() == m && l0.ncols() == m {
        Ok(linalg::kron(&CMat::identity(n / m, n / m), l0))
    } else {
        Err(Error::ShapeMismatch { expected: m, got: l0.nrows() })
    }
}

/// Γ(k) for one projector block: Q (Q†L₀Q)⁺ Q† with Q a basis of the block
/// range; returns the block and the rank of Γ₁(k)L₀Γ₁(k).
fn gamma_block(block: &CMat, l0: &CMat) -> Result<(CMat, usize)> {
    let q = linalg::projector_range_basis(block).ok_or(Error::EigenFailure { tag: OperatorTag::FourierLocal })?;
    if q.ncols() == 0 {
        return Ok((CMat::zeros(block.nrows(), block.ncols()), 0));
    }
    let k = linalg::hermitian_part(&(q.adjoint() * l0 * &q));
    let (vals, vecs) = linalg::hermitian_eigen(&k).ok_or(Error::EigenFailure { tag: OperatorTag::FourierLocal })?;
    let smax = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rank = vals.iter().filter(|v| v.abs() > RANK_REL_TOL * smax).count();
    let inv_diag = CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&v| if v.abs() > RANK_REL_TOL * smax { cr(1.0 / v) } else { cr(0.0) }),
    );
    let kinv = &vecs * CMat::from_diagonal(&inv_diag) * vecs.adjoint();
    Ok((&q * kinv * q.adjoint(), rank))
}

pub fn build_gamma(proj: &ProjectorSpec, l0: &CMat) -> Result<GammaOperator> {
    if linalg::hermiticity_defect(l0) > 1e-12 * linalg::max_abs(l0).max(1.0) {
        return Err(Error::InvalidArgument("reference medium L0 must be Hermitian".into()));
    }
    match proj {
        ProjectorSpec::Fourier(f) => {
            let m = f.components();
            if l0.nrows() != m || l0.ncols() != m {
                return Err(Error::ShapeMismatch { expected: m, got: l0.nrows() });
            }
            let results: Vec<Result<(CMat, usize)>> = par::map_slice(f.blocks(), |b| gamma_block(b, l0));
            let mut blocks = Vec::with_capacity(results.len());
            let mut ranks = Vec::with_capacity(results.len());
            for (k, r) in results.into_iter().enumerate() {
                let (b, rank) = r?;
                blocks.push(b);
                // only nonzero frequencies (and a retained zero mode) enter the check
                if (k != 0 || f.zero_mode != ZeroModePolicy::Annihilate) && k != 0 {
                    ranks.push(rank);
                }
            }
            if let (Some(&min), Some(&max)) = (ranks.iter().min(), ranks.iter().max()) {
                if min != max {
                    return Err(Error::RankDrop { min, max });
                }
            }
            let multiplier = FourierMultiplier::new(f.grid(), m, blocks.clone())?;
            Ok(GammaOperator {
                proj: proj.clone(),
                reference: l0.clone(),
                op: OperatorHandle::new(multiplier),
                blocks: Some(blocks),
            })
        }
        ProjectorSpec::Dense(_) => {
            let full = expand_constant(proj, l0)?;
            let q = proj.range_basis()?;
            let k = q.adjoint() * &full * &q;
            let rank = linalg::numerical_rank(&k, RANK_REL_TOL);
            if rank < q.ncols() {
                return Err(Error::RankDrop { min: rank, max: q.ncols() });
            }
            let kinv = linalg::inverse(&k).ok_or(Error::RankDrop { min: rank, max: q.ncols() })?;
            Ok(GammaOperator {
                proj: proj.clone(),
                reference: l0.clone(),
                op: OperatorHandle::dense(&q * kinv * q.adjoint()),
                blocks: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use crate::operator::materialize;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid2(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(2, n).unwrap()
    }

    #[test]
    fn conductivity_blocks() {
        let g1 = PeriodicGrid::new(1, 8).unwrap();
        let p1 = conductivity_projector(&g1).unwrap();
        let f1 = p1.as_fourier().unwrap();
        for k in 1..8 {
            assert!(linalg::max_abs_diff(f1.block(k), &CMat::identity(1, 1)) < 1e-15);
        }
        let g = grid2(8);
        let p = conductivity_projector(&g).unwrap();
        let f = p.as_fourier().unwrap();
        let b10 = f.block(g.index(&[1, 0]));
        assert!(linalg::max_abs_diff(b10, &from_real(2, 2, &[1., 0., 0., 0.])) < 1e-15);
        let b11 = f.block(g.index(&[1, 1]));
        assert!(linalg::max_abs_diff(b11, &from_real(2, 2, &[0.5, 0.5, 0.5, 0.5])) < 1e-15);
        assert!(linalg::max_abs_diff(&(b11 * b11), b11) < 1e-15);
        assert_eq!(linalg::max_abs(f.block(0)), 0.0);
    }

    #[test]
    fn projector_laws_hold_for_catalog_and_complement() {
        let g = grid2(8);
        for p in [conductivity_projector(&g).unwrap(), vector_gradient_projector(&g).unwrap()] {
            let (idem, herm) = p.law_defects().unwrap();
            assert!(idem < 1e-12 && herm < 1e-12, "{idem} {herm}");
            let (idem, herm) = p.complement().law_defects().unwrap();
            assert!(idem < 1e-12 && herm < 1e-12);
        }
    }

    #[test]
    fn gradient_passes_and_rotated_gradient_vanishes() {
        let g = grid2(16);
        let p = conductivity_projector(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // random potential φ, gradient computed spectrally
        let mut phi = random::complex_vector(&mut rng, g.points());
        let plan = FftPlan::new(&g);
        plan.forward(&mut phi);
        let mut grad = vec![C64::new(0.0, 0.0); g.points() * 2];
        for a in 0..2 {
            let mut comp: Vec<C64> = (0..g.points()).map(|k| phi[k] * c(0.0, g.wavevector(k)[a])).collect();
            plan.inverse(&mut comp);
            for (i, v) in comp.iter().enumerate() {
                grad[i * 2 + a] = *v;
            }
        }
        let e = ComplexField::new(grad, 2, g.cell_volume()).unwrap();
        let pe = apply_fourier_local(&p, &e).unwrap();
        assert!(pe.max_abs_diff(&e) < 1e-10);
        // j = R⊥ ∇φ is divergence free
        let j = e.with_values((0..g.points()).flat_map(|i| [e.values[2 * i + 1], -e.values[2 * i]]).collect());
        assert!(apply_fourier_local(&p, &j).unwrap().max_abs() < 1e-10);
        // constant field is annihilated
        let cst = ComplexField::new(vec![c(1.0, 2.0); g.points() * 2], 2, g.cell_volume()).unwrap();
        assert!(apply_fourier_local(&p, &cst).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = grid2(4);
        let p = conductivity_projector(&g).unwrap();
        let f = ComplexField::zeros(16, 3, 1.0);
        assert!(matches!(apply_fourier_local(&p, &f), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn fft_backend_matches_dense_blockwise() {
        let g = grid2(8);
        let p = conductivity_projector(&g).unwrap();
        let fft = materialize(&p.operator()).unwrap();
        let dense = p.as_fourier().unwrap().multiplier().dense_blockwise();
        assert!(linalg::max_abs_diff(&fft, &dense) < 1e-10);
        let g3 = PeriodicGrid::new(3, 4).unwrap();
        let p3 = conductivity_projector(&g3).unwrap();
        let fft = materialize(&p3.operator()).unwrap();
        let dense = p3.as_fourier().unwrap().multiplier().dense_blockwise();
        assert!(linalg::max_abs_diff(&fft, &dense) < 1e-10);
    }

    #[test]
    fn analytic_range_basis_spans_projector() {
        let g = grid2(4);
        let p = conductivity_projector(&g).unwrap();
        let q = p.range_basis().unwrap();
        assert_eq!(q.ncols(), 15);
        let pm = p.materialize().unwrap();
        assert!(linalg::max_abs_diff(&(&q * q.adjoint()), &pm) < 1e-12);
        assert!(linalg::max_abs_diff(&(q.adjoint() * &q), &CMat::identity(15, 15)) < 1e-12);
    }

    #[test]
    fn gamma_examples() {
        let g = grid2(8);
        let p = conductivity_projector(&g).unwrap();
        let pm = p.materialize().unwrap();
        // L0 = z0 I → Γ = Γ₁/z0
        let z0 = 2.5;
        let gam = build_gamma(&p, &(CMat::identity(2, 2) * cr(z0))).unwrap();
        assert!(linalg::max_abs_diff(&gam.materialize().unwrap(), &(&pm / cr(z0))) < 1e-12);
        // L0 = I → Γ = Γ₁
        let gam = build_gamma(&p, &CMat::identity(2, 2)).unwrap();
        assert!(linalg::max_abs_diff(&gam.materialize().unwrap(), &pm) < 1e-12);
        // L0 = diag(2,1), k = (1,1): Γ(k) = k̂⊗k̂/(k̂·L0k̂) = ⅓[[1,1],[1,1]]
        let l0 = from_real(2, 2, &[2., 0., 0., 1.]);
        let gam = build_gamma(&p, &l0).unwrap();
        let k = g.index(&[1, 1]);
        let expect = from_real(2, 2, &[1., 1., 1., 1.]) / cr(3.0);
        assert!(linalg::max_abs_diff(&gam.blocks().unwrap()[k], &expect) < 1e-14);
        // ΓL0Γ = Γ and L0^{1/2}ΓL0^{1/2} a projector
        let gm = gam.materialize().unwrap();
        let l0full = linalg::kron(&CMat::identity(64, 64), &l0);
        assert!(linalg::max_abs_diff(&(&gm * &l0full * &gm), &gm) < 1e-10);
        let s = linalg::psd_sqrt(&l0full).unwrap();
        let pr = &s * &gm * &s;
        assert!(linalg::max_abs_diff(&(&pr * &pr), &pr) < 1e-10);
        assert!(linalg::hermiticity_defect(&pr) < 1e-10);
    }

    #[test]
    fn gamma_rank_drop_detected() {
        // L0 = diag(1, 0): k̂·L0k̂ vanishes for k = (0, n), rank drops there.
        let g = grid2(4);
        let p = conductivity_projector(&g).unwrap();
        let l0 = from_real(2, 2, &[1., 0., 0., 0.]);
        assert!(matches!(build_gamma(&p, &l0), Err(Error::RankDrop { .. })));
    }

    #[test]
    fn orthogonality_and_contraction() {
        let g = grid2(8);
        let p = conductivity_projector(&g).unwrap();
        let q = p.complement();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = ComplexField::random(&mut rng, g.points(), 2, g.cell_volume());
            let b = ComplexField::random(&mut rng, g.points(), 2, g.cell_volume());
            let pa = p.operator().apply(&a).unwrap();
            let qb = q.operator().apply(&b).unwrap();
            assert!(pa.inner(&qb).norm() < 1e-12);
            assert!(pa.norm() <= a.norm() + 1e-12);
        }
    }

    #[test]
    fn dense_replicate_matches_block_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pm = random::projector(&mut rng, 4, 2);
        let p = ProjectorSpec::dense(pm).unwrap();
        let r = p.replicate(2).unwrap();
        let (idem, herm) = r.law_defects().unwrap();
        assert!(idem < 1e-12 && herm < 1e-12);
        assert_eq!(r.rank().unwrap(), 4);
    }
}
