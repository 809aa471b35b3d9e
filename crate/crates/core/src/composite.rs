//! Real-space local operators, two-phase media and null-T operators.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{FftPlan, PeriodicGrid};
use crate::linalg::{self, c, cr, CMat, C64};
use crate::operator::{self, LinearOperator, OperatorHandle, OperatorTag};
use crate::par;
use crate::projector::ProjectorSpec;

/// Pointwise operator (B·F)(x) = B(x)F(x) with one m×m block per point.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    pub components: usize,
    blocks: Arc<Vec<CMat>>,
    pub grid: Option<PeriodicGrid>,
}

impl LocalOperator {
    pub fn new(grid: Option<PeriodicGrid>, components: usize, blocks: Vec<CMat>) -> Result<Self> {
        if let Some(g) = &grid {
            if g.points() != blocks.len() {
                return Err(Error::ShapeMismatch { expected: g.points(), got: blocks.len() });
            }
        }
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("local operator needs at least one point".into()));
        }
        if let Some(b) = blocks.iter().find(|b| b.nrows() != components || b.ncols() != components) {
            return Err(Error::ShapeMismatch { expected: components, got: b.nrows() });
        }
        Ok(Self { components, blocks: Arc::new(blocks), grid })
    }

    pub fn on_grid(grid: &PeriodicGrid, components: usize, blocks: Vec<CMat>) -> Result<Self> {
        Self::new(Some(grid.clone()), components, blocks)
    }

    /// Same block at every point.
    pub fn constant(grid: Option<PeriodicGrid>, points: usize, block: &CMat) -> Result<Self> {
        Self::new(grid, block.nrows(), vec![block.clone(); points])
    }

    /// Blocks laid out to match a projector (its grid, or plain points).
    pub fn for_projector(proj: &ProjectorSpec, blocks: Vec<CMat>) -> Result<Self> {
        let m = proj.components();
        let points = proj.dim() / m;
        if blocks.len() != points {
            return Err(Error::ShapeMismatch { expected: points, got: blocks.len() });
        }
        Self::new(proj.grid().cloned(), m, blocks)
    }

    pub fn from_fn(grid: &PeriodicGrid, components: usize, f: impl Fn(usize) -> CMat + Sync + Send) -> Result<Self> {
        Self::on_grid(grid, components, par::map_range(grid.points(), f))
    }

    pub fn points(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.points() * self.components
    }

    pub fn block(&self, x: usize) -> &CMat {
        &self.blocks[x]
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.as_ref().map_or(1.0, PeriodicGrid::cell_volume)
    }

    pub fn operator(&self) -> OperatorHandle {
        OperatorHandle::new(self.clone())
    }

    /// Block-diagonal dense matrix.
    pub fn materialize(&self) -> CMat {
        let refs: Vec<&CMat> = self.blocks.iter().collect();
        linalg::block_diag(&refs)
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat + Sync + Send) -> Self {
        let blocks = par::map_slice(&self.blocks, f);
        Self { components: self.components, blocks: Arc::new(blocks), grid: self.grid.clone() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat + Sync + Send) -> Result<Self> {
        if self.points() != other.points() || self.components != other.components {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: other.dim() });
        }
        let blocks = par::map_range(self.points(), |x| f(&self.blocks[x], &other.blocks[x]));
        Ok(Self { components: self.components, blocks: Arc::new(blocks), grid: self.grid.clone() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, a: C64) -> Self {
        self.map(|b| b * a)
    }

    /// zI − self.
    pub fn shifted(&self, z: C64) -> Self {
        let m = self.components;
        self.map(|b| CMat::identity(m, m) * z - b)
    }

    pub fn adjoint(&self) -> Self {
        self.map(|b| b.adjoint())
    }

    pub fn hermitian_part(&self) -> Self {
        self.map(linalg::hermitian_part)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| linalg::hermiticity_defect(b) <= tol)
    }

    /// Pointwise inverse; fails at the first point whose block is singular.
    pub fn inverse(&self) -> Result<Self> {
        let inv = par::map_range(self.points(), |x| {
            let b = &self.blocks[x];
            if linalg::condition_number(b) > operator::DEFAULT_COND_CAP {
                None
            } else {
                linalg::inverse(b)
            }
        });
        let mut blocks = Vec::with_capacity(inv.len());
        for (point, b) in inv.into_iter().enumerate() {
            blocks.push(b.ok_or(Error::PointwiseSingular { point })?);
        }
        Ok(Self { components: self.components, blocks: Arc::new(blocks), grid: self.grid.clone() })
    }

    pub fn apply_field(&self, f: &ComplexField) -> Result<ComplexField> {
        if f.len() != self.dim() || f.components != self.components {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: f.len() });
        }
        Ok(f.with_values(LinearOperator::apply(self, &f.values)))
    }

    /// (min, max) over points of the Hermitian-part eigenvalues.
    pub fn hermitian_eigen_range(&self) -> Result<(f64, f64)> {
        let ranges = par::map_slice(&self.blocks, |b| linalg::hermitian_eigenvalues(b).map(|v| (v[0], v[v.len() - 1])));
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in ranges {
            let (a, b) = r.ok_or(Error::EigenFailure { tag: OperatorTag::RealLocal })?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((lo, hi))
    }

    fn apply_with(&self, x: &[C64], adjoint: bool) -> Vec<C64> {
        let m = self.components;
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (p, (b, chunk)) in self.blocks.iter().zip(out.chunks_mut(m)).enumerate() {
            let xin = &x[p * m..(p + 1) * m];
            for (r, o) in chunk.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (col, v) in xin.iter().enumerate() {
                    let coeff = if adjoint { b[(col, r)].conj() } else { b[(r, col)] };
                    acc += coeff * v;
                }
                *o = acc;
            }
        }
        out
    }
}

impl LinearOperator for LocalOperator {
    fn dim(&self) -> usize {
        LocalOperator::dim(self)
    }
    fn tag(&self) -> OperatorTag {
        OperatorTag::RealLocal
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.apply_with(x, false)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.apply_with(x, true)
    }
}

/// Scalar multiple of the identity at each point: B(x) = f(x) I_m.
pub fn scalar_local(grid: Option<PeriodicGrid>, components: usize, values: &[C64]) -> Result<LocalOperator> {
    let id = CMat::identity(components, components);
    LocalOperator::new(grid, components, values.iter().map(|v| &id * *v).collect())
}

/// Two-phase medium: χ₁ is the phase-1 indicator, χ₂ = 1 − χ₁.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoPhaseMedium {
    pub chi: Vec<u8>,
    pub l1: CMat,
    pub l2: CMat,
    pub z0: C64,
    #[serde(skip)]
    pub grid: Option<PeriodicGrid>,
}

impl TwoPhaseMedium {
    pub fn new(grid: Option<PeriodicGrid>, chi: Vec<u8>, l1: CMat, l2: CMat, z0: C64) -> Result<Self> {
        if let Some(g) = &grid {
            if g.points() != chi.len() {
                return Err(Error::ShapeMismatch { expected: g.points(), got: chi.len() });
            }
        }
        if chi.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("phase indicator must take values 0 or 1".into()));
        }
        if l1.shape() != l2.shape() || l1.nrows() != l1.ncols() {
            return Err(Error::ShapeMismatch { expected: l1.nrows(), got: l2.nrows() });
        }
        Ok(Self { chi, l1, l2, z0, grid })
    }

    /// Isotropic phases L₁ = z₁I, L₂ = z₂I.
    pub fn scalar(grid: Option<PeriodicGrid>, chi: Vec<u8>, m: usize, z1: C64, z2: C64, z0: C64) -> Result<Self> {
        let id = CMat::identity(m, m);
        Self::new(grid, chi, &id * z1, &id * z2, z0)
    }

    pub fn components(&self) -> usize {
        self.l1.nrows()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.chi.iter().map(|&v| v as f64).sum::<f64>() / self.chi.len() as f64
    }

    /// L(x) = L₁χ₁(x) + L₂χ₂(x).
    pub fn l_field(&self) -> LocalOperator {
        let blocks = self.chi.iter().map(|&v| if v == 1 { self.l1.clone() } else { self.l2.clone() }).collect();
        LocalOperator::new(self.grid.clone(), self.components(), blocks).expect("validated shapes")
    }

    /// Scalar phases only: the reduced problem B' = χ₁I with its reference
    /// parameter z₂/(z₂ − z₁). Returns `None` for tensorial phases.
    pub fn scalar_reduction(&self) -> Option<(LocalOperator, C64)> {
        let m = self.components();
        let z1 = self.l1[(0, 0)];
        let z2 = self.l2[(0, 0)];
        let id = CMat::identity(m, m);
        if linalg::max_abs_diff(&self.l1, &(&id * z1)) > 0.0 || linalg::max_abs_diff(&self.l2, &(&id * z2)) > 0.0 {
            return None;
        }
        if z2 == z1 {
            return None;
        }
        let values: Vec<C64> = self.chi.iter().map(|&v| cr(v as f64)).collect();
        let b = scalar_local(self.grid.clone(), m, &values).ok()?;
        Some((b, z2 / (z2 - z1)))
    }
}

/// B(x) = z₀I − L₁χ₁(x) − L₂χ₂(x).
pub fn two_phase_b(medium: &TwoPhaseMedium) -> LocalOperator {
    medium.l_field().shifted(medium.z0)
}

/// Checkerboard indicator with square cells of `cell` grid points per side.
pub fn checkerboard(grid: &PeriodicGrid, cell: usize) -> Vec<u8> {
    (0..grid.points()).map(|i| (grid.coords(i).iter().map(|&c| c / cell.max(1)).sum::<usize>() % 2) as u8).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullTKind {
    AntisymmetricDivfree3d,
    Rperp2d,
    ElasticityTrace,
    Custom,
}

/// A local operator T with Γ₁TΓ₁ = 0 for its paired projector family.
#[derive(Clone, Debug)]
pub struct NullTOperator {
    pub kind: NullTKind,
    pub op: LocalOperator,
    pub hermitian: bool,
}

/// 90° rotation [[0, 1], [−1, 0]].
pub fn rperp() -> CMat {
    linalg::from_real(2, 2, &[0., 1., -1., 0.])
}

/// η(u)ᵢⱼ = Σₖ εᵢⱼₖ uₖ, so that η(u)e = e × u.
pub fn eta(u: &[C64]) -> CMat {
    let z = cr(0.0);
    CMat::from_row_slice(3, 3, &[z, u[2], -u[1], -u[2], z, u[0], u[1], -u[0], z])
}

/// 𝒯P = I·Tr(P) − Pᵀ on d×d matrices stored row-major.
pub fn elasticity_t_block(d: usize) -> CMat {
    let mut t = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut v = 0.0;
                    if i == j && k == l {
                        v += 1.0;
                    }
                    if i == l && j == k {
                        v -= 1.0;
                    }
                    t[(i * d + j, k * d + l)] = cr(v);
                }
            }
        }
    }
    t
}

impl NullTOperator {
    /// Constant multiplier·R⊥ on a 2D grid. Hermitian exactly when the
    /// multiplier is purely imaginary.
    pub fn rperp_2d(grid: &PeriodicGrid, multiplier: C64) -> Result<Self> {
        if grid.dims != 2 {
            return Err(Error::InvalidArgument("rperp-2d needs a 2D grid".into()));
        }
        let op = LocalOperator::constant(Some(grid.clone()), grid.points(), &(rperp() * multiplier))?;
        Ok(Self { kind: NullTKind::Rperp2d, op, hermitian: multiplier.re == 0.0 })
    }

    pub fn elasticity_trace(grid: &PeriodicGrid) -> Result<Self> {
        let op = LocalOperator::constant(Some(grid.clone()), grid.points(), &elasticity_t_block(grid.dims))?;
        Ok(Self { kind: NullTKind::ElasticityTrace, op, hermitian: true })
    }

    /// U(x) = η(u(x)) for a curl-free u on a 3D grid.
    pub fn antisymmetric_divfree_3d(grid: &PeriodicGrid, u: &ComplexField) -> Result<Self> {
        if grid.dims != 3 || u.components != 3 || u.points() != grid.points() {
            return Err(Error::ShapeMismatch { expected: grid.points() * 3, got: u.len() });
        }
        let residual = spectral_curl_residual(grid, u);
        if residual > 1e-10 {
            return Err(Error::CurlCheck { residual });
        }
        let op = LocalOperator::from_fn(grid, 3, |x| eta(u.at(x)))?;
        let hermitian = op.is_hermitian(0.0);
        Ok(Self { kind: NullTKind::AntisymmetricDivfree3d, op, hermitian })
    }

    /// Builds u = ∇ψ spectrally and then U = η(u).
    pub fn from_potential_3d(grid: &PeriodicGrid, psi: &[C64]) -> Result<Self> {
        let u = spectral_gradient(grid, psi)?;
        Self::antisymmetric_divfree_3d(grid, &u)
    }

    pub fn custom(op: LocalOperator) -> Self {
        let hermitian = op.is_hermitian(1e-14);
        Self { kind: NullTKind::Custom, op, hermitian }
    }

    /// Max-abs entry of the materialized Γ₁TΓ₁.
    pub fn null_defect(&self, proj: &ProjectorSpec) -> Result<f64> {
        let p = proj.materialize()?;
        if p.nrows() != self.op.dim() {
            return Err(Error::ShapeMismatch { expected: p.nrows(), got: self.op.dim() });
        }
        Ok(linalg::max_abs(&(&p * self.op.materialize() * &p)))
    }
}

/// Gradient of a scalar field, computed in Fourier space.
pub fn spectral_gradient(grid: &PeriodicGrid, psi: &[C64]) -> Result<ComplexField> {
    if psi.len() != grid.points() {
        return Err(Error::ShapeMismatch { expected: grid.points(), got: psi.len() });
    }
    let plan = FftPlan::new(grid);
    let mut hat = psi.to_vec();
    plan.forward(&mut hat);
    let d = grid.dims;
    let mut out = vec![cr(0.0); grid.points() * d];
    for a in 0..d {
        let mut comp: Vec<C64> = (0..grid.points()).map(|k| hat[k] * c(0.0, grid.wavevector(k)[a])).collect();
        plan.inverse(&mut comp);
        for (i, v) in comp.into_iter().enumerate() {
            out[i * d + a] = v;
        }
    }
    ComplexField::new(out, d, grid.cell_volume())
}

/// Spectral divergence of a vector field.
pub fn spectral_divergence(grid: &PeriodicGrid, f: &ComplexField) -> Vec<C64> {
    let plan = FftPlan::new(grid);
    let d = grid.dims;
    let mut acc = vec![cr(0.0); grid.points()];
    for a in 0..d {
        let mut comp: Vec<C64> = (0..grid.points()).map(|i| f.values[i * d + a]).collect();
        plan.forward(&mut comp);
        for (k, v) in comp.iter().enumerate() {
            acc[k] += v * c(0.0, grid.wavevector(k)[a]);
        }
    }
    plan.inverse(&mut acc);
    acc
}

/// max |curl u| relative to max |k||û|, evaluated in Fourier space.
fn spectral_curl_residual(grid: &PeriodicGrid, u: &ComplexField) -> f64 {
    let plan = FftPlan::new(grid);
    let d = grid.dims;
    let hats: Vec<Vec<C64>> = (0..d)
        .map(|a| {
            let mut comp: Vec<C64> = (0..grid.points()).map(|i| u.values[i * d + a]).collect();
            plan.forward(&mut comp);
            comp
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..grid.points() {
        let kv = grid.wavevector(k);
        for a in 0..d {
            scale = scale.max(hats[a][k].norm() * kv.iter().map(|v| v.abs()).fold(0.0, f64::max));
            for b in (a + 1)..d {
                worst = worst.max((hats[b][k] * kv[a] - hats[a][k] * kv[b]).norm());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// L + c·T.
pub fn shift_by_null_t(l: &LocalOperator, t: &NullTOperator, coeff: C64) -> Result<LocalOperator> {
    l.add(&t.op.scaled(coeff))
}

/// λ_min of the Hermitian part of C + εT for each ε, for constant blocks.
pub fn coercivity_scan(c_block: &CMat, t_block: &CMat, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
    eps.iter()
        .map(|&e| {
            let m = c_block + t_block * cr(e);
            linalg::lambda_min(&m).map(|l| (e, l)).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })
        })
        .collect()
}

/// Isotropic elasticity 𝒞P = 2μ·sym(P) + λ·Tr(P)·I on d×d row-major matrices.
pub fn isotropic_elasticity_block(d: usize, lambda: f64, mu: f64) -> CMat {
    let mut out = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut v = 0.0;
                    if i == k && j == l {
                        v += mu;
                    }
                    if i == l && j == k {
                        v += mu;
                    }
                    if i == j && k == l {
                        v += lambda;
                    }
                    out[(i * d + j, k * d + l)] = cr(v);
                }
            }
        }
    }
    out
}
