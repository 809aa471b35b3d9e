//! Backend-neutral linear operators with a dense-matrix oracle path.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::linalg::{self, cr, CMat, C64};
use crate::par;
use crate::projector::ProjectorSpec;

/// Largest dimension `materialize` will densify by default.
pub const DEFAULT_ORACLE_CAP: usize = 4096;
/// Restricted blocks with a condition number above this are reported singular.
pub const DEFAULT_COND_CAP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorTag {
    Dense,
    FourierLocal,
    RealLocal,
    Composite,
}

impl fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperatorTag::Dense => "dense",
            OperatorTag::FourierLocal => "fourier-local",
            OperatorTag::RealLocal => "real-local",
            OperatorTag::Composite => "composite",
        };
        f.write_str(s)
    }
}

/// A linear map on `C^dim`. Implementations must be pure: applying from
/// several threads at once is allowed.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn tag(&self) -> OperatorTag;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64>;
}

/// Shared, immutable handle to an operator.
#[derive(Clone, Debug)]
pub struct OperatorHandle(Arc<dyn LinearOperator>);

impl OperatorHandle {
    pub fn new<T: LinearOperator + 'static>(op: T) -> Self {
        Self(Arc::new(op))
    }

    pub fn dense(m: CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "dense operator must be square");
        Self::new(DenseOperator(m))
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, cr(1.0))
    }

    pub fn scaled_identity(n: usize, a: C64) -> Self {
        Self::new(ScaledIdentity { n, a })
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn tag(&self) -> OperatorTag {
        self.0.tag()
    }

    pub fn apply_raw(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.dim());
        self.0.apply(x)
    }

    pub fn apply_adjoint_raw(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.dim());
        self.0.apply_adjoint(x)
    }

    pub fn apply(&self, p: &ComplexField) -> Result<ComplexField> {
        self.check_len(p.len())?;
        Ok(p.with_values(self.0.apply(&p.values)))
    }

    pub fn apply_adjoint(&self, p: &ComplexField) -> Result<ComplexField> {
        self.check_len(p.len())?;
        Ok(p.with_values(self.0.apply_adjoint(&p.values)))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &OperatorHandle) -> OperatorHandle {
        assert_eq!(self.dim(), other.dim(), "composition dimension mismatch");
        OperatorHandle::new(Product(vec![self.clone(), other.clone()]))
    }

    /// Γ·B·Γ for a projector Γ (or any operator).
    pub fn sandwich(outer: &OperatorHandle, inner: &OperatorHandle) -> OperatorHandle {
        assert_eq!(outer.dim(), inner.dim(), "sandwich dimension mismatch");
        OperatorHandle::new(Product(vec![outer.clone(), inner.clone(), outer.clone()]))
    }

    pub fn lin_comb(terms: Vec<(C64, OperatorHandle)>) -> OperatorHandle {
        assert!(!terms.is_empty());
        let n = terms[0].1.dim();
        assert!(terms.iter().all(|(_, t)| t.dim() == n), "sum dimension mismatch");
        OperatorHandle::new(LinearCombination(terms))
    }

    pub fn add(&self, other: &OperatorHandle) -> OperatorHandle {
        Self::lin_comb(vec![(cr(1.0), self.clone()), (cr(1.0), other.clone())])
    }

    pub fn sub(&self, other: &OperatorHandle) -> OperatorHandle {
        Self::lin_comb(vec![(cr(1.0), self.clone()), (cr(-1.0), other.clone())])
    }

    pub fn scale(&self, a: C64) -> OperatorHandle {
        Self::lin_comb(vec![(a, self.clone())])
    }

    /// z·I − self
    pub fn shifted(&self, z: C64) -> OperatorHandle {
        Self::lin_comb(vec![(cr(1.0), Self::scaled_identity(self.dim(), z)), (cr(-1.0), self.clone())])
    }

    pub fn adjoint(&self) -> OperatorHandle {
        OperatorHandle::new(Adjoint(self.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct DenseOperator(pub CMat);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn tag(&self) -> OperatorTag {
        OperatorTag::Dense
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let v = &self.0 * linalg::CVec::from_column_slice(x);
        v.iter().copied().collect()
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let v = self.0.adjoint() * linalg::CVec::from_column_slice(x);
        v.iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
struct ScaledIdentity {
    n: usize,
    a: C64,
}

impl LinearOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.n
    }
    fn tag(&self) -> OperatorTag {
        OperatorTag::Dense
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        x.iter().map(|v| v * self.a).collect()
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        x.iter().map(|v| v * self.a.conj()).collect()
    }
}

/// Product A₀·A₁·…·Aₖ (the last factor acts first).
#[derive(Debug, Clone)]
struct Product(Vec<OperatorHandle>);

impl LinearOperator for Product {
    fn dim(&self) -> usize {
        self.0[0].dim()
    }
    fn tag(&self) -> OperatorTag {
        OperatorTag::Composite
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut v = x.to_vec();
        for f in self.0.iter().rev() {
            v = f.apply_raw(&v);
        }
        v
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut v = x.to_vec();
        for f in self.0.iter() {
            v = f.apply_adjoint_raw(&v);
        }
        v
    }
}

#[derive(Debug, Clone)]
struct LinearCombination(Vec<(C64, OperatorHandle)>);

impl LinearOperator for LinearCombination {
    fn dim(&self) -> usize {
        self.0[0].1.dim()
    }
    fn tag(&self) -> OperatorTag {
        OperatorTag::Composite
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (a, op) in &self.0 {
            for (o, y) in out.iter_mut().zip(op.apply_raw(x)) {
                *o += a * y;
            }
        }
        out
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (a, op) in &self.0 {
            let ac = a.conj();
            for (o, y) in out.iter_mut().zip(op.apply_adjoint_raw(x)) {
                *o += ac * y;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Adjoint(OperatorHandle);

impl LinearOperator for Adjoint {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn tag(&self) -> OperatorTag {
        self.0.tag()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.0.apply_adjoint_raw(x)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.0.apply_raw(x)
    }
}

/// Hermitian and anti-Hermitian parts of an operator.
#[derive(Clone, Debug)]
pub struct HermitianSplit {
    pub hermitian: OperatorHandle,
    pub antihermitian: OperatorHandle,
}

pub fn hermitian_split(op: &OperatorHandle) -> HermitianSplit {
    let adj = op.adjoint();
    HermitianSplit {
        hermitian: OperatorHandle::lin_comb(vec![(cr(0.5), op.clone()), (cr(0.5), adj.clone())]),
        antihermitian: OperatorHandle::lin_comb(vec![(cr(0.5), op.clone()), (cr(-0.5), adj)]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalKind {
    Exact,
    Inner,
    Outer,
}

/// Interval on the real axis bounding (or contained in) a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumInterval {
    pub lower: f64,
    pub upper: f64,
    pub kind: IntervalKind,
}

impl SpectrumInterval {
    pub fn new(lower: f64, upper: f64, kind: IntervalKind) -> Self {
        Self { lower, upper, kind }
    }

    /// `other ⊆ self` with slack `tol`.
    pub fn contains(&self, other: &SpectrumInterval, tol: f64) -> bool {
        self.lower <= other.lower + tol && other.upper <= self.upper + tol
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Dense matrix whose column j is `op` applied to the j-th unit vector.
pub fn materialize(op: &OperatorHandle) -> Result<CMat> {
    materialize_capped(op, DEFAULT_ORACLE_CAP)
}

pub fn materialize_capped(op: &OperatorHandle, cap: usize) -> Result<CMat> {
    let n = op.dim();
    if n > cap {
        return Err(Error::DimensionExceedsCap { dim: n, cap });
    }
    let cols = par::map_range(n, |j| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = cr(1.0);
        op.apply_raw(&e)
    });
    Ok(CMat::from_fn(n, n, |r, c0| cols[c0][r]))
}

/// Eigenvalues of an operator, optionally restricted to the range of a projector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    /// Sorted by real part.
    pub eigenvalues: Vec<C64>,
    /// Present when the (restricted) operator is Hermitian.
    pub interval: Option<SpectrumInterval>,
}

impl Spectrum {
    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }
}

/// Tolerance used to decide whether a materialized matrix is Hermitian.
const HERMITIAN_DETECT_TOL: f64 = 1e-10;

pub fn brute_force_spectrum(op: &OperatorHandle, restrict_to: Option<&ProjectorSpec>) -> Result<Spectrum> {
    let m = materialize(op)?;
    let m = match restrict_to {
        Some(p) => {
            let q = p.range_basis()?;
            q.adjoint() * &m * &q
        }
        None => m,
    };
    spectrum_of_matrix(&m, op.tag())
}

pub fn spectrum_of_matrix(m: &CMat, tag: OperatorTag) -> Result<Spectrum> {
    let scale = linalg::max_abs(m).max(1.0);
    if linalg::hermiticity_defect(m) <= HERMITIAN_DETECT_TOL * scale {
        let vals = linalg::hermitian_eigenvalues(m).ok_or(Error::EigenFailure { tag })?;
        let interval = if vals.is_empty() {
            None
        } else {
            Some(SpectrumInterval::new(vals[0], vals[vals.len() - 1], IntervalKind::Exact))
        };
        Ok(Spectrum { eigenvalues: vals.into_iter().map(cr).collect(), interval })
    } else {
        let vals = linalg::general_eigenvalues(m).ok_or(Error::EigenFailure { tag })?;
        Ok(Spectrum { eigenvalues: vals, interval: None })
    }
}

/// Whether λ_min((op + op†)/2) exceeds `margin`, together with λ_min.
pub fn hermitian_part_definite(op: &OperatorHandle, margin: f64) -> Result<(bool, f64)> {
    let m = materialize(op)?;
    let lmin = linalg::lambda_min(&m).ok_or(Error::EigenFailure { tag: op.tag() })?;
    Ok((lmin > margin, lmin))
}

/// Inverse of `Q† M Q` lifted back: `Q (Q† M Q)⁻¹ Q†`, where `Q` holds an
/// orthonormal basis of the subspace.
pub fn restricted_inverse(m: &CMat, q: &CMat, cond_cap: f64) -> Result<CMat> {
    let k = q.adjoint() * m * q;
    if k.nrows() == 0 {
        return Ok(CMat::zeros(m.nrows(), m.ncols()));
    }
    let cond = linalg::condition_number(&k);
    if !(cond <= cond_cap) {
        return Err(Error::SingularRestriction { cond, cap: cond_cap });
    }
    let kinv = linalg::inverse(&k).ok_or(Error::SingularRestriction { cond, cap: cond_cap })?;
    Ok(q * kinv * q.adjoint())
}

/// `(proj·op·proj)⁻¹` taken on the range of `proj`, zero on its complement.
pub fn subspace_inverse(op: &OperatorHandle, proj: &ProjectorSpec) -> Result<OperatorHandle> {
    let m = materialize(op)?;
    let q = proj.range_basis()?;
    Ok(OperatorHandle::dense(restricted_inverse(&m, &q, DEFAULT_COND_CAP)?))
}
