//! Field solves and resolvents of A = Γ₁BΓ₁, plus the checks that tie the
//! different closed forms of the resolvent together.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::composite::LocalOperator;
use crate::error::{Error, Result};
use crate::field::{self, ComplexField};
use crate::linalg::{self, cr, CMat, CVec, C64};
use crate::operator::{self, OperatorHandle, DEFAULT_COND_CAP, DEFAULT_ORACLE_CAP};
use crate::projector::{build_gamma, ProjectorSpec};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Iterations over which the Neumann residual must shrink by at least 0.1%.
const DIVERGENCE_WINDOW: usize = 50;

/// A = Γ₁BΓ₁ together with the reference parameter z₀ and an optional
/// source in the range of Γ₁.
#[derive(Clone, Debug)]
pub struct ResolventProblem {
    pub proj: ProjectorSpec,
    pub b: LocalOperator,
    pub z0: C64,
    pub source: Option<ComplexField>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Neumann,
    Krylov,
    Dense,
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolventVariant {
    /// (z₀I − A)⁻¹
    R0,
    /// (z₀I − Γ₁B)⁻¹Γ₁
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveNorms {
    pub source: f64,
    pub e: f64,
    pub j: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub e: Option<ComplexField>,
    #[serde(skip)]
    pub j: Option<ComplexField>,
    pub method: SolveMethod,
    pub iterations: usize,
    /// ‖Γ₁(LE − s)‖/‖s‖ recomputed after the solve.
    pub residual: f64,
    /// ‖Γ₂E‖/‖s‖ and ‖Γ₁J‖/‖s‖.
    pub constraint_defect: f64,
    pub norms: SolveNorms,
}

impl SolveReport {
    pub fn field_e(&self) -> &ComplexField {
        self.e.as_ref().expect("solve report carries E")
    }

    pub fn field_j(&self) -> &ComplexField {
        self.j.as_ref().expect("solve report carries J")
    }
}

impl ResolventProblem {
    pub fn new(proj: ProjectorSpec, b: LocalOperator, z0: C64) -> Result<Self> {
        if proj.dim() != b.dim() || proj.components() != b.components {
            return Err(Error::ShapeMismatch { expected: proj.dim(), got: b.dim() });
        }
        Ok(Self { proj, b, z0, source: None })
    }

    /// Attaches a source; it must satisfy Γ₁s = s.
    pub fn with_source(mut self, s: ComplexField) -> Result<Self> {
        if s.len() != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: s.len() });
        }
        let ps = self.proj.operator().apply(&s)?;
        let residual = ps.max_abs_diff(&s);
        if residual > 1e-12 * s.max_abs().max(1.0) {
            return Err(Error::SourceNotInRange { residual });
        }
        self.source = Some(s);
        Ok(self)
    }

    pub fn with_z0(&self, z0: C64) -> Self {
        Self { z0, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.proj.dim()
    }

    pub fn cell_volume(&self) -> f64 {
        self.proj.cell_volume()
    }

    pub fn components(&self) -> usize {
        self.proj.components()
    }

    /// L = z₀I − B.
    pub fn l(&self) -> LocalOperator {
        self.b.shifted(self.z0)
    }

    /// A = Γ₁BΓ₁.
    pub fn a_operator(&self) -> OperatorHandle {
        let p = self.proj.operator();
        OperatorHandle::sandwich(&p, &self.b.operator())
    }

    pub fn materialize_a(&self) -> Result<CMat> {
        let p = self.proj.materialize()?;
        Ok(&p * self.b.materialize() * &p)
    }

    /// Projects an arbitrary vector onto the range of Γ₁.
    pub fn project(&self, f: &ComplexField) -> Result<ComplexField> {
        self.proj.operator().apply(f)
    }

    pub fn random_source<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ComplexField> {
        let f = ComplexField::random(rng, self.dim() / self.components(), self.components(), self.cell_volume());
        self.project(&f)
    }

    fn check_cap(&self) -> Result<()> {
        if self.dim() > DEFAULT_ORACLE_CAP {
            return Err(Error::DimensionExceedsCap { dim: self.dim(), cap: DEFAULT_ORACLE_CAP });
        }
        Ok(())
    }
}

/// Reference medium αI with α the midpoint of the Hermitian-part range of L
/// when that range is positive, otherwise a scale that at least keeps Γ
/// well defined.
pub fn default_reference(l: &LocalOperator) -> Result<CMat> {
    let m = l.components;
    let (lo, hi) = l.hermitian_eigen_range()?;
    let alpha = if lo > 0.0 { 0.5 * (lo + hi) } else { l.blocks().iter().map(linalg::op_norm).fold(1.0, f64::max) };
    Ok(CMat::identity(m, m) * cr(alpha))
}

fn check_nondegenerate(l: &LocalOperator) -> Result<()> {
    match l.inverse() {
        Ok(_) => Ok(()),
        Err(Error::PointwiseSingular { point }) => Err(Error::DegenerateL { point }),
        Err(e) => Err(e),
    }
}

/// Residual ‖Γ₁(LE − s)‖/‖s‖ computed from scratch.
fn residual(proj: &OperatorHandle, l: &LocalOperator, e: &[C64], s: &[C64]) -> f64 {
    let le = crate::operator::LinearOperator::apply(l, e);
    let diff: Vec<C64> = le.iter().zip(s).map(|(a, b)| a - b).collect();
    let r = proj.apply_raw(&diff);
    field::norm_raw(&r) / field::norm_raw(s).max(f64::MIN_POSITIVE)
}

struct RawSolve {
    e: Vec<C64>,
    iterations: usize,
}

/// E ← Γs + ΓB'E with B' = L₀ − L.
fn neumann(
    proj: &ProjectorSpec,
    l: &LocalOperator,
    l0: &CMat,
    s: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<RawSolve> {
    let gamma = build_gamma(proj, l0)?.operator();
    let p = proj.operator();
    let bprime = LocalOperator::constant(l.grid.clone(), l.points(), l0)?.sub(l)?;
    let gs = gamma.apply_raw(s);
    let mut e = gs.clone();
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let be = crate::operator::LinearOperator::apply(&bprime, &e);
        let gbe = gamma.apply_raw(&be);
        e = gs.iter().zip(&gbe).map(|(a, b)| a + b).collect();
        let r = residual(&p, l, &e, s);
        if !r.is_finite() {
            return Err(Error::Divergence { iterations: it, residual: r });
        }
        if r <= tol {
            return Ok(RawSolve { e, iterations: it });
        }
        history.push(r);
        if it > DIVERGENCE_WINDOW && r > 0.999 * history[it - 1 - DIVERGENCE_WINDOW] {
            return Err(Error::Divergence { iterations: it, residual: r });
        }
    }
    Err(Error::Divergence { iterations: max_iter, residual: *history.last().unwrap_or(&f64::NAN) })
}

/// CGLS on M = Γ₁LΓ₁ + Γ₂, whose solution of ME = s lies in the range of Γ₁.
fn krylov(proj: &ProjectorSpec, l: &LocalOperator, s: &[C64], tol: f64, max_iter: usize) -> Result<RawSolve> {
    let p = proj.operator();
    let lop = l.operator();
    let apply_m = |x: &[C64], adjoint: bool| -> Vec<C64> {
        let px = p.apply_raw(x);
        let lpx = if adjoint { lop.apply_adjoint_raw(&px) } else { lop.apply_raw(&px) };
        let plpx = p.apply_raw(&lpx);
        plpx.iter().zip(x).zip(&px).map(|((a, xi), pi)| a + (xi - pi)).collect()
    };
    let snorm = field::norm_raw(s);
    let mut x = vec![cr(0.0); s.len()];
    if snorm == 0.0 {
        return Ok(RawSolve { e: x, iterations: 0 });
    }
    let mut r = s.to_vec();
    let mut z = apply_m(&r, true);
    let mut d = z.clone();
    let mut gamma = field::norm_raw(&z).powi(2);
    for it in 1..=max_iter {
        let q = apply_m(&d, false);
        let qq = field::norm_raw(&q).powi(2);
        if qq == 0.0 {
            return Err(Error::SingularRestriction { cond: f64::INFINITY, cap: DEFAULT_COND_CAP });
        }
        let alpha = gamma / qq;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di * alpha;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= qi * alpha;
        }
        let rel = field::norm_raw(&r) / snorm;
        if !rel.is_finite() {
            return Err(Error::Divergence { iterations: it, residual: rel });
        }
        if rel <= tol {
            // guard against drift in the recursive residual
            let true_r = residual(&p, l, &p.apply_raw(&x), s);
            if true_r <= tol * 10.0 {
                return Ok(RawSolve { e: p.apply_raw(&x), iterations: it });
            }
            let mx = apply_m(&x, false);
            r = s.iter().zip(&mx).map(|(a, b)| a - b).collect();
        }
        z = apply_m(&r, true);
        let gnew = field::norm_raw(&z).powi(2);
        let beta = gnew / gamma;
        gamma = gnew;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + *di * beta;
        }
    }
    let rr = residual(&p, l, &p.apply_raw(&x), s);
    Err(Error::Divergence { iterations: max_iter, residual: rr })
}

/// Q(Q†LQ)⁻¹Q† applied to `s`, with Q a basis of the range of Γ₁.
fn dense_subspace_solve(proj: &ProjectorSpec, l: &LocalOperator, s: &[C64]) -> Result<Vec<C64>> {
    let inv = subspace_inverse_matrix(proj, l)?;
    Ok((inv * CVec::from_column_slice(s)).iter().copied().collect())
}

/// Dense (Γ₁LΓ₁)⁻¹ on the range of Γ₁, zero on its complement.
pub fn subspace_inverse_matrix(proj: &ProjectorSpec, l: &LocalOperator) -> Result<CMat> {
    if proj.dim() > DEFAULT_ORACLE_CAP {
        return Err(Error::DimensionExceedsCap { dim: proj.dim(), cap: DEFAULT_ORACLE_CAP });
    }
    let q = proj.range_basis()?;
    if q.ncols() == 0 {
        return Err(Error::EmptyBasis);
    }
    operator::restricted_inverse(&l.materialize(), &q, DEFAULT_COND_CAP)
}

fn raw_solve(
    proj: &ProjectorSpec,
    l: &LocalOperator,
    l0: Option<&CMat>,
    s: &[C64],
    method: SolveMethod,
    tol: f64,
) -> Result<(Vec<C64>, usize, SolveMethod)> {
    match method {
        SolveMethod::Dense => Ok((dense_subspace_solve(proj, l, s)?, 0, SolveMethod::Dense)),
        SolveMethod::Krylov => {
            let r = krylov(proj, l, s, tol, DEFAULT_MAX_ITER)?;
            Ok((r.e, r.iterations, SolveMethod::Krylov))
        }
        SolveMethod::Neumann => {
            let l0 = match l0 {
                Some(m) => m.clone(),
                None => default_reference(l)?,
            };
            let r = neumann(proj, l, &l0, s, tol, DEFAULT_MAX_ITER)?;
            Ok((r.e, r.iterations, SolveMethod::Neumann))
        }
        SolveMethod::Auto => match raw_solve(proj, l, l0, s, SolveMethod::Neumann, tol) {
            Err(Error::Divergence { .. }) | Err(Error::RankDrop { .. }) => {
                raw_solve(proj, l, l0, s, SolveMethod::Krylov, tol)
            }
            other => other,
        },
    }
}

/// Solves Γ₁LE = Γ₁s with Γ₁E = E and returns E, J = LE − s and a
/// recomputed residual certificate. `l0` is the reference medium for the
/// Neumann scheme; `None` picks one from the Hermitian part of L.
pub fn solve_field(
    problem: &ResolventProblem,
    l0: Option<&CMat>,
    method: SolveMethod,
    tol: f64,
) -> Result<SolveReport> {
    let s = problem.source.as_ref().ok_or_else(|| Error::InvalidArgument("field solve needs a source".into()))?;
    let l = problem.l();
    check_nondegenerate(&l)?;
    let (e, iterations, used) = raw_solve(&problem.proj, &l, l0, &s.values, method, tol)?;
    let p = problem.proj.operator();
    let res = residual(&p, &l, &e, &s.values);
    let le = crate::operator::LinearOperator::apply(&l, &e);
    let j: Vec<C64> = le.iter().zip(&s.values).map(|(a, b)| a - b).collect();
    let snorm = field::norm_raw(&s.values).max(f64::MIN_POSITIVE);
    let pe = p.apply_raw(&e);
    let e_defect = field::norm_raw(&e.iter().zip(&pe).map(|(a, b)| a - b).collect::<Vec<_>>());
    let j_defect = field::norm_raw(&p.apply_raw(&j));
    let vol = s.cell_volume;
    let e = ComplexField::new(e, s.components, vol)?;
    let j = ComplexField::new(j, s.components, vol)?;
    Ok(SolveReport {
        norms: SolveNorms { source: s.norm(), e: e.norm(), j: j.norm() },
        e: Some(e),
        j: Some(j),
        method: used,
        iterations,
        residual: res,
        constraint_defect: e_defect.max(j_defect) / snorm,
    })
}

/// Applies R₀ = (z₀I − A)⁻¹ or R = R₀Γ₁ to `rhs`. Uses the dense path within
/// the oracle cap and Krylov beyond it.
pub fn resolvent_apply(
    problem: &ResolventProblem,
    rhs: &ComplexField,
    variant: ResolventVariant,
) -> Result<ComplexField> {
    if rhs.len() != problem.dim() {
        return Err(Error::ShapeMismatch { expected: problem.dim(), got: rhs.len() });
    }
    if variant == ResolventVariant::R0 && problem.z0 == cr(0.0) {
        return Err(Error::ZeroZ0);
    }
    let p = problem.proj.operator();
    let prhs = p.apply_raw(&rhs.values);
    let l = problem.l();
    let method = if problem.dim() <= DEFAULT_ORACLE_CAP { SolveMethod::Dense } else { SolveMethod::Krylov };
    let (mut out, _, _) = raw_solve(&problem.proj, &l, None, &prhs, method, DEFAULT_TOL * 1e-2)?;
    if variant == ResolventVariant::R0 {
        let zinv = problem.z0.inv();
        for ((o, r), pr) in out.iter_mut().zip(&rhs.values).zip(&prhs) {
            *o += (r - pr) * zinv;
        }
    }
    Ok(rhs.with_values(out))
}

/// The four closed forms of R, materialized:
/// (z₀I − Γ₁B)⁻¹Γ₁, (Γ₁LΓ₁)⁻¹ on 𝓔, R₀Γ₁ and R₀ + (Γ₁ − I)/z₀.
pub fn r_chain(problem: &ResolventProblem) -> Result<[CMat; 4]> {
    problem.check_cap()?;
    if problem.z0 == cr(0.0) {
        return Err(Error::ZeroZ0);
    }
    let n = problem.dim();
    let id = CMat::identity(n, n);
    let p = problem.proj.materialize()?;
    let b = problem.b.materialize();
    let z0 = problem.z0;
    let inv = |m: &CMat| -> Result<CMat> {
        let cond = linalg::condition_number(m);
        if !(cond <= DEFAULT_COND_CAP) {
            return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
        }
        linalg::inverse(m).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })
    };
    let r1 = inv(&(&id * z0 - &p * &b))? * &p;
    let r2 = subspace_inverse_matrix(&problem.proj, &problem.l())?;
    let r0 = inv(&(&id * z0 - &p * &b * &p))?;
    let r3 = &r0 * &p;
    let r4 = &r0 + (&p - &id) / z0;
    Ok([r1, r2, r3, r4])
}

/// Dense R₀ = (z₀I − A)⁻¹.
pub fn r0_matrix(problem: &ResolventProblem) -> Result<CMat> {
    problem.check_cap()?;
    let n = problem.dim();
    let a = problem.materialize_a()?;
    let m = CMat::identity(n, n) * problem.z0 - a;
    let cond = linalg::condition_number(&m);
    if !(cond <= DEFAULT_COND_CAP) {
        return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
    }
    linalg::inverse(&m).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })
}

/// Largest relative deviation among the four forms of R on random probes.
pub fn r_chain_deviation<R: Rng + ?Sized>(problem: &ResolventProblem, probes: usize, rng: &mut R) -> Result<f64> {
    let forms = r_chain(problem)?;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let v = CVec::from_vec(crate::random::complex_vector(rng, problem.dim()));
        let outs: Vec<CVec> = forms.iter().map(|m| m * &v).collect();
        let scale = outs.iter().map(|o| o.norm()).fold(f64::MIN_POSITIVE, f64::max);
        for a in 0..4 {
            for b in (a + 1)..4 {
                worst = worst.max((&outs[a] - &outs[b]).norm() / scale);
            }
        }
    }
    Ok(worst)
}

/// Dense [I − ΓB']⁻¹Γ for reference L₀ (B' = L₀ − L).
pub fn reference_form_matrix(problem: &ResolventProblem, l0: &CMat) -> Result<CMat> {
    problem.check_cap()?;
    let m = problem.components();
    if l0.nrows() != m || l0.ncols() != m {
        return Err(Error::ShapeMismatch { expected: m, got: l0.nrows() });
    }
    match linalg::lambda_min(l0) {
        Some(v) if v > 0.0 && linalg::hermiticity_defect(l0) <= 1e-12 * linalg::max_abs(l0) => {}
        _ => return Err(Error::InvalidArgument("reference medium must be Hermitian positive definite".into())),
    }
    let gamma = build_gamma(&problem.proj, l0)?.materialize()?;
    let l = problem.l();
    let bprime = LocalOperator::constant(l.grid.clone(), l.points(), l0)?.sub(&l)?.materialize();
    let n = problem.dim();
    let k = CMat::identity(n, n) - &gamma * bprime;
    let cond = linalg::condition_number(&k);
    if !(cond <= DEFAULT_COND_CAP) {
        return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
    }
    let kinv = linalg::inverse(&k).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })?;
    Ok(kinv * gamma)
}

/// Applies [Γ₁LΓ₁]⁻¹Γ₁ and [I − ΓB']⁻¹Γ for each L₀ (and for L₀ = z₀I when z₀
/// is real and positive) to random probes; returns the largest deviation
/// relative to the probe response.
pub fn verify_reference_independence<R: Rng + ?Sized>(
    problem: &ResolventProblem,
    l0_list: &[CMat],
    probes: usize,
    rng: &mut R,
) -> Result<f64> {
    let lhs = subspace_inverse_matrix(&problem.proj, &problem.l())?;
    let m = problem.components();
    let mut refs: Vec<CMat> = l0_list.to_vec();
    if problem.z0.im == 0.0 && problem.z0.re > 0.0 {
        refs.push(CMat::identity(m, m) * problem.z0);
    }
    let forms = refs.iter().map(|l0| reference_form_matrix(problem, l0)).collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let v = CVec::from_vec(crate::random::complex_vector(rng, problem.dim()));
        let base = &lhs * &v;
        let scale = base.norm().max(f64::MIN_POSITIVE);
        let outs: Vec<CVec> = forms.iter().map(|f| f * &v).collect();
        for (i, a) in outs.iter().enumerate() {
            worst = worst.max((a - &base).norm() / scale);
            for b in &outs[i + 1..] {
                worst = worst.max((a - b).norm() / scale);
            }
        }
    }
    Ok(worst)
}

/// Right-hand side of the duality formula
/// R = L⁻¹ − L⁻¹{I/z₀ − Γ₂[I/z₀ − (z₀I − B)⁻¹]}⁻¹Γ₂L⁻¹, materialized.
pub fn duality_rhs(problem: &ResolventProblem) -> Result<CMat> {
    problem.check_cap()?;
    if problem.z0 == cr(0.0) {
        return Err(Error::ZeroZ0);
    }
    let linv = problem.l().inverse()?.materialize();
    let n = problem.dim();
    let id = CMat::identity(n, n);
    let g2 = problem.proj.complement().materialize()?;
    let zi = problem.z0.inv();
    let inner = &id * zi - &g2 * (&id * zi - &linv);
    let cond = linalg::condition_number(&inner);
    if !(cond <= DEFAULT_COND_CAP) {
        return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
    }
    let inner_inv = linalg::inverse(&inner).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })?;
    Ok(&linv - &linv * inner_inv * g2 * &linv)
}

/// The same formula specialized to B = χI:
/// L⁻¹ − z₀(1 − z₀)L⁻¹[(1 − z₀)I − Γ₂B]⁻¹Γ₂L⁻¹.
pub fn duality_rhs_indicator(problem: &ResolventProblem) -> Result<CMat> {
    problem.check_cap()?;
    let z0 = problem.z0;
    let linv = problem.l().inverse()?.materialize();
    let n = problem.dim();
    let g2 = problem.proj.complement().materialize()?;
    let b = problem.b.materialize();
    let k = CMat::identity(n, n) * (cr(1.0) - z0) - &g2 * b;
    let cond = linalg::condition_number(&k);
    if !(cond <= DEFAULT_COND_CAP) {
        return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
    }
    let kinv = linalg::inverse(&k).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })?;
    Ok(&linv - &linv * kinv * g2 * &linv * (z0 * (cr(1.0) - z0)))
}

/// Max relative deviation between (Γ₁LΓ₁)⁻¹ and the duality formula on
/// random probes.
pub fn verify_duality<R: Rng + ?Sized>(problem: &ResolventProblem, probes: usize, rng: &mut R) -> Result<f64> {
    let lhs = subspace_inverse_matrix(&problem.proj, &problem.l())?;
    let rhs = duality_rhs(problem)?;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let v = CVec::from_vec(crate::random::complex_vector(rng, problem.dim()));
        let a = &lhs * &v;
        let b = &rhs * &v;
        worst = worst.max((&a - &b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Outcome of pairing the restricted spectra of Γ₁χΓ₁ and Γ₂χΓ₂.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Eigenvalues strictly inside (0, 1) on each side.
    pub interior1: usize,
    pub interior2: usize,
    /// Largest |1 − λ − μ| over matched interior pairs.
    pub max_pair_error: f64,
    /// Largest over all λ ∈ Λ₁ of min_μ |1 − λ − μ|, endpoints included.
    pub max_nearest_all: f64,
    /// Multiplicities of the endpoint eigenvalues (0 and 1) in Λ₁ and Λ₂.
    pub endpoints1: (usize, usize),
    pub endpoints2: (usize, usize),
    /// Interior eigenvalues pair one-to-one within tolerance.
    pub paired: bool,
}

const ENDPOINT_TOL: f64 = 1e-8;

fn restricted_eigs(q: &CMat, b: &CMat) -> Result<Vec<f64>> {
    if q.ncols() == 0 {
        return Ok(Vec::new());
    }
    linalg::hermitian_eigenvalues(&(q.adjoint() * b * q))
        .ok_or(Error::EigenFailure { tag: crate::operator::OperatorTag::Dense })
}

/// Restricted spectra of Γ₁χΓ₁ on 𝓔 and Γ₂χΓ₂ on 𝓙 for an indicator χ and
/// their pairing under λ ↦ 1 − λ. Eigenvalues 0 and 1 are counted
/// separately: the reflection only constrains the interior of [0, 1].
pub fn spectrum_reflection_check(chi: &[u8], proj: &ProjectorSpec) -> Result<ReflectionReport> {
    let m = proj.components();
    if chi.len() * m != proj.dim() {
        return Err(Error::ShapeMismatch { expected: proj.dim() / m, got: chi.len() });
    }
    let values: Vec<C64> = chi.iter().map(|&v| cr(v as f64)).collect();
    let b = crate::composite::scalar_local(proj.grid().cloned(), m, &values)?.materialize();
    let q1 = proj.range_basis()?;
    let q2 = proj.complement().range_basis()?;
    let l1 = restricted_eigs(&q1, &b)?;
    let l2 = restricted_eigs(&q2, &b)?;
    let interior =
        |v: &[f64]| -> Vec<f64> { v.iter().copied().filter(|&x| x > ENDPOINT_TOL && x < 1.0 - ENDPOINT_TOL).collect() };
    let ends = |v: &[f64]| {
        (v.iter().filter(|&&x| x <= ENDPOINT_TOL).count(), v.iter().filter(|&&x| x >= 1.0 - ENDPOINT_TOL).count())
    };
    let mut refl: Vec<f64> = interior(&l1).iter().map(|x| 1.0 - x).collect();
    refl.sort_by(f64::total_cmp);
    let i2 = interior(&l2);
    let max_pair_error = if refl.len() == i2.len() {
        refl.iter().zip(&i2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let max_nearest_all =
        l1.iter().map(|x| l2.iter().map(|y| (1.0 - x - y).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    Ok(ReflectionReport {
        interior1: refl.len(),
        interior2: i2.len(),
        paired: max_pair_error < 1e-8,
        max_pair_error,
        max_nearest_all,
        endpoints1: ends(&l1),
        endpoints2: ends(&l2),
        lambda1: l1,
        lambda2: l2,
    })
}

/// Largest deviation, relative to the response size, between A applied
/// through the FFT backend and A built from the blockwise circulant form of
/// Γ₁, on random probes. Dense projectors have a single backend and give 0.
pub fn backend_deviation<R: Rng + ?Sized>(problem: &ResolventProblem, probes: usize, rng: &mut R) -> Result<f64> {
    problem.check_cap()?;
    let Some(fp) = problem.proj.as_fourier() else {
        return Ok(0.0);
    };
    let p = fp.multiplier().dense_blockwise();
    let b = problem.b.materialize();
    let a = problem.a_operator();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let v = crate::random::complex_vector(rng, problem.dim());
        let fft = CVec::from_vec(a.apply_raw(&v));
        let dense = &p * (&b * (&p * CVec::from_vec(v)));
        worst = worst.max((&fft - &dense).camax() / dense.camax().max(1.0));
    }
    Ok(worst)
}
