//! The effective parameter z*(z₀) of a problem with a single source s.
//!
//! With Γ̄₀ = s⊗s/|s|², the solution E = Rs of Γ₁LE = s satisfies
//! Γ̄₀E = s/z*, so z* = |s|²/(Rs, s).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::linalg::{self, cr, CMat, CVec, C64};
use crate::operator::{self, DEFAULT_COND_CAP, DEFAULT_ORACLE_CAP};
use crate::par;
use crate::resolvent::{self, ResolventProblem, SolveMethod};

/// Below this |(Rs, s)|/|s|² a sample is reported as a pole candidate.
pub const POLE_DENOMINATOR_TOL: f64 = 1e-14;
pub const DEFAULT_SCAN_POINTS: usize = 10_000;

/// Γ̄₀ = s⊗s/|s|², Γ̄₁ = Γ₁ − Γ̄₀, Γ̄₂ = Γ₂.
#[derive(Clone, Debug)]
pub struct ProjectorTrio {
    pub g0: CMat,
    pub g1: CMat,
    pub g2: CMat,
}

impl ProjectorTrio {
    pub fn new(gamma1: &CMat, s: &CVec) -> Self {
        let n = gamma1.nrows();
        let g0 = s * s.adjoint() / cr(s.norm_squared());
        Self { g1: gamma1 - &g0, g2: CMat::identity(n, n) - gamma1, g0 }
    }

    /// Largest entry of (Γ̄₀ + Γ̄₁ + Γ̄₂ − I) and of the pairwise products.
    pub fn defects(&self) -> (f64, f64) {
        let n = self.g0.nrows();
        let sum = linalg::max_abs_diff(&(&self.g0 + &self.g1 + &self.g2), &CMat::identity(n, n));
        let parts = [&self.g0, &self.g1, &self.g2];
        let mut cross: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    cross = cross.max(linalg::max_abs(&(parts[i] * parts[j])));
                }
            }
        }
        (sum, cross)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZSample {
    pub z0: C64,
    pub z_star: C64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveParameter {
    pub samples: Vec<ZSample>,
    /// z₀ values where (Rs, s) vanished to working precision.
    pub pole_candidates: Vec<C64>,
    #[serde(skip)]
    pub source: Option<ComplexField>,
}

impl EffectiveParameter {
    /// Samples with Im z₀ ≠ 0 whose z* lies in the other half plane.
    pub fn sign_violations(&self) -> usize {
        self.samples.iter().filter(|s| s.z0.im != 0.0 && s.z_star.im.signum() != s.z0.im.signum()).count()
    }
}

fn source_of(problem: &ResolventProblem) -> Result<&ComplexField> {
    let s =
        problem.source.as_ref().ok_or_else(|| Error::InvalidArgument("effective parameter needs a source".into()))?;
    if s.norm() == 0.0 {
        return Err(Error::InvalidArgument("source must be nonzero".into()));
    }
    Ok(s)
}

/// (Rs, s)/|s|² at the problem's z₀.
fn inverse_z_star(problem: &ResolventProblem) -> Result<C64> {
    let s = source_of(problem)?;
    let e = if problem.dim() <= DEFAULT_ORACLE_CAP {
        let inv = resolvent::subspace_inverse_matrix(&problem.proj, &problem.l())?;
        s.from_cvec_like(&(inv * s.to_cvec()))
    } else {
        resolvent::solve_field(problem, None, SolveMethod::Krylov, 1e-12)?.field_e().clone()
    };
    Ok(e.inner(s) / cr(s.inner(s).re))
}

/// z* at the problem's own z₀; `None` marks a pole candidate.
pub fn z_star_at(problem: &ResolventProblem) -> Result<Option<C64>> {
    let d = inverse_z_star(problem)?;
    Ok(if d.norm() < POLE_DENOMINATOR_TOL { None } else { Some(cr(1.0) / d) })
}

pub fn z_star(problem: &ResolventProblem, z0s: &[C64]) -> Result<EffectiveParameter> {
    let s = source_of(problem)?.clone();
    let vals = par::try_map_range(z0s.len(), |i| z_star_at(&problem.with_z0(z0s[i])))?;
    let mut samples = Vec::new();
    let mut pole_candidates = Vec::new();
    for (&z0, v) in z0s.iter().zip(vals) {
        match v {
            Some(z_star) => samples.push(ZSample { z0, z_star }),
            None => pole_candidates.push(z0),
        }
    }
    Ok(EffectiveParameter { samples, pole_candidates, source: Some(s) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    /// z* = 0: an eigenvalue of Γ₁BΓ₁ excited by s.
    Zero,
    /// z* = ∞.
    Pole,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoleZeroScan {
    pub window: (f64, f64),
    pub points: usize,
    pub zeros: Vec<f64>,
    pub poles: Vec<f64>,
    /// Zeros and poles alternate along the window.
    pub interlaced: bool,
}

/// Locates zeros and poles of z*(x) for real x in `window` when B is
/// Hermitian. Works with f(x) = 1/z* = s_q†(x − Q†BQ)⁻¹s_q/|s|², which
/// decreases between its poles: a −→+ sign change brackets a pole of f
/// (zero of z*), a +→− change brackets a zero of f (pole of z*). Each
/// bracket is refined by bisection.
pub fn scan_real_axis(problem: &ResolventProblem, window: (f64, f64), points: usize) -> Result<PoleZeroScan> {
    let s = source_of(problem)?;
    let b = problem.b.materialize();
    if linalg::hermiticity_defect(&b) > 1e-12 * linalg::max_abs(&b).max(1.0) {
        return Err(Error::InvalidArgument("real-axis scan needs Hermitian B".into()));
    }
    let (lo, hi) = window;
    if !(hi > lo) || points < 2 {
        return Err(Error::InvalidArgument("scan window must be nonempty with two points at least".into()));
    }
    let q = problem.proj.range_basis()?;
    let h = q.adjoint() * &b * &q;
    let sq = q.adjoint() * s.to_cvec();
    let s2 = sq.norm_squared();
    let m = h.nrows();
    let f = |x: f64| -> f64 {
        let k = CMat::identity(m, m) * cr(x) - &h;
        match k.lu().solve(&sq) {
            Some(y) => (sq.dotc(&y) / s2).re,
            None => f64::NAN,
        }
    };
    let xs: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let fs = par::map_slice(&xs, |&x| f(x));
    let mut found: Vec<(f64, CriticalKind)> = Vec::new();
    for i in 0..points - 1 {
        let (fa, fb) = (fs[i], fs[i + 1]);
        if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
            continue;
        }
        let kind = if fa < 0.0 { CriticalKind::Zero } else { CriticalKind::Pole };
        let (mut a, mut bnd) = (xs[i], xs[i + 1]);
        let sa = fa.signum();
        for _ in 0..200 {
            let mid = 0.5 * (a + bnd);
            if mid <= a || mid >= bnd {
                break;
            }
            let fm = f(mid);
            if fm.is_nan() {
                a = mid;
                bnd = mid;
                break;
            }
            if fm.signum() == sa {
                a = mid;
            } else {
                bnd = mid;
            }
        }
        found.push((0.5 * (a + bnd), kind));
    }
    let interlaced = found.windows(2).all(|w| w[0].1 != w[1].1);
    Ok(PoleZeroScan {
        window,
        points,
        zeros: found.iter().filter(|p| p.1 == CriticalKind::Zero).map(|p| p.0).collect(),
        poles: found.iter().filter(|p| p.1 == CriticalKind::Pole).map(|p| p.0).collect(),
        interlaced,
    })
}

/// z* from the dual problem: with Γ' = Γ̄₀ + Γ₂, z̲₀ = 1/z₀ and
/// B̲ = z̲₀I − L⁻¹, z*s = Γ̄₀[z̲₀I − Γ'B̲]⁻¹Γ's.
pub fn z_star_dual(problem: &ResolventProblem) -> Result<C64> {
    let s = source_of(problem)?;
    if problem.z0 == cr(0.0) {
        return Err(Error::ZeroZ0);
    }
    if problem.dim() > DEFAULT_ORACLE_CAP {
        return Err(Error::DimensionExceedsCap { dim: problem.dim(), cap: DEFAULT_ORACLE_CAP });
    }
    let n = problem.dim();
    let sv = s.to_cvec();
    let trio = ProjectorTrio::new(&problem.proj.materialize()?, &sv);
    let l = problem.l().materialize();
    let cond = linalg::condition_number(&l);
    if !(cond <= DEFAULT_COND_CAP) {
        return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
    }
    let linv = linalg::inverse(&l).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })?;
    let zd = cr(1.0) / problem.z0;
    let bd = CMat::identity(n, n) * zd - &linv;
    let gp = &trio.g0 + &trio.g2;
    let k = CMat::identity(n, n) * zd - &gp * bd;
    let y =
        k.lu().solve(&(&gp * &sv)).ok_or(Error::SingularRestriction { cond: f64::INFINITY, cap: DEFAULT_COND_CAP })?;
    Ok(sv.dotc(&(&trio.g0 * y)) / cr(sv.norm_squared()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualCheck {
    pub primal: C64,
    pub dual: C64,
    pub deviation: f64,
    /// Γ₁ = I, so Γ₂ = 0 and the dual subspace is span{s} alone.
    pub degenerate: bool,
}

pub fn z_star_dual_check(problem: &ResolventProblem) -> Result<DualCheck> {
    let primal =
        z_star_at(problem)?.ok_or(Error::SingularRestriction { cond: f64::INFINITY, cap: DEFAULT_COND_CAP })?;
    let dual = z_star_dual(problem)?;
    let degenerate = problem.proj.rank()? == problem.dim();
    Ok(DualCheck { primal, dual, deviation: (primal - dual).norm() / primal.norm().max(1.0), degenerate })
}

/// Problem data in the constitutive form J + s = L(Ē + s/z*), with J in
/// the range of Γ₂ and Ē in the range of Γ̄₁.
#[derive(Clone, Debug)]
pub struct DualData {
    pub s: CVec,
    pub j: CVec,
    pub e_bar: CVec,
    pub l: CMat,
    pub z_star: C64,
}

impl DualData {
    pub fn from_problem(problem: &ResolventProblem) -> Result<Self> {
        let s = source_of(problem)?.to_cvec();
        let l = problem.l().materialize();
        let inv = resolvent::subspace_inverse_matrix(&problem.proj, &problem.l())?;
        let e = inv * &s;
        let d = s.dotc(&e) / cr(s.norm_squared());
        if d.norm() < POLE_DENOMINATOR_TOL {
            return Err(Error::SingularRestriction { cond: f64::INFINITY, cap: DEFAULT_COND_CAP });
        }
        let z_star = cr(1.0) / d;
        let e_bar = &e - &s / z_star;
        let j = &l * &e - &s;
        Ok(Self { s, j, e_bar, l, z_star })
    }

    /// Exchanges the roles of the two subspaces: Ē + s/z* = L⁻¹(J + s) is
    /// the same relation with J' = Ē, Ē' = J, L' = L⁻¹, s' = s/z* and
    /// z*' = 1/z*. Applying it twice returns the original data.
    pub fn dual(&self) -> Result<Self> {
        let cond = linalg::condition_number(&self.l);
        if !(cond <= DEFAULT_COND_CAP) {
            return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
        }
        let l = linalg::inverse(&self.l).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })?;
        Ok(Self {
            s: &self.s / self.z_star,
            j: self.e_bar.clone(),
            e_bar: self.j.clone(),
            l,
            z_star: cr(1.0) / self.z_star,
        })
    }

    /// ‖J + s − L(Ē + s/z*)‖/‖s‖.
    pub fn relation_defect(&self) -> f64 {
        let lhs = &self.j + &self.s;
        let rhs = &self.l * (&self.e_bar + &self.s / self.z_star);
        (lhs - rhs).norm() / self.s.norm()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let v = |a: &CVec, b: &CVec| (a - b).camax();
        v(&self.s, &other.s)
            .max(v(&self.j, &other.j))
            .max(v(&self.e_bar, &other.e_bar))
            .max(linalg::max_abs_diff(&self.l, &other.l))
            .max((self.z_star - other.z_star).norm())
    }
}

/// Eigenvalues of Γ₁BΓ₁ restricted to the range of Γ₁, for comparing with
/// the zeros found by [`scan_real_axis`].
pub fn restricted_eigenvalues(problem: &ResolventProblem) -> Result<Vec<f64>> {
    let q = problem.proj.range_basis()?;
    let h = q.adjoint() * problem.b.materialize() * &q;
    let mut v = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&h))
        .ok_or(Error::EigenFailure { tag: operator::OperatorTag::Dense })?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::LocalOperator;
    use crate::linalg::c;
    use crate::projector::ProjectorSpec;
    use crate::random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk(seed: u64, n: usize, rank: usize, hermitian: bool, z0: C64) -> ResolventProblem {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let b = if hermitian { random::hermitian(&mut r, n) } else { random::general(&mut r, n) };
        let p = ProjectorSpec::dense_with_components(random::projector(&mut r, n, rank), n).unwrap();
        let bl = LocalOperator::new(None, n, vec![b]).unwrap();
        let pr = ResolventProblem::new(p, bl, z0).unwrap();
        let s = pr.random_source(&mut r).unwrap();
        pr.with_source(s).unwrap()
    }

    #[test]
    fn scalar_shift() {
        let pr = desk(1, 6, 3, true, cr(0.0));
        let beta = c(0.7, -0.2);
        let bl = LocalOperator::new(None, 6, vec![CMat::identity(6, 6) * beta]).unwrap();
        let pr = ResolventProblem { b: bl, ..pr };
        for z0 in [c(2.0, 1.0), c(-1.0, 0.3)] {
            let z = z_star_at(&pr.with_z0(z0)).unwrap().unwrap();
            assert!((z - (z0 - beta)).norm() < 1e-12);
        }
    }

    #[test]
    fn trio_laws() {
        let pr = desk(2, 6, 3, true, cr(1.0));
        let t = ProjectorTrio::new(&pr.proj.materialize().unwrap(), &pr.source.as_ref().unwrap().to_cvec());
        let (sum, cross) = t.defects();
        assert!(sum < 1e-12 && cross < 1e-12);
    }

    #[test]
    fn imaginary_sign_preserved() {
        let pr = desk(3, 8, 4, true, cr(1.0));
        let mut r = ChaCha8Rng::seed_from_u64(30);
        let z0s: Vec<C64> = (0..100).map(|_| c(r.random_range(-4.0..4.0), 0.5)).collect();
        let ep = z_star(&pr, &z0s).unwrap();
        assert_eq!(ep.samples.len(), 100);
        assert_eq!(ep.sign_violations(), 0);
    }

    #[test]
    fn zeros_are_restricted_eigenvalues_and_interlace() {
        let pr = desk(4, 8, 4, true, cr(1.0));
        let eig = restricted_eigenvalues(&pr).unwrap();
        let lo = eig[0] - 1.0;
        let hi = eig[eig.len() - 1] + 1.0;
        let scan = scan_real_axis(&pr, (lo, hi), DEFAULT_SCAN_POINTS).unwrap();
        assert_eq!(scan.zeros.len(), eig.len());
        for (z, e) in scan.zeros.iter().zip(&eig) {
            assert!((z - e).abs() < 1e-6);
        }
        assert!(scan.interlaced);
        assert_eq!(scan.poles.len(), eig.len() - 1);
    }

    #[test]
    fn dual_formula_agrees() {
        let pr = desk(5, 8, 4, true, c(2.0, 1.0));
        let chk = z_star_dual_check(&pr).unwrap();
        assert!(chk.deviation < 1e-8, "{chk:?}");
        assert!(!chk.degenerate);
        let pg = desk(6, 8, 4, false, c(0.5, -1.5));
        assert!(z_star_dual_check(&pg).unwrap().deviation < 1e-8);
    }

    #[test]
    fn full_projector_is_flagged() {
        let pr = desk(7, 4, 4, true, c(1.0, 1.0));
        let chk = z_star_dual_check(&pr).unwrap();
        assert!(chk.degenerate);
        assert!(chk.deviation < 1e-8);
    }

    #[test]
    fn replacement_is_an_involution() {
        let pr = desk(8, 6, 3, false, c(1.5, 0.5));
        let d = DualData::from_problem(&pr).unwrap();
        assert!(d.relation_defect() < 1e-12);
        let dd = d.dual().unwrap();
        assert!(dd.relation_defect() < 1e-12);
        assert!(d.max_abs_diff(&dd.dual().unwrap()) < 1e-12);
    }

    #[test]
    fn missing_source_rejected() {
        let pr = desk(9, 4, 2, true, cr(1.0));
        let bare = ResolventProblem { source: None, ..pr };
        assert!(z_star_at(&bare).is_err());
    }
}
