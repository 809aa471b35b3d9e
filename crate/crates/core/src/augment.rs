//! Doubling a non-Hermitian problem into a block problem whose operator is
//! Hermitian (for suitable splits), and the resolvent identity linking the
//! two.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, C64};
use crate::operator::{OperatorTag, DEFAULT_COND_CAP, DEFAULT_ORACLE_CAP};
use crate::par;
use crate::projector::ProjectorSpec;

/// How L = z₀I − B is split into L₁ + L₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitChoice {
    /// L₁ = Herm(L), L₂ = AntiHerm(L).
    Hermitian,
    /// L₁ = z₀I − Herm(B), L₂ = ½(B† − B).
    Z0Shifted,
}

pub fn split(b: &CMat, z0: C64, choice: SplitChoice) -> (CMat, CMat) {
    let n = b.nrows();
    match choice {
        SplitChoice::Hermitian => {
            let l = CMat::identity(n, n) * z0 - b;
            (linalg::hermitian_part(&l), linalg::antihermitian_part(&l))
        }
        SplitChoice::Z0Shifted => (CMat::identity(n, n) * z0 - linalg::hermitian_part(b), (b.adjoint() - b) * cr(0.5)),
    }
}

/// L⁰ = [[L₁⁻¹, −L₁⁻¹L₂], [L₂L₁⁻¹, L₁ − L₂L₁⁻¹L₂]] with its projector
/// Γ⁰₁ = diag(Γ₂, Γ₁).
#[derive(Clone, Debug)]
pub struct AugmentedBlock {
    pub l1: CMat,
    pub l2: CMat,
    pub l1_inv: CMat,
    pub l0: CMat,
    /// Dense Γ₁ and Γ₂.
    pub gamma1: CMat,
    pub gamma2: CMat,
    /// Orthonormal basis of the range of Γ⁰₁.
    pub q0: CMat,
}

fn dense_projector_parts(proj: &ProjectorSpec) -> Result<(CMat, CMat, CMat, CMat)> {
    if proj.dim() > DEFAULT_ORACLE_CAP / 2 {
        return Err(Error::DimensionExceedsCap { dim: 2 * proj.dim(), cap: DEFAULT_ORACLE_CAP });
    }
    let g1 = proj.materialize()?;
    let n = g1.nrows();
    let g2 = CMat::identity(n, n) - &g1;
    Ok((g1, g2, proj.range_basis()?, proj.complement().range_basis()?))
}

/// Builds L⁰ from a split. Fails when L₁ is singular.
pub fn augment(l1: &CMat, l2: &CMat, proj: &ProjectorSpec) -> Result<AugmentedBlock> {
    let (g1, g2, q1, q2) = dense_projector_parts(proj)?;
    augment_with(l1, l2, g1, g2, &q1, &q2)
}

fn augment_with(l1: &CMat, l2: &CMat, gamma1: CMat, gamma2: CMat, q1: &CMat, q2: &CMat) -> Result<AugmentedBlock> {
    let n = l1.nrows();
    if l2.shape() != l1.shape() || gamma1.nrows() != n {
        return Err(Error::ShapeMismatch { expected: n, got: l2.nrows() });
    }
    let cond = linalg::condition_number(l1);
    if !(cond <= DEFAULT_COND_CAP) {
        return Err(Error::L1Singular { cond });
    }
    let l1_inv = linalg::inverse(l1).ok_or(Error::L1Singular { cond })?;
    let mut l0 = CMat::zeros(2 * n, 2 * n);
    l0.view_mut((0, 0), (n, n)).copy_from(&l1_inv);
    l0.view_mut((0, n), (n, n)).copy_from(&(-(&l1_inv * l2)));
    l0.view_mut((n, 0), (n, n)).copy_from(&(l2 * &l1_inv));
    l0.view_mut((n, n), (n, n)).copy_from(&(l1 - l2 * &l1_inv * l2));
    let q0 = linalg::block_diag(&[q2, q1]);
    Ok(AugmentedBlock { l1: l1.clone(), l2: l2.clone(), l1_inv, l0, gamma1, gamma2, q0 })
}

/// Condition number after scaling every row to unit norm. The Γ₂ and Γ₁
/// halves of L⁰ scale like 1/w₀ and w₀, which alone would trip the cap.
fn equilibrated_condition(k: &CMat) -> f64 {
    let mut s = k.clone();
    for mut row in s.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= C64::new(n, 0.0);
        }
    }
    linalg::condition_number(&s)
}

impl AugmentedBlock {
    pub fn dim(&self) -> usize {
        self.l1.nrows()
    }

    /// Γ⁰₁ as a dense matrix.
    pub fn proj0(&self) -> CMat {
        linalg::block_diag(&[&self.gamma2, &self.gamma1])
    }

    /// H⁰ = (Γ⁰₁L⁰Γ⁰₁)⁻¹ on the range of Γ⁰₁, zero elsewhere; `w0` only
    /// labels a failure.
    fn h0_labelled(&self, w0: C64) -> Result<CMat> {
        let k = self.q0.adjoint() * &self.l0 * &self.q0;
        let cond = equilibrated_condition(&k);
        let err = Error::BlockSingular { re: w0.re, im: w0.im };
        if !(cond <= DEFAULT_COND_CAP) {
            return Err(err);
        }
        let kinv = linalg::inverse(&k).ok_or(err)?;
        Ok(&self.q0 * kinv * self.q0.adjoint())
    }

    pub fn h0(&self) -> Result<CMat> {
        self.h0_labelled(C64::new(f64::NAN, f64::NAN))
    }

    /// The same H⁰ written as [z⁰I − Γ⁰₁B⁰]⁻¹Γ⁰₁ with B⁰ = z⁰I − L⁰.
    pub fn h0_via(&self, z_aug: C64) -> Result<CMat> {
        let m = 2 * self.dim();
        let p0 = self.proj0();
        let b0 = CMat::identity(m, m) * z_aug - &self.l0;
        let k = CMat::identity(m, m) * z_aug - &p0 * b0;
        let cond = equilibrated_condition(&k);
        if !(cond <= DEFAULT_COND_CAP) {
            return Err(Error::BlockSingular { re: z_aug.re, im: z_aug.im });
        }
        Ok(linalg::inverse(&k).ok_or(Error::BlockSingular { re: z_aug.re, im: z_aug.im })? * p0)
    }

    /// (0 I)H⁰(−I; L₁ − L₂)L₁⁻¹ − (Γ₁ − I)/z₀.
    pub fn resolvent_from_h0(&self, h0: &CMat, z0: C64) -> CMat {
        let n = self.dim();
        let lower_rows = h0.rows(n, n);
        let mut stack = CMat::zeros(2 * n, n);
        stack.view_mut((0, 0), (n, n)).copy_from(&(-CMat::identity(n, n)));
        stack.view_mut((n, 0), (n, n)).copy_from(&(&self.l1 - &self.l2));
        let first = lower_rows * stack * &self.l1_inv;
        first - (&self.gamma1 - CMat::identity(n, n)) / z0
    }
}

/// Outcome of checking the resolvent identity on random probes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// Max relative deviation between (z₀I − Γ₁BΓ₁)⁻¹ and the block form.
    pub deviation: f64,
    /// Max-abs difference of H⁰ computed through z⁰ = 1 and z⁰ = 2.5.
    pub z_aug_spread: f64,
}

/// Compares (z₀I − Γ₁BΓ₁)⁻¹ with (0 I)H⁰(−I; L₁ − L₂)L₁⁻¹ − (Γ₁ − I)/z₀.
pub fn remarkable_identity_check<R: Rng + ?Sized>(
    b: &CMat,
    proj: &ProjectorSpec,
    z0: C64,
    choice: SplitChoice,
    probes: usize,
    rng: &mut R,
) -> Result<IdentityCheck> {
    if z0 == cr(0.0) {
        return Err(Error::ZeroZ0);
    }
    let (l1, l2) = split(b, z0, choice);
    let aug = augment(&l1, &l2, proj)?;
    let n = b.nrows();
    let a = &aug.gamma1 * b * &aug.gamma1;
    let m = CMat::identity(n, n) * z0 - a;
    let cond = linalg::condition_number(&m);
    if !(cond <= DEFAULT_COND_CAP) {
        return Err(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP });
    }
    let lhs = linalg::inverse(&m).ok_or(Error::SingularRestriction { cond, cap: DEFAULT_COND_CAP })?;
    let h0 = aug.h0_via(cr(1.0))?;
    let h0b = aug.h0_via(cr(2.5))?;
    let rhs = aug.resolvent_from_h0(&h0, z0);
    let mut deviation: f64 = 0.0;
    for _ in 0..probes {
        let v = CVec::from_vec(crate::random::complex_vector(rng, n));
        let x = &lhs * &v;
        let y = &rhs * &v;
        deviation = deviation.max((&x - &y).norm() / x.norm().max(f64::MIN_POSITIVE));
    }
    Ok(IdentityCheck { deviation, z_aug_spread: linalg::max_abs_diff(&h0, &h0b) })
}

/// c = λ_max(Herm B) + 0.1‖B‖ (0.1 when B = 0), so that cI − Herm B > 0.
pub fn default_c(b: &CMat) -> Result<f64> {
    let top = linalg::lambda_max(b).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?;
    let nrm = linalg::op_norm(b);
    Ok(top + if nrm > 0.0 { 0.1 * nrm } else { 0.1 })
}

/// The z₀-shifted family L₁ = w₀I + M₀, L₂ = ½(B† − B) with
/// M₀ = cI − Herm B > 0 and w₀ = z₀ − c.
#[derive(Clone, Debug)]
pub struct AugmentedProblem {
    pub b: CMat,
    pub proj: ProjectorSpec,
    pub c: f64,
    pub m0: CMat,
    /// λ_min(M₀).
    pub coercivity_margin: f64,
    l2: CMat,
    gamma1: CMat,
    gamma2: CMat,
    q1: CMat,
    q2: CMat,
}

impl AugmentedProblem {
    pub fn new(b: &CMat, proj: &ProjectorSpec, c: Option<f64>) -> Result<Self> {
        if b.nrows() != proj.dim() || b.ncols() != proj.dim() {
            return Err(Error::ShapeMismatch { expected: proj.dim(), got: b.nrows() });
        }
        let c = match c {
            Some(c) => c,
            None => default_c(b)?,
        };
        let n = b.nrows();
        let m0 = CMat::identity(n, n) * cr(c) - linalg::hermitian_part(b);
        let margin = linalg::lambda_min(&m0).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?;
        if margin <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "c = {c} leaves cI − Herm(B) without a positive margin (λ_min = {margin:.3e})"
            )));
        }
        let (gamma1, gamma2, q1, q2) = dense_projector_parts(proj)?;
        Ok(Self {
            b: b.clone(),
            proj: proj.clone(),
            c,
            m0,
            coercivity_margin: margin,
            l2: (b.adjoint() - b) * cr(0.5),
            gamma1,
            gamma2,
            q1,
            q2,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn at_w0(&self, w0: C64) -> Result<AugmentedBlock> {
        let n = self.dim();
        let l1 = &self.m0 + CMat::identity(n, n) * w0;
        augment_with(&l1, &self.l2, self.gamma1.clone(), self.gamma2.clone(), &self.q1, &self.q2)
    }

    /// H₁ = diag(Γ₂, 0).
    pub fn h1(&self) -> CMat {
        let n = self.dim();
        linalg::block_diag(&[&self.gamma2, &CMat::zeros(n, n)])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct H0Evaluation {
    pub w0: C64,
    #[serde(skip)]
    pub h0: CMat,
    /// λ_min of Herm(H⁰) on the range of Γ⁰₁.
    pub hermitian_min: f64,
    pub hermiticity_defect: f64,
    /// ‖H⁰/w₀ − H₁‖_F / ‖H₁‖_F.
    pub asymptotic_deviation: f64,
}

/// One row of an H⁰ sweep export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct H0Row {
    pub re_w0: f64,
    pub im_w0: f64,
    pub hermitian_min: f64,
    pub hermiticity_defect: f64,
    pub asymptotic_deviation: f64,
}

impl From<&H0Evaluation> for H0Row {
    fn from(e: &H0Evaluation) -> Self {
        Self {
            re_w0: e.w0.re,
            im_w0: e.w0.im,
            hermitian_min: e.hermitian_min,
            hermiticity_defect: e.hermiticity_defect,
            asymptotic_deviation: e.asymptotic_deviation,
        }
    }
}

pub fn evaluate_h0(aug: &AugmentedProblem, w0: C64) -> Result<H0Evaluation> {
    let blk = aug.at_w0(w0).map_err(|e| match e {
        Error::L1Singular { .. } => Error::BlockSingular { re: w0.re, im: w0.im },
        other => other,
    })?;
    let h0 = blk.h0_labelled(w0)?;
    let restricted = blk.q0.adjoint() * &h0 * &blk.q0;
    let hermitian_min = linalg::lambda_min(&restricted).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?;
    let h1 = aug.h1();
    let h1n = h1.norm().max(f64::MIN_POSITIVE);
    let asymptotic_deviation = (&h0 / w0 - &h1).norm() / h1n;
    Ok(H0Evaluation {
        w0,
        hermiticity_defect: linalg::hermiticity_defect(&h0),
        hermitian_min,
        asymptotic_deviation,
        h0,
    })
}

/// Evaluates H⁰ at each w₀ in parallel.
pub fn h0_sweep(aug: &AugmentedProblem, w0s: &[C64]) -> Result<Vec<H0Evaluation>> {
    par::map_slice(w0s, |&w| evaluate_h0(aug, w)).into_iter().collect()
}
