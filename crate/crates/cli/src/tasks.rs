//! One function per task kind. Each runs on a single built problem and
//! returns metrics, named checks and tables; nothing here touches the disk.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resolvent_lab::augment::{
    default_c, h0_sweep, remarkable_identity_check, split, AugmentedProblem, H0Row, SplitChoice,
};
use resolvent_lab::bounds::{
    coupled_translation, krylov_basis, power_refine, random_basis, rayleigh_ritz, translation_bounds,
};
use resolvent_lab::composite::{shift_by_null_t, NullTOperator};
use resolvent_lab::contour::{matrix_function_contour_dense, Circle};
use resolvent_lab::effective::{restricted_eigenvalues, scan_real_axis, z_star, z_star_dual_check, DualData};
use resolvent_lab::linalg::{self, c, cr, CMat, CVec, C64};
use resolvent_lab::operator::{IntervalKind, SpectrumInterval, DEFAULT_ORACLE_CAP};
use resolvent_lab::projector::ProjectorFamily;
use resolvent_lab::resolvent::{
    backend_deviation, default_reference, r_chain_deviation, solve_field, spectrum_reflection_check, verify_duality,
    verify_reference_independence, ResolventProblem, SolveMethod,
};
use resolvent_lab::stieltjes::{default_lambda_max, invert_measure, sample_f, InversionOptions};
use resolvent_lab::{io, par, random, ComplexField, LocalOperator};
use serde::Serialize;
use serde_json::{json, Value};

use crate::failure::Failure;
use crate::scenario::{Built, ContourSpec, IdentityKind, TaskSpec, TranslationChoice};

/// Errors below this are treated as converged when judging node doubling.
pub const CONTOUR_FLOOR: f64 = 1e-13;
/// Hermiticity of H⁰ at real w₀, relative to its largest entry.
pub const H0_HERMITIAN_TOL: f64 = 1e-10;
/// Allowed distance of each log-log slope from −1.
pub const H0_SLOPE_TOL: f64 = 0.2;
pub const PSD_FLOOR: f64 = -1e-8;
pub const QSTAR_FLOOR: f64 = -1e-10;
pub const ZERO_MATCH_TOL: f64 = 1e-6;
pub const DUAL_TOL: f64 = 1e-8;
pub const INVOLUTION_TOL: f64 = 1e-10;
pub const SCALAR_IDENTITY_TOL: f64 = 1e-14;
pub const BACKEND_TOL: f64 = 1e-10;
pub const NULL_DEFECT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    Above,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub invariant: String,
    pub value: f64,
    pub limit: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Check {
    pub fn at_most(invariant: &str, value: f64, limit: f64) -> Self {
        Self { invariant: invariant.into(), value, limit, bound: Bound::AtMost, pass: value <= limit }
    }

    /// Strictly greater than `limit`.
    pub fn above(invariant: &str, value: f64, limit: f64) -> Self {
        Self { invariant: invariant.into(), value, limit, bound: Bound::Above, pass: value > limit }
    }

    pub fn flag(invariant: &str, ok: bool) -> Self {
        Self::at_most(invariant, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| number(*v)).collect());
    }
}

/// Integers print plainly, everything else in shortest round-trip
/// scientific form.
pub fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Debug)]
pub enum Binary {
    Field(ComplexField),
    Matrix(CMat),
}

#[derive(Clone, Debug, Default)]
pub struct TrialOutput {
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub binaries: Vec<(String, Binary)>,
}

impl TrialOutput {
    fn metric(&mut self, key: &str, v: impl Into<Value>) {
        self.metrics.insert(key.into(), v.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_task(task: &TaskSpec, built: &Built, rng: &mut ChaCha8Rng) -> Result<TrialOutput, Failure> {
    match task {
        TaskSpec::Solve { z0, method, tolerance, save_field } => {
            solve(built, z0.value(), *method, *tolerance, *save_field, rng)
        }
        TaskSpec::ResolventSweep { z0s, probes, max_deviation, contour } => {
            let z0s: Vec<C64> = z0s.iter().map(|z| z.value()).collect();
            resolvent_sweep(built, &z0s, *probes, *max_deviation, contour.as_ref(), rng)
        }
        TaskSpec::Bounds { subspace, powers, translation, alpha, krylov, power_tolerance } => {
            bounds(built, *subspace, powers, *translation, *alpha, *krylov, *power_tolerance, rng)
        }
        TaskSpec::AugmentVerify { z0s, split, probes, max_deviation, w0s, slope_check, scalar_case } => {
            let z0s: Vec<C64> = z0s.iter().map(|z| z.value()).collect();
            let w0s: Vec<C64> = w0s.iter().map(|z| z.value()).collect();
            augment_verify(built, &z0s, *split, *probes, *max_deviation, &w0s, *slope_check, *scalar_case, rng)
        }
        TaskSpec::Stieltjes { epsilon, grid, lambda_max, richardson, holdout, tolerance, halving_check } => {
            stieltjes(built, *epsilon, *grid, *lambda_max, *richardson, *holdout, *tolerance, *halving_check)
        }
        TaskSpec::Zstar { samples, imag, scan_points, dual_z0 } => {
            zstar(built, *samples, *imag, *scan_points, dual_z0.map(|z| z.value()), rng)
        }
        TaskSpec::Identities { z0, checks, probes, reference_media, tolerance } => {
            identities(built, z0.value(), checks, *probes, reference_media, *tolerance, rng)
        }
    }
}

fn problem(built: &Built, z0: C64) -> Result<ResolventProblem, Failure> {
    Ok(ResolventProblem::new(built.proj.clone(), built.b.clone(), z0)?)
}

fn with_source(p: ResolventProblem, rng: &mut ChaCha8Rng) -> Result<ResolventProblem, Failure> {
    let s = p.random_source(rng)?;
    Ok(p.with_source(s)?)
}

fn require_dense(built: &Built, what: &str) -> Result<CMat, Failure> {
    let n = built.proj.dim();
    if n > DEFAULT_ORACLE_CAP {
        return Err(Failure::Config(format!("{what} needs a problem of dimension ≤ {DEFAULT_ORACLE_CAP}, got {n}")));
    }
    Ok(built.b.materialize())
}

fn b_scale(b: &LocalOperator) -> f64 {
    b.blocks().iter().map(linalg::op_norm).fold(0.0, f64::max)
}

fn relative_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(f64::MIN_POSITIVE)
}

fn solve(
    built: &Built,
    z0: C64,
    method: SolveMethod,
    tol: f64,
    save: bool,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutput, Failure> {
    let p = with_source(problem(built, z0)?, rng)?;
    let rep = solve_field(&p, None, method, tol)?;
    let mut out = TrialOutput::default();
    out.metric("method", serde_json::to_value(rep.method).unwrap_or(Value::Null));
    out.metric("iterations", rep.iterations);
    out.metric("residual", rep.residual);
    out.metric("constraint_defect", rep.constraint_defect);
    out.metric("norm_s", rep.norms.source);
    out.metric("norm_e", rep.norms.e);
    out.metric("norm_j", rep.norms.j);
    out.checks.push(Check::at_most("solve-residual", rep.residual, 10.0 * tol));
    out.checks.push(Check::at_most("solve-constraints", rep.constraint_defect, 10.0 * tol));
    if rep.method != SolveMethod::Dense && p.dim() <= DEFAULT_ORACLE_CAP {
        let oracle = solve_field(&p, None, SolveMethod::Dense, tol)?;
        let dev = relative_diff(rep.field_e(), oracle.field_e());
        out.metric("oracle_deviation", dev);
        out.checks.push(Check::at_most("solver-oracle-agreement", dev, 10.0 * tol));
    }
    if save {
        out.binaries.push(("source".into(), Binary::Field(p.source.clone().expect("source attached"))));
        out.binaries.push(("e".into(), Binary::Field(rep.field_e().clone())));
        out.binaries.push(("j".into(), Binary::Field(rep.field_j().clone())));
    }
    Ok(out)
}

fn sub_rng(rng: &mut ChaCha8Rng, count: usize) -> Vec<u64> {
    (0..count).map(|_| rng.random()).collect()
}

fn resolvent_sweep(
    built: &Built,
    z0s: &[C64],
    probes: usize,
    max_dev: f64,
    contour: Option<&ContourSpec>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutput, Failure> {
    if z0s.is_empty() {
        return Err(Failure::Config("resolvent-sweep needs at least one z0".into()));
    }
    let base = problem(built, z0s[0])?;
    let seeds = sub_rng(rng, z0s.len());
    let devs = par::try_map_range(z0s.len(), |i| {
        let mut r = ChaCha8Rng::seed_from_u64(seeds[i]);
        r_chain_deviation(&base.with_z0(z0s[i]), probes, &mut r).map_err(Failure::from)
    })?;
    let mut out = TrialOutput::default();
    let mut table = Table::new("chain", &["re_z0", "im_z0", "deviation"]);
    for (z, d) in z0s.iter().zip(&devs) {
        table.push(&[z.re, z.im, *d]);
    }
    let worst = devs.iter().copied().fold(0.0, f64::max);
    out.metric("max_deviation", worst);
    out.checks.push(Check::at_most("resolvent-chain", worst, max_dev));
    out.tables.push(table);
    if let Some(spec) = contour {
        contour_check(built, &base, spec, &mut out)?;
    }
    Ok(out)
}

fn zero_operator(b: &LocalOperator) -> Result<LocalOperator, Failure> {
    let m = b.components;
    Ok(LocalOperator::constant(b.grid.clone(), b.points(), &CMat::zeros(m, m))?)
}

fn contour_check(
    built: &Built,
    p: &ResolventProblem,
    spec: &ContourSpec,
    out: &mut TrialOutput,
) -> Result<(), Failure> {
    require_dense(built, "contour check")?;
    if !built.b.is_hermitian(1e-12) {
        return Err(Failure::Config("contour check needs Hermitian B".into()));
    }
    if spec.nodes.is_empty() {
        return Err(Failure::Config("contour check needs at least one node count".into()));
    }
    let a = p.materialize_a()?;
    let zero = zero_operator(&built.b)?;
    let cert = translation_bounds(&built.b, &zero, Some(&zero), &built.proj)?;
    let interval = cert.interval().expect("two-sided certificate");
    let circle = Circle::from_bounds(&interval, true);
    let oracle = linalg::hermitian_function(&a, |x| cr(x.exp()))
        .ok_or_else(|| Failure::assertion("eigensolver-convergence", "Hermitian eigendecomposition failed"))?;
    let scale = linalg::max_abs(&oracle);
    let mut table = Table::new("contour", &["nodes", "error"]);
    let mut errs = Vec::new();
    for &n in &spec.nodes {
        let f = matrix_function_contour_dense(&a, |z| z.exp(), &circle, n)?;
        let e = linalg::max_abs_diff(&f, &oracle) / scale;
        table.push(&[n as f64, e]);
        errs.push(e);
    }
    let last = *errs.last().expect("nonempty");
    out.metric("contour_center", circle.center.re);
    out.metric("contour_radius", circle.radius);
    out.metric("contour_error", last);
    out.checks.push(Check::at_most("contour-accuracy", last, spec.tolerance));
    if errs.len() > 1 {
        let worst_gain = errs
            .windows(2)
            .map(|w| if w[1] <= CONTOUR_FLOOR { f64::INFINITY } else { w[0] / w[1] })
            .fold(f64::INFINITY, f64::min);
        out.metric("contour_min_gain", if worst_gain.is_finite() { json!(worst_gain) } else { json!("floor") });
        out.checks.push(Check::above("contour-doubling-gain", worst_gain, 10.0 - 1e-9));
    }
    out.tables.push(table);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bounds(
    built: &Built,
    subspace: usize,
    powers: &[usize],
    translation: TranslationChoice,
    alpha: f64,
    krylov: bool,
    power_tol: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutput, Failure> {
    let b = &built.b;
    let proj = &built.proj;
    if !b.is_hermitian(1e-12) {
        return Err(Failure::Config("bounds task needs Hermitian B".into()));
    }
    if subspace == 0 {
        return Err(Failure::Config("subspace must be at least 1".into()));
    }
    let p = problem(built, cr(1.0))?;
    let a = p.a_operator();
    let basis = if krylov {
        let start = random_basis(rng, proj, 1).swap_remove(0);
        krylov_basis(&a, proj, &start, subspace)?
    } else {
        random_basis(rng, proj, subspace)
    };
    let rr = rayleigh_ritz(&a, proj, &basis)?;

    let zero = zero_operator(b)?;
    let cert = match translation {
        TranslationChoice::Zero => translation_bounds(b, &zero, Some(&zero), proj)?,
        TranslationChoice::Rperp => {
            let grid = built
                .grid
                .as_ref()
                .filter(|g| g.dims == 2 && b.components == 2)
                .ok_or_else(|| Failure::Config("rperp translation needs a 2D grid with two components".into()))?;
            let t = NullTOperator::rperp_2d(grid, c(0.0, alpha))?;
            translation_bounds(b, &t.op, Some(&t.op.scaled(cr(-1.0))), proj)?
        }
        TranslationChoice::Coupled => {
            let m = b.components;
            let vs: Vec<CVec> = (0..m).map(|i| CVec::from_fn(m, |j, _| cr((i == j) as u8 as f64))).collect();
            let coupled = coupled_translation(b, m, &CMat::identity(m, m), &vs, proj)?;
            let upper = translation_bounds(b, &zero, Some(&zero), proj)?;
            let mut c = coupled;
            c.a_plus = upper.a_plus;
            c
        }
    };
    let outer = cert
        .interval()
        .ok_or_else(|| Failure::assertion("outer-bounds", "translation certificate has no two-sided interval"))?;
    let mut out = finish_bounds(built, &p, &a, &rr, powers, &outer, cert.k_sample_min(), power_tol)?;
    if let Some(cd) = &cert.coupled {
        out.metric("nu", cd.nu);
        out.metric("inverse_nu", cd.inverse_nu);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn finish_bounds(
    built: &Built,
    p: &ResolventProblem,
    a: &resolvent_lab::OperatorHandle,
    rr: &resolvent_lab::bounds::RayleighRitzResult,
    powers: &[usize],
    outer: &SpectrumInterval,
    k_min: f64,
    power_tol: Option<f64>,
) -> Result<TrialOutput, Failure> {
    let mut out = TrialOutput::default();
    let scale = b_scale(&built.b).max(1.0);
    let tol = 1e-9 * scale;
    let mut table =
        Table::new("power", &["n", "c_minus_raw", "c_plus_raw", "lower", "upper", "valid_minus", "valid_plus"]);
    let mut inner = SpectrumInterval::new(rr.c_minus_rr, rr.c_plus_rr, IntervalKind::Inner);
    let mut monotone = true;
    let mut prev: Option<(f64, f64)> = None;
    let mut last_valid_plus = false;
    for &n in powers {
        let pr = power_refine(a, rr, n, Some(outer))?;
        table.push(&[
            n as f64,
            pr.c_minus_raw,
            pr.c_plus_raw,
            pr.interval.lower,
            pr.interval.upper,
            pr.valid_minus as u8 as f64,
            pr.valid_plus as u8 as f64,
        ]);
        if let Some((lo, hi)) = prev {
            monotone &= pr.c_plus_raw >= hi - tol && pr.c_minus_raw <= lo + tol;
        }
        prev = Some((pr.c_minus_raw, pr.c_plus_raw));
        inner = pr.interval;
        last_valid_plus = pr.valid_plus;
    }
    out.metric("rr_lower", rr.c_minus_rr);
    out.metric("rr_upper", rr.c_plus_rr);
    out.metric("inner_lower", inner.lower);
    out.metric("inner_upper", inner.upper);
    out.metric("outer_lower", outer.lower);
    out.metric("outer_upper", outer.upper);
    out.metric("k_sample_min", k_min);
    out.checks.push(Check::above("qstar-k-sample", k_min, QSTAR_FLOOR));
    out.checks.push(Check::flag("power-monotone", monotone));
    if p.dim() <= DEFAULT_ORACLE_CAP {
        let eig = restricted_eigenvalues(p)?;
        let (lo, hi) = (eig[0], *eig.last().expect("nonempty spectrum"));
        out.metric("oracle_lower", lo);
        out.metric("oracle_upper", hi);
        out.checks.push(Check::at_most("inner-within-oracle", (lo - inner.lower).max(inner.upper - hi), tol));
        out.checks.push(Check::at_most("oracle-within-outer", (outer.lower - lo).max(hi - outer.upper), tol));
        if let Some(pt) = power_tol {
            if last_valid_plus {
                let rel = (hi - inner.upper).abs() / hi.abs().max(f64::MIN_POSITIVE);
                out.metric("power_upper_gap", rel);
                out.checks.push(Check::at_most("power-accuracy", rel, pt));
            }
        }
    } else {
        out.checks.push(Check::at_most(
            "inner-within-outer",
            (outer.lower - inner.lower).max(inner.upper - outer.upper),
            tol,
        ));
    }
    out.tables.push(table);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn augment_verify(
    built: &Built,
    z0s: &[C64],
    choice: SplitChoice,
    probes: usize,
    max_dev: f64,
    w0s: &[C64],
    slope_check: bool,
    scalar_case: Option<[f64; 2]>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutput, Failure> {
    let b = require_dense(built, "augment-verify")?;
    let proj = &built.proj;
    let mut out = TrialOutput::default();
    let z0s = if z0s.is_empty() { vec![cr(default_c(&b)? + 2.0)] } else { z0s.to_vec() };
    let mut table = Table::new("identity", &["re_z0", "im_z0", "deviation", "z_aug_spread"]);
    let (mut worst, mut spread) = (0.0f64, 0.0f64);
    for &z0 in &z0s {
        let chk = remarkable_identity_check(&b, proj, z0, choice, probes, rng)?;
        table.push(&[z0.re, z0.im, chk.deviation, chk.z_aug_spread]);
        worst = worst.max(chk.deviation);
        spread = spread.max(chk.z_aug_spread);
    }
    out.metric("max_deviation", worst);
    out.metric("max_z_aug_spread", spread);
    out.checks.push(Check::at_most("augmented-identity", worst, max_dev));
    out.checks.push(Check::at_most("augmented-z-independence", spread, max_dev));
    out.tables.push(table);

    if !w0s.is_empty() || slope_check {
        let aug = AugmentedProblem::new(&b, proj, None)?;
        out.metric("c", aug.c);
        out.metric("coercivity_margin", aug.coercivity_margin);
        if !w0s.is_empty() {
            let evals = h0_sweep(&aug, w0s)?;
            let mut t =
                Table::new("h0", &["re_w0", "im_w0", "hermitian_min", "hermiticity_defect", "asymptotic_deviation"]);
            let (mut herm, mut pos) = (0.0f64, f64::INFINITY);
            let (mut any_real, mut any_right) = (false, false);
            for e in &evals {
                let r = H0Row::from(e);
                t.push(&[r.re_w0, r.im_w0, r.hermitian_min, r.hermiticity_defect, r.asymptotic_deviation]);
                if e.w0.im == 0.0 && e.w0.re > 0.0 {
                    any_real = true;
                    herm = herm.max(e.hermiticity_defect / linalg::max_abs(&e.h0).max(f64::MIN_POSITIVE));
                }
                if e.w0.re > 0.0 {
                    any_right = true;
                    pos = pos.min(e.hermitian_min);
                }
            }
            if any_real {
                out.metric("h0_hermiticity", herm);
                out.checks.push(Check::at_most("h0-hermitian-real-w0", herm, H0_HERMITIAN_TOL));
            }
            if any_right {
                out.metric("h0_hermitian_min", pos);
                out.checks.push(Check::above("h0-positive-hermitian-part", pos, 0.0));
            }
            out.tables.push(t);
        }
        if slope_check {
            let ws = [cr(1e2), cr(1e3), cr(1e4)];
            let evals = h0_sweep(&aug, &ws)?;
            let d: Vec<f64> = evals.iter().map(|e| e.asymptotic_deviation).collect();
            let slopes: Vec<f64> = d.windows(2).map(|w| (w[1] / w[0]).log10()).collect();
            let off = slopes.iter().map(|s| (s + 1.0).abs()).fold(0.0, f64::max);
            out.metric("h0_slopes", slopes.clone());
            out.checks.push(Check::at_most("h0-asymptotic-slope", off, H0_SLOPE_TOL));
        }
    }

    if let Some([z1, z2]) = scalar_case {
        let z = c(z1, z2);
        let z0 = c(0.5, 0.25);
        let bs = CMat::from_element(1, 1, z0 - z);
        let p1 = resolvent_lab::ProjectorSpec::dense(CMat::identity(1, 1))?;
        let (l1, l2) = split(&bs, z0, SplitChoice::Hermitian);
        let blk = resolvent_lab::augment(&l1, &l2, &p1)?;
        let r = blk.resolvent_from_h0(&blk.h0()?, z0)[(0, 0)];
        let expect = c(z1, -z2) / cr(z1 * z1 + z2 * z2);
        let dev = (r - expect).norm();
        out.metric("scalar_deviation", dev);
        out.checks.push(Check::at_most("scalar-closed-form", dev, SCALAR_IDENTITY_TOL));
    }
    Ok(out)
}

/// `count` points spread geometrically over [0.1, 100], offset from the
/// endpoints.
pub fn holdout_points(count: usize) -> Vec<f64> {
    (0..count).map(|i| 0.1 * 1000f64.powf((i as f64 + 0.5) / count as f64)).collect()
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn stieltjes(
    built: &Built,
    eps: f64,
    grid: usize,
    lambda_max: Option<f64>,
    richardson: bool,
    holdout: usize,
    tol: f64,
    halving: bool,
) -> Result<TrialOutput, Failure> {
    let b = require_dense(built, "stieltjes")?;
    if holdout == 0 {
        return Err(Failure::Config("holdout must be at least 1".into()));
    }
    let aug = AugmentedProblem::new(&b, &built.proj, None)?;
    let lmax = lambda_max.unwrap_or_else(|| default_lambda_max(&aug));
    let opts = |e: f64| {
        if richardson {
            InversionOptions::richardson((0.0, lmax), e, grid)
        } else {
            InversionOptions::new((0.0, lmax), e, grid)
        }
    };
    let measure = invert_measure(&aug, &opts(eps))?;
    let vs = holdout_points(holdout);
    let f = |v: C64| sample_f(&aug, v);
    let errs = measure.reconstruction_errors(f, &vs)?;
    let mut out = TrialOutput::default();
    let max_err = errs.iter().copied().fold(0.0, f64::max);
    out.metric("lambda_max", lmax);
    out.metric("epsilon", measure.epsilon_used);
    out.metric("richardson", measure.extrapolated());
    out.metric("psd_margin", measure.psd_margin);
    out.metric("max_error", max_err);
    out.metric("rms_error", rms(&errs));
    out.checks.push(Check::above("measure-psd", measure.psd_margin, PSD_FLOOR));
    out.checks.push(Check::at_most("stieltjes-roundtrip", max_err, tol));
    let mut t = Table::new("holdout", &["v", "error"]);
    let mut half_errs = None;
    if halving {
        let m2 = invert_measure(&aug, &opts(eps / 2.0))?;
        let e2 = m2.reconstruction_errors(f, &vs)?;
        let ratio = rms(&e2) / rms(&errs);
        out.metric("rms_error_half_epsilon", rms(&e2));
        out.metric("halving_ratio", ratio);
        out.checks.push(Check::above("measure-psd-half-epsilon", m2.psd_margin, PSD_FLOOR));
        out.checks.push(Check::above("epsilon-halving-gain", -ratio, -1.0));
        t.header.push("error_half_epsilon".into());
        half_errs = Some(e2);
    }
    for (i, v) in vs.iter().enumerate() {
        let mut row = vec![*v, errs[i]];
        if let Some(h) = &half_errs {
            row.push(h[i]);
        }
        t.push(&row);
    }
    out.tables.push(t);
    let mut density = Table::new("density", &[]);
    density.header = measure.header();
    for r in measure.rows() {
        density.push(&r);
    }
    out.tables.push(density);
    Ok(out)
}

fn zstar(
    built: &Built,
    samples: usize,
    imag: f64,
    scan_points: usize,
    dual_z0: Option<C64>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutput, Failure> {
    if !(imag > 0.0) {
        return Err(Failure::Config("imag must be positive".into()));
    }
    let p = with_source(problem(built, cr(1.0))?, rng)?;
    let hermitian = built.b.is_hermitian(1e-12);
    let reach = 2.0 * b_scale(&built.b) + 1.0;
    let z0s: Vec<C64> = (0..samples)
        .map(|i| {
            let x = rng.random_range(-reach..reach);
            let y = imag * rng.random_range(0.2..1.0);
            c(x, if i % 2 == 0 { y } else { -y })
        })
        .collect();
    let eff = z_star(&p, &z0s)?;
    let mut out = TrialOutput::default();
    let mut t = Table::new("samples", &["re_z0", "im_z0", "re_zstar", "im_zstar"]);
    for s in &eff.samples {
        t.push(&[s.z0.re, s.z0.im, s.z_star.re, s.z_star.im]);
    }
    out.tables.push(t);
    out.metric("samples", eff.samples.len());
    out.metric("pole_candidates", eff.pole_candidates.len());
    out.metric("sign_violations", eff.sign_violations());
    if hermitian {
        out.checks.push(Check::at_most("zstar-half-plane", eff.sign_violations() as f64, 0.0));
    }
    if hermitian && p.dim() <= DEFAULT_ORACLE_CAP {
        let eig = restricted_eigenvalues(&p)?;
        let window = (eig[0] - 1.0, eig[eig.len() - 1] + 1.0);
        let scan = scan_real_axis(&p, window, scan_points)?;
        let gap = scan
            .zeros
            .iter()
            .map(|z| eig.iter().map(|e| (e - z).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        out.metric("zeros", scan.zeros.clone());
        out.metric("poles", scan.poles.clone());
        out.metric("zero_oracle_gap", gap);
        out.checks.push(Check::flag("pole-zero-interlacing", scan.interlaced && !scan.zeros.is_empty()));
        out.checks.push(Check::at_most("zstar-zeros-match-spectrum", gap, ZERO_MATCH_TOL));
    }
    if let Some(z) = dual_z0 {
        let pz = p.with_z0(z);
        let dc = z_star_dual_check(&pz)?;
        out.metric("dual_primal", vec![dc.primal.re, dc.primal.im]);
        out.metric("dual_dual", vec![dc.dual.re, dc.dual.im]);
        out.metric("dual_degenerate", dc.degenerate);
        if !dc.degenerate {
            out.checks.push(Check::at_most("zstar-dual-formula", dc.deviation, DUAL_TOL));
        }
        let d = DualData::from_problem(&pz)?;
        let d1 = d.dual()?;
        let back = d1.dual()?;
        let scale = d.s.camax().max(d.z_star.norm()).max(1.0);
        out.checks.push(Check::at_most("dual-involution", d.max_abs_diff(&back) / scale, INVOLUTION_TOL));
        out.checks.push(Check::at_most("dual-relation", d.relation_defect().max(d1.relation_defect()), INVOLUTION_TOL));
    }
    Ok(out)
}

/// Null-T operators from the catalog that pair with this projector.
fn null_catalog(built: &Built, rng: &mut ChaCha8Rng) -> Result<Vec<(String, NullTOperator)>, Failure> {
    let (Some(grid), Some(fp)) = (built.grid.as_ref(), built.proj.as_fourier()) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    match (fp.family, grid.dims, fp.components()) {
        (ProjectorFamily::Conductivity, 2, 2) => {
            out.push(("rperp-imaginary".into(), NullTOperator::rperp_2d(grid, c(0.0, 1.0))?));
            out.push(("rperp-real".into(), NullTOperator::rperp_2d(grid, cr(1.0))?));
        }
        (ProjectorFamily::Conductivity, 3, 3) => {
            // A single Fourier mode keeps η(∇ψ)∇φ free of aliasing on the grid,
            // so the null property holds to rounding.
            let axis = rng.random_range(0..3);
            let psi: Vec<C64> = (0..grid.points())
                .map(|i| {
                    let x = grid.coords(i)[axis] as f64;
                    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * x / grid.n as f64)
                })
                .collect();
            out.push((format!("antisymmetric-divfree-axis{axis}"), NullTOperator::from_potential_3d(grid, &psi)?));
        }
        (ProjectorFamily::VectorGradient, d, m) if m == d * d => {
            out.push(("elasticity-trace".into(), NullTOperator::elasticity_trace(grid)?));
        }
        _ => {}
    }
    Ok(out)
}

fn identities(
    built: &Built,
    z0: C64,
    checks: &[IdentityKind],
    probes: usize,
    reference_media: &[Value],
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutput, Failure> {
    if checks.is_empty() {
        return Err(Failure::Config("identities task needs at least one check".into()));
    }
    let p = problem(built, z0)?;
    let m = p.components();
    let mut out = TrialOutput::default();
    let mut table = Table::new("identities", &["identity", "deviation", "limit"]);
    let mut record = |out: &mut TrialOutput, name: &str, dev: f64, limit: f64| {
        table.rows.push(vec![name.to_string(), number(dev), number(limit)]);
        out.metric(name, dev);
        out.checks.push(Check::at_most(name, dev, limit));
    };
    for kind in checks {
        match kind {
            IdentityKind::Chain => {
                let dev = r_chain_deviation(&p, probes, rng)?;
                record(&mut out, "resolvent-chain", dev, tol);
            }
            IdentityKind::Reference => {
                let l0s: Vec<CMat> = if reference_media.is_empty() {
                    let base = default_reference(&p.l())?;
                    vec![
                        base.clone(),
                        &base * random::pd_hermitian(rng, m, 0.5, 2.0),
                        random::pd_hermitian(rng, m, 0.5, 2.0) * cr(linalg::op_norm(&base)),
                    ]
                    .into_iter()
                    .map(|x| linalg::hermitian_part(&x))
                    .collect()
                } else {
                    reference_media
                        .iter()
                        .map(|v| io::matrix_from_json(v).map_err(Failure::from_config))
                        .collect::<Result<_, _>>()?
                };
                let dev = verify_reference_independence(&p, &l0s, probes, rng)?;
                record(&mut out, "reference-independence", dev, tol);
            }
            IdentityKind::Duality => {
                let dev = verify_duality(&p, probes, rng)?;
                record(&mut out, "duality", dev, tol);
            }
            IdentityKind::Reflection => {
                let chi = built
                    .chi
                    .as_ref()
                    .ok_or_else(|| Failure::Config("reflection check needs a two-phase medium".into()))?;
                let rep = spectrum_reflection_check(chi, &built.proj)?;
                out.metric("reflection_interior", vec![rep.interior1, rep.interior2]);
                out.checks.push(Check::flag("spectral-reflection-pairing", rep.paired));
                record(&mut out, "spectral-reflection", rep.max_pair_error, tol);
            }
            IdentityKind::NullT => {
                let catalog = null_catalog(built, rng)?;
                if catalog.is_empty() {
                    return Err(Failure::Config("no catalog null-T operator pairs with this projector".into()));
                }
                let s = p.random_source(rng)?;
                let ps = p.clone().with_source(s)?;
                let base = solve_field(&ps, None, SolveMethod::Auto, 1e-12)?;
                let coeff = 0.1 * b_scale(&built.b).max(1.0);
                for (name, t) in &catalog {
                    let defect = t.null_defect(&built.proj)?;
                    record(&mut out, &format!("null-t-defect:{name}"), defect, NULL_DEFECT_TOL);
                    let shifted_l = shift_by_null_t(&ps.l(), t, cr(coeff))?;
                    let shifted_b = shifted_l.shifted(z0);
                    let mut q = ps.clone();
                    q.b = shifted_b;
                    let sol = solve_field(&q, None, SolveMethod::Auto, 1e-12)?;
                    let dev = relative_diff(sol.field_e(), base.field_e());
                    record(&mut out, &format!("null-t-shift:{name}"), dev, tol);
                }
            }
            IdentityKind::Backend => {
                let dev = backend_deviation(&p, probes, rng)?;
                record(&mut out, "backend-equivalence", dev, BACKEND_TOL);
            }
        }
    }
    out.tables.push(table);
    Ok(out)
}

/// Text for `describe <task>`.
pub fn describe(task: &str) -> Option<&'static str> {
    Some(match task {
        "solve" => {
            "solve: one field solve with a random source in the range of Γ₁.
  z0           complex (required)
  method       neumann | krylov | dense | auto   [auto]
  tolerance    relative residual target          [1e-10]
  save_field   write source, E and J as RLAB     [false]
checks: solve-residual, solve-constraints, solver-oracle-agreement (≤ 10·tolerance)"
        }
        "resolvent-sweep" => {
            "resolvent-sweep: agreement of the four closed forms of R over a z0 grid.
  z0s            list of complex (required)
  probes         random probes per point          [4]
  max_deviation  relative limit                   [1e-10]
  contour        optional {nodes: [32, 64], tolerance: 1e-8}: exp(A) by the
                 contour rule on a translation-derived circle (Hermitian B)
checks: resolvent-chain, contour-accuracy, contour-doubling-gain (≥ 10×)"
        }
        "bounds" => {
            "bounds: inner (Rayleigh–Ritz, power) and outer (translation) spectral intervals.
  subspace         Rayleigh–Ritz dimension         [4]
  krylov           Krylov start instead of random  [false]
  powers           even power orders               [2, 4, 8, 16]
  translation      zero | rperp | coupled          [zero]
  alpha            R⊥ multiplier for rperp         [0.5]
  power_tolerance  relative gap to the oracle top  [unset]
checks: qstar-k-sample, power-monotone, inner-within-oracle, oracle-within-outer, power-accuracy"
        }
        "augment-verify" => {
            "augment-verify: doubled Hermitian block problem and H⁰.
  z0s          complex list                        [c + 2]
  split        hermitian | z0-shifted              [z0-shifted]
  probes       random probes                       [4]
  max_deviation                                    [1e-8]
  w0s          complex list for the H⁰ sweep       []
  slope_check  decay of ‖H⁰/w₀ − H₁‖ at 1e2..1e4    [false]
  scalar_case  [z1, z2] closed-form check           [unset]
checks: augmented-identity, augmented-z-independence, h0-hermitian-real-w0,
        h0-positive-hermitian-part, h0-asymptotic-slope, scalar-closed-form"
        }
        "stieltjes" => {
            "stieltjes: measure inversion and resynthesis of F(v) = H⁰(√v)/√v.
  epsilon        smoothing ε                       [1e-3]
  richardson     use the schedule {4ε, 2ε, ε}       [true]
  grid           λ-grid points                      [4000]
  lambda_max     upper end of the λ window          [10(‖B‖ + |c|)²]
  holdout        held-out real v in [0.1, 100]      [20]
  tolerance      relative resynthesis error         [0.05]
  halving_check  rerun at ε/2, RMS error must drop  [false]
checks: measure-psd (≥ −1e-8), stieltjes-roundtrip, epsilon-halving-gain"
        }
        "zstar" => {
            "zstar: effective parameter z* = |s|²/(Rs, s) for a random source.
  samples      non-real z0 samples                [100]
  imag         scale of |Im z0|                   [0.5]
  scan_points  real-axis scan resolution          [10000]
  dual_z0      complex; enables the dual formula  [unset]
checks: zstar-half-plane, pole-zero-interlacing, zstar-zeros-match-spectrum,
        zstar-dual-formula, dual-involution, dual-relation"
        }
        "identities" => {
            "identities: dense-oracle identity suite at one z0.
  z0               complex (required)
  checks           chain | reference | duality | reflection | null-t | backend
  probes           random probes                  [4]
  reference_media  list of m×m matrices            [three positive-definite defaults]
  tolerance                                       [1e-8]
checks: one per listed identity; backend uses 1e-10"
        }
        _ => return None,
    })
}

pub const TASK_NAMES: [&str; 7] =
    ["solve", "resolvent-sweep", "bounds", "augment-verify", "stieltjes", "zstar", "identities"];

pub fn binary_bytes(b: &Binary) -> Vec<u8> {
    let mut buf = Vec::new();
    match b {
        Binary::Field(f) => io::write_field(&mut buf, f),
        Binary::Matrix(m) => io::write_matrix(&mut buf, m),
    }
    .expect("writing to memory cannot fail");
    buf
}
