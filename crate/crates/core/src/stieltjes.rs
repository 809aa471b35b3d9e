//! Measure reconstruction for F(v) = H⁰(√v)/√v = H₁ + ∫dμ(λ)/(v + λ).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::augment::{evaluate_h0, AugmentedProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64};
use crate::operator::OperatorTag;
use crate::par;

pub const PSD_TOL: f64 = 1e-8;
pub const MIN_EPSILON: f64 = 1e-6;

/// F(v) = H⁰(w₀)/w₀ with w₀ the principal square root of v.
pub fn sample_f(aug: &AugmentedProblem, v: C64) -> Result<CMat> {
    if v.im == 0.0 && v.re <= 0.0 {
        return Err(Error::BranchCut { re: v.re, im: v.im });
    }
    let w0 = v.sqrt();
    let e = evaluate_h0(aug, w0)?;
    Ok(e.h0 / w0)
}

/// −π⁻¹ Im F(−λ + iε), with Im M = (M − M†)/(2i).
pub fn density_at<F>(f: &F, lambda: f64, eps: f64) -> Result<CMat>
where
    F: Fn(C64) -> Result<CMat>,
{
    let m = f(C64::new(-lambda, eps))?;
    Ok((&m - m.adjoint()) / C64::new(0.0, -2.0 * PI))
}

/// Mass of an isolated atom at λ for a scalar function, ε·(−Im f(−λ + iε)).
pub fn scalar_point_mass<F>(f: &F, lambda: f64, eps: f64) -> Result<f64>
where
    F: Fn(C64) -> Result<CMat>,
{
    Ok(PI * eps * density_at(f, lambda, eps)?[(0, 0)].re)
}

/// {0} ∪ geometric spacing on [max(λ₁, ε), λ₂] when λ₁ = 0, otherwise
/// geometric on [λ₁, λ₂]; `points` values in total.
pub fn lambda_grid(window: (f64, f64), points: usize, eps: f64) -> Vec<f64> {
    let (lo, hi) = window;
    let points = points.max(2);
    if lo > 0.0 {
        let r = (hi / lo).ln() / (points - 1) as f64;
        return (0..points).map(|i| lo * (r * i as f64).exp()).collect();
    }
    let start = eps.min(hi);
    let r = (hi / start).ln() / (points - 2).max(1) as f64;
    std::iter::once(0.0).chain((0..points - 1).map(|i| start * (r * i as f64).exp())).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InversionOptions {
    pub window: (f64, f64),
    /// Decreasing; the last entry is the reported ε.
    pub epsilons: Vec<f64>,
    pub grid_size: usize,
    /// Extrapolate the density to ε = 0 from the whole schedule.
    pub richardson: bool,
}

impl InversionOptions {
    pub fn new(window: (f64, f64), eps: f64, grid_size: usize) -> Self {
        Self { window, epsilons: vec![eps], grid_size, richardson: false }
    }

    /// Schedule {4ε, 2ε, ε} with extrapolation.
    pub fn richardson(window: (f64, f64), eps: f64, grid_size: usize) -> Self {
        Self { window, epsilons: vec![4.0 * eps, 2.0 * eps, eps], grid_size, richardson: true }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!("bad λ window [{lo}, {hi}]")));
        }
        if self.epsilons.is_empty()
            || self.epsilons.iter().any(|&e| e < MIN_EPSILON)
            || self.epsilons.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidArgument("ε schedule must be decreasing and ≥ 1e-6".into()));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidArgument("λ grid needs at least two points".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StieltjesMeasure {
    pub lambda: Vec<f64>,
    #[serde(skip)]
    pub density: Vec<CMat>,
    #[serde(skip)]
    pub point_masses: Vec<(f64, CMat)>,
    pub epsilon_used: f64,
    #[serde(skip)]
    pub h1: CMat,
    /// Smallest eigenvalue seen over all density samples.
    pub psd_margin: f64,
    /// Densities at the larger ε of a Richardson schedule.
    #[serde(skip)]
    pub coarser: Vec<(f64, Vec<CMat>)>,
}

/// Neville extrapolation of samples y(xᵢ) to x = 0.
fn extrapolate_to_zero(x: &[f64], ys: &[CMat]) -> CMat {
    let mut p: Vec<CMat> = ys.to_vec();
    let n = x.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xa, xb) = (x[i], x[i + level]);
            p[i] = (&p[i + 1] * cr(xa) - &p[i] * cr(xb)) / cr(xa - xb);
        }
    }
    p.swap_remove(0)
}

/// Inverts any function with the Stieltjes form H₁ + ∫dμ/(v + λ).
pub fn invert_with<F>(f: F, h1: &CMat, opts: &InversionOptions) -> Result<StieltjesMeasure>
where
    F: Fn(C64) -> Result<CMat> + Sync + Send,
{
    opts.validate()?;
    let eps = *opts.epsilons.last().expect("validated");
    let lambda = lambda_grid(opts.window, opts.grid_size, eps);
    let schedule: Vec<f64> = if opts.richardson { opts.epsilons.clone() } else { vec![eps] };
    let mut levels = Vec::with_capacity(schedule.len());
    let mut psd_margin = f64::INFINITY;
    for &e in &schedule {
        let density = par::try_map_range(lambda.len(), |i| {
            Ok::<_, Error>(linalg::hermitian_part(&density_at(&f, lambda[i], e)?))
        })?;
        for (l, d) in lambda.iter().zip(&density) {
            let m = linalg::lambda_min(d).ok_or(Error::EigenFailure { tag: OperatorTag::Dense })?;
            psd_margin = psd_margin.min(m);
            if m < -PSD_TOL * linalg::op_norm(d).max(1.0) {
                return Err(Error::PsdViolation { lambda: *l, min_eig: m });
            }
        }
        levels.push(density);
    }
    let density = levels.pop().expect("one level at least");
    Ok(StieltjesMeasure {
        lambda,
        density,
        coarser: schedule[..schedule.len() - 1].iter().copied().zip(levels).collect(),
        point_masses: Vec::new(),
        epsilon_used: eps,
        h1: h1.clone(),
        psd_margin,
    })
}

pub fn invert_measure(aug: &AugmentedProblem, opts: &InversionOptions) -> Result<StieltjesMeasure> {
    invert_with(|v| sample_f(aug, v), &aug.h1(), opts)
}

/// 10·(‖B‖ + |c|)².
pub fn default_lambda_max(aug: &AugmentedProblem) -> f64 {
    10.0 * (linalg::op_norm(&aug.b) + aug.c.abs()).powi(2)
}

fn trapezoid<G: Fn(usize) -> CMat>(x: &[f64], g: G, dim: usize) -> CMat {
    let mut acc = CMat::zeros(dim, dim);
    let mut prev = g(0);
    for i in 1..x.len() {
        let cur = g(i);
        acc += (&prev + &cur) * cr(0.5 * (x[i] - x[i - 1]));
        prev = cur;
    }
    acc
}

impl StieltjesMeasure {
    pub fn dim(&self) -> usize {
        self.h1.nrows()
    }

    pub fn extrapolated(&self) -> bool {
        !self.coarser.is_empty()
    }

    fn resynthesize_level(&self, density: &[CMat], v: C64) -> CMat {
        let mut f = self.h1.clone();
        f += trapezoid(&self.lambda, |i| &density[i] / (v + self.lambda[i]), self.dim());
        for (l, m) in &self.point_masses {
            f += m / (v + l);
        }
        f
    }

    /// F̃(v) = H₁ + Σ atoms/(v + λ) + trapezoid of density/(v + λ). With a
    /// Richardson schedule the per-ε resyntheses are extrapolated to ε = 0
    /// in powers of √ε, the order of the smoothing loss at the λ = 0 edge.
    pub fn resynthesize(&self, v: C64) -> CMat {
        let fine = self.resynthesize_level(&self.density, v);
        if self.coarser.is_empty() {
            return fine;
        }
        let mut xs: Vec<f64> = self.coarser.iter().map(|(e, _)| e.sqrt()).collect();
        let mut ys: Vec<CMat> = self.coarser.iter().map(|(_, d)| self.resynthesize_level(d, v)).collect();
        xs.push(self.epsilon_used.sqrt());
        ys.push(fine);
        extrapolate_to_zero(&xs, &ys)
    }

    /// ½[μ(λ₁) + μ(λ₂)] + μ((λ₁, λ₂)), densities interpolated linearly at the
    /// window ends.
    pub fn window_mass(&self, lo: f64, hi: f64) -> CMat {
        let n = self.dim();
        let at = |x: f64| -> CMat {
            let k = self.lambda.partition_point(|&l| l < x);
            if k == 0 {
                return self.density[0].clone();
            }
            if k >= self.lambda.len() {
                return CMat::zeros(n, n);
            }
            let (a, b) = (self.lambda[k - 1], self.lambda[k]);
            let t = (x - a) / (b - a);
            &self.density[k - 1] * cr(1.0 - t) + &self.density[k] * cr(t)
        };
        let lo = lo.max(self.lambda[0]);
        let hi = hi.min(*self.lambda.last().expect("non-empty grid"));
        if hi <= lo {
            return CMat::zeros(n, n);
        }
        let mut xs = vec![lo];
        let mut ys = vec![at(lo)];
        for (l, d) in self.lambda.iter().zip(&self.density) {
            if *l > lo && *l < hi {
                xs.push(*l);
                ys.push(d.clone());
            }
        }
        xs.push(hi);
        ys.push(at(hi));
        let mut mass = trapezoid(&xs, |i| ys[i].clone(), n);
        for (l, m) in &self.point_masses {
            if *l > lo && *l < hi {
                mass += m;
            } else if *l == lo || *l == hi {
                mass += m * cr(0.5);
            }
        }
        mass
    }

    /// Relative Frobenius error of the resynthesis against `f` at each v.
    pub fn reconstruction_errors<F>(&self, f: F, vs: &[f64]) -> Result<Vec<f64>>
    where
        F: Fn(C64) -> Result<CMat> + Sync + Send,
    {
        par::try_map_range(vs.len(), |i| {
            let v = cr(vs[i]);
            let direct = f(v)?;
            Ok::<_, Error>((self.resynthesize(v) - &direct).norm() / direct.norm().max(f64::MIN_POSITIVE))
        })
    }

    /// CSV-ready rows: λ followed by (re, im) of each density entry,
    /// row-major.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.lambda
            .iter()
            .zip(&self.density)
            .map(|(l, d)| {
                let mut row = vec![*l];
                for i in 0..d.nrows() {
                    for j in 0..d.ncols() {
                        row.push(d[(i, j)].re);
                        row.push(d[(i, j)].im);
                    }
                }
                row
            })
            .collect()
    }

    pub fn header(&self) -> Vec<String> {
        let n = self.dim();
        let mut h = vec!["lambda".to_string()];
        for i in 0..n {
            for j in 0..n {
                h.push(format!("re_{i}_{j}"));
                h.push(format!("im_{i}_{j}"));
            }
        }
        h
    }
}

/// Closed form on the Γ₂ block for M₀ = m, L₂ = 0 and Γ₁ = 0: there
/// H⁰ = w₀ + m, so F(v) = 1 + m/√v, whose measure has density m/(π√λ).
pub fn scalar_toy_f(m: f64, v: C64) -> C64 {
    cr(1.0) + cr(m) / v.sqrt()
}

pub fn scalar_toy_density(m: f64, lambda: f64) -> f64 {
    m / (PI * lambda.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::projector::ProjectorSpec;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk(seed: u64) -> AugmentedProblem {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let b = random::general(&mut r, 4) * cr(0.3);
        let p = ProjectorSpec::dense(random::projector(&mut r, 4, 2)).unwrap();
        AugmentedProblem::new(&b, &p, None).unwrap()
    }

    #[test]
    fn branch_cut_rejected() {
        let aug = desk(1);
        assert!(matches!(sample_f(&aug, cr(-1.0)), Err(Error::BranchCut { .. })));
        assert!(matches!(sample_f(&aug, cr(0.0)), Err(Error::BranchCut { .. })));
    }

    #[test]
    fn large_v_limit_and_conjugation() {
        let aug = desk(2);
        let f = sample_f(&aug, cr(1e12)).unwrap();
        assert!(linalg::max_abs_diff(&f, &aug.h1()) < 1e-4);
        for v in [c(0.3, 1.0), c(-2.0, 0.5), c(10.0, -3.0)] {
            let a = sample_f(&aug, v).unwrap();
            let b = sample_f(&aug, v.conj()).unwrap();
            assert!(linalg::max_abs_diff(&a.adjoint(), &b) < 1e-10);
        }
    }

    #[test]
    fn scalar_toy_matches_closed_form() {
        let m = 0.7;
        let b = CMat::from_element(1, 1, cr(-m));
        let p = ProjectorSpec::dense(CMat::zeros(1, 1)).unwrap();
        let aug = AugmentedProblem::new(&b, &p, Some(0.0)).unwrap();
        for v in [cr(0.5), cr(4.0), c(1.0, 2.0)] {
            let f = sample_f(&aug, v).unwrap();
            assert!((f[(0, 0)] - scalar_toy_f(m, v)).norm() < 1e-13);
            assert!(f[(1, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn single_pole_concentrates() {
        let l0 = 2.0;
        let f = |v: C64| Ok(CMat::from_element(1, 1, cr(1.0) / (v + l0)));
        let mut last = 0.0;
        for eps in [1e-1, 1e-2, 1e-3] {
            let opts = InversionOptions::new((0.5, 4.0), eps, 20000);
            let mu = invert_with(f, &CMat::zeros(1, 1), &opts).unwrap();
            let mass = mu.window_mass(1.0, 3.0)[(0, 0)].re;
            assert!((mass - 1.0).abs() < (last - 1.0f64).abs() || last == 0.0);
            last = mass;
        }
        assert!((last - 1.0).abs() < 1e-2);
        assert!((scalar_point_mass(&f, l0, 1e-4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_measure() {
        let h1 = CMat::identity(2, 2);
        let h = h1.clone();
        let mu = invert_with(move |_| Ok(h.clone()), &h1, &InversionOptions::new((0.0, 5.0), 1e-3, 100)).unwrap();
        assert!(mu.density.iter().all(|d| linalg::max_abs(d) == 0.0));
        assert!(linalg::max_abs(&mu.window_mass(0.0, 5.0)) == 0.0);
    }

    #[test]
    fn densities_psd_and_monotone_decay() {
        let aug = desk(3);
        let mu = invert_measure(&aug, &InversionOptions::new((0.0, 100.0), 1e-2, 300)).unwrap();
        assert!(mu.psd_margin > -1e-8);
        let f1 = sample_f(&aug, cr(0.5)).unwrap();
        let f2 = sample_f(&aug, cr(2.0)).unwrap();
        assert!(linalg::lambda_min(&f1).unwrap() > -1e-8);
        assert!(linalg::lambda_min(&(f1 - f2)).unwrap() > -1e-8);
    }

    #[test]
    fn desk_resynthesis_within_five_percent() {
        let aug = desk(11);
        let vs: Vec<f64> = (0..20).map(|i| 0.1 * 1000f64.powf(i as f64 / 19.0)).collect();
        let mu = invert_measure(&aug, &InversionOptions::richardson((0.0, 1e3), 1e-3, 4000)).unwrap();
        assert!(mu.extrapolated() && mu.psd_margin > -1e-8);
        let errs = mu.reconstruction_errors(|v| sample_f(&aug, v), &vs).unwrap();
        assert!(errs.iter().all(|&e| e < 0.05), "{errs:?}");
    }

    #[test]
    fn grid_shape() {
        let g = lambda_grid((0.0, 1e3), 4000, 1e-3);
        assert_eq!(g.len(), 4000);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-3).abs() < 1e-15 && (g[3999] - 1e3).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn neville_recovers_linear_limit() {
        let eps = [0.4, 0.2, 0.1];
        let ys: Vec<CMat> = eps.iter().map(|e| CMat::from_element(1, 1, cr(3.0 + 2.0 * e + e * e))).collect();
        assert!((extrapolate_to_zero(&eps, &ys)[(0, 0)] - cr(3.0)).norm() < 1e-12);
    }
}
