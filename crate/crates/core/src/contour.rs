//! Matrix functions f(A) = (2πi)⁻¹∮ f(z)(zI − A)⁻¹ dz by the trapezoid rule
//! on a circle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::operator::{self, OperatorHandle, SpectrumInterval};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: C64,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: C64, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Circle around an outer spectral interval: centered at its midpoint
    /// with radius 0.6·width + 1. The interval is first widened to contain 0,
    /// since A = Γ₁BΓ₁ vanishes on the complement of the range of Γ₁.
    pub fn from_bounds(bounds: &SpectrumInterval, include_zero: bool) -> Self {
        let (mut lo, mut hi) = (bounds.lower, bounds.upper);
        if include_zero {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        Self { center: C64::new(0.5 * (lo + hi), 0.0), radius: 0.6 * (hi - lo) + 1.0 }
    }

    pub fn node(&self, j: usize, nodes: usize) -> C64 {
        self.center + C64::from_polar(self.radius, 2.0 * PI * (j as f64 + 0.5) / nodes as f64)
    }
}

/// Smallest distance from an eigenvalue to the contour; fails unless every
/// eigenvalue is inside with margin at least radius/10.
pub fn check_enclosure(eigenvalues: &[C64], circle: &Circle) -> Result<f64> {
    let margin = circle.radius / 10.0;
    let distance = eigenvalues.iter().map(|l| circle.radius - (l - circle.center).norm()).fold(f64::INFINITY, f64::min);
    if distance < margin {
        return Err(Error::ContourTouchesSpectrum { distance, margin });
    }
    Ok(distance)
}

/// Trapezoidal approximation of (2πi)⁻¹∮ f(z)(zI − A)⁻¹ dz on `circle`
/// with `nodes` equispaced points.
pub fn matrix_function_contour(
    a: &OperatorHandle,
    f: impl Fn(C64) -> C64 + Sync + Send,
    circle: &Circle,
    nodes: usize,
) -> Result<OperatorHandle> {
    Ok(OperatorHandle::dense(matrix_function_contour_dense(&operator::materialize(a)?, f, circle, nodes)?))
}

pub fn matrix_function_contour_dense(
    a: &CMat,
    f: impl Fn(C64) -> C64 + Sync + Send,
    circle: &Circle,
    nodes: usize,
) -> Result<CMat> {
    if nodes == 0 {
        return Err(Error::InvalidArgument("contour needs at least one node".into()));
    }
    let eig = linalg::general_eigenvalues(a).ok_or(Error::EigenFailure { tag: operator::OperatorTag::Dense })?;
    check_enclosure(&eig, circle)?;
    let n = a.nrows();
    let terms = par::try_map_range(nodes, |j| {
        let z = circle.node(j, nodes);
        let m = CMat::identity(n, n) * z - a;
        let inv = linalg::inverse(&m)
            .ok_or(Error::SingularRestriction { cond: f64::INFINITY, cap: operator::DEFAULT_COND_CAP })?;
        // dz/(2πi) = (z − c)·dθ/(2π)
        Ok::<_, Error>(inv * (f(z) * (z - circle.center)))
    })?;
    let mut sum = CMat::zeros(n, n);
    for t in terms {
        sum += t;
    }
    Ok(sum / C64::new(nodes as f64, 0.0))
}
