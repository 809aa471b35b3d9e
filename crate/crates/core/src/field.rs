//! Complex fields sampled on a grid (or abstract vectors).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};

/// A complex tensor field: `points × components` samples stored point-major,
/// so component `c` of point `p` lives at `p * components + c`.
///
/// `cell_volume` weights the inner product so that sums over samples
/// approximate integrals over the unit cell; abstract vectors use 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    pub values: Vec<C64>,
    pub components: usize,
    pub cell_volume: f64,
}

impl ComplexField {
    pub fn new(values: Vec<C64>, components: usize, cell_volume: f64) -> Result<Self> {
        if components == 0 || !values.len().is_multiple_of(components) {
            return Err(Error::ShapeMismatch { expected: components.max(1), got: values.len() });
        }
        Ok(Self { values, components, cell_volume })
    }

    /// Abstract vector: one point per entry, unit weight.
    pub fn vector(values: Vec<C64>) -> Self {
        Self { values, components: 1, cell_volume: 1.0 }
    }

    pub fn zeros(points: usize, components: usize, cell_volume: f64) -> Self {
        Self { values: vec![C64::new(0.0, 0.0); points * components], components, cell_volume }
    }

    /// Field with i.i.d. standard complex Gaussian entries.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, points: usize, components: usize, cell_volume: f64) -> Self {
        let values = (0..points * components)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im)
            })
            .collect();
        Self { values, components, cell_volume }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn at(&self, point: usize) -> &[C64] {
        &self.values[point * self.components..(point + 1) * self.components]
    }

    /// Same shape and weight, new samples.
    pub fn with_values(&self, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { values, components: self.components, cell_volume: self.cell_volume }
    }

    /// (P, Q) = Σ P·conj(Q) · cell volume, accumulated in index order.
    pub fn inner(&self, other: &Self) -> C64 {
        inner_raw(&self.values, &other.values) * self.cell_volume
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn scaled(&self, a: C64) -> Self {
        self.with_values(self.values.iter().map(|v| v * a).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// a·self + b·other
    pub fn lin_comb(&self, a: C64, other: &Self, b: C64) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect())
    }

    pub fn to_cvec(&self) -> CVec {
        CVec::from_column_slice(&self.values)
    }

    pub fn from_cvec_like(&self, v: &CVec) -> Self {
        self.with_values(v.iter().copied().collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Unweighted Σ a·conj(b) in index order.
pub fn inner_raw(a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x * y.conj();
    }
    acc
}

pub fn norm_raw(a: &[C64]) -> f64 {
    inner_raw(a, a).re.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_checked() {
        assert!(ComplexField::new(vec![C64::new(1.0, 0.0); 5], 2, 1.0).is_err());
        let f = ComplexField::new(vec![C64::new(1.0, 0.0); 6], 2, 0.25).unwrap();
        assert_eq!(f.points(), 3);
        assert!((f.norm() - (6.0f64 * 0.25).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn inner_product_is_conjugate_symmetric_and_positive(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = ComplexField::random(&mut rng, 7, 2, 0.5);
            let q = ComplexField::random(&mut rng, 7, 2, 0.5);
            let pq = p.inner(&q);
            let qp = q.inner(&p);
            prop_assert!((pq - qp.conj()).norm() < 1e-12);
            prop_assert!(p.inner(&p).re > 0.0);
            prop_assert!(p.inner(&p).im.abs() < 1e-12);
            let z = ComplexField::zeros(7, 2, 0.5);
            prop_assert_eq!(z.norm(), 0.0);
        }
    }
}
