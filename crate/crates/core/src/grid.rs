//! Periodic grids and the n-dimensional FFT used by Fourier-local operators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Periodic grid on the unit cell: `n` points per axis in `dims` dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub dims: usize,
    pub n: usize,
    pub lengths: Vec<f64>,
}

impl PeriodicGrid {
    pub fn new(dims: usize, n: usize) -> Result<Self> {
        Self::with_lengths(dims, n, vec![1.0; dims])
    }

    pub fn with_lengths(dims: usize, n: usize, lengths: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(Error::InvalidArgument(format!("grid dimension {dims} not in 1..=3")));
        }
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("points per axis {n} is not a power of two")));
        }
        if lengths.len() != dims || lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument("cell lengths must be positive, one per axis".into()));
        }
        Ok(Self { dims, n, lengths })
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.lengths.iter().product::<f64>() / self.points() as f64
    }

    /// Integer coordinates of a linear index (axis 0 varies slowest).
    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.dims];
        for a in (0..self.dims).rev() {
            c[a] = idx % self.n;
            idx /= self.n;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.n + c % self.n)
    }

    /// Signed integer frequency of a linear index in the standard FFT order.
    pub fn frequency(&self, idx: usize) -> Vec<i64> {
        let n = self.n as i64;
        self.coords(idx)
            .into_iter()
            .map(|c| {
                let c = c as i64;
                if c < (n + 1) / 2 || n == 1 {
                    c
                } else {
                    c - n
                }
            })
            .collect()
    }

    /// Wavevector 2π·n/L of a linear frequency index.
    pub fn wavevector(&self, idx: usize) -> Vec<f64> {
        self.frequency(idx).into_iter().zip(&self.lengths).map(|(f, l)| 2.0 * PI * f as f64 / l).collect()
    }

    /// Physical position of a grid point.
    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.coords(idx).into_iter().zip(&self.lengths).map(|(c, l)| c as f64 * l / self.n as f64).collect()
    }
}

impl fmt::Display for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.n, self.dims)
    }
}

/// Immutable FFT plan for scalar arrays on a grid.
#[derive(Clone)]
pub struct FftPlan {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftPlan").field("grid", &self.grid).finish()
    }
}

impl FftPlan {
    pub fn new(grid: &PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid: grid.clone(),
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    /// Unnormalized forward transform, X(k) = Σ x e^{-2πi k·x/N}.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the 1/N^d normalization.
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.grid.points() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn transform(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let total = self.grid.points();
        debug_assert_eq!(data.len(), total);
        if n == 1 {
            return;
        }
        let mut line = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..self.grid.dims {
            let stride = n.pow((self.grid.dims - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(PeriodicGrid::new(4, 8).is_err());
        assert!(PeriodicGrid::new(2, 6).is_err());
        assert!(PeriodicGrid::new(0, 8).is_err());
    }

    #[test]
    fn frequency_set_contains_zero_once() {
        let g = PeriodicGrid::new(2, 8).unwrap();
        let zeros = (0..g.points()).filter(|&i| g.frequency(i).iter().all(|&f| f == 0)).count();
        assert_eq!(zeros, 1);
        assert_eq!(g.frequency(g.index(&[7, 4])), vec![-1, -4]);
    }

    #[test]
    fn fft_matches_direct_dft() {
        let g = PeriodicGrid::new(2, 4).unwrap();
        let plan = FftPlan::new(&g);
        let x: Vec<C64> = (0..16).map(|i| C64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let mut y = x.clone();
        plan.forward(&mut y);
        for k in 0..16 {
            let kc = g.coords(k);
            let mut acc = C64::new(0.0, 0.0);
            for (p, xv) in x.iter().enumerate() {
                let pc = g.coords(p);
                let phase = -2.0 * PI * (kc[0] * pc[0] + kc[1] * pc[1]) as f64 / 4.0;
                acc += xv * C64::from_polar(1.0, phase);
            }
            assert!((acc - y[k]).norm() < 1e-10);
        }
        plan.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
