//! Periodic spatial grids and FFT plumbing shared by the propagators.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `n` points `x_i = x_min + i dx` on `[x_min, x_max)`, `dx = (x_max - x_min) / n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let g = Self { x_min, x_max, n };
        g.validate()?;
        Ok(g)
    }

    /// Symmetric box `[-half_width, half_width)`.
    pub fn centered(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(invalid(format!(
                "grid bounds [{}, {}) are not increasing",
                self.x_min, self.x_max
            )));
        }
        if self.n < 4 || !self.n.is_power_of_two() {
            return Err(invalid(format!(
                "grid size must be a power of two >= 4, got {}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / (self.x_max - self.x_min);
        let n = self.n as isize;
        (0..n)
            .map(|i| if i < n / 2 { i } else { i - n })
            .map(|m| m as f64 * dk)
            .collect()
    }

    /// `cos^(1/8)` absorbing mask: 1 in the interior, falling to 0 over
    /// `width` at each edge.
    pub fn edge_mask(&self, width: f64) -> Vec<f64> {
        self.points()
            .into_iter()
            .map(|x| {
                let d = (x - self.x_min).min(self.x_max - x);
                if width <= 0.0 || d >= width {
                    1.0
                } else {
                    (0.5 * PI * (width - d) / width).cos().max(0.0).powf(0.125)
                }
            })
            .collect()
    }
}

/// Forward/inverse plans for one transform length, with scratch.
#[derive(Clone)]
pub struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    n: usize,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::default(); len],
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform of every length-`n` chunk of `data`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Inverse transform of every chunk, scaled by `1/n`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// Inverse transform without the `1/n` factor.
    pub fn inverse_unscaled(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }
}

/// Square transpose in place.
pub(crate) fn transpose_square(a: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (ib..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + B).min(n) {
                    a.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Out-of-place transpose of an `rows x cols` row-major matrix.
pub(crate) fn transpose_into<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    const B: usize = 32;
    for ib in (0..rows).step_by(B) {
        for jb in (0..cols).step_by(B) {
            for i in ib..(ib + B).min(rows) {
                for j in jb..(jb + B).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// `exp(i theta)`.
#[inline]
pub(crate) fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// Fills `out[i] = base[i] * exp(i c x_i)` on a uniform grid, re-anchoring
/// the phase recurrence every 64 points.
pub(crate) fn modulate(base: &[Complex64], x0: f64, dx: f64, c: f64, out: &mut [Complex64]) {
    let step = cis(c * dx);
    for (block, (b, o)) in base.chunks(64).zip(out.chunks_mut(64)).enumerate() {
        let mut ph = cis(c * (x0 + (block * 64) as f64 * dx));
        for (bi, oi) in b.iter().zip(o.iter_mut()) {
            *oi = bi * ph;
            ph *= step;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid::new(-1.0, 1.0, 100).is_err());
        assert!(Grid::new(1.0, -1.0, 64).is_err());
        assert!(Grid::new(-1.0, 1.0, 64).is_ok());
    }

    #[test]
    fn wavenumbers_fft_order() {
        let g = Grid::new(0.0, 2.0 * PI, 8).unwrap();
        let k = g.wavenumbers();
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn mask_profile() {
        let g = Grid::centered(10.0, 64).unwrap();
        let m = g.edge_mask(2.0);
        assert_eq!(m[32], 1.0);
        assert!(m[0] < 0.02 && m[1] > m[0]);
        assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn transposes_agree() {
        let n = 70;
        let a: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        let mut b = a.clone();
        transpose_square(&mut b, n);
        let mut c = vec![Complex64::default(); n * n];
        transpose_into(&a, &mut c, n, n);
        assert_eq!(b, c);
        assert_eq!(b[3 * n + 5], a[5 * n + 3]);
    }

    #[test]
    fn modulation_matches_direct_phase() {
        let n = 1000;
        let base = vec![Complex64::new(1.0, 0.0); n];
        let mut out = vec![Complex64::default(); n];
        modulate(&base, -50.0, 0.1, 0.37, &mut out);
        for (i, o) in out.iter().enumerate() {
            let d = cis(0.37 * (-50.0 + i as f64 * 0.1));
            assert!((o - d).norm() < 1e-13);
        }
    }
}
