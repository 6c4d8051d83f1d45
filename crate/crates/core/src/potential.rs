//! Soft-Coulomb single-active-electron model.

use serde::{Deserialize, Serialize};

use crate::grid::Grid;

/// `V(x) = -Z / sqrt(x^2 + a^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftCoulomb {
    pub charge: f64,
    pub a2: f64,
}

impl SoftCoulomb {
    pub const fn new(charge: f64, a2: f64) -> Self {
        Self { charge, a2 }
    }

    /// `a^2 = 2` puts the ground state at -0.5 a.u.
    pub const fn hydrogen() -> Self {
        Self::new(1.0, 2.0)
    }

    pub const fn argon() -> Self {
        Self::new(1.0, 1.37)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        -self.charge / (x * x + self.a2).sqrt()
    }

    /// `dV/dx = Z x / (x^2 + a^2)^(3/2)`.
    #[inline]
    pub fn gradient(&self, x: f64) -> f64 {
        let r2 = x * x + self.a2;
        self.charge * x / (r2 * r2.sqrt())
    }

    /// Small-oscillation frequency about the origin, `sqrt(Z / a^3)`.
    pub fn harmonic_frequency(&self) -> f64 {
        (self.charge / self.a2.powf(1.5)).sqrt()
    }

    /// `(V, V')` sampled on the grid.
    pub fn sample(&self, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        grid.points()
            .into_iter()
            .map(|x| (self.value(x), self.gradient(x)))
            .unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_odd() {
        let m = SoftCoulomb::argon();
        for x in [0.3, 1.0, 7.5] {
            assert_eq!(m.value(x), m.value(-x));
            assert_eq!(m.gradient(x), -m.gradient(-x));
        }
        assert_eq!(m.gradient(0.0), 0.0);
    }

    #[test]
    fn argon_oscillator_frequency() {
        assert!((SoftCoulomb::argon().harmonic_frequency() - 0.7897).abs() < 1e-3);
    }
}
