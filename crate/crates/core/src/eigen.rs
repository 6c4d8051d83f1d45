//! Bound states of the finite-difference Hamiltonian and radius calibration.
//!
//! `H = -1/2 d^2/dx^2 + V` with the three-point Laplacian and hard walls just
//! outside the grid, so `H` is symmetric tridiagonal. Eigenvalues come from
//! Sturm-sequence bisection, eigenvectors from inverse iteration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;

use crate::grid::{FftPair, Grid};
use crate::potential::SoftCoulomb;

/// Lowest bound states, normalized to `sum |psi|^2 dx = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundStates {
    pub model: SoftCoulomb,
    pub grid: Grid,
    pub energies: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl BoundStates {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// State with principal number `n` (1 = ground).
    pub fn state(&self, n: usize) -> Result<&[f64]> {
        if n == 0 || n > self.states.len() {
            return Err(invalid(format!(
                "state n={n} not computed ({} available)",
                self.states.len()
            )));
        }
        Ok(&self.states[n - 1])
    }
}

pub(crate) struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl Tridiagonal {
    pub fn hamiltonian(model: &SoftCoulomb, grid: &Grid) -> Self {
        let dx = grid.dx();
        let t = 1.0 / (dx * dx);
        let diag = grid.points().iter().map(|&x| t + model.value(x)).collect();
        Self {
            diag,
            off: -0.5 * t,
        }
    }

    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        let e2 = self.off * self.off;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut q = 1.0;
        let mut count = 0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 {
                d - lambda
            } else {
                d - lambda - e2 / q
            };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().cloned().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    /// `j`-th smallest eigenvalue.
    fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T - shift) v = b` by Gaussian elimination with partial pivoting.
    fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let e = self.off;
        // Row i after elimination: u0[i] x_i + u1[i] x_{i+1} + u2[i] x_{i+2} = rhs[i].
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();
        // Pending row i: (a, c, rhs) for columns (i, i+1).
        let mut a = self.diag[0] - shift;
        let mut c = if n > 1 { e } else { 0.0 };
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a == 0.0 { f64::EPSILON } else { a };
                break;
            }
            let (na, nc) = (e, self.diag[i + 1] - shift);
            let nd = if i + 2 < n { e } else { 0.0 };
            if a.abs() >= na.abs() {
                let piv = if a == 0.0 { f64::EPSILON } else { a };
                let m = na / piv;
                u0[i] = piv;
                u1[i] = c;
                u2[i] = 0.0;
                let r = rhs[i + 1] - m * rhs[i];
                rhs[i + 1] = r;
                a = nc - m * c;
                c = nd;
            } else {
                let m = a / na;
                u0[i] = na;
                u1[i] = nc;
                u2[i] = nd;
                let (ri, rn) = (rhs[i], rhs[i + 1]);
                rhs[i] = rn;
                rhs[i + 1] = ri - m * rn;
                a = c - m * nc;
                c = -m * nd;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off * v[i + 1];
                }
                s
            })
            .collect()
    }
}

fn normalize(v: &mut [f64], dx: f64) {
    let norm = (v.iter().map(|a| a * a).sum::<f64>() * dx).sqrt();
    let peak = v
        .iter()
        .cloned()
        .fold(0.0_f64, |m, a| if a.abs() > m.abs() { a } else { m });
    let s = peak.signum() / norm;
    v.iter_mut().for_each(|a| *a *= s);
}

/// Lowest `k` bound states of `model` on `grid`.
pub fn solve_bound_states(model: &SoftCoulomb, grid: &Grid, k: usize) -> Result<BoundStates> {
    grid.validate()?;
    if k == 0 || k > grid.n {
        return Err(invalid(format!(
            "cannot request {k} states on {} points",
            grid.n
        )));
    }
    if !(model.a2 > 0.0 && model.charge > 0.0) {
        return Err(invalid("soft-core radius and charge must be positive"));
    }
    let h = Tridiagonal::hamiltonian(model, grid);
    let dx = grid.dx();
    let scale = h.gershgorin().1.abs().max(1.0);
    let mut energies = Vec::with_capacity(k);
    let mut states = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = h.eigenvalue(j);
        let shift = lambda + 1e3 * f64::EPSILON * scale;
        let mut v: Vec<f64> = (0..grid.n)
            .map(|i| 1.0 + 0.1 * ((i * 7919 + j * 104729) % 97) as f64 / 97.0)
            .collect();
        for _ in 0..4 {
            v = h.solve_shifted(shift, &v);
            for prev in &states {
                let p: &Vec<f64> = prev;
                let ov: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() * dx;
                v.iter_mut().zip(p).for_each(|(a, b)| *a -= ov * b);
            }
            normalize(&mut v, dx);
        }
        let hv = h.apply(&v);
        let residual = (hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            * dx)
            .sqrt();
        if residual > 1e-8 * scale {
            return Err(Error::NotConverged(format!(
                "state {j}: residual {residual:.3e}"
            )));
        }
        let edge = v[0].abs().max(v[grid.n - 1].abs());
        if edge > 1e-6 {
            return Err(Error::BoundaryLeakage {
                state: j + 1,
                amplitude: edge,
            });
        }
        energies.push(lambda);
        states.push(v);
    }
    Ok(BoundStates {
        model: *model,
        grid: *grid,
        energies,
        states,
    })
}

/// Grid used for calibration when none is given.
pub fn calibration_grid() -> Grid {
    Grid {
        x_min: -60.0,
        x_max: 60.0,
        n: 2048,
    }
}

/// Finds `a^2` such that the ground-state energy equals `-ionization_potential`.
pub fn calibrate_radius(charge: f64, ionization_potential: f64, grid: &Grid) -> Result<f64> {
    if !(ionization_potential > 0.0) {
        return Err(Error::Calibration(format!(
            "ionization potential must be positive, got {ionization_potential}"
        )));
    }
    let ground = |a2: f64| -> Result<f64> {
        Ok(solve_bound_states(&SoftCoulomb::new(charge, a2), grid, 1)?.energies[0])
    };
    let target = -ionization_potential;
    let (mut lo, mut hi) = (0.05_f64, 50.0_f64);
    let (flo, fhi) = (ground(lo)? - target, ground(hi)? - target);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Calibration(format!(
            "ionization potential {ionization_potential} not reachable for a^2 in [{lo}, {hi}]"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let f = ground(mid)? - target;
        if f.abs() < 1e-12 || hi - lo < 1e-12 {
            return Ok(mid);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Ground state by imaginary-time split-operator relaxation with the spectral
/// kinetic energy. Returns `(energy, psi)`.
pub fn relax_ground_state(
    model: &SoftCoulomb,
    grid: &Grid,
    dtau: f64,
    tol: f64,
    max_steps: usize,
) -> Result<(f64, Vec<f64>)> {
    grid.validate()?;
    let n = grid.n;
    let dx = grid.dx();
    let (v, _) = model.sample(grid);
    let k = grid.wavenumbers();
    let half_v: Vec<f64> = v.iter().map(|vi| (-0.5 * dtau * vi).exp()).collect();
    let kin: Vec<f64> = k.iter().map(|ki| (-0.5 * dtau * ki * ki).exp()).collect();
    let mut fft = FftPair::new(n);
    let mut psi: Vec<Complex64> = grid
        .points()
        .iter()
        .map(|x| Complex64::new((-x * x / 2.0).exp(), 0.0))
        .collect();
    let mut buf = psi.clone();
    let energy_of = |psi: &[Complex64], fft: &mut FftPair, buf: &mut Vec<Complex64>| {
        buf.copy_from_slice(psi);
        fft.forward(buf);
        let kinetic: f64 = buf
            .iter()
            .zip(&k)
            .map(|(c, ki)| 0.5 * ki * ki * c.norm_sqr())
            .sum::<f64>()
            * dx
            / n as f64;
        let pot: f64 = psi
            .iter()
            .zip(&v)
            .map(|(c, vi)| vi * c.norm_sqr())
            .sum::<f64>()
            * dx;
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx;
        (kinetic + pot) / norm
    };
    let mut last = f64::INFINITY;
    for step in 0..max_steps {
        for (p, h) in psi.iter_mut().zip(&half_v) {
            *p *= h;
        }
        fft.forward(&mut psi);
        for (p, kk) in psi.iter_mut().zip(&kin) {
            *p *= kk;
        }
        fft.inverse(&mut psi);
        for (p, h) in psi.iter_mut().zip(&half_v) {
            *p *= h;
        }
        let norm = (psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx).sqrt();
        psi.iter_mut().for_each(|c| *c /= norm);
        if step % 50 == 49 {
            let e = energy_of(&psi, &mut fft, &mut buf);
            if (e - last).abs() < tol {
                return Ok((e, psi.iter().map(|c| c.re).collect()));
            }
            last = e;
        }
    }
    Err(Error::NotConverged(format!(
        "imaginary-time relaxation after {max_steps} steps"
    )))
}
