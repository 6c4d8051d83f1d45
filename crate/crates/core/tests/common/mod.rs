//! Dense reference propagators shared by the oracle and acceptance tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use mimicry_core::grid::Grid;
use mimicry_core::potential::SoftCoulomb;
use mimicry_core::propagate::{ClosedQuantum, OpenQuantum, Propagator, StepperConfig};
use mimicry_core::state::{DensityMatrix, Wavefunction};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smooth, non-symmetric drive for the oracle runs.
pub fn oracle_field(t: f64) -> f64 {
    0.05 * (0.5 * t).sin() + 0.02
}

/// Spectral operator `F^-1 diag(f(k)) F` as a dense matrix.
fn spectral_matrix(grid: &Grid, symbol: impl Fn(f64, usize) -> Complex64) -> DMatrix<Complex64> {
    let n = grid.n;
    let k = grid.wavenumbers();
    let dx = grid.dx();
    DMatrix::from_fn(n, n, |i, j| {
        let s = (i as f64 - j as f64) * dx;
        k.iter()
            .enumerate()
            .map(|(m, &km)| symbol(km, m) * Complex64::from_polar(1.0, km * s))
            .sum::<Complex64>()
            / n as f64
    })
}

fn kinetic_matrix(grid: &Grid) -> DMatrix<Complex64> {
    spectral_matrix(grid, |k, _| Complex64::new(0.5 * k * k, 0.0))
}

/// `d/dx` with the Nyquist mode dropped, as in the steppers.
fn derivative_matrix(grid: &Grid) -> DMatrix<Complex64> {
    let n = grid.n;
    spectral_matrix(grid, |k, m| {
        if m == n / 2 {
            Complex64::default()
        } else {
            I * k
        }
    })
}

fn hamiltonian(grid: &Grid, model: &SoftCoulomb) -> DMatrix<Complex64> {
    let mut h = kinetic_matrix(grid);
    for (i, x) in grid.points().into_iter().enumerate() {
        h[(i, i)] += model.value(x);
    }
    h
}

/// L2 error between the split-step wavefunction and `exp(-i dt H(E_mid))`
/// applied step by step to the same Gaussian.
pub fn closed_oracle_error(grid: Grid, model: SoftCoulomb, dt: f64, steps: usize) -> f64 {
    let wf = Wavefunction::gaussian(grid, -0.5, 0.2, 0.8).unwrap();
    let mut prop = ClosedQuantum::new(wf.clone(), model, &StepperConfig::new(dt)).unwrap();
    let h0 = hamiltonian(&grid, &model);
    let x = grid.points();
    let mut psi = DVector::from_vec(wf.psi.clone());
    for s in 0..steps {
        let e_mid = 0.5 * (oracle_field(s as f64 * dt) + oracle_field((s + 1) as f64 * dt));
        let mut h = h0.clone();
        for (i, xi) in x.iter().enumerate() {
            h[(i, i)] -= xi * e_mid;
        }
        psi = (h * Complex64::new(0.0, -dt)).exp() * psi;
        prop.step(e_mid).unwrap();
    }
    let got = prop.wavefunction().psi;
    let sq: f64 = got
        .iter()
        .zip(psi.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    (sq * grid.dx()).sqrt()
}

/// Vectorized Caldeira-Leggett generator on `rho[i * n + j]`, field excluded:
/// `-i[H, rho] - gamma (x - x')(d_x - d_x') rho - chi (x - x')^2 rho`.
pub fn liouvillian(grid: &Grid, model: &SoftCoulomb, gamma: f64, chi: f64) -> DMatrix<Complex64> {
    let n = grid.n;
    let h = hamiltonian(grid, model);
    let d = derivative_matrix(grid);
    let x = grid.points();
    let mut l = DMatrix::<Complex64>::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            let sep = x[i] - x[j];
            for k in 0..n {
                l[(row, k * n + j)] += -I * h[(i, k)] - gamma * sep * d[(i, k)];
                l[(row, i * n + k)] += I * h[(k, j)] + gamma * sep * d[(j, k)];
            }
            l[(row, row)] -= chi * sep * sep;
        }
    }
    l
}

/// `exp(tau L) v` by Taylor series, summed until the terms drop below roundoff.
fn taylor_apply(
    l: &DMatrix<Complex64>,
    diag: &[Complex64],
    v: &DVector<Complex64>,
    tau: f64,
) -> DVector<Complex64> {
    let mut term = v.clone();
    let mut sum = v.clone();
    let scale = v.norm();
    for m in 1..60 {
        let mut next = l * &term;
        for (a, (t, d)) in next.iter_mut().zip(term.iter().zip(diag)) {
            *a += d * t;
        }
        term = next * Complex64::new(tau / m as f64, 0.0);
        sum += &term;
        if term.norm() < 1e-18 * scale {
            break;
        }
    }
    sum
}

/// Frobenius error `sqrt(sum |rho_a - rho_b|^2) dx` between the open stepper
/// and the dense Liouvillian exponential, starting from a moving Gaussian.
pub fn open_oracle_error(
    grid: Grid,
    model: SoftCoulomb,
    gamma: f64,
    chi: f64,
    dt: f64,
    steps: usize,
) -> f64 {
    let wf = Wavefunction::gaussian(grid, 0.5, 0.3, 1.0).unwrap();
    let dm = DensityMatrix::pure(&wf);
    let mut cfg = StepperConfig::new(dt);
    cfg.gamma = gamma;
    cfg.chi = chi;
    let mut prop = OpenQuantum::new(dm.clone(), model, &cfg).unwrap();
    let l0 = liouvillian(&grid, &model, gamma, chi);
    let n = grid.n;
    let x = grid.points();
    let mut rho = DVector::from_vec(dm.rho.clone());
    for s in 0..steps {
        let e_mid = 0.5 * (oracle_field(s as f64 * dt) + oracle_field((s + 1) as f64 * dt));
        let diag: Vec<Complex64> = (0..n * n)
            .map(|r| I * e_mid * (x[r / n] - x[r % n]))
            .collect();
        rho = taylor_apply(&l0, &diag, &rho, dt);
        prop.step(e_mid).unwrap();
    }
    let got = prop.density_matrix().rho;
    let sq: f64 = got
        .iter()
        .zip(rho.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    sq.sqrt() * grid.dx()
}

/// Two-cycle hydrogen scenario on a coarse grid; a full track takes well
/// under a second.
pub const SMALL: &str = r#"
name = "small"
kind = "closed-quantum"

[model]
a2 = 2.0

[initial]
type = "eigenstate"
n = 1

[target]
source = "reference"
pulse = { amplitude = 0.04, omega0 = 0.06, t_f = 52.35987755982988 }
grid = { x_min = -100.0, x_max = 100.0, n = 1024 }
absorber = { width = 20.0 }

[numerics]
dt = 0.02
grid = { x_min = -100.0, x_max = 100.0, n = 1024 }
absorber = { width = 20.0 }

[tracking]
residual_bound = 1e-4
"#;

pub fn small() -> mimicry_core::scenario::ScenarioConfig {
    mimicry_core::scenario::ScenarioConfig::from_toml(SMALL, std::path::Path::new("small.toml"))
        .unwrap()
}
