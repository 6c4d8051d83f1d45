//! The four state representations and their expectation values.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eigen::solve_bound_states;
use crate::error::{invalid, Result};
use crate::grid::{FftPair, Grid};
use crate::potential::SoftCoulomb;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    ClosedQuantum,
    OpenQuantum,
    NewtonEnsemble,
    FokkerPlanck,
}

impl SystemKind {
    pub fn is_open(self) -> bool {
        matches!(self, SystemKind::OpenQuantum | SystemKind::FokkerPlanck)
    }
}

/// `<x>`, `<p>`, `<V'>`, `<A>` and the norm of a state at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub x: f64,
    pub p: f64,
    pub vprime: f64,
    pub a: f64,
    pub norm: f64,
}

/// `<A> = -2 gamma <p>` for open systems, zero otherwise.
pub fn expectation_a(kind: SystemKind, p: f64, gamma: f64) -> Result<f64> {
    if gamma < 0.0 {
        return Err(invalid(format!(
            "damping must be non-negative, got {gamma}"
        )));
    }
    Ok(if kind.is_open() {
        -2.0 * gamma * p
    } else {
        0.0
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Wavefunction {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: Grid, psi: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if psi.len() != grid.n {
            return Err(invalid(format!(
                "{} amplitudes for {} grid points",
                psi.len(),
                grid.n
            )));
        }
        Ok(Self { grid, psi })
    }

    pub fn from_real(grid: Grid, psi: &[f64]) -> Result<Self> {
        Self::new(grid, psi.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Normalized `exp(i k0 x - (x - x0)^2 / (4 sigma^2))`.
    pub fn gaussian(grid: Grid, x0: f64, k0: f64, sigma: f64) -> Result<Self> {
        let mut wf = Self::new(
            grid,
            grid.points()
                .iter()
                .map(|&x| {
                    let env = (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
                    Complex64::from_polar(env, k0 * x)
                })
                .collect(),
        )?;
        let n = wf.norm().sqrt();
        wf.psi.iter_mut().for_each(|c| *c /= n);
        Ok(wf)
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn expectation_x(&self) -> f64 {
        let dx = self.grid.dx();
        self.psi
            .iter()
            .enumerate()
            .map(|(i, c)| self.grid.x(i) * c.norm_sqr())
            .sum::<f64>()
            * dx
    }

    /// Spectral momentum expectation, `sum k |psi_k|^2`.
    pub fn expectation_p(&self) -> f64 {
        let mut buf = self.psi.clone();
        FftPair::new(self.grid.n).forward(&mut buf);
        momentum_from_spectrum(&buf, &self.grid.wavenumbers(), self.grid.dx())
    }

    pub fn expectation_vprime(&self, model: &SoftCoulomb) -> f64 {
        let dx = self.grid.dx();
        self.psi
            .iter()
            .enumerate()
            .map(|(i, c)| model.gradient(self.grid.x(i)) * c.norm_sqr())
            .sum::<f64>()
            * dx
    }
}

pub(crate) fn momentum_from_spectrum(spec: &[Complex64], k: &[f64], dx: f64) -> f64 {
    let n = spec.len() as f64;
    spec.iter()
        .zip(k)
        .map(|(c, ki)| ki * c.norm_sqr())
        .sum::<f64>()
        * dx
        / n
}

/// `rho[i * n + j] = rho(x_i, x_j)`, normalized so `sum_i rho_ii dx = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub grid: Grid,
    pub rho: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn new(grid: Grid, rho: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if rho.len() != grid.n * grid.n {
            return Err(invalid(format!(
                "density matrix has {} entries, expected {}",
                rho.len(),
                grid.n * grid.n
            )));
        }
        Ok(Self { grid, rho })
    }

    pub fn pure(wf: &Wavefunction) -> Self {
        let n = wf.grid.n;
        let mut rho = vec![Complex64::default(); n * n];
        for i in 0..n {
            for j in 0..n {
                rho[i * n + j] = wf.psi[i] * wf.psi[j].conj();
            }
        }
        Self { grid: wf.grid, rho }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n();
        (0..n).map(move |i| self.rho[i * n + i].re)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().sum::<f64>() * self.grid.dx()
    }

    /// `Tr rho^2` in the continuum normalization.
    pub fn purity(&self) -> f64 {
        let dx = self.grid.dx();
        self.rho.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx * dx
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.rho[i * n + j] - self.rho[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn expectation_x(&self) -> f64 {
        let dx = self.grid.dx();
        self.diagonal()
            .enumerate()
            .map(|(i, d)| self.grid.x(i) * d)
            .sum::<f64>()
            * dx
    }

    pub fn expectation_vprime(&self, model: &SoftCoulomb) -> f64 {
        let dx = self.grid.dx();
        self.diagonal()
            .enumerate()
            .map(|(i, d)| model.gradient(self.grid.x(i)) * d)
            .sum::<f64>()
            * dx
    }

    pub fn expectation_p(&self) -> f64 {
        MomentumKernel::new(&self.grid).trace(&self.rho, self.grid.dx())
    }
}

/// Circulant matrix of the spectral momentum operator, `P_ij = c[(i - j) mod n]`.
#[derive(Clone, Debug)]
pub(crate) struct MomentumKernel {
    c: Vec<Complex64>,
}

impl MomentumKernel {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n;
        let mut c: Vec<Complex64> = grid
            .wavenumbers()
            .iter()
            .map(|&k| Complex64::new(k, 0.0))
            .collect();
        FftPair::new(n).inverse(&mut c);
        Self { c }
    }

    /// `Re Tr[P rho] dx` for a row-major `n x n` matrix.
    pub fn trace(&self, rho: &[Complex64], dx: f64) -> f64 {
        let n = self.c.len();
        let mut sum = Complex64::default();
        for i in 0..n {
            let row = &rho[i * n..(i + 1) * n];
            // sum_j P_ji rho_ij with P_ji = c[(j - i) mod n]
            let (head, tail) = row.split_at(i);
            for (r, c) in tail.iter().zip(&self.c) {
                sum += c * r;
            }
            for (r, c) in head.iter().zip(&self.c[n - i..]) {
                sum += c * r;
            }
        }
        sum.re * dx
    }
}

/// Phase-space grid: positions along `x`, momenta along `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGrid {
    pub x: Grid,
    pub p: Grid,
}

impl PhaseGrid {
    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.p.validate()
    }

    pub fn cell(&self) -> f64 {
        self.x.dx() * self.p.dx()
    }
}

/// Real density `rho[ix * n_p + ip]`, momentum index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceDensity {
    pub grid: PhaseGrid,
    pub rho: Vec<f64>,
}

impl PhaseSpaceDensity {
    pub fn new(grid: PhaseGrid, rho: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if rho.len() != grid.x.n * grid.p.n {
            return Err(invalid("phase-space density size does not match its grid"));
        }
        Ok(Self { grid, rho })
    }

    /// Normalized product Gaussian centered at `(x0, p0)`.
    pub fn gaussian(grid: PhaseGrid, x0: f64, p0: f64, sigma_x: f64, sigma_p: f64) -> Result<Self> {
        grid.validate()?;
        let xs = grid.x.points();
        let ps = grid.p.points();
        let mut rho = Vec::with_capacity(xs.len() * ps.len());
        for &x in &xs {
            let gx = (-(x - x0).powi(2) / (2.0 * sigma_x * sigma_x)).exp();
            for &p in &ps {
                rho.push(gx * (-(p - p0).powi(2) / (2.0 * sigma_p * sigma_p)).exp());
            }
        }
        let mut d = Self { grid, rho };
        let m = d.mass();
        d.rho.iter_mut().for_each(|v| *v /= m);
        Ok(d)
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.cell()
    }

    /// `(mass, sum x rho, sum p rho, sum V' rho)`, all times the cell area.
    pub fn moments(&self, model: &SoftCoulomb) -> (f64, f64, f64, f64) {
        let np = self.grid.p.n;
        let ps = self.grid.p.points();
        let (mut m, mut sx, mut sp, mut sv) = (0.0, 0.0, 0.0, 0.0);
        for (ix, row) in self.rho.chunks(np).enumerate() {
            let x = self.grid.x.x(ix);
            let rm: f64 = row.iter().sum();
            let rp: f64 = row.iter().zip(&ps).map(|(r, p)| r * p).sum();
            m += rm;
            sx += x * rm;
            sv += model.gradient(x) * rm;
            sp += rp;
        }
        let c = self.grid.cell();
        (m * c, sx * c, sp * c, sv * c)
    }

    pub fn expectation_x(&self) -> f64 {
        self.moments(&SoftCoulomb::new(0.0, 1.0)).1
    }

    pub fn expectation_p(&self) -> f64 {
        self.moments(&SoftCoulomb::new(0.0, 1.0)).2
    }

    pub fn expectation_vprime(&self, model: &SoftCoulomb) -> f64 {
        self.moments(model).3
    }
}

/// Independent classical trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// How a trajectory ensemble is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub trajectories: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub sigma_x: f64,
    #[serde(default = "one")]
    pub sigma_p: f64,
    /// Pair every draw `(x, p)` with `(-x, -p)` so the sample mean starts at zero.
    #[serde(default)]
    pub antithetic: bool,
}

fn one() -> f64 {
    1.0
}

impl Ensemble {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if x.len() != p.len() || x.is_empty() {
            return Err(invalid(
                "ensemble needs equal, non-zero numbers of positions and momenta",
            ));
        }
        if x.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(invalid("ensemble contains non-finite values"));
        }
        Ok(Self { x, p })
    }

    pub fn sample(spec: &EnsembleSpec) -> Result<Self> {
        if spec.trajectories == 0 {
            return Err(invalid("ensemble needs at least one trajectory"));
        }
        if spec.antithetic && spec.trajectories % 2 == 1 {
            return Err(invalid(
                "antithetic ensembles need an even trajectory count",
            ));
        }
        let nx = Normal::new(0.0, spec.sigma_x).map_err(|e| invalid(e.to_string()))?;
        let np = Normal::new(0.0, spec.sigma_p).map_err(|e| invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let draws = if spec.antithetic {
            spec.trajectories / 2
        } else {
            spec.trajectories
        };
        let mut x = Vec::with_capacity(spec.trajectories);
        let mut p = Vec::with_capacity(spec.trajectories);
        for _ in 0..draws {
            x.push(nx.sample(&mut rng));
            p.push(np.sample(&mut rng));
        }
        if spec.antithetic {
            for i in 0..draws {
                x.push(-x[i]);
                p.push(-p[i]);
            }
        }
        Self::new(x, p)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn expectation_x(&self) -> f64 {
        mean(&self.x)
    }

    pub fn expectation_p(&self) -> f64 {
        mean(&self.p)
    }

    pub fn expectation_vprime(&self, model: &SoftCoulomb) -> f64 {
        self.x.iter().map(|&x| model.gradient(x)).sum::<f64>() / self.len() as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub enum SystemState {
    Closed(Wavefunction),
    Open(DensityMatrix),
    Newton(Ensemble),
    FokkerPlanck(PhaseSpaceDensity),
}

impl SystemState {
    pub fn kind(&self) -> SystemKind {
        match self {
            SystemState::Closed(_) => SystemKind::ClosedQuantum,
            SystemState::Open(_) => SystemKind::OpenQuantum,
            SystemState::Newton(_) => SystemKind::NewtonEnsemble,
            SystemState::FokkerPlanck(_) => SystemKind::FokkerPlanck,
        }
    }

    pub fn expectation_x(&self) -> f64 {
        match self {
            SystemState::Closed(s) => s.expectation_x(),
            SystemState::Open(s) => s.expectation_x(),
            SystemState::Newton(s) => s.expectation_x(),
            SystemState::FokkerPlanck(s) => s.expectation_x(),
        }
    }

    pub fn expectation_p(&self) -> f64 {
        match self {
            SystemState::Closed(s) => s.expectation_p(),
            SystemState::Open(s) => s.expectation_p(),
            SystemState::Newton(s) => s.expectation_p(),
            SystemState::FokkerPlanck(s) => s.expectation_p(),
        }
    }

    pub fn expectation_vprime(&self, model: &SoftCoulomb) -> f64 {
        match self {
            SystemState::Closed(s) => s.expectation_vprime(model),
            SystemState::Open(s) => s.expectation_vprime(model),
            SystemState::Newton(s) => s.expectation_vprime(model),
            SystemState::FokkerPlanck(s) => s.expectation_vprime(model),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            SystemState::Closed(s) => s.norm(),
            SystemState::Open(s) => s.trace(),
            SystemState::Newton(_) => 1.0,
            SystemState::FokkerPlanck(s) => s.mass(),
        }
    }

    pub fn observables(&self, model: &SoftCoulomb, gamma: f64) -> Result<Observables> {
        let p = self.expectation_p();
        Ok(Observables {
            x: self.expectation_x(),
            p,
            vprime: self.expectation_vprime(model),
            a: expectation_a(self.kind(), p, gamma)?,
            norm: self.norm(),
        })
    }
}

/// Initial condition for a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// Bound state `n` (1 = ground) of the model on the dynamics grid.
    Eigenstate {
        n: usize,
    },
    /// Product Gaussian in phase space, or sampled trajectories from it.
    Gaussian {
        #[serde(default = "one")]
        sigma_x: f64,
        #[serde(default = "one")]
        sigma_p: f64,
    },
    Ensemble(EnsembleSpec),
}

/// Builds the starting state of the requested kind.
pub fn init_state(
    kind: SystemKind,
    model: &SoftCoulomb,
    spec: &InitialState,
    grid: Option<&Grid>,
    phase_grid: Option<&PhaseGrid>,
) -> Result<SystemState> {
    let need_grid = || grid.ok_or_else(|| invalid("quantum states need a spatial grid"));
    match (kind, spec) {
        (SystemKind::ClosedQuantum | SystemKind::OpenQuantum, InitialState::Eigenstate { n }) => {
            if *n == 0 {
                return Err(invalid("eigenstate index starts at 1"));
            }
            let g = need_grid()?;
            let states = solve_bound_states(model, g, *n)?;
            let wf = Wavefunction::from_real(*g, states.state(*n)?)?;
            Ok(if kind == SystemKind::ClosedQuantum {
                SystemState::Closed(wf)
            } else {
                SystemState::Open(DensityMatrix::pure(&wf))
            })
        }
        (SystemKind::NewtonEnsemble, InitialState::Ensemble(e)) => {
            Ok(SystemState::Newton(Ensemble::sample(e)?))
        }
        (SystemKind::FokkerPlanck, InitialState::Gaussian { sigma_x, sigma_p }) => {
            let g = phase_grid.ok_or_else(|| invalid("phase-space states need a phase grid"))?;
            Ok(SystemState::FokkerPlanck(PhaseSpaceDensity::gaussian(
                *g, 0.0, 0.0, *sigma_x, *sigma_p,
            )?))
        }
        (k, s) => Err(invalid(format!(
            "initial state {s:?} does not apply to {k:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_vanishes_for_closed_systems() {
        assert_eq!(
            expectation_a(SystemKind::ClosedQuantum, 0.3, 1e-4).unwrap(),
            0.0
        );
        assert!((expectation_a(SystemKind::OpenQuantum, 0.3, 1e-4).unwrap() + 6e-5).abs() < 1e-18);
        assert!(expectation_a(SystemKind::OpenQuantum, 0.3, -1.0).is_err());
    }

    #[test]
    fn momentum_kernel_matches_fft() {
        let g = Grid::centered(10.0, 32).unwrap();
        let wf = Wavefunction::gaussian(g, 1.0, 0.7, 1.0).unwrap();
        let dm = DensityMatrix::pure(&wf);
        assert!((dm.expectation_p() - wf.expectation_p()).abs() < 1e-12);
    }

    #[test]
    fn antithetic_mean_is_zero() {
        let e = Ensemble::sample(&EnsembleSpec {
            trajectories: 1000,
            seed: 3,
            sigma_x: 1.0,
            sigma_p: 1.0,
            antithetic: true,
        })
        .unwrap();
        assert!(e.expectation_x().abs() < 1e-15);
        assert!(e.expectation_p().abs() < 1e-15);
    }

    #[test]
    fn mismatched_init_is_rejected() {
        let r = init_state(
            SystemKind::NewtonEnsemble,
            &SoftCoulomb::argon(),
            &InitialState::Eigenstate { n: 1 },
            None,
            None,
        );
        assert!(r.is_err());
    }
}
