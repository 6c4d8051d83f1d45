use num_complex::Complex64;

use super::closed::EdgeMask;
use super::{check_mass, Diagnostics, Outflow, Propagator, StepperConfig};
use crate::error::{invalid, Error, Result};
use crate::grid::{cis, modulate, transpose_square, FftPair, Grid};
use crate::potential::SoftCoulomb;
use crate::state::{DensityMatrix, MomentumKernel, Observables, SystemKind, SystemState};

/// Caldeira-Leggett master equation in the position representation,
///
/// `d rho/dt = -i[H, rho] - gamma (x - x')(d_x - d_x') rho - chi (x - x')^2 rho`.
///
/// One step is `K(dt/2) [T(dt/2) (1 + dt G) T(dt/2)] K(dt/2)`, where `K` holds
/// the potential phase and the exact decoherence factor, `T` is the kinetic
/// propagator on both indices and `G` is the damping term evaluated with
/// spectral derivatives.
pub struct OpenQuantum {
    model: SoftCoulomb,
    grid: Grid,
    n: usize,
    dt: f64,
    gamma: f64,
    chi: f64,
    rho: Vec<Complex64>,
    work: Vec<Complex64>,
    v_half: Vec<Complex64>,
    phase: Vec<Complex64>,
    decay: Vec<f64>,
    kinetic: Vec<Complex64>,
    kd: Vec<f64>,
    x: Vec<f64>,
    vprime: Vec<f64>,
    mask: Option<EdgeMask>,
    leak_threshold: f64,
    fft: FftPair,
    pk: MomentumKernel,
    outflow: Outflow,
    obs: Observables,
    diag: Diagnostics,
    initial_mass: f64,
}

/// Populations below this are reported once per run.
const NEGATIVITY_WARN: f64 = 1e-6;

impl OpenQuantum {
    pub fn new(dm: DensityMatrix, model: SoftCoulomb, cfg: &StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = dm.grid;
        grid.validate()?;
        let n = grid.n;
        let dt = cfg.dt;
        let x = grid.points();
        let (v, vprime) = model.sample(&grid);
        let dx = grid.dx();
        let decay = (0..2 * n - 1)
            .map(|d| {
                let s = (d as f64 - (n - 1) as f64) * dx;
                (-cfg.chi * s * s * 0.5 * dt).exp()
            })
            .collect();
        let k = grid.wavenumbers();
        let kin_tau = if cfg.gamma > 0.0 { 0.25 * dt } else { 0.5 * dt };
        let mut kd = k.clone();
        kd[n / 2] = 0.0;
        let mut s = Self {
            model,
            grid,
            n,
            dt,
            gamma: cfg.gamma,
            chi: cfg.chi,
            work: vec![Complex64::default(); n * n],
            v_half: v.iter().map(|vi| cis(-0.5 * dt * vi)).collect(),
            phase: vec![Complex64::default(); n],
            decay,
            kinetic: k.iter().map(|ki| cis(-kin_tau * ki * ki)).collect(),
            kd,
            x,
            vprime,
            mask: EdgeMask::new(&grid, cfg.absorber.width),
            leak_threshold: cfg.leak_threshold,
            fft: FftPair::new(n),
            pk: MomentumKernel::new(&grid),
            outflow: Outflow::default(),
            obs: Observables::default(),
            diag: Diagnostics::default(),
            initial_mass: 0.0,
            rho: dm.rho,
        };
        if s.rho.iter().any(|c| !c.is_finite()) {
            return Err(invalid("density matrix contains non-finite entries"));
        }
        s.refresh();
        s.initial_mass = s.obs.norm;
        Ok(s)
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix {
            grid: self.grid,
            rho: self.rho.clone(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Rows then columns; the result is stored transposed, `[q * n + k]`.
    fn fft2_forward(fft: &mut FftPair, a: &mut [Complex64], n: usize) {
        fft.forward(a);
        transpose_square(a, n);
        fft.forward(a);
    }

    fn fft2_inverse(fft: &mut FftPair, a: &mut [Complex64], n: usize) {
        fft.inverse_unscaled(a);
        transpose_square(a, n);
        fft.inverse_unscaled(a);
        let s = 1.0 / (n * n) as f64;
        a.iter_mut().for_each(|v| *v *= s);
    }

    fn apply_kinetic(&mut self) {
        let n = self.n;
        for (q, row) in self.rho.chunks_mut(n).enumerate() {
            let cq = self.kinetic[q].conj();
            for (v, kk) in row.iter_mut().zip(&self.kinetic) {
                *v *= kk * cq;
            }
        }
    }

    fn apply_potential(&mut self) {
        let n = self.n;
        for (i, row) in self.rho.chunks_mut(n).enumerate() {
            let ai = self.phase[i];
            let dec = &self.decay[n - 1 - i..2 * n - 1 - i];
            for ((v, aj), d) in row.iter_mut().zip(&self.phase).zip(dec) {
                *v *= ai * aj.conj() * d;
            }
        }
    }

    /// Adds `dt G[rho]` to the spectrum held in `rho`.
    fn damping(&mut self) {
        let n = self.n;
        let c = -self.gamma * self.dt;
        for (q, (w, r)) in self.work.chunks_mut(n).zip(self.rho.chunks(n)).enumerate() {
            let kq = self.kd[q];
            for ((wv, rv), kk) in w.iter_mut().zip(r).zip(&self.kd) {
                *wv = rv * Complex64::new(0.0, kk - kq);
            }
        }
        Self::fft2_inverse(&mut self.fft, &mut self.work, n);
        for (i, row) in self.work.chunks_mut(n).enumerate() {
            let xi = self.x[i];
            for (v, xj) in row.iter_mut().zip(&self.x) {
                *v *= c * (xi - xj);
            }
        }
        Self::fft2_forward(&mut self.fft, &mut self.work, n);
        for (r, w) in self.rho.iter_mut().zip(&self.work) {
            *r += w;
        }
    }

    fn local(&self, range: std::ops::Range<usize>) -> (f64, f64, f64) {
        let n = self.n;
        let (mut m, mut sx, mut sv) = (0.0, 0.0, 0.0);
        for i in range {
            let w = self.rho[i * n + i].re;
            m += w;
            sx += self.x[i] * w;
            sv += self.vprime[i] * w;
        }
        let dx = self.grid.dx();
        (m * dx, sx * dx, sv * dx)
    }

    fn momentum(&self) -> f64 {
        self.pk.trace(&self.rho, self.grid.dx())
    }

    fn refresh(&mut self) {
        let p = self.momentum();
        self.refresh_with(p);
    }

    fn refresh_with(&mut self, p_inner: f64) {
        let (m, x, v) = self.local(0..self.n);
        let (ox, op, ov) = self.outflow.moments(&self.model);
        let p = p_inner + op;
        self.obs = Observables {
            x: x + ox,
            p,
            vprime: v + ov,
            a: -2.0 * self.gamma * p,
            norm: m,
        };
    }

    fn mask_side(&mut self, left: bool, p_before: f64) -> f64 {
        let n = self.n;
        let mask = self.mask.as_ref().expect("mask present");
        let range = if left {
            mask.left.clone()
        } else {
            mask.right.clone()
        };
        let dx = self.grid.dx();
        let (mut dm, mut dxm) = (0.0, 0.0);
        for i in range.clone() {
            let m = mask.values[i];
            let removed = (1.0 - m * m) * self.rho[i * n + i].re;
            dm += removed;
            dxm += self.x[i] * removed;
        }
        if dm == 0.0 {
            return p_before;
        }
        for (i, row) in self.rho.chunks_mut(n).enumerate() {
            for j in range.clone() {
                row[j] *= mask.values[j];
            }
            if range.contains(&i) {
                let m = mask.values[i];
                row.iter_mut().for_each(|v| *v *= m);
            }
        }
        let p_after = self.momentum();
        self.outflow
            .absorb(left, dm * dx, dxm * dx, p_before - p_after);
        p_after
    }

    fn edge_density(&self) -> f64 {
        let w = (self.n / 64).max(1);
        self.local(0..w).0 + self.local(self.n - w..self.n).0
    }

    /// Caldeira-Leggett dynamics is not completely positive. Negative
    /// populations are recorded and logged, not repaired.
    fn track_negativity(&mut self) {
        let dx = self.grid.dx();
        let min = (0..self.n)
            .map(|i| self.rho[i * self.n + i].re * dx)
            .fold(f64::INFINITY, f64::min);
        if min < -NEGATIVITY_WARN && self.diag.min_population >= -NEGATIVITY_WARN {
            log::warn!(
                "negative population {min:.2e} at step {}; the master equation is not completely positive",
                self.diag.steps
            );
        }
        self.diag.min_population = self.diag.min_population.min(min);
    }
}

impl Propagator for OpenQuantum {
    fn kind(&self) -> SystemKind {
        SystemKind::OpenQuantum
    }

    fn observables(&self) -> Observables {
        self.obs
    }

    fn step(&mut self, e_mid: f64) -> Result<()> {
        if !e_mid.is_finite() {
            return Err(invalid("non-finite field value"));
        }
        let n = self.n;
        let dt = self.dt;
        modulate(
            &self.v_half,
            self.grid.x_min,
            self.grid.dx(),
            0.5 * dt * e_mid,
            &mut self.phase,
        );
        self.apply_potential();
        Self::fft2_forward(&mut self.fft, &mut self.rho, n);
        self.apply_kinetic();
        if self.gamma > 0.0 {
            self.damping();
            self.apply_kinetic();
        }
        Self::fft2_inverse(&mut self.fft, &mut self.rho, n);
        self.apply_potential();

        let damp = 1.0 - 2.0 * self.gamma * dt;
        self.outflow.kick(&self.model, e_mid, 0.5 * dt);
        self.outflow.drift(0.5 * dt);
        self.outflow.damp(damp);
        self.outflow.drift(0.5 * dt);
        self.outflow.kick(&self.model, e_mid, 0.5 * dt);
        self.diag.steps += 1;

        if self.mask.is_some() {
            let p0 = self.momentum();
            let p1 = self.mask_side(true, p0);
            let p2 = self.mask_side(false, p1);
            self.refresh_with(p2);
        } else {
            let edge = self.edge_density();
            if edge > self.leak_threshold {
                return Err(Error::DomainLeakage {
                    step: self.diag.steps,
                    density: edge,
                });
            }
            self.refresh();
        }
        self.diag.absorbed = self.outflow.mass();
        self.track_negativity();
        check_mass(
            &mut self.diag,
            self.obs.norm + self.outflow.mass(),
            self.initial_mass,
            1e-6,
        )
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diag
    }

    fn outflow(&self) -> Outflow {
        self.outflow
    }

    fn state(&self) -> SystemState {
        SystemState::Open(self.density_matrix())
    }
}
