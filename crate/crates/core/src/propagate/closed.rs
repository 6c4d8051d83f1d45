use num_complex::Complex64;

use super::{check_mass, Diagnostics, Outflow, Propagator, StepperConfig};
use crate::error::{invalid, Error, Result};
use crate::grid::{cis, modulate, FftPair, Grid};
use crate::potential::SoftCoulomb;
use crate::state::{momentum_from_spectrum, Observables, SystemKind, SystemState, Wavefunction};

/// Edge mask split at the origin, with the index ranges where it is below one.
#[derive(Clone, Debug)]
pub(crate) struct EdgeMask {
    pub values: Vec<f64>,
    pub left: std::ops::Range<usize>,
    pub right: std::ops::Range<usize>,
}

impl EdgeMask {
    pub fn new(grid: &Grid, width: f64) -> Option<Self> {
        if width <= 0.0 {
            return None;
        }
        let values = grid.edge_mask(width);
        let n = grid.n;
        let left_end = values
            .iter()
            .position(|&m| m >= 1.0)
            .unwrap_or(n / 2)
            .min(n / 2);
        let right_start = n - values
            .iter()
            .rev()
            .position(|&m| m >= 1.0)
            .unwrap_or(n / 2)
            .min(n / 2);
        Some(Self {
            values,
            left: 0..left_end,
            right: right_start..n,
        })
    }
}

/// Split-operator propagation of a pure state, `exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)`
/// with `V = V(x) - x E_mid`.
pub struct ClosedQuantum {
    model: SoftCoulomb,
    grid: Grid,
    dt: f64,
    psi: Vec<Complex64>,
    v_half: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    k: Vec<f64>,
    x: Vec<f64>,
    vprime: Vec<f64>,
    mask: Option<EdgeMask>,
    leak_threshold: f64,
    fft: FftPair,
    phase: Vec<Complex64>,
    buf: Vec<Complex64>,
    outflow: Outflow,
    obs: Observables,
    diag: Diagnostics,
    initial_mass: f64,
}

impl ClosedQuantum {
    pub fn new(wf: Wavefunction, model: SoftCoulomb, cfg: &StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = wf.grid;
        grid.validate()?;
        let dt = cfg.dt;
        let (v, vprime) = model.sample(&grid);
        let k = grid.wavenumbers();
        let mut s = Self {
            model,
            grid,
            dt,
            v_half: v.iter().map(|vi| cis(-0.5 * dt * vi)).collect(),
            kinetic: k.iter().map(|ki| cis(-0.5 * dt * ki * ki)).collect(),
            x: grid.points(),
            vprime,
            k,
            mask: EdgeMask::new(&grid, cfg.absorber.width),
            leak_threshold: cfg.leak_threshold,
            fft: FftPair::new(grid.n),
            phase: vec![Complex64::default(); grid.n],
            buf: vec![Complex64::default(); grid.n],
            outflow: Outflow::default(),
            obs: Observables::default(),
            diag: Diagnostics::default(),
            initial_mass: 0.0,
            psi: wf.psi,
        };
        if s.psi.iter().any(|c| !c.is_finite()) {
            return Err(invalid("wavefunction contains non-finite amplitudes"));
        }
        let p = s.momentum();
        s.refresh(p);
        s.initial_mass = s.obs.norm;
        Ok(s)
    }

    pub fn wavefunction(&self) -> Wavefunction {
        Wavefunction {
            grid: self.grid,
            psi: self.psi.clone(),
        }
    }

    fn momentum(&mut self) -> f64 {
        self.buf.copy_from_slice(&self.psi);
        self.fft.forward(&mut self.buf);
        momentum_from_spectrum(&self.buf, &self.k, self.grid.dx())
    }

    /// `(norm, x, V')` of the retained amplitude over an index range.
    fn local(&self, range: std::ops::Range<usize>) -> (f64, f64, f64) {
        let (mut m, mut sx, mut sv) = (0.0, 0.0, 0.0);
        for i in range {
            let w = self.psi[i].norm_sqr();
            m += w;
            sx += self.x[i] * w;
            sv += self.vprime[i] * w;
        }
        let dx = self.grid.dx();
        (m * dx, sx * dx, sv * dx)
    }

    fn refresh(&mut self, p_inner: f64) {
        let (m, x, v) = self.local(0..self.grid.n);
        let (ox, op, ov) = self.outflow.moments(&self.model);
        self.obs = Observables {
            x: x + ox,
            p: p_inner + op,
            vprime: v + ov,
            a: 0.0,
            norm: m,
        };
    }

    fn mask_side(&mut self, left: bool, p_before: f64) -> f64 {
        let mask = self.mask.as_ref().expect("mask present");
        let range = if left {
            mask.left.clone()
        } else {
            mask.right.clone()
        };
        let dx = self.grid.dx();
        let (mut dm, mut dxm) = (0.0, 0.0);
        for i in range {
            let m = mask.values[i];
            let w = self.psi[i].norm_sqr();
            let removed = (1.0 - m * m) * w;
            dm += removed;
            dxm += self.x[i] * removed;
            self.psi[i] *= m;
        }
        if dm == 0.0 {
            return p_before;
        }
        let p_after = self.momentum();
        self.outflow
            .absorb(left, dm * dx, dxm * dx, p_before - p_after);
        p_after
    }

    fn edge_density(&self) -> f64 {
        let w = (self.grid.n / 64).max(1);
        let n = self.grid.n;
        (self.local(0..w).0) + (self.local(n - w..n).0)
    }
}

impl Propagator for ClosedQuantum {
    fn kind(&self) -> SystemKind {
        SystemKind::ClosedQuantum
    }

    fn observables(&self) -> Observables {
        self.obs
    }

    fn step(&mut self, e_mid: f64) -> Result<()> {
        if !e_mid.is_finite() {
            return Err(invalid("non-finite field value"));
        }
        let dt = self.dt;
        modulate(
            &self.v_half,
            self.grid.x_min,
            self.grid.dx(),
            0.5 * dt * e_mid,
            &mut self.phase,
        );
        for (p, ph) in self.psi.iter_mut().zip(&self.phase) {
            *p *= ph;
        }
        self.fft.forward(&mut self.psi);
        for (p, k) in self.psi.iter_mut().zip(&self.kinetic) {
            *p *= k;
        }
        self.fft.inverse(&mut self.psi);
        for (p, ph) in self.psi.iter_mut().zip(&self.phase) {
            *p *= ph;
        }

        self.outflow.kick(&self.model, e_mid, 0.5 * dt);
        self.outflow.drift(dt);
        self.outflow.kick(&self.model, e_mid, 0.5 * dt);
        self.diag.steps += 1;

        let p = if self.mask.is_some() {
            let p0 = self.momentum();
            let p1 = self.mask_side(true, p0);
            self.mask_side(false, p1)
        } else {
            let edge = self.edge_density();
            if edge > self.leak_threshold {
                return Err(Error::DomainLeakage {
                    step: self.diag.steps,
                    density: edge,
                });
            }
            self.momentum()
        };
        self.refresh(p);
        self.diag.absorbed = self.outflow.mass();
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
        SystemState::Closed(self.wavefunction())
    }
}
