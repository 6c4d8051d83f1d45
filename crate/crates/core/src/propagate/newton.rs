use super::{Diagnostics, Propagator, StepperConfig};
use crate::error::{invalid, Error, Result};
use crate::potential::SoftCoulomb;
use crate::state::{Ensemble, Observables, SystemKind, SystemState};

/// Velocity Verlet for independent trajectories under `-V'(x) + E_mid`.
pub struct NewtonEnsemble {
    model: SoftCoulomb,
    dt: f64,
    x: Vec<f64>,
    p: Vec<f64>,
    force: Vec<f64>,
    obs: Observables,
    diag: Diagnostics,
}

impl NewtonEnsemble {
    pub fn new(ens: Ensemble, model: SoftCoulomb, cfg: &StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let ens = Ensemble::new(ens.x, ens.p)?;
        let force = ens.x.iter().map(|&x| -model.gradient(x)).collect();
        let mut s = Self {
            model,
            dt: cfg.dt,
            x: ens.x,
            p: ens.p,
            force,
            obs: Observables::default(),
            diag: Diagnostics::default(),
        };
        s.refresh();
        Ok(s)
    }

    fn refresh(&mut self) {
        let n = self.x.len() as f64;
        self.obs = Observables {
            x: self.x.iter().sum::<f64>() / n,
            p: self.p.iter().sum::<f64>() / n,
            vprime: -self.force.iter().sum::<f64>() / n,
            a: 0.0,
            norm: 1.0,
        };
    }

    /// Total energy `p^2/2 + V(x)` per trajectory in the absence of a field.
    pub fn energies(&self) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.p)
            .map(|(&x, &p)| 0.5 * p * p + self.model.value(x))
            .collect()
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble {
            x: self.x.clone(),
            p: self.p.clone(),
        }
    }
}

impl Propagator for NewtonEnsemble {
    fn kind(&self) -> SystemKind {
        SystemKind::NewtonEnsemble
    }

    fn observables(&self) -> Observables {
        self.obs
    }

    fn step(&mut self, e_mid: f64) -> Result<()> {
        if !e_mid.is_finite() {
            return Err(invalid("non-finite field value"));
        }
        let h = 0.5 * self.dt;
        self.diag.steps += 1;
        for (i, ((x, p), f)) in self
            .x
            .iter_mut()
            .zip(self.p.iter_mut())
            .zip(self.force.iter_mut())
            .enumerate()
        {
            *p += h * (*f + e_mid);
            *x += self.dt * *p;
            *f = -self.model.gradient(*x);
            *p += h * (*f + e_mid);
            if !(x.is_finite() && p.is_finite()) {
                return Err(Error::NonFinite {
                    index: i,
                    step: self.diag.steps,
                });
            }
        }
        self.refresh();
        Ok(())
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diag
    }

    fn state(&self) -> SystemState {
        SystemState::Newton(self.ensemble())
    }
}
