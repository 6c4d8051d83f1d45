//! One-step evolution for the four equations of motion and driven runs.
//!
//! Every stepper is second order in `dt` and drives the system with the
//! midpoint field of the interval. Grid-based steppers may absorb density at
//! the box edges; whatever leaves the box is handed to an [`Outflow`] that
//! keeps following free motion in the field, so the totals of mass, `<x>` and
//! `<p>` stay those of the unbounded system.

mod closed;
mod fokker_planck;
mod newton;
mod open;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use closed::ClosedQuantum;
pub use fokker_planck::FokkerPlanck;
pub use newton::NewtonEnsemble;
pub use open::OpenQuantum;

use crate::error::{invalid, Result};
use crate::potential::SoftCoulomb;
use crate::signal::TimeSeries;
use crate::state::{Observables, SystemKind, SystemState};

/// Edge absorber widths; zero disables absorption on that axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Absorber {
    /// Width in position (a.u.).
    #[serde(default)]
    pub width: f64,
    /// Width in momentum, phase-space grids only.
    #[serde(default)]
    pub p_width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub chi: f64,
    #[serde(default)]
    pub diffusion: f64,
    #[serde(default)]
    pub absorber: Absorber,
    /// Edge probability that aborts a run when no absorber is set.
    #[serde(default = "default_leak_threshold")]
    pub leak_threshold: f64,
    /// Zero out negative phase-space density after each step.
    #[serde(default = "yes")]
    pub clip_negative: bool,
}

fn default_leak_threshold() -> f64 {
    1e-6
}

fn yes() -> bool {
    true
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            gamma: 0.0,
            chi: 0.0,
            diffusion: 0.0,
            absorber: Absorber::default(),
            leak_threshold: default_leak_threshold(),
            clip_negative: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("chi", self.chi),
            ("diffusion", self.diffusion),
            ("absorber width", self.absorber.width),
            ("absorber p_width", self.absorber.p_width),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Conservation and boundary bookkeeping accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    /// Mass handed to the outflow so far.
    pub absorbed: f64,
    /// Total negative density removed by clipping.
    pub clipped: f64,
    /// Worst deviation of the retained plus absorbed mass from its start value.
    pub max_mass_drift: f64,
    /// Most negative grid-cell population seen in a density matrix.
    #[serde(default)]
    pub min_population: f64,
}

/// One side's worth of escaped density: mass and mass-weighted `x` and `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Escaped {
    pub mass: f64,
    pub x: f64,
    pub p: f64,
}

/// Density that has left the box, moving as a point mass per side under the
/// field and the potential force at its mean position. A side's mass can be
/// negative when a non-positive density matrix sheds negative population; it
/// still responds to the field so that the total response stays one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outflow {
    pub left: Escaped,
    pub right: Escaped,
}

impl Outflow {
    fn sides(&mut self) -> [&mut Escaped; 2] {
        [&mut self.left, &mut self.right]
    }

    pub fn mass(&self) -> f64 {
        self.left.mass + self.right.mass
    }

    /// `(x, p, V')` summed over both sides.
    pub fn moments(&self, model: &SoftCoulomb) -> (f64, f64, f64) {
        let mut v = 0.0;
        for s in [&self.left, &self.right] {
            if s.mass != 0.0 {
                v += s.mass * model.gradient(s.x / s.mass);
            }
        }
        (self.left.x + self.right.x, self.left.p + self.right.p, v)
    }

    pub(crate) fn kick(&mut self, model: &SoftCoulomb, e: f64, tau: f64) {
        for s in self.sides() {
            if s.mass != 0.0 {
                s.p += tau * s.mass * (e - model.gradient(s.x / s.mass));
            }
        }
    }

    pub(crate) fn drift(&mut self, tau: f64) {
        for s in self.sides() {
            s.x += tau * s.p;
        }
    }

    pub(crate) fn damp(&mut self, factor: f64) {
        for s in self.sides() {
            s.p *= factor;
        }
    }

    pub(crate) fn absorb(&mut self, left: bool, mass: f64, x: f64, p: f64) {
        let s = if left {
            &mut self.left
        } else {
            &mut self.right
        };
        s.mass += mass;
        s.x += x;
        s.p += p;
    }
}

/// A system advancing one step at a time under a given midpoint field.
pub trait Propagator: Send {
    fn kind(&self) -> SystemKind;

    /// Expectations of the whole system, absorbed density included.
    fn observables(&self) -> Observables;

    fn step(&mut self, e_mid: f64) -> Result<()>;

    fn diagnostics(&self) -> Diagnostics;

    fn outflow(&self) -> Outflow {
        Outflow::default()
    }

    /// Current state of the retained density.
    fn state(&self) -> SystemState;
}

/// Builds the stepper matching the state's representation.
pub fn build(
    state: &SystemState,
    model: &SoftCoulomb,
    cfg: &StepperConfig,
) -> Result<Box<dyn Propagator>> {
    cfg.validate()?;
    Ok(match state {
        SystemState::Closed(wf) => Box::new(ClosedQuantum::new(wf.clone(), *model, cfg)?),
        SystemState::Open(dm) => Box::new(OpenQuantum::new(dm.clone(), *model, cfg)?),
        SystemState::Newton(e) => Box::new(NewtonEnsemble::new(e.clone(), *model, cfg)?),
        SystemState::FokkerPlanck(d) => Box::new(FokkerPlanck::new(d.clone(), *model, cfg)?),
    })
}

/// Expectation traces of a driven simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivenRunResult {
    pub field: TimeSeries,
    pub y: TimeSeries,
    pub p: TimeSeries,
    pub vprime: TimeSeries,
    pub a: TimeSeries,
    pub norm: TimeSeries,
    pub diagnostics: Diagnostics,
    pub wall_seconds: f64,
}

/// Collects observables sample by sample.
pub(crate) struct Recorder {
    y: Vec<f64>,
    p: Vec<f64>,
    vprime: Vec<f64>,
    a: Vec<f64>,
    norm: Vec<f64>,
}

impl Recorder {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            y: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            vprime: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            norm: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, o: &Observables) {
        self.y.push(o.x);
        self.p.push(o.p);
        self.vprime.push(o.vprime);
        self.a.push(o.a);
        self.norm.push(o.norm);
    }

    pub fn finish(
        self,
        field: TimeSeries,
        diagnostics: Diagnostics,
        wall_seconds: f64,
    ) -> Result<DrivenRunResult> {
        let (t0, dt) = (field.t0, field.dt);
        Ok(DrivenRunResult {
            y: TimeSeries::new(t0, dt, self.y)?,
            p: TimeSeries::new(t0, dt, self.p)?,
            vprime: TimeSeries::new(t0, dt, self.vprime)?,
            a: TimeSeries::new(t0, dt, self.a)?,
            norm: TimeSeries::new(t0, dt, self.norm)?,
            field,
            diagnostics,
            wall_seconds,
        })
    }
}

/// Propagates `state0` through `field`, stepping with midpoint values and
/// recording the observables at every sample.
pub fn run_driven(
    state0: &SystemState,
    model: &SoftCoulomb,
    field: &TimeSeries,
    cfg: &StepperConfig,
) -> Result<DrivenRunResult> {
    if (field.dt - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(invalid(format!(
            "field step {} differs from stepper dt {}",
            field.dt, cfg.dt
        )));
    }
    let start = Instant::now();
    let mut prop = build(state0, model, cfg)?;
    run_with(prop.as_mut(), field, start)
}

pub(crate) fn run_with(
    prop: &mut dyn Propagator,
    field: &TimeSeries,
    start: Instant,
) -> Result<DrivenRunResult> {
    let n = field.len();
    let mut rec = Recorder::with_capacity(n);
    rec.push(&prop.observables());
    for k in 0..n.saturating_sub(1) {
        let e_mid = 0.5 * (field.values[k] + field.values[k + 1]);
        prop.step(e_mid)?;
        rec.push(&prop.observables());
    }
    rec.finish(
        field.clone(),
        prop.diagnostics(),
        start.elapsed().as_secs_f64(),
    )
}

/// Mass-drift check shared by the grid steppers.
pub(crate) fn check_mass(diag: &mut Diagnostics, total: f64, initial: f64, tol: f64) -> Result<()> {
    let drift = (total - initial).abs();
    diag.max_mass_drift = diag.max_mass_drift.max(drift);
    if drift > tol {
        return Err(crate::error::Error::Instability {
            step: diag.steps,
            reason: format!("mass drifted by {drift:.3e}"),
        });
    }
    Ok(())
}
