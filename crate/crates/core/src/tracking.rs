//! Step-by-step synthesis of the field that makes `<x>(t)` follow a target.
//!
//! Matching `<x>(t + dt)` to `Y(t + dt)` under a midpoint-driven step gives
//!
//! `E(t+dt) = -(4/dt) [<p> - (Y(t+dt) - Y(t))/dt] + 2<V'> - 2<A> - E(t)`,
//!
//! evaluated with the expectations at `t`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::SoftCoulomb;
use crate::propagate::{build, run_driven, Diagnostics, StepperConfig};
use crate::signal::{bandlimit_filter, derivatives, relative_distance, TimeSeries};
use crate::state::{Observables, SystemState};

/// How `E(0)` is chosen before the first step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialField {
    /// `Y''(0) + <V'>(0) - <A>(0)`.
    #[default]
    Ehrenfest,
    /// A supplied value, usually the drive that produced the target.
    Reference {
        value: f64,
    },
    Zero,
    /// The field that the first midpoint step needs, so that `E(dt) = E(0)`.
    Midpoint,
}

/// Target derivative used inside the field law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetDerivative {
    /// `(Y(t+dt) - Y(t))/dt`.
    #[default]
    Forward,
    /// Centered `Y'(t)` plus the `2 Y''(t)` correction term.
    Taylor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingConfig {
    pub target: TimeSeries,
    pub initial_field: InitialField,
    pub derivative: TargetDerivative,
    /// Store the two-step average of the field, the mean of the two midpoint
    /// values around each sample. This suppresses the odd/even ringing that
    /// the `-E` term of the law can build up. The response and residual are
    /// then those of the averaged field.
    pub smoothing: bool,
    /// Allowed gaps `|Y(0) - <x>(0)|` and `|Y'(0) - <p>(0)|`.
    pub compat_tol: f64,
    /// Residual above which the result is flagged as a failure.
    pub residual_bound: Option<f64>,
    /// Abort when `|E|` exceeds this.
    pub field_limit: f64,
    /// Re-propagate a fresh state under the stored field and compare.
    pub verify: bool,
}

impl TrackingConfig {
    pub fn new(target: TimeSeries) -> Self {
        Self {
            target,
            initial_field: InitialField::default(),
            derivative: TargetDerivative::default(),
            smoothing: false,
            compat_tol: 1e-6,
            residual_bound: None,
            field_limit: 1e3,
            verify: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingResult {
    pub field: TimeSeries,
    pub y: TimeSeries,
    pub target: TimeSeries,
    /// `d^2(y, Y)`.
    pub residual: f64,
    pub per_step_error: TimeSeries,
    pub diagnostics: Diagnostics,
    /// Largest `|y_track - y_verify|`, when verification ran.
    pub verify_deviation: Option<f64>,
    pub residual_bound: Option<f64>,
    pub wall_seconds: f64,
}

impl TrackingResult {
    pub fn passed(&self) -> bool {
        self.residual_bound.map_or(true, |b| self.residual <= b)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.per_step_error.max_abs()
    }
}

/// Checks that the target starts at the state's `<x>` with slope `<p>`.
pub fn check_compatibility(obs: &Observables, target: &TimeSeries, tol: f64) -> Result<()> {
    let (d1, _) = derivatives(target)?;
    let gap_x = (target.values[0] - obs.x).abs();
    let gap_p = (d1.values[0] - obs.p).abs();
    if gap_x > tol || gap_p > tol {
        return Err(Error::Incompatible(format!(
            "|Y(0) - <x>| = {gap_x:.3e}, |Y'(0) - <p>| = {gap_p:.3e}, tolerance {tol:.1e}"
        )));
    }
    Ok(())
}

/// `E(0)` for the chosen mode.
pub fn initial_field(mode: InitialField, obs: &Observables, target: &TimeSeries) -> Result<f64> {
    Ok(match mode {
        InitialField::Ehrenfest => {
            let (_, d2) = derivatives(target)?;
            d2.values[0] + obs.vprime - obs.a
        }
        InitialField::Reference { value } => value,
        InitialField::Zero => 0.0,
        InitialField::Midpoint => {
            if target.len() < 2 {
                return Err(invalid("target needs at least two samples"));
            }
            let dt = target.dt;
            let slope = (target.values[1] - target.values[0]) / dt;
            2.0 * (slope - obs.p) / dt + obs.vprime - obs.a
        }
    })
}

/// Single-particle field law.
pub fn next_field(p: f64, vprime: f64, a: f64, y_t: f64, y_tdt: f64, e_t: f64, dt: f64) -> f64 {
    -(4.0 / dt) * (p - (y_tdt - y_t) / dt) + 2.0 * vprime - 2.0 * a - e_t
}

/// `N`-particle law with summed expectations and the summed dipole target.
pub fn next_field_n(
    sum_p: f64,
    sum_vprime: f64,
    sum_a: f64,
    n: usize,
    y_t: f64,
    y_tdt: f64,
    e_t: f64,
    dt: f64,
) -> f64 {
    let n = n as f64;
    -(4.0 / (n * dt)) * (sum_p - (y_tdt - y_t) / dt) + (2.0 / n) * (sum_vprime - sum_a) - e_t
}

/// Variant written with the target's first and second derivatives.
pub fn next_field_taylor(p: f64, vprime: f64, a: f64, dy: f64, d2y: f64, e_t: f64, dt: f64) -> f64 {
    -(4.0 / dt) * (p - dy) + 2.0 * d2y + 2.0 * vprime - 2.0 * a - e_t
}

/// Synthesizes the tracking field for `state0` and checks it by re-propagation.
pub fn track(
    state0: &SystemState,
    model: &SoftCoulomb,
    cfg: &TrackingConfig,
    stepper: &StepperConfig,
) -> Result<TrackingResult> {
    let start = Instant::now();
    let target = &cfg.target;
    if (target.dt - stepper.dt).abs() > 1e-12 * stepper.dt {
        return Err(invalid(format!(
            "target step {} differs from stepper dt {}",
            target.dt, stepper.dt
        )));
    }
    if target.len() < 5 {
        return Err(invalid("target needs at least five samples"));
    }
    let mut prop = build(state0, model, stepper)?;
    let obs0 = prop.observables();
    check_compatibility(&obs0, target, cfg.compat_tol)?;

    let n = target.len();
    let dt = target.dt;
    let derivs = match cfg.derivative {
        TargetDerivative::Forward => None,
        TargetDerivative::Taylor => Some(derivatives(target)?),
    };
    let yv = &target.values;
    let mut field = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut e = initial_field(cfg.initial_field, &obs0, target)?;
    field.push(e);
    y.push(obs0.x);
    for k in 0..n - 1 {
        let o = prop.observables();
        let next = match &derivs {
            None => next_field(o.p, o.vprime, o.a, yv[k], yv[k + 1], e, dt),
            Some((d1, d2)) => {
                next_field_taylor(o.p, o.vprime, o.a, d1.values[k], d2.values[k], e, dt)
            }
        };
        if !next.is_finite() || next.abs() > cfg.field_limit {
            return Err(Error::Divergence {
                step: k + 1,
                value: next,
            });
        }
        prop.step(0.5 * (e + next))?;
        e = next;
        field.push(e);
        y.push(prop.observables().x);
    }
    let field = TimeSeries::new(target.t0, dt, field)?;
    let mut y = TimeSeries::new(target.t0, dt, y)?;

    let verify_deviation = if cfg.verify {
        let fresh = run_driven(state0, model, &field, stepper)?;
        let dev = fresh
            .y
            .values
            .iter()
            .zip(&y.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if dev > 1e-10 {
            return Err(Error::NonDeterministic { deviation: dev });
        }
        Some(dev)
    } else {
        None
    };
    let mut diagnostics = prop.diagnostics();
    let field = if cfg.smoothing {
        let smoothed = two_step_average(&field);
        let run = run_driven(state0, model, &smoothed, stepper)?;
        y = run.y;
        diagnostics = run.diagnostics;
        smoothed
    } else {
        field
    };

    let residual = relative_distance(&y, target)?;
    let per_step_error = TimeSeries::new(
        target.t0,
        dt,
        y.values
            .iter()
            .zip(yv)
            .map(|(a, b)| (a - b).abs())
            .collect(),
    )?;
    Ok(TrackingResult {
        field,
        y,
        target: target.clone(),
        residual,
        per_step_error,
        diagnostics,
        verify_deviation,
        residual_bound: cfg.residual_bound,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean of the midpoint values on either side of each sample; the end
/// samples take their single neighbouring midpoint.
pub fn two_step_average(field: &TimeSeries) -> TimeSeries {
    let v = &field.values;
    if v.len() < 2 {
        return field.clone();
    }
    let mid: Vec<f64> = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let n = v.len();
    let values = (0..n)
        .map(|k| match k {
            0 => mid[0],
            k if k == n - 1 => mid[n - 2],
            k => 0.5 * (mid[k - 1] + mid[k]),
        })
        .collect();
    TimeSeries {
        t0: field.t0,
        dt: field.dt,
        values,
    }
}

/// Removes the field content above `omega_cut`, re-runs the system and
/// returns the new residual together with the filtered field. A cutoff at or
/// above the Nyquist frequency leaves the field untouched.
pub fn verify_bandlimited(
    result: &TrackingResult,
    state0: &SystemState,
    model: &SoftCoulomb,
    stepper: &StepperConfig,
    omega_cut: f64,
) -> Result<(f64, TimeSeries)> {
    let filtered = if omega_cut >= std::f64::consts::PI / result.field.dt {
        result.field.clone()
    } else {
        bandlimit_filter(&result.field, omega_cut)?
    };
    let run = run_driven(state0, model, &filtered, stepper)?;
    Ok((relative_distance(&run.y, &result.target)?, filtered))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law_arithmetic() {
        assert_eq!(next_field(0.0, 0.0, 0.0, 0.3, 0.3, 0.0, 0.02), 0.0);
        let v = next_field(0.01, 0.003, 0.0, 0.0, 0.008 * 0.02, 0.001, 0.02);
        assert!((v + 0.395).abs() < 1e-12);
        let slope = 0.17;
        assert!(next_field(slope, 0.0, 0.0, 1.0, 1.0 + slope * 0.1, 0.0, 0.1).abs() < 1e-12);
    }

    #[test]
    fn n_particle_law_reduces_to_single() {
        let a = next_field(0.2, 0.1, -0.01, 0.0, 0.001, 0.05, 0.02);
        let b = next_field_n(0.2, 0.1, -0.01, 1, 0.0, 0.001, 0.05, 0.02);
        assert!((a - b).abs() < 1e-12);
        let c = next_field_n(0.6, 0.3, -0.03, 3, 0.0, 0.003, 0.05, 0.02);
        assert!((a - c).abs() < 1e-9);
    }
}
