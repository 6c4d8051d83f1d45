//! Uniformly sampled time series, the reference drive pulse and spectral tools.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Real samples on the uniform grid `t_i = t0 + i dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(invalid("start time must be finite"));
        }
        Ok(Self { t0, dt, values })
    }

    /// Series of `n` zeros.
    pub fn zeros(t0: f64, dt: f64, n: usize) -> Result<Self> {
        Self::new(t0, dt, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    /// Length of the sampled interval, `(len - 1) dt`.
    pub fn span(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Same start, step and length as `other`, to a relative tolerance of 1e-9 on the step.
    pub fn check_same_grid(&self, other: &TimeSeries) -> Result<()> {
        let tol = 1e-9 * self.dt;
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples vs {} samples",
                self.len(),
                other.len()
            )));
        }
        if (self.dt - other.dt).abs() > tol || (self.t0 - other.t0).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "(t0={}, dt={}) vs (t0={}, dt={})",
                self.t0, self.dt, other.t0, other.dt
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Which part of the pulse is sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseWindow {
    /// The whole envelope, `[-t_f, t_f]`.
    #[default]
    Symmetric,
    /// Peak to end, `[0, t_f]`.
    Half,
}

/// `E(t) = E0 cos^2(pi t / 2 t_f) cos(omega0 t)` for `|t| <= t_f`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivePulse {
    pub amplitude: f64,
    pub omega0: f64,
    /// Half-duration; defaults to four optical cycles.
    pub t_f: f64,
    #[serde(default)]
    pub window: PulseWindow,
}

impl Default for DrivePulse {
    fn default() -> Self {
        Self::reference()
    }
}

impl DrivePulse {
    /// 0.04 a.u. at 760 nm (0.06 a.u.), eight cycles under the envelope.
    pub fn reference() -> Self {
        let omega0 = 0.06;
        Self {
            amplitude: 0.04,
            omega0,
            t_f: 8.0 * PI / omega0,
            window: PulseWindow::Symmetric,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t.abs() > self.t_f {
            return 0.0;
        }
        let env = (PI * t / (2.0 * self.t_f)).cos();
        self.amplitude * env * env * (self.omega0 * t).cos()
    }

    pub fn start_time(&self) -> f64 {
        match self.window {
            PulseWindow::Symmetric => -self.t_f,
            PulseWindow::Half => 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        match self.window {
            PulseWindow::Symmetric => 2.0 * self.t_f,
            PulseWindow::Half => self.t_f,
        }
    }

    /// Number of steps of size `dt` covering the window.
    pub fn steps(&self, dt: f64) -> usize {
        (self.duration() / dt).round() as usize
    }

    /// Samples the pulse with `steps(dt) + 1` points.
    pub fn sample(&self, dt: f64) -> Result<TimeSeries> {
        if !(self.t_f > 0.0 && self.omega0 > 0.0) {
            return Err(invalid(
                "pulse duration and carrier frequency must be positive",
            ));
        }
        let t0 = self.start_time();
        let n = self.steps(dt) + 1;
        let values = (0..n).map(|i| self.value(t0 + i as f64 * dt)).collect();
        TimeSeries::new(t0, dt, values)
    }
}

/// Full complex DFT of a series, `X_k = sum_j x_j exp(-2 pi i jk/N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub dt: f64,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Bin spacing, `2 pi / (N dt)`.
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / (self.len() as f64 * self.dt)
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }

    /// Signed angular frequency of bin `k`.
    pub fn omega(&self, k: usize) -> f64 {
        let n = self.len();
        let signed = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        signed * self.d_omega()
    }

    /// `(omega, |X|)` for the non-negative half of the spectrum.
    pub fn one_sided(&self) -> Vec<(f64, f64)> {
        (0..=self.len() / 2)
            .map(|k| (self.omega(k), self.coeffs[k].norm()))
            .collect()
    }

    /// Largest `|X|` among non-negative bins in `[lo, hi]`.
    pub fn band_max(&self, lo: f64, hi: f64) -> f64 {
        self.one_sided()
            .into_iter()
            .filter(|(w, _)| *w >= lo && *w <= hi)
            .fold(0.0, |m, (_, a)| m.max(a))
    }

    /// Peak magnitude within half a carrier spacing of `n * omega0`.
    pub fn harmonic(&self, n: f64, omega0: f64) -> f64 {
        self.band_max((n - 0.5) * omega0, (n + 0.5) * omega0)
    }

    /// `|X|` at the non-negative bin nearest to `omega`.
    pub fn amplitude_at(&self, omega: f64) -> f64 {
        let k = (omega.abs() / self.d_omega()).round() as usize;
        self.coeffs[k.min(self.len() / 2)].norm()
    }

    /// Peak at `n * omega0` relative to the fundamental peak.
    pub fn relative_harmonic(&self, n: f64, omega0: f64) -> f64 {
        self.harmonic(n, omega0) / self.harmonic(1.0, omega0)
    }

    /// Third-harmonic peak over the larger of the bins at `2 omega0` and `4 omega0`.
    pub fn odd_even_contrast(&self, omega0: f64) -> f64 {
        let floor = self
            .amplitude_at(2.0 * omega0)
            .max(self.amplitude_at(4.0 * omega0));
        self.harmonic(3.0, omega0) / floor
    }

    /// Inverse transform; the imaginary residue is dropped.
    pub fn inverse(&self, t0: f64) -> Result<TimeSeries> {
        let n = self.len();
        let mut buf = self.coeffs.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        TimeSeries::new(t0, self.dt, buf.iter().map(|c| c.re * scale).collect())
    }
}

pub fn fourier_spectrum(series: &TimeSeries) -> Result<Spectrum> {
    if series.is_empty() {
        return Err(invalid("cannot transform an empty series"));
    }
    let mut buf: Vec<Complex64> = series
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    Ok(Spectrum {
        dt: series.dt,
        coeffs: buf,
    })
}

/// Removes every component with `|omega| > omega_cut`.
pub fn bandlimit_filter(series: &TimeSeries, omega_cut: f64) -> Result<TimeSeries> {
    let nyquist = PI / series.dt;
    if !(omega_cut > 0.0) || omega_cut > nyquist {
        return Err(invalid(format!(
            "cutoff {omega_cut} outside (0, {nyquist}]"
        )));
    }
    let mut spec = fourier_spectrum(series)?;
    // Bins on the cutoff are kept even when roundoff puts them just above it.
    let limit = omega_cut * (1.0 + 1e-12);
    for k in 0..spec.len() {
        if spec.omega(k).abs() > limit {
            spec.coeffs[k] = Complex64::new(0.0, 0.0);
        }
    }
    spec.inverse(series.t0)
}

fn trapezoid(values: impl Iterator<Item = f64>, n: usize, dt: f64) -> f64 {
    let mut sum = 0.0;
    for (i, v) in values.enumerate() {
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        sum += w * v;
    }
    sum * dt
}

/// `d^2 = int |y - Y|^2 dt / int |Y|^2 dt`, trapezoid rule.
pub fn relative_distance(y: &TimeSeries, target: &TimeSeries) -> Result<f64> {
    y.check_same_grid(target)?;
    let n = y.len();
    let den = trapezoid(target.values.iter().map(|v| v * v), n, y.dt);
    if den <= 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let num = trapezoid(
        y.values
            .iter()
            .zip(&target.values)
            .map(|(a, b)| (a - b) * (a - b)),
        n,
        y.dt,
    );
    Ok(num / den)
}

/// First and second derivatives: second-order central differences inside,
/// second-order one-sided stencils at the ends.
pub fn derivatives(series: &TimeSeries) -> Result<(TimeSeries, TimeSeries)> {
    let n = series.len();
    if n < 5 {
        return Err(invalid(format!("need at least 5 samples, got {n}")));
    }
    let y = &series.values;
    let h = series.dt;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        d1[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
        d2[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
    }
    d1[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    d1[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    d2[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / (h * h);
    d2[n - 1] = (2.0 * y[n - 1] - 5.0 * y[n - 2] + 4.0 * y[n - 3] - y[n - 4]) / (h * h);
    Ok((
        TimeSeries::new(series.t0, h, d1)?,
        TimeSeries::new(series.t0, h, d2)?,
    ))
}
