//! Multiplicative amplitude noise on synthesized fields and its effect on tracking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::potential::SoftCoulomb;
use crate::propagate::{run_driven, StepperConfig};
use crate::signal::{relative_distance, TimeSeries};
use crate::state::SystemState;
use crate::tracking::TrackingResult;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Relative standard deviation of the amplitude noise.
    pub sigma: f64,
    pub seed: u64,
    pub realizations: usize,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid(format!(
                "noise sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if self.realizations == 0 {
            return Err(invalid("need at least one noise realization"));
        }
        Ok(())
    }

    /// Amplitude signal-to-noise ratio, `1/sigma`.
    pub fn snr(&self) -> f64 {
        1.0 / self.sigma
    }
}

/// `E_k (1 + w_k)` with `w_k ~ N(0, sigma)`. Realization `r` reads its own
/// ChaCha stream, so the draws depend only on `(seed, r, k)`.
pub fn contaminate_field(
    field: &TimeSeries,
    nm: &NoiseModel,
    realization: u64,
) -> Result<TimeSeries> {
    nm.validate()?;
    if nm.sigma == 0.0 {
        return Ok(field.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(nm.seed);
    rng.set_stream(realization);
    let values = field
        .values
        .iter()
        .map(|e| {
            let w: f64 = rng.sample(StandardNormal);
            e * (1.0 + nm.sigma * w)
        })
        .collect();
    TimeSeries::new(field.t0, field.dt, values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationOutcome {
    pub realization: u64,
    pub d2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudyResult {
    pub model: NoiseModel,
    pub outcomes: Vec<RealizationOutcome>,
    pub d2_noise_free: f64,
    pub mean: f64,
    pub variance: f64,
}

impl NoiseStudyResult {
    pub fn d2_values(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.d2).collect()
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.d2.is_none()).count()
    }

    /// `mean / noise-free - 1`.
    pub fn uplift(&self) -> f64 {
        self.mean / self.d2_noise_free - 1.0
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.d2_values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Sample mean and unbiased variance; the variance is zero for a single value.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Re-runs `state0` under every contaminated copy of the tracked field.
/// A failing realization is recorded rather than aborting the study.
pub fn noise_study(
    state0: &SystemState,
    model: &SoftCoulomb,
    stepper: &StepperConfig,
    base: &TrackingResult,
    nm: &NoiseModel,
) -> Result<NoiseStudyResult> {
    nm.validate()?;
    let outcomes: Vec<RealizationOutcome> = (0..nm.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let res = contaminate_field(&base.field, nm, r)
                .and_then(|f| run_driven(state0, model, &f, stepper))
                .and_then(|run| relative_distance(&run.y, &base.target));
            match res {
                Ok(d2) => RealizationOutcome {
                    realization: r,
                    d2: Some(d2),
                    error: None,
                },
                Err(e) => {
                    log::warn!("noise realization {r} failed: {e}");
                    RealizationOutcome {
                        realization: r,
                        d2: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let d2: Vec<f64> = outcomes.iter().filter_map(|o| o.d2).collect();
    let (mean, variance) = mean_variance(&d2);
    Ok(NoiseStudyResult {
        model: *nm,
        outcomes,
        d2_noise_free: base.residual,
        mean,
        variance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcRatio {
    pub ratio: f64,
    /// The clean DC bin was below machine epsilon and the floor was used instead.
    pub floored: bool,
}

/// Ratio of the zero-frequency bins, `|sum y_noisy| / |sum y_clean|`.
pub fn dc_component_check(noisy: &TimeSeries, clean: &TimeSeries) -> Result<DcRatio> {
    noisy.check_same_grid(clean)?;
    let dc = |s: &TimeSeries| s.values.iter().sum::<f64>().abs();
    let (num, den) = (dc(noisy), dc(clean));
    let floored = den < f64::EPSILON;
    Ok(DcRatio {
        ratio: num / den.max(f64::EPSILON),
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> TimeSeries {
        TimeSeries::new(0.0, 0.1, (0..200).map(|i| 1.0 + 0.01 * i as f64).collect()).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let nm = NoiseModel {
            sigma: 0.0,
            seed: 3,
            realizations: 1,
        };
        assert_eq!(contaminate_field(&ramp(), &nm, 0).unwrap(), ramp());
    }

    #[test]
    fn realizations_are_reproducible_and_distinct() {
        let nm = NoiseModel {
            sigma: 0.02,
            seed: 11,
            realizations: 2,
        };
        let a = contaminate_field(&ramp(), &nm, 1).unwrap();
        assert_eq!(a, contaminate_field(&ramp(), &nm, 1).unwrap());
        assert_ne!(a, contaminate_field(&ramp(), &nm, 0).unwrap());
    }

    #[test]
    fn snr_is_inverse_sigma() {
        let nm = NoiseModel {
            sigma: 0.05,
            seed: 0,
            realizations: 1,
        };
        assert!((nm.snr() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn dc_ratio() {
        let clean = TimeSeries::new(0.0, 0.1, vec![0.0, 1.0, 0.0, -0.5]).unwrap();
        assert_eq!(dc_component_check(&clean, &clean).unwrap().ratio, 1.0);
        let zero = TimeSeries::zeros(0.0, 0.1, 4).unwrap();
        let r = dc_component_check(&clean, &zero).unwrap();
        assert!(r.floored && r.ratio > 1e10);
    }
}
