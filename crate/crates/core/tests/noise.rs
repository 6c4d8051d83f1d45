mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mimicry_core::noise::{
    contaminate_field, dc_component_check, mean_variance, noise_study, NoiseModel,
};
use mimicry_core::scenario::{generate_target, run_tracking};
use mimicry_core::signal::TimeSeries;

fn model(sigma: f64, realizations: usize) -> NoiseModel {
    NoiseModel {
        sigma,
        seed: 99,
        realizations,
    }
}

#[test]
fn relative_noise_has_the_requested_variance() {
    let ones = TimeSeries::new(0.0, 0.01, vec![1.0; 100_000]).unwrap();
    let noisy = contaminate_field(&ones, &model(0.05, 1), 0).unwrap();
    let w: Vec<f64> = noisy.values.iter().map(|v| v - 1.0).collect();
    let (mean, var) = mean_variance(&w);
    assert!(mean.abs() < 5.0 * 0.05 / (1e5f64).sqrt());
    assert!(
        (var / 0.0025 - 1.0).abs() < 0.03,
        "variance ratio {}",
        var / 0.0025
    );
}

#[test]
fn zero_sigma_reproduces_the_noise_free_residual() {
    let cfg = common::small();
    let target = generate_target(&cfg.target, cfg.numerics.dt).unwrap();
    let (prep, r) = run_tracking(&cfg, &target).unwrap();
    let s = noise_study(&prep.state0, &prep.model, &prep.stepper, &r, &model(0.0, 3)).unwrap();
    assert_eq!(s.failures(), 0);
    for d2 in s.d2_values() {
        assert_eq!(d2, s.d2_noise_free);
    }
}

#[test]
fn study_is_independent_of_thread_count() {
    let cfg = common::small();
    let target = generate_target(&cfg.target, cfg.numerics.dt).unwrap();
    let (prep, r) = run_tracking(&cfg, &target).unwrap();
    let nm = model(0.02, 4);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| noise_study(&prep.state0, &prep.model, &prep.stepper, &r, &nm).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn residual_shrinks_with_noise_level() {
    let cfg = common::small();
    let target = generate_target(&cfg.target, cfg.numerics.dt).unwrap();
    let (prep, r) = run_tracking(&cfg, &target).unwrap();
    let means: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&s| {
            noise_study(&prep.state0, &prep.model, &prep.stepper, &r, &model(s, 4))
                .unwrap()
                .mean
        })
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    assert!(means[2] > r.residual);
    // Multiplicative noise enters the response linearly, so d2 scales as sigma^2.
    let ratio = means[0] / means[1];
    assert!((2.5..6.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn dc_ratio_of_constant_offset() {
    let clean =
        TimeSeries::new(0.0, 0.1, (0..400).map(|i| (0.3 * i as f64).sin()).collect()).unwrap();
    assert_eq!(dc_component_check(&clean, &clean).unwrap().ratio, 1.0);
    let shifted = clean.map(|v| v + 0.01);
    assert!(dc_component_check(&shifted, &clean).unwrap().ratio > 10.0);
}

#[test]
fn invalid_models_are_rejected() {
    let f = TimeSeries::new(0.0, 0.1, vec![1.0; 8]).unwrap();
    assert!(contaminate_field(&f, &model(-0.1, 1), 0).is_err());
    assert!(model(0.1, 0).validate().is_err());
}

proptest! {
    #[test]
    fn statistics_ignore_realization_order(mut v in prop::collection::vec(0.0..1.0f64, 2..40), seed in any::<u64>()) {
        let (m, s) = mean_variance(&v);
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (m2, s2) = mean_variance(&v);
        prop_assert!((m - m2).abs() < 1e-14);
        prop_assert!((s - s2).abs() < 1e-14);
    }

    #[test]
    fn realizations_are_reproducible(seed in any::<u64>(), r in 0u64..1000) {
        let f = TimeSeries::new(0.0, 0.1, vec![0.5; 64]).unwrap();
        let nm = NoiseModel { sigma: 0.02, seed, realizations: 1 };
        prop_assert_eq!(contaminate_field(&f, &nm, r).unwrap(), contaminate_field(&f, &nm, r).unwrap());
    }
}
