use num_complex::Complex64;

use mimicry_core::eigen::relax_ground_state;
use mimicry_core::grid::Grid;
use mimicry_core::potential::SoftCoulomb;
use mimicry_core::propagate::{
    build, run_driven, Absorber, ClosedQuantum, FokkerPlanck, NewtonEnsemble, OpenQuantum,
    Propagator, StepperConfig,
};
use mimicry_core::scenario::{decoherence_rate, gamma_from_damping_time};
use mimicry_core::signal::TimeSeries;
use mimicry_core::state::{
    DensityMatrix, Ensemble, PhaseGrid, PhaseSpaceDensity, SystemState, Wavefunction,
};

const FREE: SoftCoulomb = SoftCoulomb::new(0.0, 1.0);

fn overlap(a: &Wavefunction, b: &Wavefunction) -> Complex64 {
    a.psi
        .iter()
        .zip(&b.psi)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        * a.grid.dx()
}

fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn ramp(dt: f64, n: usize, amp: f64) -> TimeSeries {
    TimeSeries::new(
        0.0,
        dt,
        (0..n).map(|i| amp * (0.3 * i as f64 * dt).sin()).collect(),
    )
    .unwrap()
}

#[test]
fn eigenstate_only_gains_a_phase() {
    let grid = Grid::centered(25.0, 512).unwrap();
    let model = SoftCoulomb::argon();
    let (energy, psi) = relax_ground_state(&model, &grid, 0.002, 1e-14, 200_000).unwrap();
    let wf = Wavefunction::from_real(grid, &psi).unwrap();
    let dt = 0.02;
    let mut prop = ClosedQuantum::new(wf.clone(), model, &StepperConfig::new(dt)).unwrap();
    prop.step(0.0).unwrap();
    let c = overlap(&wf, &prop.wavefunction());
    assert!((c.norm() - 1.0).abs() < 1e-10, "|<out|in>| = {}", c.norm());
    // The split step carries an O(dt^3) phase error per step.
    assert!(
        (c.arg() + energy * dt).abs() < 1e-7,
        "phase {} vs {}",
        c.arg(),
        -energy * dt
    );
}

#[test]
fn norm_is_conserved_per_step_without_absorber() {
    let grid = Grid::centered(40.0, 512).unwrap();
    let wf = Wavefunction::gaussian(grid, -1.0, 0.4, 1.0).unwrap();
    let mut prop = ClosedQuantum::new(wf, SoftCoulomb::argon(), &StepperConfig::new(0.02)).unwrap();
    let mut last = prop.observables().norm;
    for k in 0..200 {
        prop.step(0.05 * (0.1 * k as f64).cos()).unwrap();
        let n = prop.observables().norm;
        assert!((n - last).abs() < 1e-12);
        last = n;
    }
}

#[test]
fn free_packet_moves_with_its_momentum() {
    let grid = Grid::centered(40.0, 512).unwrap();
    let wf = Wavefunction::gaussian(grid, 0.0, 0.7, 1.0).unwrap();
    let dt = 0.05;
    let mut prop = ClosedQuantum::new(wf, FREE, &StepperConfig::new(dt)).unwrap();
    for _ in 0..100 {
        let before = prop.observables();
        prop.step(0.0).unwrap();
        let after = prop.observables();
        assert!((after.x - before.x - before.p * dt).abs() < 1e-10);
        assert!((after.p - 0.7).abs() < 1e-6);
    }
}

#[test]
fn closed_stepper_is_time_reversible() {
    let grid = Grid::centered(40.0, 512).unwrap();
    let wf = Wavefunction::gaussian(grid, 0.5, -0.3, 1.2).unwrap();
    let fields: Vec<f64> = (0..100)
        .map(|k| 0.04 * (0.07 * k as f64).sin() + 0.01)
        .collect();
    let cfg = StepperConfig::new(0.02);
    let mut fwd = ClosedQuantum::new(wf.clone(), SoftCoulomb::argon(), &cfg).unwrap();
    for &e in &fields {
        fwd.step(e).unwrap();
    }
    let mut conj = fwd.wavefunction();
    conj.psi.iter_mut().for_each(|c| *c = c.conj());
    let mut back = ClosedQuantum::new(conj, SoftCoulomb::argon(), &cfg).unwrap();
    for &e in fields.iter().rev() {
        back.step(e).unwrap();
    }
    let recovered: Vec<Complex64> = back.wavefunction().psi.iter().map(|c| c.conj()).collect();
    assert!(max_dev(&recovered, &wf.psi) < 1e-8);
}

#[test]
fn leaking_packet_aborts_without_absorber() {
    let grid = Grid::centered(10.0, 128).unwrap();
    let wf = Wavefunction::gaussian(grid, 0.0, 3.0, 0.8).unwrap();
    let mut prop = ClosedQuantum::new(wf, FREE, &StepperConfig::new(0.02)).unwrap();
    let err = (0..500).try_for_each(|_| prop.step(0.0));
    assert!(err.is_err());
}

#[test]
fn absorbed_density_keeps_the_totals() {
    let grid = Grid::centered(20.0, 256).unwrap();
    let wf = Wavefunction::gaussian(grid, 0.0, 2.0, 1.0).unwrap();
    let mut cfg = StepperConfig::new(0.02);
    cfg.absorber = Absorber {
        width: 5.0,
        p_width: 0.0,
    };
    let mut prop = ClosedQuantum::new(wf, FREE, &cfg).unwrap();
    for _ in 0..500 {
        prop.step(0.0).unwrap();
    }
    let d = prop.diagnostics();
    assert!(d.absorbed > 0.5, "absorbed {}", d.absorbed);
    let o = prop.observables();
    assert!((o.norm + prop.outflow().mass() - 1.0).abs() < 1e-6);
    assert!((o.p - 2.0).abs() < 1e-3, "<p> = {}", o.p);
    assert!((o.x - 20.0).abs() < 0.05, "<x> = {}", o.x);
}

#[test]
fn open_stepper_reduces_to_closed_without_bath() {
    let grid = Grid::centered(16.0, 128).unwrap();
    let wf = Wavefunction::gaussian(grid, -0.5, 0.2, 1.0).unwrap();
    let cfg = StepperConfig::new(0.02);
    let mut closed = ClosedQuantum::new(wf.clone(), SoftCoulomb::argon(), &cfg).unwrap();
    let mut open = OpenQuantum::new(DensityMatrix::pure(&wf), SoftCoulomb::argon(), &cfg).unwrap();
    for k in 0..100 {
        let e = 0.03 * (0.2 * k as f64).sin();
        closed.step(e).unwrap();
        open.step(e).unwrap();
    }
    let expected = DensityMatrix::pure(&closed.wavefunction());
    assert!(max_dev(&open.density_matrix().rho, &expected.rho) < 1e-9);
}

#[test]
fn decoherence_leaves_populations_of_a_stationary_state() {
    let grid = Grid::centered(16.0, 128).unwrap();
    let model = SoftCoulomb::argon();
    let (_, psi) = relax_ground_state(&model, &grid, 0.002, 1e-14, 200_000).unwrap();
    let dm = DensityMatrix::pure(&Wavefunction::from_real(grid, &psi).unwrap());
    let after = |chi: f64| {
        let mut cfg = StepperConfig::new(0.02);
        cfg.chi = chi;
        let mut prop = OpenQuantum::new(dm.clone(), model, &cfg).unwrap();
        prop.step(0.0).unwrap();
        prop.density_matrix()
    };
    // Compared against the bath-free step so the splitting error of the
    // unitary part cancels.
    let chi = decoherence_rate(gamma_from_damping_time(242.0), 100.0);
    let (bath, free) = (after(chi), after(0.0));
    let dev = bath
        .diagonal()
        .zip(free.diagonal())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(dev < 1e-10, "diagonal changed by {dev:e}");
    assert!(after(1e-3).purity() < free.purity());
}

#[test]
fn cold_bath_negativity_is_recorded() {
    // Friction with almost no diffusion squeezes the ground state below its
    // zero-point spread, which no positive density matrix can do.
    let grid = Grid::centered(16.0, 128).unwrap();
    let model = SoftCoulomb::argon();
    let (_, psi) = relax_ground_state(&model, &grid, 0.002, 1e-14, 200_000).unwrap();
    let mut cfg = StepperConfig::new(0.02);
    cfg.gamma = 0.05;
    cfg.chi = decoherence_rate(0.05, 1.0);
    let dm = DensityMatrix::pure(&Wavefunction::from_real(grid, &psi).unwrap());
    let mut prop = OpenQuantum::new(dm, model, &cfg).unwrap();
    for _ in 0..200 {
        prop.step(0.0).unwrap();
    }
    let d = prop.diagnostics();
    assert!(
        d.min_population < -1e-6,
        "min population {:e}",
        d.min_population
    );
    assert!((prop.density_matrix().trace() - 1.0).abs() < 1e-8);
}

#[test]
fn open_stepper_keeps_trace_and_hermiticity() {
    let grid = Grid::centered(16.0, 128).unwrap();
    let wf = Wavefunction::gaussian(grid, 0.5, 0.0, 1.0).unwrap();
    let mut cfg = StepperConfig::new(0.02);
    cfg.gamma = 0.01;
    cfg.chi = 0.005;
    let mut prop = OpenQuantum::new(DensityMatrix::pure(&wf), SoftCoulomb::argon(), &cfg).unwrap();
    for k in 0..200 {
        prop.step(0.02 * (0.1 * k as f64).sin()).unwrap();
        let dm = prop.density_matrix();
        assert!((dm.trace() - 1.0).abs() < 1e-8);
        assert!(dm.hermiticity_error() < 1e-12);
    }
    assert!(prop.density_matrix().purity() < 0.99);
}

#[test]
fn origin_is_a_fixed_point() {
    let ens = Ensemble::new(vec![0.0], vec![0.0]).unwrap();
    let mut prop =
        NewtonEnsemble::new(ens, SoftCoulomb::argon(), &StepperConfig::new(0.02)).unwrap();
    for _ in 0..1000 {
        prop.step(0.0).unwrap();
    }
    let e = prop.ensemble();
    assert_eq!((e.x[0], e.p[0]), (0.0, 0.0));
}

#[test]
fn small_oscillations_run_at_the_harmonic_frequency() {
    let model = SoftCoulomb::argon();
    let w = model.harmonic_frequency();
    assert!((w - 0.79).abs() < 0.01);
    let dt = 0.01;
    let ens = Ensemble::new(vec![1e-3], vec![0.0]).unwrap();
    let mut prop = NewtonEnsemble::new(ens, model, &StepperConfig::new(dt)).unwrap();
    let period = 2.0 * std::f64::consts::PI / w;
    let steps = (10.0 * period / dt) as usize + 10;
    let mut crossings = Vec::new();
    let mut prev = prop.ensemble().x[0];
    for k in 1..=steps {
        prop.step(0.0).unwrap();
        let x = prop.ensemble().x[0];
        if prev < 0.0 && x >= 0.0 {
            crossings.push((k - 1) as f64 * dt + dt * prev / (prev - x));
        }
        prev = x;
    }
    assert!(crossings.len() >= 10);
    let measured = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    assert!(
        (measured / period - 1.0).abs() < 0.01,
        "period {measured} vs {period}"
    );
}

#[test]
fn verlet_energy_does_not_drift() {
    let model = SoftCoulomb::argon();
    let ens = Ensemble::new(vec![0.5, -1.0, 0.2], vec![0.0, 0.3, -0.4]).unwrap();
    let mut prop = NewtonEnsemble::new(ens, model, &StepperConfig::new(0.02)).unwrap();
    let window = 1000;
    let mut sums = vec![vec![0.0; 3]; 2];
    for k in 0..10_000 {
        prop.step(0.0).unwrap();
        let slot = if k < window {
            0
        } else if k >= 10_000 - window {
            1
        } else {
            continue;
        };
        for (s, e) in sums[slot].iter_mut().zip(prop.energies()) {
            *s += e / window as f64;
        }
    }
    for (early, late) in sums[0].iter().zip(&sums[1]) {
        assert!(((late - early) / early).abs() < 1e-6, "{early} -> {late}");
    }
}

fn phase_grid(half_x: f64, nx: usize, half_p: f64, np: usize) -> PhaseGrid {
    PhaseGrid {
        x: Grid::centered(half_x, nx).unwrap(),
        p: Grid::centered(half_p, np).unwrap(),
    }
}

fn second_moment_p(d: &PhaseSpaceDensity) -> f64 {
    let ps = d.grid.p.points();
    let np = ps.len();
    d.rho
        .iter()
        .enumerate()
        .map(|(i, r)| r * ps[i % np] * ps[i % np])
        .sum::<f64>()
        * d.grid.cell()
}

#[test]
fn free_diffusion_spreads_momentum_linearly() {
    let grid = phase_grid(20.0, 64, 8.0, 256);
    let d = PhaseSpaceDensity::gaussian(grid, 0.0, 0.0, 1.0, 0.5).unwrap();
    let var0 = second_moment_p(&d);
    let mut cfg = StepperConfig::new(0.02);
    cfg.diffusion = 0.01;
    let mut prop = FokkerPlanck::new(d, FREE, &cfg).unwrap();
    let steps = 500;
    for _ in 0..steps {
        prop.step(0.0).unwrap();
    }
    let var = second_moment_p(&prop.density());
    let t = steps as f64 * 0.02;
    assert!(
        (var - var0 - 2.0 * 0.01 * t).abs() < 1e-6,
        "Var(p) grew by {}",
        var - var0
    );
}

#[test]
fn phase_space_mass_is_accounted_for() {
    let grid = phase_grid(20.0, 128, 6.0, 64);
    let d = PhaseSpaceDensity::gaussian(grid, 0.0, 1.5, 1.0, 0.5).unwrap();
    let mut cfg = StepperConfig::new(0.02);
    cfg.absorber = Absorber {
        width: 5.0,
        p_width: 1.0,
    };
    let mut prop = FokkerPlanck::new(d, FREE, &cfg).unwrap();
    for _ in 0..800 {
        prop.step(0.0).unwrap();
    }
    let diag = prop.diagnostics();
    assert!(diag.absorbed > 0.3, "absorbed {}", diag.absorbed);
    assert!(diag.max_mass_drift < 1e-8);
    let retained = prop.density().mass();
    assert!((retained + prop.outflow().mass() - 1.0).abs() < 1e-8);
    let o = prop.observables();
    assert!((o.p - 1.5).abs() < 1e-6, "<p> = {}", o.p);
    // Spectral transport of the partly absorbed edge density moves a little
    // of `<x>` across the periodic seam.
    assert!((o.x - 1.5 * 16.0).abs() < 1e-2, "<x> = {}", o.x);
}

#[test]
fn zero_field_leaves_an_eigenstate_dipole_at_rest() {
    let grid = Grid::centered(40.0, 512).unwrap();
    let model = SoftCoulomb::argon();
    let (_, psi) = relax_ground_state(&model, &grid, 0.002, 1e-14, 200_000).unwrap();
    let state = SystemState::Closed(Wavefunction::from_real(grid, &psi).unwrap());
    let zero = TimeSeries::zeros(0.0, 0.02, 2000).unwrap();
    let run = run_driven(&state, &model, &zero, &StepperConfig::new(0.02)).unwrap();
    assert!(run.y.max_abs() < 1e-8);
    assert_eq!(run.norm.values[0], state.norm());
}

#[test]
fn weak_field_response_is_linear() {
    let grid = Grid::centered(40.0, 512).unwrap();
    let model = SoftCoulomb::argon();
    let (_, psi) = relax_ground_state(&model, &grid, 0.002, 1e-14, 200_000).unwrap();
    let state = SystemState::Closed(Wavefunction::from_real(grid, &psi).unwrap());
    let cfg = StepperConfig::new(0.02);
    let y1 = run_driven(&state, &model, &ramp(0.02, 1500, 1e-5), &cfg)
        .unwrap()
        .y;
    let y2 = run_driven(&state, &model, &ramp(0.02, 1500, 2e-5), &cfg)
        .unwrap()
        .y;
    let peak = y1.max_abs();
    let dev = y1
        .values
        .iter()
        .zip(&y2.values)
        .fold(0.0_f64, |m, (a, b)| m.max((b - 2.0 * a).abs()));
    assert!(
        dev < 1e-3 * 2.0 * peak,
        "nonlinear part {dev:e} of {peak:e}"
    );
}

#[test]
fn build_picks_the_matching_stepper() {
    let grid = Grid::centered(16.0, 128).unwrap();
    let wf = Wavefunction::gaussian(grid, 0.0, 0.0, 1.0).unwrap();
    let cfg = StepperConfig::new(0.02);
    for state in [
        SystemState::Closed(wf.clone()),
        SystemState::Open(DensityMatrix::pure(&wf)),
        SystemState::Newton(Ensemble::new(vec![0.1], vec![0.0]).unwrap()),
    ] {
        assert_eq!(
            build(&state, &SoftCoulomb::argon(), &cfg).unwrap().kind(),
            state.kind()
        );
    }
    let mut bad = cfg;
    bad.dt = -0.1;
    assert!(build(&SystemState::Closed(wf), &SoftCoulomb::argon(), &bad).is_err());
}
