//! Scenario configuration, end-to-end runs and run manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eigen::{calibrate_radius, calibration_grid, solve_bound_states};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::io;
use crate::noise::NoiseModel;
use crate::potential::SoftCoulomb;
use crate::propagate::{run_driven, Absorber, Diagnostics, DrivenRunResult, StepperConfig};
use crate::signal::{fourier_spectrum, DrivePulse, TimeSeries};
use crate::state::{init_state, InitialState, PhaseGrid, SystemKind, SystemState};
use crate::tracking::{track, InitialField, TargetDerivative, TrackingConfig, TrackingResult};

/// One atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857_47;
/// Boltzmann constant in hartree per kelvin.
pub const K_B_AU: f64 = 3.166_811_563e-6;

/// `gamma = 1 / tau` with `tau` given in femtoseconds.
pub fn gamma_from_damping_time(tau_fs: f64) -> f64 {
    AU_TIME_FS / tau_fs
}

/// `chi = 2 gamma k T`.
pub fn decoherence_rate(gamma: f64, temperature_k: f64) -> f64 {
    2.0 * gamma * K_B_AU * temperature_k
}

/// The five shipped scenarios, keyed by panel letter.
pub const PRESETS: [(&str, &str); 5] = [
    ("a", include_str!("../presets/a.toml")),
    ("b", include_str!("../presets/b.toml")),
    ("c", include_str!("../presets/c.toml")),
    ("d", include_str!("../presets/d.toml")),
    ("e", include_str!("../presets/e.toml")),
];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(k, _)| *k == name)
        .ok_or_else(|| invalid(format!("no preset named {name:?}")))?;
    ScenarioConfig::from_toml(text, Path::new(&format!("preset {name}")))
}

/// Soft-Coulomb parameters, or a charge and the ionization potential to calibrate `a^2` against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "one")]
    pub charge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ionization_potential: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn argon() -> Self {
        Self {
            charge: 1.0,
            a2: Some(SoftCoulomb::argon().a2),
            ionization_potential: None,
        }
    }

    pub fn resolve(&self) -> Result<SoftCoulomb> {
        if !(self.charge.is_finite() && self.charge > 0.0) {
            return Err(Error::Config(format!(
                "model charge must be positive, got {}",
                self.charge
            )));
        }
        match (self.a2, self.ionization_potential) {
            (Some(a2), None) if a2.is_finite() && a2 > 0.0 => Ok(SoftCoulomb::new(self.charge, a2)),
            (Some(a2), None) => Err(Error::Config(format!(
                "model a2 must be positive, got {a2}"
            ))),
            (None, Some(ip)) => Ok(SoftCoulomb::new(
                self.charge,
                calibrate_radius(self.charge, ip, &calibration_grid())?,
            )),
            _ => Err(Error::Config(
                "model needs exactly one of a2 and ionization_potential".into(),
            )),
        }
    }
}

/// Where the target dipole comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Closed-system run of a model atom under a drive pulse.
    Reference {
        #[serde(default)]
        pulse: DrivePulse,
        #[serde(default = "ModelSpec::argon")]
        model: ModelSpec,
        #[serde(default = "default_closed_grid")]
        grid: Grid,
        #[serde(default = "default_absorber")]
        absorber: Absorber,
    },
    /// A `t,value` CSV on the scenario's time step.
    File { path: PathBuf },
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self::Reference {
            pulse: DrivePulse::reference(),
            model: ModelSpec::argon(),
            grid: default_closed_grid(),
            absorber: default_absorber(),
        }
    }
}

pub fn default_closed_grid() -> Grid {
    Grid {
        x_min: -200.0,
        x_max: 200.0,
        n: 4096,
    }
}

fn default_absorber() -> Absorber {
    Absorber {
        width: 40.0,
        p_width: 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_grid: Option<PhaseGrid>,
    #[serde(default)]
    pub absorber: Absorber,
    #[serde(default = "default_leak")]
    pub leak_threshold: f64,
    #[serde(default = "yes")]
    pub clip_negative: bool,
}

fn default_leak() -> f64 {
    1e-6
}

fn yes() -> bool {
    true
}

/// Bath parameters, either as rates or as a damping time and a temperature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_time_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(default)]
    pub diffusion: f64,
}

impl OpenSpec {
    /// `(gamma, chi, D)`.
    pub fn resolve(&self) -> Result<(f64, f64, f64)> {
        let gamma = match (self.gamma, self.damping_time_fs) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give gamma or damping_time_fs, not both".into(),
                ))
            }
            (Some(g), None) => g,
            (None, Some(tau)) if tau > 0.0 => gamma_from_damping_time(tau),
            (None, Some(tau)) => {
                return Err(Error::Config(format!(
                    "damping time must be positive, got {tau}"
                )))
            }
            (None, None) => 0.0,
        };
        let chi = match (self.chi, self.temperature_k) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give chi or temperature_k, not both".into()))
            }
            (Some(c), None) => c,
            (None, Some(t)) => decoherence_rate(gamma, t),
            (None, None) => 0.0,
        };
        Ok((gamma, chi, self.diffusion))
    }

    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSpec {
    #[serde(default)]
    pub initial_field: InitialField,
    #[serde(default)]
    pub derivative: TargetDerivative,
    #[serde(default)]
    pub smoothing: bool,
    #[serde(default = "default_compat")]
    pub compat_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_bound: Option<f64>,
    #[serde(default = "default_field_limit")]
    pub field_limit: f64,
    #[serde(default = "yes")]
    pub verify: bool,
}

fn default_compat() -> f64 {
    1e-6
}

fn default_field_limit() -> f64 {
    1e3
}

impl Default for TrackingSpec {
    fn default() -> Self {
        Self {
            initial_field: InitialField::default(),
            derivative: TargetDerivative::default(),
            smoothing: false,
            compat_tol: default_compat(),
            residual_bound: None,
            field_limit: default_field_limit(),
            verify: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Carrier frequency used to label spectra.
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    /// Band-limit cutoff in units of `omega0`.
    #[serde(default = "default_cut")]
    pub filter_harmonic: f64,
    /// Residual allowed after band-limiting.
    #[serde(default = "default_filter_bound")]
    pub filter_bound: f64,
}

fn default_omega0() -> f64 {
    0.06
}

fn default_cut() -> f64 {
    23.0
}

fn default_filter_bound() -> f64 {
    1e-2
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            omega0: default_omega0(),
            filter_harmonic: default_cut(),
            filter_bound: default_filter_bound(),
        }
    }
}

/// Everything needed to reproduce one tracking run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub kind: SystemKind,
    pub model: ModelSpec,
    pub initial: InitialState,
    #[serde(default)]
    pub target: TargetSpec,
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "OpenSpec::is_empty")]
    pub open: OpenSpec,
    #[serde(default)]
    pub tracking: TrackingSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

impl ScenarioConfig {
    /// Parses TOML; `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML scenario, or the config embedded in a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            m.config.validate()?;
            return Ok(m.config);
        }
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if !(self.numerics.dt.is_finite() && self.numerics.dt > 0.0) {
            return cfg_err(format!(
                "numerics.dt must be positive, got {}",
                self.numerics.dt
            ));
        }
        match self.kind {
            SystemKind::ClosedQuantum | SystemKind::OpenQuantum => {
                let Some(g) = self.numerics.grid else {
                    return cfg_err(format!("{:?} needs numerics.grid", self.kind));
                };
                g.validate()?;
            }
            SystemKind::FokkerPlanck => {
                let Some(g) = self.numerics.phase_grid else {
                    return cfg_err("fokker-planck needs numerics.phase_grid".into());
                };
                g.validate()?;
            }
            SystemKind::NewtonEnsemble => {}
        }
        if !self.kind.is_open() && !self.open.is_empty() {
            return cfg_err(format!("[open] parameters do not apply to {:?}", self.kind));
        }
        let (g, c, d) = self.open.resolve()?;
        for (name, v) in [("gamma", g), ("chi", c), ("diffusion", d)] {
            if !(v.is_finite() && v >= 0.0) {
                return cfg_err(format!("open.{name} must be non-negative, got {v}"));
            }
        }
        if d > 0.0 && self.kind != SystemKind::FokkerPlanck {
            return cfg_err("open.diffusion applies to fokker-planck only".into());
        }
        if let Some(nm) = &self.noise {
            nm.validate()?;
        }
        if let TargetSpec::File { path } = &self.target {
            if !path.exists() {
                return cfg_err(format!("target file {} does not exist", path.display()));
            }
        }
        if !(self.analysis.omega0 > 0.0 && self.analysis.filter_harmonic > 0.0) {
            return cfg_err("analysis.omega0 and analysis.filter_harmonic must be positive".into());
        }
        Ok(())
    }

    pub fn stepper(&self) -> Result<StepperConfig> {
        let (gamma, chi, diffusion) = self.open.resolve()?;
        let cfg = StepperConfig {
            dt: self.numerics.dt,
            gamma,
            chi,
            diffusion,
            absorber: self.numerics.absorber,
            leak_threshold: self.numerics.leak_threshold,
            clip_negative: self.numerics.clip_negative,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a global seed to the ensemble and the noise model.
    pub fn set_seed(&mut self, seed: u64) {
        if let InitialState::Ensemble(e) = &mut self.initial {
            e.seed = seed;
        }
        if let Some(nm) = &mut self.noise {
            nm.seed = seed;
        }
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            ensemble: match &self.initial {
                InitialState::Ensemble(e) => Some(e.seed),
                _ => None,
            },
            noise: self.noise.map(|n| n.seed),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub ensemble: Option<u64>,
    pub noise: Option<u64>,
}

/// A target dipole and, for generated targets, the run that produced it.
#[derive(Clone, Debug)]
pub struct Target {
    pub y: TimeSeries,
    pub run: Option<DrivenRunResult>,
    pub pulse: Option<DrivePulse>,
}

/// Produces the target on the time step `dt`.
pub fn generate_target(spec: &TargetSpec, dt: f64) -> Result<Target> {
    match spec {
        TargetSpec::Reference {
            pulse,
            model,
            grid,
            absorber,
        } => {
            let model = model.resolve()?;
            let field = pulse.sample(dt)?;
            let state0 = init_state(
                SystemKind::ClosedQuantum,
                &model,
                &InitialState::Eigenstate { n: 1 },
                Some(grid),
                None,
            )?;
            let mut cfg = StepperConfig::new(dt);
            cfg.absorber = *absorber;
            let run = run_driven(&state0, &model, &field, &cfg)?;
            Ok(Target {
                y: run.y.clone(),
                run: Some(run),
                pulse: Some(*pulse),
            })
        }
        TargetSpec::File { path } => {
            let y = io::read_series(path)?;
            if (y.dt - dt).abs() > 1e-9 * dt {
                return Err(Error::Config(format!(
                    "target file step {} differs from numerics.dt {dt}",
                    y.dt
                )));
            }
            Ok(Target {
                y,
                run: None,
                pulse: None,
            })
        }
    }
}

/// Model, stepper and initial state of a scenario.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub model: SoftCoulomb,
    pub stepper: StepperConfig,
    pub state0: SystemState,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let model = cfg.model.resolve()?;
    let stepper = cfg.stepper()?;
    let state0 = init_state(
        cfg.kind,
        &model,
        &cfg.initial,
        cfg.numerics.grid.as_ref(),
        cfg.numerics.phase_grid.as_ref(),
    )?;
    Ok(Prepared {
        model,
        stepper,
        state0,
    })
}

pub fn tracking_config(cfg: &ScenarioConfig, target: TimeSeries) -> TrackingConfig {
    let t = &cfg.tracking;
    TrackingConfig {
        target,
        initial_field: t.initial_field,
        derivative: t.derivative,
        smoothing: t.smoothing,
        compat_tol: t.compat_tol,
        residual_bound: t.residual_bound,
        field_limit: t.field_limit,
        verify: t.verify,
    }
}

/// Targets whose largest value (a.u.) is below this count as identically
/// zero; an undriven ground state sits at about 1e-12.
pub const DEGENERATE_TARGET: f64 = 1e-9;

/// Tracks the scenario's target; the target must not vanish identically.
pub fn run_tracking(cfg: &ScenarioConfig, target: &Target) -> Result<(Prepared, TrackingResult)> {
    if target.y.max_abs() < DEGENERATE_TARGET {
        return Err(Error::DegenerateTarget);
    }
    let prep = prepare(cfg)?;
    let tc = tracking_config(cfg, target.y.clone());
    let result = track(&prep.state0, &prep.model, &tc, &prep.stepper)?;
    Ok((prep, result))
}

/// Record written next to every run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Seeds,
    pub threads: usize,
    pub wall_seconds: f64,
    pub smoothing: bool,
    pub residual: Option<f64>,
    pub residual_bound: Option<f64>,
    pub passed: bool,
    pub diagnostics: Option<Diagnostics>,
    /// Named scalar results specific to the command.
    pub results: std::collections::BTreeMap<String, f64>,
    pub config: ScenarioConfig,
}

impl RunManifest {
    pub fn new(cfg: &ScenarioConfig, command: &str) -> Result<Self> {
        Ok(Self {
            scenario: cfg.name.clone(),
            command: command.to_string(),
            config_hash: cfg.hash()?,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: cfg.seeds(),
            threads: rayon::current_num_threads(),
            wall_seconds: 0.0,
            smoothing: cfg.tracking.smoothing,
            residual: None,
            residual_bound: cfg.tracking.residual_bound,
            passed: true,
            diagnostics: None,
            results: Default::default(),
            config: cfg.clone(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_json(&dir.join("manifest.json"), self)
    }
}

/// Writes the target, its spectrum and, when generated, the full reference run.
pub fn export_target(dir: &Path, target: &Target, omega0: f64) -> Result<()> {
    io::write_series(&dir.join("target.csv"), &target.y)?;
    io::write_spectrum(
        &dir.join("spectrum_target.csv"),
        &fourier_spectrum(&target.y)?,
        omega0,
    )?;
    if let Some(run) = &target.run {
        io::write_run(&dir.join("target_run.csv"), run)?;
    }
    Ok(())
}

/// Writes the standard per-run file set for a tracking result.
pub fn export_tracking(dir: &Path, r: &TrackingResult, omega0: f64) -> Result<()> {
    let field_spec = fourier_spectrum(&r.field)?;
    io::write_series(&dir.join("field.csv"), &r.field)?;
    io::write_series(&dir.join("target.csv"), &r.target)?;
    io::write_tracking(&dir.join("tracking.csv"), r)?;
    io::write_spectrum(&dir.join("spectrum_field.csv"), &field_spec, omega0)?;
    io::write_spectrum(&dir.join("spectrum.csv"), &field_spec, omega0)?;
    io::write_spectrum(
        &dir.join("spectrum_response.csv"),
        &fourier_spectrum(&r.y)?,
        omega0,
    )
}

/// Full pipeline: target, tracking, verification and export.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out: Option<&Path>,
) -> Result<(TrackingResult, RunManifest)> {
    let start = Instant::now();
    let target = generate_target(&cfg.target, cfg.numerics.dt)?;
    let (_, result) = run_tracking(cfg, &target)?;
    let mut manifest = RunManifest::new(cfg, "track")?;
    manifest.residual = Some(result.residual);
    manifest.passed = result.passed();
    manifest.diagnostics = Some(result.diagnostics);
    manifest
        .results
        .insert("max_abs_error".into(), result.max_abs_error());
    manifest
        .results
        .insert("max_abs_field".into(), result.field.max_abs());
    if let Some(d) = result.verify_deviation {
        manifest.results.insert("verify_deviation".into(), d);
    }
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out {
        export_tracking(dir, &result, cfg.analysis.omega0)?;
        manifest.write(dir)?;
    }
    Ok((result, manifest))
}

/// Numerical parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Time step.
    Dt,
    /// Spatial point count, also applied to both phase-space axes.
    GridN,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(Self::Dt),
            "n" | "grid-n" => Ok(Self::GridN),
            other => Err(invalid(format!(
                "unknown sweep parameter {other:?} (dt, n)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub residual: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub max_abs_field: Option<f64>,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

/// Applies one sweep value to a copy of the config.
pub fn with_param(cfg: &ScenarioConfig, param: SweepParam, value: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match param {
        SweepParam::Dt => c.numerics.dt = value,
        SweepParam::GridN => {
            if value.fract() != 0.0 || value < 4.0 {
                return Err(invalid(format!(
                    "grid size must be an integer >= 4, got {value}"
                )));
            }
            let n = value as usize;
            if let Some(g) = &mut c.numerics.grid {
                g.n = n;
            }
            if let Some(g) = &mut c.numerics.phase_grid {
                let ratio = g.p.n as f64 / g.x.n as f64;
                g.x.n = n;
                g.p.n = ((n as f64 * ratio) as usize).max(4);
            }
        }
    }
    c.validate()?;
    Ok(c)
}

/// Runs the scenario at every value; the points run concurrently and
/// failures are recorded per point.
pub fn sweep(cfg: &ScenarioConfig, param: SweepParam, values: &[f64]) -> Vec<SweepPoint> {
    values
        .par_iter()
        .map(|&v| {
            let start = Instant::now();
            let res = with_param(cfg, param, v).and_then(|c| {
                let target = generate_target(&c.target, c.numerics.dt)?;
                run_tracking(&c, &target).map(|(_, r)| r)
            });
            let wall_seconds = start.elapsed().as_secs_f64();
            match res {
                Ok(r) => SweepPoint {
                    value: v,
                    residual: Some(r.residual),
                    max_abs_error: Some(r.max_abs_error()),
                    max_abs_field: Some(r.field.max_abs()),
                    wall_seconds,
                    error: None,
                },
                Err(e) => SweepPoint {
                    value: v,
                    residual: None,
                    max_abs_error: None,
                    max_abs_field: None,
                    wall_seconds,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Bound-state summary for `calibrate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub charge: f64,
    pub a2: f64,
    pub ionization_potential: Option<f64>,
    pub energies: Vec<f64>,
}

/// Calibrates (when asked) and solves for the lowest `k` states on the calibration grid.
pub fn calibrate(spec: &ModelSpec, k: usize) -> Result<(Calibration, Grid, Vec<Vec<f64>>)> {
    let model = spec.resolve()?;
    let grid = calibration_grid();
    let bs = solve_bound_states(&model, &grid, k)?;
    let states = (1..=k)
        .map(|n| bs.state(n).map(|s| s.to_vec()))
        .collect::<Result<_>>()?;
    Ok((
        Calibration {
            charge: model.charge,
            a2: model.a2,
            ionization_potential: spec.ionization_potential,
            energies: bs.energies.clone(),
        },
        grid,
        states,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap();
            let text = cfg.to_toml().unwrap();
            let back = ScenarioConfig::from_toml(&text, Path::new("round trip")).unwrap();
            assert_eq!(cfg, back, "preset {name}");
            assert_eq!(cfg.hash().unwrap(), back.hash().unwrap());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = PRESETS[0].1.to_string();
        text.push_str("\n[numerics.extra]\nfoo = 1\n");
        assert!(ScenarioConfig::from_toml(&text, Path::new("x")).is_err());
        let bad = PRESETS[0].1.replace("dt =", "dtt =");
        assert!(ScenarioConfig::from_toml(&bad, Path::new("x")).is_err());
    }

    #[test]
    fn bath_conversion() {
        let g = gamma_from_damping_time(242.0);
        assert!((g - 9.995e-5).abs() < 1e-7);
        let chi = decoherence_rate(g, 100.0);
        assert!((chi - 6.33e-8).abs() < 1e-10);
    }

    #[test]
    fn open_parameters_rejected_for_closed_kinds() {
        let mut cfg = preset("a").unwrap();
        cfg.open.gamma = Some(1e-3);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
