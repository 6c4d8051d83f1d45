use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::info;

use mimicry_core::io;
use mimicry_core::noise::{contaminate_field, dc_component_check, noise_study, NoiseModel};
use mimicry_core::propagate::run_driven;
use mimicry_core::scenario::{
    self, calibrate, export_target, export_tracking, generate_target, run_scenario, run_tracking,
    ModelSpec, RunManifest, ScenarioConfig, SweepParam,
};
use mimicry_core::signal::fourier_spectrum;
use mimicry_core::tracking::verify_bandlimited;
use mimicry_core::{Error, Result};

/// Synthesize driving fields that make a system reproduce a target dipole response.
#[derive(Parser, Debug)]
#[command(name = "mimicry", version)]
struct Cli {
    /// Scenario file (TOML), a previous manifest.json, or `preset:<a-e>`.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory [default: runs/<scenario name>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the ensemble and noise seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and noise realizations.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for bound states, calibrating a^2 to an ionization potential if given.
    Calibrate {
        /// Ionization potential (a.u.); overrides the config model.
        #[arg(long)]
        ip: Option<f64>,
        /// Softening parameter a^2 (a.u.); overrides the config model.
        #[arg(long, conflicts_with = "ip")]
        a2: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        charge: f64,
        /// Number of states to export.
        #[arg(long, default_value_t = 2)]
        states: usize,
    },
    /// Generate the target dipole and its spectrum.
    Target,
    /// Track the target and export the field, response and spectra.
    Track,
    /// Track, remove field content above a cutoff and re-simulate.
    VerifyFilter {
        /// Cutoff in units of the carrier frequency.
        #[arg(long)]
        cut: Option<f64>,
    },
    /// Track, then re-simulate under multiplicative field noise.
    Noise {
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Spectrum of a `t,value` CSV.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        /// Frequency unit for the output axis [default: config or 0.06].
        #[arg(long)]
        omega0: Option<f64>,
    },
    /// Residual table over a range of time steps or grid sizes.
    Sweep {
        /// `dt` or `n`.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let spec = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = match spec.strip_prefix("preset:") {
        Some(name) => scenario::preset(name)?,
        None => ScenarioConfig::load(Path::new(spec))?,
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, name: &str) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(name))
}

/// Runs the command; `Ok(false)` means it finished with a bound exceeded.
fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    match &cli.command {
        Command::Calibrate {
            ip,
            a2,
            charge,
            states,
        } => {
            let spec = match (ip, a2, &cli.config) {
                (None, None, Some(_)) => load_config(cli)?.model,
                (None, None, None) => ModelSpec::argon(),
                _ => ModelSpec {
                    charge: *charge,
                    a2: *a2,
                    ionization_potential: *ip,
                },
            };
            let (cal, grid, psi) = calibrate(&spec, *states)?;
            let dir = out_dir(cli, "calibration");
            let x = grid.points();
            for (n, s) in psi.iter().enumerate() {
                io::write_state(&dir.join(format!("state_{}.csv", n + 1)), &x, s)?;
            }
            io::write_json(&dir.join("calibration.json"), &cal)?;
            println!("a2 = {:.6}", cal.a2);
            for (n, e) in cal.energies.iter().enumerate() {
                println!("E{} = {e:.8}", n + 1);
            }
            Ok(true)
        }
        Command::Target => {
            let cfg = load_config(cli)?;
            let dir = out_dir(cli, &cfg.name);
            let target = generate_target(&cfg.target, cfg.numerics.dt)?;
            if target.y.max_abs() == 0.0 {
                return Err(Error::DegenerateTarget);
            }
            export_target(&dir, &target, cfg.analysis.omega0)?;
            let spec = fourier_spectrum(&target.y)?;
            let w0 = cfg.analysis.omega0;
            let contrast = spec.odd_even_contrast(w0);
            let mut m = RunManifest::new(&cfg, "target")?;
            m.results.insert("harmonic3".into(), spec.harmonic(3.0, w0));
            m.results.insert("odd_even_contrast".into(), contrast);
            m.diagnostics = target.run.as_ref().map(|r| r.diagnostics);
            m.wall_seconds = start.elapsed().as_secs_f64();
            m.write(&dir)?;
            println!(
                "target: {} samples, |Y|max = {:.4e}, 3w0/even = {contrast:.2}",
                target.y.len(),
                target.y.max_abs()
            );
            Ok(true)
        }
        Command::Track => {
            let cfg = load_config(cli)?;
            let dir = out_dir(cli, &cfg.name);
            let (r, m) = run_scenario(&cfg, Some(&dir))?;
            println!(
                "{}: d2 = {:.3e}, max|E| = {:.4e}, {} ({:.1} s)",
                cfg.name,
                r.residual,
                r.field.max_abs(),
                if m.passed {
                    "within bound"
                } else {
                    "bound exceeded"
                },
                m.wall_seconds
            );
            Ok(m.passed)
        }
        Command::VerifyFilter { cut } => {
            let cfg = load_config(cli)?;
            let dir = out_dir(cli, &cfg.name);
            let target = generate_target(&cfg.target, cfg.numerics.dt)?;
            let (prep, r) = run_tracking(&cfg, &target)?;
            let harmonic = cut.unwrap_or(cfg.analysis.filter_harmonic);
            let (d2, filtered) = verify_bandlimited(
                &r,
                &prep.state0,
                &prep.model,
                &prep.stepper,
                harmonic * cfg.analysis.omega0,
            )?;
            export_tracking(&dir, &r, cfg.analysis.omega0)?;
            io::write_series(&dir.join("filtered_field.csv"), &filtered)?;
            let mut m = RunManifest::new(&cfg, "verify-filter")?;
            m.residual = Some(r.residual);
            m.diagnostics = Some(r.diagnostics);
            m.results.insert("cut_harmonic".into(), harmonic);
            m.results.insert("residual_filtered".into(), d2);
            m.passed = d2 < cfg.analysis.filter_bound;
            m.wall_seconds = start.elapsed().as_secs_f64();
            m.write(&dir)?;
            println!(
                "{}: d2 = {:.3e}, filtered at {harmonic} w0: d2 = {d2:.3e}",
                cfg.name, r.residual
            );
            Ok(m.passed)
        }
        Command::Noise {
            sigma,
            realizations,
        } => {
            let cfg = load_config(cli)?;
            let dir = out_dir(cli, &cfg.name);
            let base = cfg.noise.unwrap_or(NoiseModel {
                sigma: 0.02,
                seed: 0,
                realizations: 20,
            });
            let nm = NoiseModel {
                sigma: sigma.unwrap_or(base.sigma),
                seed: cli.seed.unwrap_or(base.seed),
                realizations: realizations.unwrap_or(base.realizations),
            };
            let target = generate_target(&cfg.target, cfg.numerics.dt)?;
            let (prep, r) = run_tracking(&cfg, &target)?;
            let study = noise_study(&prep.state0, &prep.model, &prep.stepper, &r, &nm)?;
            let noisy = run_driven(
                &prep.state0,
                &prep.model,
                &contaminate_field(&r.field, &nm, 0)?,
                &prep.stepper,
            )?;
            let dc = dc_component_check(&noisy.y, &r.y)?;
            io::write_table(
                &dir.join("noise_d2.csv"),
                &["realization", "d2"],
                study
                    .outcomes
                    .iter()
                    .map(|o| vec![o.realization as f64, o.d2.unwrap_or(f64::NAN)]),
            )?;
            io::write_json(&dir.join("noise_summary.json"), &study)?;
            io::write_series(&dir.join("response_noisy.csv"), &noisy.y)?;
            export_tracking(&dir, &r, cfg.analysis.omega0)?;
            let mut m = RunManifest::new(&cfg, "noise")?;
            m.seeds.noise = Some(nm.seed);
            m.residual = Some(r.residual);
            m.diagnostics = Some(r.diagnostics);
            m.results.insert("sigma".into(), nm.sigma);
            m.results.insert("mean_d2".into(), study.mean);
            m.results.insert("variance_d2".into(), study.variance);
            m.results.insert("uplift".into(), study.uplift());
            m.results.insert("dc_ratio".into(), dc.ratio);
            m.passed = study.failures() == 0;
            m.wall_seconds = start.elapsed().as_secs_f64();
            m.write(&dir)?;
            println!(
                "{}: noise-free d2 = {:.3e}, mean d2 = {:.3e} ({:+.1}%), DC ratio {:.2}, {} failed",
                cfg.name,
                study.d2_noise_free,
                study.mean,
                100.0 * study.uplift(),
                dc.ratio,
                study.failures()
            );
            Ok(m.passed)
        }
        Command::Spectrum { input, omega0 } => {
            let w0 = match (omega0, &cli.config) {
                (Some(w), _) => *w,
                (None, Some(_)) => load_config(cli)?.analysis.omega0,
                (None, None) => 0.06,
            };
            let series = io::read_series(input)?;
            let dir = out_dir(cli, "spectrum");
            io::write_spectrum(&dir.join("spectrum.csv"), &fourier_spectrum(&series)?, w0)?;
            Ok(true)
        }
        Command::Sweep { param, values } => {
            let cfg = load_config(cli)?;
            let dir = out_dir(cli, &cfg.name);
            let points = scenario::sweep(&cfg, *param, values);
            io::write_table(
                &dir.join("sweep.csv"),
                &[
                    "value",
                    "residual",
                    "max_abs_error",
                    "max_abs_field",
                    "wall_seconds",
                ],
                points.iter().map(|p| {
                    vec![
                        p.value,
                        p.residual.unwrap_or(f64::NAN),
                        p.max_abs_error.unwrap_or(f64::NAN),
                        p.max_abs_field.unwrap_or(f64::NAN),
                        p.wall_seconds,
                    ]
                }),
            )?;
            let mut ok = true;
            for p in &points {
                match (&p.residual, &p.error) {
                    (Some(d2), _) => {
                        let within = cfg.tracking.residual_bound.map_or(true, |b| *d2 <= b);
                        ok &= within;
                        println!(
                            "{:?} = {}: d2 = {d2:.3e}, max|y-Y| = {:.3e}",
                            param,
                            p.value,
                            p.max_abs_error.unwrap_or(f64::NAN)
                        );
                    }
                    (None, e) => {
                        ok = false;
                        println!(
                            "{:?} = {}: failed: {}",
                            param,
                            p.value,
                            e.as_deref().unwrap_or("unknown")
                        );
                    }
                }
            }
            let mut m = RunManifest::new(&cfg, "sweep")?;
            m.passed = ok;
            m.wall_seconds = start.elapsed().as_secs_f64();
            m.write(&dir)?;
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    info!("{:?}", cli.command);
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
