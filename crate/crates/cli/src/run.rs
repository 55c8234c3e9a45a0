//! Command execution and artifact writing.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use spectral_sde::noise::write_dump;
use spectral_sde::trajectory::{write_events_jsonl, write_matrix_csv, write_spectral_csv};
use spectral_sde::verify::{
    collision_experiment, consistency_experiment, convergence_experiment, matrix_noise, positivity_experiment,
    run_paths, spectral_noise, ModelSummary,
};
use spectral_sde::{
    catalog, eigendecompose, simulate_matrix, simulate_spectral, EventKind, ExperimentReport, Matrix,
    MatrixSchemeConfig, RunSettings, SdeError, SpectralSchemeConfig,
};

use crate::config::{to_table, Command, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Environment variable consulted for the seed when neither the command line
/// nor the config sets one.
pub const SEED_ENV: &str = "SPECTRAL_SDE_SEED";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid {SEED_ENV} value `{0}`")]
    SeedEnv(String),
}

impl RunError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
        move |source| RunError::Io { path: path.to_path_buf(), source }
    }
}

/// Picks the seed: explicit value, then `SPECTRAL_SDE_SEED`, then 0.
pub fn resolve_seed(explicit: Option<u64>, env: Option<&str>) -> Result<u64, RunError> {
    match (explicit, env) {
        (Some(s), _) => Ok(s),
        (None, Some(v)) => v.trim().parse().map_err(|_| RunError::SeedEnv(v.to_string())),
        (None, None) => Ok(0),
    }
}

/// Per-simulation summary written as `report.json` by the simulate commands.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub experiment: String,
    pub model: ModelSummary,
    pub paths: u64,
    pub seed: u64,
    pub events: SimulationEvents,
    pub final_times: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SimulationEvents {
    pub collisions: u64,
    pub boundary: u64,
    pub explosions: u64,
}

#[derive(Clone, Debug)]
pub enum Report {
    Experiment(ExperimentReport),
    Simulation(SimulationReport),
}

impl Report {
    pub fn to_json(&self) -> String {
        match self {
            Report::Experiment(r) => r.to_json(),
            Report::Simulation(r) => serde_json::to_string_pretty(r).expect("report serializes"),
        }
    }

    pub fn summary_text(&self) -> String {
        match self {
            Report::Experiment(r) => r.summary_text(),
            Report::Simulation(r) => format!(
                "{} | model {} {:?} | {} paths | seed {}\nevents: {} collisions, {} boundary, {} explosions\n",
                r.experiment, r.model.family, r.model.params, r.paths, r.seed, r.events.collisions, r.events.boundary,
                r.events.explosions
            ),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Report::Experiment(r) if !r.passed() => EXIT_FAIL,
            _ => EXIT_PASS,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: serde_json::Value,
    wall_time_seconds: f64,
    /// Seconds since the Unix epoch at completion.
    timestamp: u64,
}

fn spectral_scheme(c: &RunConfig) -> SpectralSchemeConfig {
    let s = &c.scheme;
    SpectralSchemeConfig {
        dt: s.dt,
        t_end: s.t_end,
        eps_gap: s.eps_gap,
        adaptive: s.adaptive,
        max_halvings: s.max_halvings,
        truncation: s.truncation,
        stride: s.stride,
        eigenvectors: s.eigenvectors,
        explosion_bound: s.explosion_bound,
    }
}

fn matrix_scheme(c: &RunConfig) -> MatrixSchemeConfig {
    let s = &c.scheme;
    MatrixSchemeConfig {
        dt: s.dt,
        t_end: s.t_end,
        symmetrize: s.symmetrize,
        stride: s.stride,
        explosion_bound: s.explosion_bound,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, RunError> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(RunError::io(&path))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(RunError::io(&path))
}

fn finish(w: BufWriter<File>, dir: &Path, name: &str) -> Result<(), RunError> {
    w.into_inner().map_err(|e| e.into_error()).map_err(RunError::io(&dir.join(name)))?;
    Ok(())
}

fn count(events: &[spectral_sde::Event], kind: EventKind) -> u64 {
    events.iter().filter(|e| e.kind == kind).count() as u64
}

/// Runs `config` with a resolved `seed`, writing artifacts into `config.run.out`.
pub fn run(config: &RunConfig, seed: u64) -> Result<Report, RunError> {
    let started = Instant::now();
    let out = &config.run.out;
    fs::create_dir_all(out).map_err(RunError::io(out))?;
    let settings = RunSettings { paths: config.run.paths, seed, workers: config.run.workers };
    let model = config.model.id();

    let report = match config.command {
        Command::SimulateSpectral => Report::Simulation(simulate_spectral_paths(config, &settings)?),
        Command::SimulateMatrix => Report::Simulation(simulate_matrix_paths(config, &settings)?),
        Command::VerifyCollision => Report::Experiment(collision_experiment(
            &model,
            &config.initial_eigenvalues()?,
            &spectral_scheme(config),
            &settings,
            config.run.min_collision_fraction,
        )?),
        Command::VerifyPositivity => Report::Experiment(positivity_experiment(
            &model,
            &config.initial_eigenvalues()?,
            &spectral_scheme(config),
            &settings,
        )?),
        Command::VerifyConsistency => Report::Experiment(consistency_experiment(
            &model,
            &config.initial_matrix()?,
            &matrix_scheme(config),
            &spectral_scheme(config),
            &settings,
        )?),
        Command::VerifyConvergence => Report::Experiment(convergence_experiment(
            &model,
            &config.initial_eigenvalues()?,
            &spectral_scheme(config),
            config.scheme.levels,
            &settings,
        )?),
    };

    let json = report.to_json();
    write_text(out, "report.json", &(json + "\n"))?;
    write_text(out, "report.txt", &report.summary_text())?;

    let mut resolved = config.clone();
    resolved.run.seed = Some(seed);
    let manifest = Manifest {
        command: config.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config: serde_json::to_value(to_table(&resolved)).expect("config serializes"),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    write_text(out, "manifest.json", &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))?;
    Ok(report)
}

fn dump_noise(dir: &Path, name: &str, bundle: &spectral_sde::NoiseBundle) -> Result<(), RunError> {
    let mut w = create(dir, name)?;
    write_dump(bundle, &mut w).map_err(SdeError::from)?;
    finish(w, dir, name)
}

fn simulate_spectral_paths(config: &RunConfig, settings: &RunSettings) -> Result<SimulationReport, RunError> {
    let coeff = config.model.coefficients().map_err(SdeError::from)?;
    let scheme = spectral_scheme(config);
    let (lambda0, h0) = match (&config.init.matrix, scheme.eigenvectors) {
        (Some(_), true) => {
            let s = eigendecompose(&config.initial_matrix()?, 1e-10).map_err(SdeError::from)?;
            (s.eigenvalues, Some(s.eigenvectors))
        }
        (_, true) => (config.initial_eigenvalues()?, Some(Matrix::identity(config.model.p))),
        (_, false) => (config.initial_eigenvalues()?, None),
    };
    let records = run_paths(settings, |path| {
        let noise = spectral_noise(lambda0.len(), &scheme, settings.seed, path)?;
        Ok((simulate_spectral(&lambda0, h0.as_ref(), &coeff, &noise, &scheme)?, noise))
    })?;

    let out = &config.run.out;
    let mut events = SimulationEvents::default();
    let mut final_times = Vec::with_capacity(records.len());
    for (i, (rec, noise)) in records.iter().enumerate() {
        let name = format!("spectral_{i:04}.csv");
        let mut w = create(out, &name)?;
        write_spectral_csv(rec, &mut w).map_err(RunError::io(&out.join(&name)))?;
        finish(w, out, &name)?;
        let name = format!("events_{i:04}.jsonl");
        let mut w = create(out, &name)?;
        write_events_jsonl(&rec.events, &mut w).map_err(RunError::io(&out.join(&name)))?;
        finish(w, out, &name)?;
        if config.run.dump_noise {
            dump_noise(out, &format!("noise_{i:04}.bin"), noise)?;
        }
        events.collisions += count(&rec.events, EventKind::Collision);
        events.boundary += count(&rec.events, EventKind::Boundary);
        events.explosions += count(&rec.events, EventKind::Explosion);
        final_times.push(rec.final_time);
    }
    Ok(SimulationReport {
        experiment: Command::SimulateSpectral.name().into(),
        model: ModelSummary::new(&config.model.id(), &coeff),
        paths: settings.paths,
        seed: settings.seed,
        events,
        final_times,
    })
}

fn simulate_matrix_paths(config: &RunConfig, settings: &RunSettings) -> Result<SimulationReport, RunError> {
    let coeff = catalog(&config.model.id(), config.model.p).map_err(SdeError::from)?;
    let scheme = matrix_scheme(config);
    let x0 = config.initial_matrix()?;
    let records = run_paths(settings, |path| {
        let noise = matrix_noise(x0.dim(), coeff.complex_mode, &scheme, settings.seed, path)?;
        Ok((simulate_matrix(&x0, &coeff, &noise, &scheme)?, noise))
    })?;

    let out = &config.run.out;
    let mut events = SimulationEvents::default();
    let mut final_times = Vec::with_capacity(records.len());
    for (i, (rec, noise)) in records.iter().enumerate() {
        let name = format!("matrix_{i:04}.csv");
        let mut w = create(out, &name)?;
        write_matrix_csv(rec, &mut w).map_err(RunError::io(&out.join(&name)))?;
        finish(w, out, &name)?;
        let name = format!("events_{i:04}.jsonl");
        let mut w = create(out, &name)?;
        write_events_jsonl(&rec.events, &mut w).map_err(RunError::io(&out.join(&name)))?;
        finish(w, out, &name)?;
        if config.run.dump_noise {
            dump_noise(out, &format!("noise_{i:04}.bin"), noise)?;
        }
        events.boundary += count(&rec.events, EventKind::Boundary);
        final_times.push(rec.final_time);
    }
    Ok(SimulationReport {
        experiment: Command::SimulateMatrix.name().into(),
        model: ModelSummary::new(&config.model.id(), &coeff),
        paths: settings.paths,
        seed: settings.seed,
        events,
        final_times,
    })
}
