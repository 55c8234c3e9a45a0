//! Monte Carlo and structural checks: Lyapunov functional, collision
//! statistics, matrix-vs-eigenvalue consistency, positivity and strong
//! convergence under shared noise.
//!
//! Statistical verdicts use a two-sided 3-standard-error rule. "No
//! collisions among N paths" only bounds the per-path collision probability
//! by roughly 3/N.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{ModelError, SdeError};
use crate::linalg::{self, SymmetricMatrixState};
use crate::matrix_sde::{simulate_matrix, MatrixSchemeConfig, EIGEN_TOL};
use crate::models::{self, catalog, lipschitz_probe, CustomCoefficients, ModelId, SpectralCoefficients};
use crate::noise::{derive_stream, NoiseBundle, NoiseKind, SharedPath};
use crate::spectral_sde::{simulate_spectral, SpectralSchemeConfig};
use crate::trajectory::{EventKind, PathDiagnostics};

/// Three standard errors.
pub const Z_THRESHOLD: f64 = 3.0;
/// Minimum RMS reduction per halving in the convergence experiment.
pub const MIN_CONVERGENCE_RATIO: f64 = 1.2;

/// `U = −Σ_{i<j} log(λ_j − λ_i)`.
pub fn lyapunov_u(lambda: &[f64]) -> Result<f64, ModelError> {
    models::check_strictly_ascending(lambda)?;
    let mut u = 0.0;
    for i in 0..lambda.len() {
        for j in i + 1..lambda.len() {
            u -= (lambda[j] - lambda[i]).ln();
        }
    }
    Ok(u)
}

/// Finite-variation rates of `U` along the eigenvalue system, split as
/// drift (`a1`), kernel-mismatch (`a2`) and three-particle (`a3`) parts.
/// A Hermitian model is treated as the real system with `β·κ` and `b/κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovDrift {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl LyapunovDrift {
    pub fn total(&self) -> f64 {
        self.a1 + self.a2 + self.a3
    }
}

pub fn lyapunov_drift_components(lambda: &[f64], coeff: &SpectralCoefficients) -> Result<LyapunovDrift, ModelError> {
    models::check_strictly_ascending(lambda)?;
    let p = lambda.len();
    let kappa = coeff.interaction_factor();
    let beta = coeff.effective_beta();
    let g2: Vec<f64> = lambda.iter().map(|&l| coeff.g.squared(l)).collect();
    let h2: Vec<f64> = lambda.iter().map(|&l| coeff.h.squared(l)).collect();
    let b: Vec<f64> = lambda.iter().map(|&l| coeff.b.eval(l) / kappa).collect();
    let kernel = |i: usize, k: usize| g2[i] * h2[k] + g2[k] * h2[i];
    let (mut a1, mut a2, mut a3) = (0.0, 0.0, 0.0);
    for i in 0..p {
        for j in i + 1..p {
            let gap = lambda[j] - lambda[i];
            a1 += (b[i] - b[j]) / gap;
            a2 += 2.0 * (g2[j] - g2[i]) * (h2[j] - h2[i]) / (gap * gap) + 2.0 * (1.0 - beta) * kernel(i, j) / (gap * gap);
            let mut triple = 0.0;
            for k in (0..p).filter(|&k| k != i && k != j) {
                triple += kernel(j, k) / (lambda[j] - lambda[k]) - kernel(i, k) / (lambda[i] - lambda[k]);
            }
            a3 -= triple / gap;
        }
    }
    Ok(LyapunovDrift { a1: beta * a1, a2, a3: beta * a3 })
}

/// `β_eff·K·p(p−1)/2`, with `K` the finite-difference Lipschitz constant of
/// `b/κ` over `[lo, hi]`.
pub fn a1_bound(coeff: &SpectralCoefficients, lo: f64, hi: f64, p: usize) -> f64 {
    let kappa = coeff.interaction_factor();
    let k = lipschitz_probe(|x| coeff.b.eval(x) / kappa, lo, hi, 1001);
    coeff.effective_beta() * k * (p * p.saturating_sub(1)) as f64 / 2.0
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = NeumaierSum::default();
    for v in values {
        s.add(v);
    }
    s.value()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Sample mean and unbiased variance with their standard errors; the
/// variance's comes from the fourth central moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: Estimate,
    pub variance: Estimate,
}

impl SampleMoments {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        if n == 0 {
            let nan = Estimate { value: f64::NAN, se: f64::NAN };
            return Self { n, mean: nan, variance: nan };
        }
        let mean = compensated_sum(xs.iter().copied()) / nf;
        if n < 2 {
            return Self {
                n,
                mean: Estimate { value: mean, se: f64::NAN },
                variance: Estimate { value: f64::NAN, se: f64::NAN },
            };
        }
        let m2 = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / nf;
        let m4 = compensated_sum(xs.iter().map(|x| (x - mean).powi(4))) / nf;
        let var = m2 * nf / (nf - 1.0);
        let var_of_var = (m4 - var * var * (nf - 3.0) / (nf - 1.0)) / nf;
        Self {
            n,
            mean: Estimate { value: mean, se: (var / nf).sqrt() },
            variance: Estimate { value: var, se: var_of_var.max(0.0).sqrt() },
        }
    }
}

/// `|a − b| / se`, with `se = 0` meaning exact comparison.
fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSettings {
    pub paths: u64,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide. Results do not depend on it.
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: String,
    /// `None` for informational entries.
    pub passed: Option<bool>,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Verdict {
    fn check(criterion: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { criterion: criterion.into(), passed: Some(passed), value, threshold, detail: detail.into() }
    }

    fn info(criterion: &str, value: f64, detail: impl Into<String>) -> Self {
        Self { criterion: criterion.into(), passed: None, value, threshold: f64::NAN, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub quantity: String,
    pub statistic: String,
    pub left: Estimate,
    pub right: Option<Estimate>,
    pub reference: Option<f64>,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub dt: f64,
    /// RMS terminal difference between this level and the next finer one.
    pub rms_difference: Option<f64>,
    /// RMS of the previous row over this one.
    pub ratio: Option<f64>,
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EventTallies {
    pub collisions: u64,
    pub boundary: u64,
    pub explosions: u64,
    pub paths_with_boundary: u64,
    pub collision_fraction: f64,
    pub first_collision_times: Vec<f64>,
    pub first_collision_histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantile {
    pub q: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PathSummary {
    pub min_gap_quantiles: Vec<Quantile>,
    pub max_lyapunov: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub boundary_excursion_steps: u64,
    pub truncations: u64,
    pub rejected_steps: u64,
    pub max_refinement_depth: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomCoefficients>,
    pub complex: bool,
    pub beta: f64,
    pub effective_beta: f64,
    pub boundary_preserving: bool,
    pub warnings: Vec<String>,
}

impl ModelSummary {
    pub fn new(id: &ModelId, coeff: &SpectralCoefficients) -> Self {
        Self {
            family: id.family.name().to_string(),
            params: id.params.clone(),
            custom: id.custom.clone(),
            complex: coeff.complex_mode,
            beta: coeff.beta,
            effective_beta: coeff.effective_beta(),
            boundary_preserving: coeff.boundary_preserving,
            warnings: coeff.warnings.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub model: ModelSummary,
    pub config: serde_json::Value,
    pub paths: u64,
    pub seed: u64,
    pub events: EventTallies,
    pub summary: PathSummary,
    pub moments: Vec<MomentRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    /// No verdict failed. Informational entries do not count.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed != Some(false))
    }

    pub fn verdict(&self, criterion: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} | model {} {:?} | {} paths | seed {}", self.experiment, self.model.family, self.model.params, self.paths, self.seed);
        let e = &self.events;
        let _ = writeln!(
            s,
            "events: {} collisions ({:.4} of paths), {} boundary, {} explosions",
            e.collisions, e.collision_fraction, e.boundary, e.explosions
        );
        for q in &self.summary.min_gap_quantiles {
            let _ = writeln!(s, "min gap q{:.2}: {:e}", q.q, q.value);
        }
        if self.summary.max_lyapunov.is_finite() {
            let _ = writeln!(s, "max lyapunov U: {:.6}", self.summary.max_lyapunov);
        }
        for m in &self.moments {
            let right = m.right.map_or(String::new(), |r| format!(" vs {:.6} ± {:.2e}", r.value, r.se));
            let reference = m.reference.map_or(String::new(), |r| format!(" vs reference {r:.6}"));
            let _ = writeln!(s, "{} {}: {:.6} ± {:.2e}{right}{reference} (z = {:.3})", m.quantity, m.statistic, m.left.value, m.left.se, m.z);
        }
        for c in &self.convergence {
            match (c.rms_difference, c.ratio) {
                (Some(r), Some(q)) => {
                    let _ = writeln!(s, "level {} dt {:e}: rms {:e}, ratio {:.3}", c.level, c.dt, r, q);
                }
                (Some(r), None) => {
                    let _ = writeln!(s, "level {} dt {:e}: rms {:e}", c.level, c.dt, r);
                }
                _ => {}
            }
        }
        for v in &self.verdicts {
            let tag = match v.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "INFO",
            };
            let _ = writeln!(s, "[{tag}] {}: value {} threshold {} ({})", v.criterion, v.value, v.threshold, v.detail);
        }
        s
    }
}

/// Runs `f(path)` for every path index on a pool of `run.workers` threads;
/// results come back in path order.
pub fn run_paths<T: Send>(
    run: &RunSettings,
    f: impl Fn(u64) -> Result<T, SdeError> + Sync + Send,
) -> Result<Vec<T>, SdeError> {
    if run.paths == 0 {
        return Err(SdeError::InvalidConfig("paths must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers)
        .build()
        .map_err(|e| SdeError::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| (0..run.paths).into_par_iter().map(&f).collect())
}

/// Per-path noise for the eigenvalue system.
pub fn spectral_noise(p: usize, scheme: &SpectralSchemeConfig, seed: u64, path: u64) -> Result<NoiseBundle, SdeError> {
    Ok(NoiseBundle::new(NoiseKind::Spectral, p, scheme.steps(), scheme.dt, seed, derive_stream(seed, path))?)
}

/// Per-path noise for the matrix SDE; independent of [`spectral_noise`].
pub fn matrix_noise(
    p: usize,
    complex: bool,
    scheme: &MatrixSchemeConfig,
    seed: u64,
    path: u64,
) -> Result<NoiseBundle, SdeError> {
    let kind = if complex { NoiseKind::ComplexMatrix } else { NoiseKind::Matrix };
    Ok(NoiseBundle::new(kind, p, scheme.steps(), scheme.dt, seed, derive_stream(seed, path))?)
}

struct PathOutcome {
    diagnostics: PathDiagnostics,
    terminated: Option<EventKind>,
    final_time: f64,
    boundary_events: u64,
    terminal: Vec<f64>,
    a1_violations: u64,
    lyapunov_finite: bool,
}

fn quantiles(mut values: Vec<f64>, qs: &[f64]) -> Vec<Quantile> {
    values.retain(|v| !v.is_nan());
    values.sort_by(f64::total_cmp);
    if values.is_empty() {
        return Vec::new();
    }
    qs.iter()
        .map(|&q| {
            let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
            Quantile { q, value: values[rank - 1] }
        })
        .collect()
}

fn tally(outcomes: &[PathOutcome], t_end: f64) -> (EventTallies, PathSummary) {
    let mut ev = EventTallies::default();
    let mut sm = PathSummary {
        max_lyapunov: f64::NEG_INFINITY,
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        ..PathSummary::default()
    };
    for o in outcomes {
        match o.terminated {
            Some(EventKind::Collision) => {
                ev.collisions += 1;
                ev.first_collision_times.push(o.final_time);
            }
            Some(EventKind::Explosion) => ev.explosions += 1,
            _ => {}
        }
        ev.boundary += o.boundary_events;
        if o.boundary_events > 0 {
            ev.paths_with_boundary += 1;
        }
        let d = &o.diagnostics;
        sm.max_lyapunov = sm.max_lyapunov.max(d.max_lyapunov);
        sm.min_eigenvalue = sm.min_eigenvalue.min(d.min_eigenvalue);
        sm.max_eigenvalue = sm.max_eigenvalue.max(d.max_eigenvalue);
        sm.boundary_excursion_steps += d.boundary_excursions;
        sm.truncations += d.truncations;
        sm.rejected_steps += d.rejected_steps;
        sm.max_refinement_depth = sm.max_refinement_depth.max(d.max_depth);
    }
    ev.collision_fraction = ev.collisions as f64 / outcomes.len().max(1) as f64;
    let bins = 10;
    ev.first_collision_histogram = (0..bins)
        .map(|b| {
            let lo = t_end * b as f64 / bins as f64;
            let hi = t_end * (b + 1) as f64 / bins as f64;
            let count = ev
                .first_collision_times
                .iter()
                .filter(|&&t| t >= lo && (t < hi || (b == bins - 1 && t <= hi)))
                .count() as u64;
            HistogramBin { lo, hi, count }
        })
        .collect();
    sm.min_gap_quantiles =
        quantiles(outcomes.iter().map(|o| o.diagnostics.min_gap).collect(), &[0.0, 0.05, 0.5, 0.95, 1.0]);
    (ev, sm)
}

fn run_spectral_paths(
    coeff: &SpectralCoefficients,
    lambda0: &[f64],
    scheme: &SpectralSchemeConfig,
    run: &RunSettings,
) -> Result<Vec<PathOutcome>, SdeError> {
    let p = lambda0.len();
    run_paths(run, |path| {
        let noise = spectral_noise(p, scheme, run.seed, path)?;
        let rec = simulate_spectral(lambda0, None, coeff, &noise, scheme)?;
        let d = &rec.diagnostics;
        let bound = a1_bound(coeff, d.min_eigenvalue, d.max_eigenvalue, p);
        let slack = 1e-9 * bound.abs() + 1e-12;
        let mut a1_violations = 0;
        let mut lyapunov_finite = true;
        for s in &rec.samples {
            if let Ok(c) = lyapunov_drift_components(&s.eigenvalues, coeff) {
                if c.a1.abs() > bound + slack {
                    a1_violations += 1;
                }
            }
            lyapunov_finite &= s.lyapunov.is_finite();
        }
        Ok(PathOutcome {
            diagnostics: rec.diagnostics.clone(),
            terminated: rec.terminated,
            final_time: rec.final_time,
            boundary_events: rec.count(EventKind::Boundary) as u64,
            terminal: rec.last().eigenvalues.clone(),
            a1_violations,
            lyapunov_finite,
        })
    })
}

fn check_initial(coeff: &SpectralCoefficients, lambda0: &[f64]) -> Result<(), SdeError> {
    if lambda0.is_empty() {
        return Err(SdeError::InvalidInitialState("no eigenvalues".into()));
    }
    if let Some(v) = lambda0.iter().find(|&&v| !coeff.domain.contains(v)) {
        return Err(SdeError::DomainViolation { value: *v, lower: coeff.domain.lower, upper: coeff.domain.upper });
    }
    Ok(())
}

/// Whether the non-collision theorem covers this model.
pub fn predicts_no_collision(coeff: &SpectralCoefficients, p: usize) -> bool {
    coeff.effective_beta() >= 1.0
        && coeff.regularity.non_collision_hypotheses(p)
        && (!coeff.domain.is_bounded_below() || coeff.boundary_preserving)
}

/// Collision frequency of the eigenvalue system. When theory predicts no
/// collisions the verdict is "zero collisions"; `min_collision_fraction`
/// adds a lower bound on the collision frequency instead.
pub fn collision_experiment(
    model: &ModelId,
    lambda0: &[f64],
    scheme: &SpectralSchemeConfig,
    run: &RunSettings,
    min_collision_fraction: Option<f64>,
) -> Result<ExperimentReport, SdeError> {
    let p = lambda0.len();
    let coeff = catalog(model, p)?;
    check_initial(&coeff, lambda0)?;
    let outcomes = run_spectral_paths(&coeff, lambda0, scheme, run)?;
    let (events, summary) = tally(&outcomes, scheme.t_end);
    let mut verdicts = Vec::new();
    let no_collision = predicts_no_collision(&coeff, p);
    if no_collision {
        verdicts.push(Verdict::check(
            "no-collisions",
            events.collisions == 0,
            events.collisions as f64,
            0.0,
            format!("theory predicts no collisions; zero events bounds the per-path rate by about {:.3}", 3.0 / run.paths as f64),
        ));
    }
    match min_collision_fraction {
        Some(f) => verdicts.push(Verdict::check(
            "collision-fraction",
            events.collision_fraction > f,
            events.collision_fraction,
            f,
            "collision fraction must exceed the threshold",
        )),
        None if !no_collision => {
            verdicts.push(Verdict::info("collision-fraction", events.collision_fraction, "no prediction for this model"))
        }
        None => {}
    }
    let violations: u64 = outcomes.iter().map(|o| o.a1_violations).sum();
    if coeff.regularity.b_lipschitz {
        verdicts.push(Verdict::check(
            "a1-bound",
            violations == 0,
            violations as f64,
            0.0,
            "|a1| <= K p(p-1)/2 on recorded states, K estimated over each path's range",
        ));
    }
    let finite = outcomes.iter().filter(|o| o.terminated.is_none()).all(|o| o.lyapunov_finite);
    verdicts.push(Verdict::check(
        "lyapunov-finite",
        finite,
        summary.max_lyapunov,
        f64::INFINITY,
        "U finite at every recorded time of non-collided paths",
    ));
    Ok(ExperimentReport {
        experiment: "collision".into(),
        model: ModelSummary::new(model, &coeff),
        config: json!({ "spectral": scheme, "initial": lambda0 }),
        paths: run.paths,
        seed: run.seed,
        events,
        summary,
        moments: Vec::new(),
        convergence: Vec::new(),
        verdicts,
    })
}

/// Lowest and highest eigenvalue over time. Pass/fail only where the
/// model's boundary theory applies (and the scheme truncates); otherwise the
/// excursion statistics are reported as data.
pub fn positivity_experiment(
    model: &ModelId,
    lambda0: &[f64],
    scheme: &SpectralSchemeConfig,
    run: &RunSettings,
) -> Result<ExperimentReport, SdeError> {
    if !model.family.has_positivity_theory() {
        return Err(SdeError::Unsupported(format!("no positivity statement for model `{}`", model.family)));
    }
    let p = lambda0.len();
    let coeff = catalog(model, p)?;
    check_initial(&coeff, lambda0)?;
    let outcomes = run_spectral_paths(&coeff, lambda0, scheme, run)?;
    let (events, summary) = tally(&outcomes, scheme.t_end);
    let lower = if coeff.domain.is_bounded_below() { coeff.domain.lower } else { 0.0 };
    let upper = coeff.domain.upper;
    let inside = summary.min_eigenvalue >= lower && summary.max_eigenvalue <= upper;
    let detail = format!("eigenvalues within [{lower}, {upper}] at every accepted step");
    let mut verdicts = Vec::new();
    if coeff.boundary_preserving {
        verdicts.push(Verdict::check("domain-preserved", inside, summary.min_eigenvalue, lower, detail));
    } else {
        verdicts.push(Verdict::info("domain-preserved", summary.min_eigenvalue, format!("{detail}; outside the proven range")));
    }
    Ok(ExperimentReport {
        experiment: "positivity".into(),
        model: ModelSummary::new(model, &coeff),
        config: json!({ "spectral": scheme, "initial": lambda0 }),
        paths: run.paths,
        seed: run.seed,
        events,
        summary,
        moments: Vec::new(),
        convergence: Vec::new(),
        verdicts,
    })
}

/// Closed form of `E Σλ(t)` when `b(x) = a + c·x`:
/// `(m₀ + pa/c)e^{βct} − pa/c`, or `m₀ + βpat` for `c = 0`.
pub fn trace_mean_reference(coeff: &SpectralCoefficients, m0: f64, p: usize, t: f64) -> Option<f64> {
    let (a, c) = coeff.b.as_affine()?;
    let beta = coeff.beta;
    let pa = p as f64 * a;
    Some(if c == 0.0 { m0 + beta * pa * t } else { (m0 + pa / c) * (beta * c * t).exp() - pa / c })
}

/// Terminal eigenvalue law of the matrix SDE against the eigenvalue system
/// on independent noise: per-eigenvalue mean and variance within 3 combined
/// standard errors, plus the trace-mean identity on both sides when `b` is
/// affine.
pub fn consistency_experiment(
    model: &ModelId,
    x0: &SymmetricMatrixState,
    matrix: &MatrixSchemeConfig,
    spectral: &SpectralSchemeConfig,
    run: &RunSettings,
) -> Result<ExperimentReport, SdeError> {
    let p = x0.dim();
    let coeff = catalog(model, p)?;
    if coeff.beta != 1.0 {
        return Err(SdeError::Unsupported("beta-deformed systems have no matrix model".into()));
    }
    let x0 = match (coeff.complex_mode, x0.is_hermitian()) {
        (true, false) => SymmetricMatrixState::hermitian_from_real(x0.real_part().clone())?,
        (false, true) => return Err(SdeError::InvalidInitialState("real model needs a real initial matrix".into())),
        _ => x0.clone(),
    };
    let t_matrix = matrix.steps() as f64 * matrix.dt;
    let t_spectral = spectral.steps() as f64 * spectral.dt;
    if (t_matrix - t_spectral).abs() > 1e-9 * t_matrix {
        return Err(SdeError::InvalidConfig(format!("terminal times differ: {t_matrix} vs {t_spectral}")));
    }
    let lambda0 = linalg::eigenvalues(&x0, EIGEN_TOL)?;

    let matrix_terminal = run_paths(run, |path| {
        let noise = matrix_noise(p, coeff.complex_mode, matrix, run.seed, path)?;
        let rec = simulate_matrix(&x0, &coeff, &noise, matrix)?;
        Ok(rec.last().eigenvalues.clone())
    })?;
    let spectral_outcomes = run_spectral_paths(&coeff, &lambda0, spectral, run)?;
    let (events, summary) = tally(&spectral_outcomes, spectral.t_end);
    let spectral_terminal: Vec<&Vec<f64>> =
        spectral_outcomes.iter().filter(|o| o.terminated.is_none()).map(|o| &o.terminal).collect();

    let mut moments = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        let a: Vec<f64> = matrix_terminal.iter().map(|l| l[i]).collect();
        let b: Vec<f64> = spectral_terminal.iter().map(|l| l[i]).collect();
        let (ma, mb) = (SampleMoments::from_samples(&a), SampleMoments::from_samples(&b));
        for (stat, ea, eb) in [("mean", ma.mean, mb.mean), ("variance", ma.variance, mb.variance)] {
            let z = z_score(ea.value - eb.value, ea.se.hypot(eb.se));
            worst = worst.max(if z.is_nan() { f64::INFINITY } else { z });
            moments.push(MomentRow {
                quantity: format!("lambda_{}", i + 1),
                statistic: stat.into(),
                left: ea,
                right: Some(eb),
                reference: None,
                z,
            });
        }
    }
    let mut verdicts = vec![Verdict::check(
        "moments-agree",
        worst <= Z_THRESHOLD,
        worst,
        Z_THRESHOLD,
        "largest |matrix - spectral| / combined SE over eigenvalue means and variances",
    )];
    let completed = spectral_terminal.len() as u64;
    verdicts.push(Verdict::info(
        "spectral-paths-stopped",
        (run.paths - completed) as f64,
        "eigenvalue paths stopped early by a collision or explosion; excluded from the moments",
    ));

    let m0 = compensated_sum(lambda0.iter().copied());
    if let Some(reference) = trace_mean_reference(&coeff, m0, p, t_matrix) {
        for (side, terms) in [
            ("matrix", matrix_terminal.iter().collect::<Vec<_>>()),
            ("spectral", spectral_terminal.clone()),
        ] {
            let traces: Vec<f64> = terms.iter().map(|l| compensated_sum(l.iter().copied())).collect();
            let m = SampleMoments::from_samples(&traces);
            let diff = m.mean.value - reference;
            let z = if m.mean.se > 0.0 {
                diff.abs() / m.mean.se
            } else if diff.abs() <= 1e-9 * (1.0 + reference.abs()) {
                0.0
            } else {
                f64::INFINITY
            };
            moments.push(MomentRow {
                quantity: format!("trace-{side}"),
                statistic: "mean".into(),
                left: m.mean,
                right: None,
                reference: Some(reference),
                z,
            });
            verdicts.push(Verdict::check(
                &format!("trace-{side}"),
                z <= Z_THRESHOLD,
                z,
                Z_THRESHOLD,
                format!("mean trace against closed form {reference}"),
            ));
        }
    }
    Ok(ExperimentReport {
        experiment: "consistency".into(),
        model: ModelSummary::new(model, &coeff),
        config: json!({ "matrix": matrix, "spectral": spectral, "initial": lambda0 }),
        paths: run.paths,
        seed: run.seed,
        events,
        summary,
        moments,
        convergence: Vec::new(),
        verdicts,
    })
}

/// Strong-convergence surrogate: the same Brownian path at refinement
/// levels `0..levels`, RMS terminal differences between consecutive levels,
/// which must shrink by at least [`MIN_CONVERGENCE_RATIO`] per halving. Level
/// 0 is also rerun to confirm that identical inputs give identical output.
pub fn convergence_experiment(
    model: &ModelId,
    lambda0: &[f64],
    base: &SpectralSchemeConfig,
    levels: u32,
    run: &RunSettings,
) -> Result<ExperimentReport, SdeError> {
    if levels < 2 {
        return Err(SdeError::InvalidConfig("convergence needs at least 2 levels".into()));
    }
    let p = lambda0.len();
    let coeff = catalog(model, p)?;
    check_initial(&coeff, lambda0)?;
    base.validate()?;
    let n0 = base.steps();

    struct LevelOutcome {
        terminals: Vec<Vec<f64>>,
        complete: bool,
        repeat_difference: f64,
        diagnostics: PathDiagnostics,
        terminated: Option<EventKind>,
        final_time: f64,
        boundary_events: u64,
    }

    let outcomes = run_paths(run, |path| {
        let bundle = NoiseBundle::new(NoiseKind::Spectral, p, n0, base.dt, run.seed, derive_stream(run.seed, path))?;
        let mut terminals = Vec::new();
        let mut complete = true;
        let mut first = None;
        for level in 0..levels {
            let shared = SharedPath::at_level(bundle.clone(), level)
                .map_err(SdeError::from)?
                .with_max_level(crate::noise::MAX_ABSOLUTE_LEVEL);
            let mut scheme = base.clone();
            scheme.dt = bundle.dt_at(level);
            scheme.stride = scheme.steps();
            let rec = simulate_spectral(lambda0, None, &coeff, &shared, &scheme)?;
            complete &= rec.terminated.is_none();
            terminals.push(rec.last().eigenvalues.clone());
            if level == 0 {
                first = Some(rec);
            }
        }
        let first = first.expect("at least one level");
        let mut scheme = base.clone();
        scheme.stride = scheme.steps();
        let again = simulate_spectral(lambda0, None, &coeff, &SharedPath::new(bundle.clone()), &scheme)?;
        let repeat_difference = first
            .samples
            .iter()
            .zip(&again.samples)
            .flat_map(|(a, b)| a.eigenvalues.iter().zip(&b.eigenvalues).map(|(x, y)| (x - y).abs()))
            .fold(if first.samples.len() == again.samples.len() { 0.0 } else { f64::INFINITY }, f64::max);
        Ok(LevelOutcome {
            terminals,
            complete,
            repeat_difference,
            diagnostics: first.diagnostics.clone(),
            terminated: first.terminated,
            final_time: first.final_time,
            boundary_events: first.count(EventKind::Boundary) as u64,
        })
    })?;

    let used: Vec<&LevelOutcome> = outcomes.iter().filter(|o| o.complete).collect();
    let mut convergence = Vec::new();
    let mut previous: Option<f64> = None;
    let mut min_ratio = f64::INFINITY;
    for level in 0..levels {
        let dt = base.dt / 2f64.powi(level as i32);
        let rms = (level + 1 < levels).then(|| {
            let l = level as usize;
            let sq = compensated_sum(used.iter().map(|o| {
                o.terminals[l].iter().zip(&o.terminals[l + 1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }));
            (sq / used.len().max(1) as f64).sqrt()
        });
        let ratio = match (previous, rms) {
            (Some(a), Some(b)) => Some(a / b),
            _ => None,
        };
        if let Some(r) = ratio {
            min_ratio = min_ratio.min(if r.is_nan() { 0.0 } else { r });
        }
        convergence.push(ConvergenceRow { level, dt, rms_difference: rms, ratio, order: ratio.map(f64::log2) });
        if rms.is_some() {
            previous = rms;
        }
    }
    let repeat = outcomes.iter().map(|o| o.repeat_difference).fold(0.0, f64::max);
    let mut verdicts = Vec::new();
    if levels >= 3 {
        verdicts.push(Verdict::check(
            "monotone-decrease",
            min_ratio >= MIN_CONVERGENCE_RATIO && used.len() >= 2,
            min_ratio,
            MIN_CONVERGENCE_RATIO,
            "smallest ratio of consecutive RMS terminal differences",
        ));
    }
    verdicts.push(Verdict::check(
        "determinism",
        repeat == 0.0,
        repeat,
        0.0,
        "largest difference between two runs on identical input",
    ));
    verdicts.push(Verdict::info(
        "paths-stopped",
        (run.paths - used.len() as u64) as f64,
        "paths stopped early at some level; excluded from the table",
    ));

    let level0: Vec<PathOutcome> = outcomes
        .iter()
        .map(|o| PathOutcome {
            diagnostics: o.diagnostics.clone(),
            terminated: o.terminated,
            final_time: o.final_time,
            boundary_events: o.boundary_events,
            terminal: Vec::new(),
            a1_violations: 0,
            lyapunov_finite: true,
        })
        .collect();
    let (events, summary) = tally(&level0, base.t_end);
    Ok(ExperimentReport {
        experiment: "convergence".into(),
        model: ModelSummary::new(model, &coeff),
        config: json!({ "spectral": base, "levels": levels, "initial": lambda0 }),
        paths: run.paths,
        seed: run.seed,
        events,
        summary,
        moments: Vec::new(),
        convergence,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_values() {
        assert_eq!(lyapunov_u(&[0.0, 1.0]).unwrap(), 0.0);
        assert!((lyapunov_u(&[0.0, std::f64::consts::E]).unwrap() + 1.0).abs() < 1e-15);
        assert!((lyapunov_u(&[0.0, 1.0, 3.0]).unwrap() + 6f64.ln()).abs() < 1e-15);
        assert!(lyapunov_u(&[0.0, 0.0]).is_err());
        assert_eq!(lyapunov_u(&[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn constant_b_gives_zero_a1_and_wishart_zero_a2() {
        let c = catalog(&ModelId::wishart(3.0), 4).unwrap();
        let d = lyapunov_drift_components(&[0.5, 1.0, 2.5, 4.0], &c).unwrap();
        assert_eq!(d.a1, 0.0);
        assert_eq!(d.a2, 0.0);
    }

    #[test]
    fn two_particles_have_no_triple_term() {
        for id in [ModelId::wishart(3.0), ModelId::jacobi(2.0, 3.0), ModelId::beta_wishart(2.0, 0.7)] {
            let c = catalog(&id, 2).unwrap();
            assert_eq!(lyapunov_drift_components(&[0.2, 0.7], &c).unwrap().a3, 0.0);
        }
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let s = compensated_sum([1e16, 1.0, -1e16]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn sample_moments_small_case() {
        let m = SampleMoments::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean.value, 2.5);
        assert!((m.variance.value - 5.0 / 3.0).abs() < 1e-15);
        assert!((m.mean.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn trace_reference_closed_forms() {
        let w = catalog(&ModelId::wishart(3.0), 2).unwrap();
        assert_eq!(trace_mean_reference(&w, 3.0, 2, 0.5), Some(6.0));
        let ou = catalog(&ModelId::wishart_ou(2.0, -1.0), 2).unwrap();
        let m = trace_mean_reference(&ou, 3.0, 2, 1.0).unwrap();
        assert!((m - ((3.0 - 4.0) * (-1f64).exp() + 4.0)).abs() < 1e-14);
    }

    #[test]
    fn quantiles_nearest_rank() {
        let q = quantiles(vec![3.0, 1.0, 2.0, 4.0], &[0.0, 0.5, 1.0]);
        let v: Vec<f64> = q.iter().map(|q| q.value).collect();
        assert_eq!(v, vec![1.0, 2.0, 4.0]);
    }
}
