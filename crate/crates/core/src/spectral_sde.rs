//! Euler–Maruyama integration of the eigenvalue particle system and of the
//! eigenvector frame, with adaptive step halving near collisions.
//!
//! ```text
//! dλ_i = 2 g(λ_i) h(λ_i) dν_i + β ( b(λ_i) + κ Σ_{k≠i} G(λ_i, λ_k)/(λ_i − λ_k) ) dt
//! dH   = H dA + ½ H dA dA,   dA_ij = √G(λ_i, λ_j)/(λ_j − λ_i) dβ_ij
//! ```

use serde::Serialize;

use crate::error::SdeError;
use crate::linalg::{self, Matrix, ORTHONORMALITY_TOL};
use crate::models::{self, SpectralCoefficients};
use crate::noise::{IncrementSource, Increments, NoiseKind};
use crate::trajectory::{Event, EventKind, PathDiagnostics, SpectralSample, TrajectoryRecord};
use crate::verify::lyapunov_u;

pub const DEFAULT_EPS_GAP: f64 = 1e-12;
pub const DEFAULT_MAX_HALVINGS: u32 = 20;
pub const DEFAULT_EXPLOSION_BOUND: f64 = 1e12;
/// Largest relative change of any gap accepted in one adaptive step.
pub const MAX_GAP_CHANGE: f64 = 0.5;

/// Number of base steps covering `[0, t_end]`: `⌊T/dt⌋`, with ratios within
/// 1e-9 (relative) of an integer rounded to it.
pub fn step_count(dt: f64, t_end: f64) -> u64 {
    let r = t_end / dt;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * r.max(1.0) {
        n as u64
    } else {
        r.floor() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationMode {
    /// Clamp to the domain after every step.
    FullTruncation,
    /// Reflect values leaving the domain about the boundary; a reflected
    /// state that breaks the ordering is rejected and the step halved.
    ReflectReject,
}

impl TruncationMode {
    pub fn name(self) -> &'static str {
        match self {
            TruncationMode::FullTruncation => "full-truncation",
            TruncationMode::ReflectReject => "reflect-reject",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "full-truncation" => Some(TruncationMode::FullTruncation),
            "reflect-reject" => Some(TruncationMode::ReflectReject),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralSchemeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub eps_gap: f64,
    pub adaptive: bool,
    pub max_halvings: u32,
    pub truncation: TruncationMode,
    pub stride: u64,
    pub eigenvectors: bool,
    pub explosion_bound: f64,
}

impl SpectralSchemeConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            eps_gap: DEFAULT_EPS_GAP,
            adaptive: true,
            max_halvings: DEFAULT_MAX_HALVINGS,
            truncation: TruncationMode::FullTruncation,
            stride: 1,
            eigenvectors: false,
            explosion_bound: DEFAULT_EXPLOSION_BOUND,
        }
    }

    pub fn steps(&self) -> u64 {
        step_count(self.dt, self.t_end)
    }

    pub fn validate(&self) -> Result<(), SdeError> {
        let bad = |m: String| Err(SdeError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive and finite, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("T must be positive and finite, got {}", self.t_end));
        }
        if self.steps() == 0 {
            return bad(format!("dt = {} exceeds T = {}", self.dt, self.t_end));
        }
        if !(self.eps_gap > 0.0) {
            return bad(format!("eps_gap must be positive, got {}", self.eps_gap));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if self.dt / 2f64.powi(self.max_halvings as i32) <= 0.0 {
            return bad(format!("dt / 2^{} underflows", self.max_halvings));
        }
        if !(self.explosion_bound > 0.0) {
            return bad("explosion bound must be positive".into());
        }
        Ok(())
    }
}

/// Skew-symmetric stochastic-logarithm increment of the eigenvector frame,
/// with the diagonal Itô correction `(dA dA)_ii = −Σ_k G/(λ_k − λ_i)² dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenvectorLogIncrement {
    pub da: Matrix,
    pub ito_diagonal: Vec<f64>,
}

fn check_spectral_increments(inc: &Increments, p: usize) -> Result<(), SdeError> {
    if inc.kind() != NoiseKind::Spectral || inc.dim() != p {
        return Err(SdeError::InvalidConfig(format!(
            "expected spectral increments of dimension {p}, got {:?} of dimension {}",
            inc.kind(),
            inc.dim()
        )));
    }
    Ok(())
}

fn check_gaps(lambda: &[f64], eps_gap: f64) -> Result<(), SdeError> {
    models::check_strictly_ascending(lambda)?;
    let gap = linalg::min_gap(lambda);
    if gap <= eps_gap {
        return Err(SdeError::GapTooSmall { gap, eps: eps_gap });
    }
    Ok(())
}

/// Raw Euler proposal `λ + 2gh·dν + drift·dt`, no domain handling.
fn euler_proposal(lambda: &[f64], coeff: &SpectralCoefficients, dnu: &[f64], dt: f64) -> Result<Vec<f64>, SdeError> {
    let drift = models::eigen_drift(coeff, lambda)?;
    Ok(lambda
        .iter()
        .zip(&drift)
        .zip(dnu)
        .map(|((&l, &d), &w)| l + coeff.diffusion(l) * w + d * dt)
        .collect())
}

/// One eigenvalue step with full truncation where the model's boundary
/// theory applies. Errors if the result is not strictly ascending.
pub fn step_eigenvalues(
    lambda: &[f64],
    coeff: &SpectralCoefficients,
    dnu: &[f64],
    dt: f64,
) -> Result<Vec<f64>, SdeError> {
    if dnu.len() != lambda.len() {
        return Err(SdeError::InvalidConfig(format!("{} increments for {} eigenvalues", dnu.len(), lambda.len())));
    }
    let mut next = euler_proposal(lambda, coeff, dnu, dt)?;
    if coeff.boundary_preserving {
        for v in &mut next {
            *v = coeff.domain.clamp(*v);
        }
    }
    if models::check_strictly_ascending(&next).is_err() {
        return Err(SdeError::OrderingInverted { t: dt });
    }
    Ok(next)
}

pub fn build_da(
    lambda: &[f64],
    coeff: &SpectralCoefficients,
    dbeta: &Increments,
    dt: f64,
    eps_gap: f64,
) -> Result<EigenvectorLogIncrement, SdeError> {
    let p = lambda.len();
    check_spectral_increments(dbeta, p)?;
    check_gaps(lambda, eps_gap)?;
    let mut da = Matrix::zeros(p, p);
    let mut ito_diagonal = vec![0.0; p];
    for i in 0..p {
        for j in i + 1..p {
            let g = models::kernel_g(coeff, lambda[i], lambda[j]);
            let gap = lambda[j] - lambda[i];
            let a = g.sqrt() / gap * dbeta.beta(i, j);
            da[(i, j)] = a;
            da[(j, i)] = -a;
            let c = g / (gap * gap) * dt;
            ito_diagonal[i] -= c;
            ito_diagonal[j] -= c;
        }
    }
    Ok(EigenvectorLogIncrement { da, ito_diagonal })
}

/// `H' = polar(H (I + dA + ½ diag(dA dA)))`.
pub fn step_eigenvectors(
    h: &Matrix,
    lambda: &[f64],
    coeff: &SpectralCoefficients,
    dbeta: &Increments,
    dt: f64,
    eps_gap: f64,
) -> Result<Matrix, SdeError> {
    let p = lambda.len();
    if h.rows() != p || h.cols() != p {
        return Err(SdeError::InvalidInitialState(format!("eigenvector frame must be {p}x{p}")));
    }
    let defect = h.orthonormality_defect();
    if !(defect <= ORTHONORMALITY_TOL) {
        return Err(SdeError::InvalidInitialState(format!("eigenvector frame is not orthonormal (defect {defect:e})")));
    }
    let inc = build_da(lambda, coeff, dbeta, dt, eps_gap)?;
    let mut m = inc.da;
    for i in 0..p {
        m[(i, i)] = 1.0 + 0.5 * inc.ito_diagonal[i];
    }
    Ok(linalg::reorthonormalize(&h.matmul(&m))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reject {
    NonFinite,
    Ordering,
    GapBelowEps,
    GapJump,
    Domain,
    Frame,
}

struct Proposal {
    lambda: Vec<f64>,
    /// First eigenvalue of the raw update outside the domain.
    excursion: Option<(usize, f64)>,
    truncated: u64,
}

struct Integrator<'a, S: ?Sized> {
    coeff: &'a SpectralCoefficients,
    noise: &'a S,
    cfg: &'a SpectralSchemeConfig,
    max_depth: u32,
    lambda: Vec<f64>,
    h: Option<Matrix>,
    in_excursion: bool,
    events: Vec<Event>,
    diag: PathDiagnostics,
}

impl<S: IncrementSource + ?Sized> Integrator<'_, S> {
    fn propose(&self, inc: &Increments, dt: f64) -> Result<Proposal, SdeError> {
        let raw = euler_proposal(&self.lambda, self.coeff, inc.nu(), dt)?;
        let domain = self.coeff.domain;
        let excursion = raw.iter().position(|&v| !domain.contains(v)).map(|i| (i, raw[i]));
        let mut truncated = 0;
        let lambda = if self.coeff.boundary_preserving {
            raw.iter()
                .map(|&v| {
                    let c = match self.cfg.truncation {
                        TruncationMode::FullTruncation => domain.clamp(v),
                        TruncationMode::ReflectReject => domain.reflect(v),
                    };
                    if c != v {
                        truncated += 1;
                    }
                    c
                })
                .collect()
        } else {
            raw
        };
        Ok(Proposal { lambda, excursion, truncated })
    }

    fn judge(&self, next: &[f64]) -> Option<Reject> {
        if next.iter().any(|v| !v.is_finite() || v.abs() > self.cfg.explosion_bound) {
            return Some(Reject::NonFinite);
        }
        if models::check_strictly_ascending(next).is_err() {
            return Some(Reject::Ordering);
        }
        if linalg::min_gap(next) <= self.cfg.eps_gap {
            return Some(Reject::GapBelowEps);
        }
        if self.coeff.boundary_preserving && next.iter().any(|&v| !self.coeff.domain.contains(v)) {
            return Some(Reject::Domain);
        }
        if self.cfg.adaptive {
            let jump = self.lambda.windows(2).zip(next.windows(2)).any(|(old, new)| {
                let g = old[1] - old[0];
                ((new[1] - new[0]) - g).abs() > MAX_GAP_CHANGE * g
            });
            if jump {
                return Some(Reject::GapJump);
            }
        }
        None
    }

    fn next_frame(&self, inc: &Increments, dt: f64) -> Result<Option<Matrix>, SdeError> {
        match &self.h {
            None => Ok(None),
            Some(h) => step_eigenvectors(h, &self.lambda, self.coeff, inc, dt, self.cfg.eps_gap).map(Some),
        }
    }

    fn event(&mut self, kind: EventKind, t: f64, detail: String) -> Option<EventKind> {
        self.events.push(Event { kind, t, detail });
        Some(kind)
    }

    /// Advances over `[t0, t0 + dt]`. Returns the terminating event, if any.
    fn advance(
        &mut self,
        inc: &Increments,
        depth: u32,
        index: u128,
        t0: f64,
        dt: f64,
    ) -> Result<Option<EventKind>, SdeError> {
        let proposal = self.propose(inc, dt)?;
        let mut verdict = self.judge(&proposal.lambda);
        let mut frame = None;
        let mut frame_error = None;
        if verdict.is_none() {
            match self.next_frame(inc, dt) {
                Ok(f) => frame = f,
                Err(e @ SdeError::Linalg(_)) => {
                    verdict = Some(Reject::Frame);
                    frame_error = Some(e);
                }
                Err(e) => return Err(e),
            }
        }

        if let Some(reason) = verdict {
            let can_split = self.cfg.adaptive && depth < self.max_depth;
            if can_split {
                self.diag.rejected_steps += 1;
                let (left, right) = self.noise.split(inc, depth, index);
                let half = 0.5 * dt;
                if let Some(ev) = self.advance(&left, depth + 1, 2 * index, t0, half)? {
                    return Ok(Some(ev));
                }
                return self.advance(&right, depth + 1, 2 * index + 1, t0 + half, half);
            }
            match reason {
                Reject::NonFinite => {
                    let norm = proposal.lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
                    return Ok(self.event(EventKind::Explosion, t0, format!("eigenvalue norm {norm:e}")));
                }
                Reject::Domain => {
                    let d = self.coeff.domain;
                    let value = *proposal.lambda.iter().find(|&&v| !d.contains(v)).expect("domain reject");
                    return Err(SdeError::DomainViolation { value, lower: d.lower, upper: d.upper });
                }
                Reject::Frame => return Err(frame_error.expect("set with the verdict")),
                Reject::Ordering | Reject::GapBelowEps | Reject::GapJump => return Ok(self.collision(t0)),
            }
        }

        let t1 = t0 + dt;
        if let Some((i, v)) = proposal.excursion {
            self.diag.boundary_excursions += 1;
            if !self.in_excursion {
                let d = self.coeff.domain;
                let _ = self.event(
                    EventKind::Boundary,
                    t1,
                    format!("lambda_{} = {v} outside [{}, {}]", i + 1, d.lower, d.upper),
                );
            }
        }
        self.in_excursion = proposal.excursion.is_some()
            && !(self.coeff.boundary_preserving && proposal.lambda.iter().all(|&v| self.coeff.domain.contains(v)));
        self.diag.truncations += proposal.truncated;
        self.diag.accepted_steps += 1;
        self.diag.max_depth = self.diag.max_depth.max(depth);
        self.lambda = proposal.lambda;
        if frame.is_some() {
            self.h = frame;
        }
        let gap = linalg::min_gap(&self.lambda);
        self.diag.observe(&self.lambda, gap);
        Ok(None)
    }

    fn collision(&mut self, t: f64) -> Option<EventKind> {
        let gap = linalg::min_gap(&self.lambda);
        self.event(EventKind::Collision, t, format!("min gap {gap:e}, step rejected at maximum refinement"))
    }

    fn sample(&mut self, t: f64) -> SpectralSample {
        let min_gap = linalg::min_gap(&self.lambda);
        let lyapunov = lyapunov_u(&self.lambda).unwrap_or(f64::INFINITY);
        self.diag.max_lyapunov = self.diag.max_lyapunov.max(lyapunov);
        SpectralSample { t, eigenvalues: self.lambda.clone(), eigenvectors: self.h.clone(), min_gap, lyapunov }
    }
}

/// Integrates the eigenvalue system (and, if configured, the eigenvector
/// frame) over `[0, T]` on the noise path `noise`.
///
/// Records the initial state, every `stride`-th base step and the final
/// state. Collisions and explosions stop the run and are reported as events;
/// the last accepted state is recorded at the event time.
pub fn simulate_spectral<S: IncrementSource + ?Sized>(
    lambda0: &[f64],
    h0: Option<&Matrix>,
    coeff: &SpectralCoefficients,
    noise: &S,
    config: &SpectralSchemeConfig,
) -> Result<TrajectoryRecord<SpectralSample>, SdeError> {
    config.validate()?;
    let p = lambda0.len();
    if p == 0 {
        return Err(SdeError::InvalidInitialState("no eigenvalues".into()));
    }
    if noise.kind() != NoiseKind::Spectral || noise.dim() != p {
        return Err(SdeError::InvalidConfig(format!(
            "expected spectral noise of dimension {p}, got {:?} of dimension {}",
            noise.kind(),
            noise.dim()
        )));
    }
    if (noise.dt() - config.dt).abs() > 1e-12 * config.dt {
        return Err(SdeError::InvalidConfig(format!("noise dt {} differs from scheme dt {}", noise.dt(), config.dt)));
    }
    let n = config.steps();
    if noise.steps() < n {
        return Err(SdeError::InvalidConfig(format!("noise covers {} steps, scheme needs {n}", noise.steps())));
    }
    if config.adaptive && config.max_halvings >= noise.max_split_depth() {
        return Err(SdeError::InvalidConfig(format!(
            "max_halvings {} exceeds the noise refinement limit {}",
            config.max_halvings,
            noise.max_split_depth().saturating_sub(1)
        )));
    }
    if models::check_strictly_ascending(lambda0).is_err() {
        return Err(SdeError::InvalidInitialState("eigenvalues must be strictly ascending".into()));
    }
    if linalg::min_gap(lambda0) <= config.eps_gap {
        return Err(SdeError::InvalidInitialState(format!("initial gap is not above eps_gap = {}", config.eps_gap)));
    }
    if let Some(v) = lambda0.iter().find(|&&v| !coeff.domain.contains(v)) {
        return Err(SdeError::DomainViolation { value: *v, lower: coeff.domain.lower, upper: coeff.domain.upper });
    }
    let h = if config.eigenvectors {
        if coeff.complex_mode || coeff.beta != 1.0 {
            return Err(SdeError::Unsupported(
                "eigenvector dynamics exist only for real models with beta = 1".into(),
            ));
        }
        let h = h0.cloned().unwrap_or_else(|| Matrix::identity(p));
        if h.rows() != p || h.cols() != p || !(h.orthonormality_defect() <= ORTHONORMALITY_TOL) {
            return Err(SdeError::InvalidInitialState(format!("H0 must be a {p}x{p} orthonormal matrix")));
        }
        Some(h)
    } else {
        None
    };

    let mut it = Integrator {
        coeff,
        noise,
        cfg: config,
        max_depth: if config.adaptive { config.max_halvings } else { 0 },
        lambda: lambda0.to_vec(),
        h,
        in_excursion: false,
        events: Vec::new(),
        diag: PathDiagnostics::default(),
    };
    it.diag.observe(lambda0, linalg::min_gap(lambda0));
    let mut samples = vec![it.sample(0.0)];
    let mut terminated = None;
    let mut final_time = n as f64 * config.dt;
    for k in 0..n {
        let t0 = k as f64 * config.dt;
        let inc = noise.increment(k)?;
        if let Some(ev) = it.advance(&inc, 0, k as u128, t0, config.dt)? {
            terminated = Some(ev);
            final_time = it.events.last().map_or(t0, |e| e.t);
            samples.push(it.sample(final_time));
            break;
        }
        if (k + 1) % config.stride == 0 || k + 1 == n {
            samples.push(it.sample((k + 1) as f64 * config.dt));
        }
    }
    Ok(TrajectoryRecord { samples, events: it.events, diagnostics: it.diag, final_time, terminated })
}
