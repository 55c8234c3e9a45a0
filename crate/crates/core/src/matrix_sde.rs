//! Euler–Maruyama for the matrix SDE
//!
//! ```text
//! dX = g(X) dB h(X) + h(X) dBᵀ g(X) + b(X) dt
//! ```
//!
//! on real symmetric matrices, and its Hermitian analogue driven by
//! `dW = dB¹ + i dB²` with `dW*` in the second term. `g(X)`, `h(X)`, `b(X)`
//! come from one diagonalisation per step.

use serde::Serialize;

use crate::error::SdeError;
use crate::linalg::{self, FunctionalCalculus, Matrix, SymmetricMatrixState};
use crate::models::{ScalarFn, SpectralCoefficients};
use crate::noise::{IncrementSource, Increments, NoiseKind};
use crate::spectral_sde::{step_count, DEFAULT_EXPLOSION_BOUND};
use crate::trajectory::{Event, EventKind, MatrixSample, PathDiagnostics, TrajectoryRecord};

/// Relative reconstruction tolerance of the per-step diagonalisation.
pub const EIGEN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatrixSchemeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Replace each new state by `(X + Xᵀ)/2`; otherwise the upper triangle
    /// is mirrored.
    pub symmetrize: bool,
    pub stride: u64,
    /// `‖X‖_F` above which the run fails with an explosion error.
    pub explosion_bound: f64,
}

impl MatrixSchemeConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, symmetrize: true, stride: 1, explosion_bound: DEFAULT_EXPLOSION_BOUND }
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
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.explosion_bound > 0.0) {
            return bad("explosion bound must be positive".into());
        }
        Ok(())
    }
}

/// Real and imaginary parts of `f(X)`. Affine `f` is applied directly so
/// constants are exact multiples of the identity.
fn spectral_fn(calc: &FunctionalCalculus<'_>, x: &SymmetricMatrixState, f: &ScalarFn) -> (Matrix, Option<Matrix>) {
    let p = x.dim();
    if let Some((a, s)) = f.as_affine() {
        let mut re = if s == 0.0 { Matrix::zeros(p, p) } else { x.real_part().scale(s) };
        for i in 0..p {
            re[(i, i)] += a;
        }
        let im = x.imag_part().map(|m| if s == 0.0 { Matrix::zeros(p, p) } else { m.scale(s) });
        return (re, im);
    }
    let y = calc.apply(|v| f.eval(v));
    (y.real_part().clone(), y.imag_part().cloned())
}

fn check_increments(inc: &Increments, kind: NoiseKind, p: usize) -> Result<(), SdeError> {
    if inc.kind() != kind || inc.dim() != p {
        return Err(SdeError::InvalidConfig(format!(
            "expected {kind:?} increments of dimension {p}, got {:?} of dimension {}",
            inc.kind(),
            inc.dim()
        )));
    }
    Ok(())
}

fn finish(re: Matrix, symmetrize: bool) -> Result<SymmetricMatrixState, SdeError> {
    Ok(if symmetrize { SymmetricMatrixState::symmetrize(&re)? } else { SymmetricMatrixState::from_upper(&re)? })
}

fn step_real(
    calc: &FunctionalCalculus<'_>,
    x: &SymmetricMatrixState,
    coeff: &SpectralCoefficients,
    db: &Increments,
    dt: f64,
    symmetrize: bool,
) -> Result<SymmetricMatrixState, SdeError> {
    let (g, _) = spectral_fn(calc, x, &coeff.g);
    let (h, _) = spectral_fn(calc, x, &coeff.h);
    let (b, _) = spectral_fn(calc, x, &coeff.b);
    let t = g.matmul(&db.matrix()).matmul(&h);
    let noise = t.add(&t.transpose());
    finish(x.real_part().add(&noise).add(&b.scale(dt)), symmetrize)
}

fn step_complex(
    calc: &FunctionalCalculus<'_>,
    x: &SymmetricMatrixState,
    coeff: &SpectralCoefficients,
    dw: &Increments,
    dt: f64,
) -> Result<SymmetricMatrixState, SdeError> {
    let p = x.dim();
    let zero = || Matrix::zeros(p, p);
    let (gr, gi) = spectral_fn(calc, x, &coeff.g);
    let (hr, hi) = spectral_fn(calc, x, &coeff.h);
    let (br, bi) = spectral_fn(calc, x, &coeff.b);
    let (gi, hi, bi) = (gi.unwrap_or_else(zero), hi.unwrap_or_else(zero), bi.unwrap_or_else(zero));
    let (wr, wi) = (dw.matrix(), dw.imaginary_matrix());
    let cmul = |ar: &Matrix, ai: &Matrix, br: &Matrix, bi: &Matrix| {
        (ar.matmul(br).sub(&ai.matmul(bi)), ar.matmul(bi).add(&ai.matmul(br)))
    };
    let (ur, ui) = cmul(&gr, &gi, &wr, &wi);
    let (tr, ti) = cmul(&ur, &ui, &hr, &hi);
    // T + T*: Hermitian by construction.
    let re = x.real_part().add(&tr.add(&tr.transpose())).add(&br.scale(dt));
    let xi = x.imag_part().cloned().unwrap_or_else(zero);
    let im = xi.add(&ti.sub(&ti.transpose())).add(&bi.scale(dt));
    Ok(SymmetricMatrixState::hermitian(&re, &im)?)
}

/// One real step, followed by `(X + Xᵀ)/2`.
pub fn step_matrix(
    x: &SymmetricMatrixState,
    coeff: &SpectralCoefficients,
    db: &Increments,
    dt: f64,
) -> Result<SymmetricMatrixState, SdeError> {
    if x.is_hermitian() || coeff.complex_mode {
        return Err(SdeError::InvalidConfig("step_matrix needs a real state and a real-mode model".into()));
    }
    check_increments(db, NoiseKind::Matrix, x.dim())?;
    let calc = FunctionalCalculus::new(x, EIGEN_TOL)?;
    step_real(&calc, x, coeff, db, dt, true)
}

/// One Hermitian step, with `dw` carrying `dB¹` and `dB²`.
pub fn step_matrix_complex(
    x: &SymmetricMatrixState,
    coeff: &SpectralCoefficients,
    dw: &Increments,
    dt: f64,
) -> Result<SymmetricMatrixState, SdeError> {
    if !x.is_hermitian() {
        return Err(SdeError::InvalidConfig("step_matrix_complex needs a Hermitian state".into()));
    }
    check_increments(dw, NoiseKind::ComplexMatrix, x.dim())?;
    let calc = FunctionalCalculus::new(x, EIGEN_TOL)?;
    step_complex(&calc, x, coeff, dw, dt)
}

/// Simulates `[0, T]`, recording every `stride`-th step and the final
/// state. Eigenvalues leaving the model domain are not corrected; they are
/// counted in the diagnostics and reported as boundary events.
pub fn simulate_matrix<S: IncrementSource + ?Sized>(
    x0: &SymmetricMatrixState,
    coeff: &SpectralCoefficients,
    noise: &S,
    config: &MatrixSchemeConfig,
) -> Result<TrajectoryRecord<MatrixSample>, SdeError> {
    config.validate()?;
    let p = x0.dim();
    let kind = if coeff.complex_mode { NoiseKind::ComplexMatrix } else { NoiseKind::Matrix };
    if x0.is_hermitian() != coeff.complex_mode {
        return Err(SdeError::InvalidInitialState(format!(
            "model `{}` needs a {} initial state",
            coeff.name,
            if coeff.complex_mode { "Hermitian" } else { "real symmetric" }
        )));
    }
    if noise.kind() != kind || noise.dim() != p {
        return Err(SdeError::InvalidConfig(format!(
            "expected {kind:?} noise of dimension {p}, got {:?} of dimension {}",
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
    if !x0.is_finite() {
        return Err(SdeError::InvalidInitialState("non-finite entries".into()));
    }
    let lambda0 = linalg::eigenvalues(x0, EIGEN_TOL)?;
    if linalg::min_gap(&lambda0) <= 0.0 {
        return Err(SdeError::InvalidInitialState("initial eigenvalues must be distinct".into()));
    }
    if let Some(v) = lambda0.iter().find(|&&v| !coeff.domain.contains(v)) {
        return Err(SdeError::DomainViolation { value: *v, lower: coeff.domain.lower, upper: coeff.domain.upper });
    }

    let mut x = x0.clone();
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let mut diag = PathDiagnostics::default();
    let mut in_excursion = false;
    for k in 0..=n {
        let t = k as f64 * config.dt;
        let calc = FunctionalCalculus::new(&x, EIGEN_TOL)?;
        let lambda = calc.eigenvalues();
        let gap = linalg::min_gap(&lambda);
        diag.observe(&lambda, gap);
        if let Ok(u) = crate::verify::lyapunov_u(&lambda) {
            diag.max_lyapunov = diag.max_lyapunov.max(u);
        }
        let outside = lambda.iter().position(|&v| !coeff.domain.contains(v));
        if let Some(i) = outside {
            diag.boundary_excursions += 1;
            if !in_excursion {
                events.push(Event {
                    kind: EventKind::Boundary,
                    t,
                    detail: format!(
                        "lambda_{} = {} outside [{}, {}]",
                        i + 1,
                        lambda[i],
                        coeff.domain.lower,
                        coeff.domain.upper
                    ),
                });
            }
        }
        in_excursion = outside.is_some();
        if k % config.stride == 0 || k == n {
            samples.push(MatrixSample { t, state: x.clone(), eigenvalues: lambda });
        }
        if k == n {
            break;
        }
        let inc = noise.increment(k)?;
        let next = if coeff.complex_mode {
            step_complex(&calc, &x, coeff, &inc, config.dt)?
        } else {
            step_real(&calc, &x, coeff, &inc, config.dt, config.symmetrize)?
        };
        diag.accepted_steps += 1;
        let norm = next.frobenius_norm();
        if !next.is_finite() || norm > config.explosion_bound {
            return Err(SdeError::Explosion { t: t + config.dt, norm });
        }
        x = next;
    }
    Ok(TrajectoryRecord { samples, events, diagnostics: diag, final_time: n as f64 * config.dt, terminated: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{catalog, ModelId};
    use crate::noise::NoiseBundle;

    #[test]
    fn constant_drift_is_exact() {
        let c = catalog(&ModelId::custom("0", "0", "1"), 3).unwrap();
        let x = SymmetricMatrixState::from_symmetric(Matrix::from_rows(&[
            vec![1.0, 0.5, 0.0],
            vec![0.5, 2.0, 0.25],
            vec![0.0, 0.25, 3.0],
        ]))
        .unwrap();
        let db = NoiseBundle::new(NoiseKind::Matrix, 3, 1, 0.1, 3, 0).unwrap().draw_increments(0).unwrap();
        let next = step_matrix(&x, &c, &db, 0.1).unwrap();
        let mut expect = x.real_part().clone();
        for i in 0..3 {
            expect[(i, i)] += 0.1;
        }
        assert_eq!(next.real_part(), &expect);
    }

    #[test]
    fn wishart_zero_noise_by_hand() {
        let c = catalog(&ModelId::wishart(2.0), 2).unwrap();
        let x = SymmetricMatrixState::diagonal(&[1.0, 2.0]);
        let next = step_matrix(&x, &c, &Increments::zeros(NoiseKind::Matrix, 2), 0.1).unwrap();
        let d = next.real_part();
        assert!((d[(0, 0)] - 1.2).abs() < 1e-15 && (d[(1, 1)] - 2.2).abs() < 1e-15);
        assert_eq!(d[(0, 1)], 0.0);
    }

    #[test]
    fn single_entry_wishart_is_scalar() {
        let c = catalog(&ModelId::wishart(1.5), 1).unwrap();
        let x: f64 = 0.8;
        let db = Increments::new(NoiseKind::Matrix, 1, vec![0.02]).unwrap();
        let next = step_matrix(&SymmetricMatrixState::diagonal(&[x]), &c, &db, 1e-3).unwrap();
        assert_eq!(next.get(0, 0), x + 2.0 * x.sqrt() * 0.02 + 1.5 * 1e-3);
    }

    #[test]
    fn hermitian_step_stays_hermitian() {
        let c = catalog(&ModelId::laguerre_complex(4.0), 3).unwrap();
        let x = SymmetricMatrixState::hermitian_from_real(Matrix::diagonal(&[1.0, 2.0, 3.0])).unwrap();
        let dw = NoiseBundle::new(NoiseKind::ComplexMatrix, 3, 1, 1e-2, 9, 0).unwrap().draw_increments(0).unwrap();
        let next = step_matrix_complex(&x, &c, &dw, 1e-2).unwrap();
        let (re, im) = (next.real_part(), next.imag_part().unwrap());
        assert!(re.is_symmetric());
        for i in 0..3 {
            assert_eq!(im[(i, i)], 0.0);
            for j in 0..3 {
                assert_eq!(im[(i, j)], -im[(j, i)]);
            }
        }
        assert!(im.frobenius_norm() > 0.0);
    }

    #[test]
    fn one_step_simulation_equals_step() {
        let c = catalog(&ModelId::wishart(3.0), 2).unwrap();
        let cfg = MatrixSchemeConfig::new(0.01, 0.01);
        let noise = NoiseBundle::new(NoiseKind::Matrix, 2, 1, 0.01, 5, 1).unwrap();
        let x0 = SymmetricMatrixState::diagonal(&[1.0, 2.0]);
        let rec = simulate_matrix(&x0, &c, &noise, &cfg).unwrap();
        assert_eq!(rec.samples.len(), 2);
        let direct = step_matrix(&x0, &c, &noise.draw_increments(0).unwrap(), 0.01).unwrap();
        assert_eq!(rec.last().state, direct);
    }

    #[test]
    fn frozen_model_is_constant() {
        let c = catalog(&ModelId::custom("0", "1", "0"), 2).unwrap();
        let cfg = MatrixSchemeConfig::new(0.1, 1.0);
        let noise = NoiseBundle::new(NoiseKind::Matrix, 2, 10, 0.1, 5, 1).unwrap();
        let x0 = SymmetricMatrixState::from_symmetric(Matrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 2.0]])).unwrap();
        let rec = simulate_matrix(&x0, &c, &noise, &cfg).unwrap();
        assert_eq!(rec.samples.len(), 11);
        assert!(rec.samples.iter().all(|s| s.state == x0));
    }

    #[test]
    fn rejects_repeated_eigenvalues_and_kind_mismatch() {
        let c = catalog(&ModelId::wishart(3.0), 2).unwrap();
        let cfg = MatrixSchemeConfig::new(0.1, 1.0);
        let noise = NoiseBundle::new(NoiseKind::Matrix, 2, 10, 0.1, 5, 1).unwrap();
        assert!(simulate_matrix(&SymmetricMatrixState::identity(2), &c, &noise, &cfg).is_err());
        let spectral = NoiseBundle::new(NoiseKind::Spectral, 2, 10, 0.1, 5, 1).unwrap();
        assert!(simulate_matrix(&SymmetricMatrixState::diagonal(&[1.0, 2.0]), &c, &spectral, &cfg).is_err());
    }
}
