//! Special cases where the eigenvalue system reduces to something known:
//! one particle, β = 1 deformations, and the Hermitian doubling.

use spectral_sde::models::{catalog, eigen_drift, interaction_sums, ModelId};
use spectral_sde::noise::{Increments, NoiseBundle, NoiseKind};
use spectral_sde::NoiseError;
use spectral_sde::spectral_sde::{simulate_spectral, step_eigenvalues, SpectralSchemeConfig};
use spectral_sde::{simulate_matrix, IncrementSource, MatrixSchemeConfig, SymmetricMatrixState};

fn one_step(id: &ModelId, x: f64, dnu: f64, dt: f64) -> f64 {
    let coeff = catalog(id, 1).unwrap();
    step_eigenvalues(&[x], &coeff, &[dnu], dt).unwrap()[0]
}

#[test]
fn single_wishart_particle_is_besq() {
    let (alpha, x, dnu, dt) = (3.0, 0.7, 0.013, 1e-3);
    let expected = x + 2.0 * f64::sqrt(x) * dnu + alpha * dt;
    assert!((one_step(&ModelId::wishart(alpha), x, dnu, dt) - expected).abs() <= 1e-15);
}

#[test]
fn single_besq_particle_has_dimension_two_nu_plus_two() {
    let (nu, x, dnu, dt) = (-0.5, 1.3, -0.02, 1e-3);
    let expected = x + 2.0 * f64::sqrt(x) * dnu + 2.0 * (nu + 1.0) * dt;
    assert!((one_step(&ModelId::besq_particles(nu, 1), x, dnu, dt) - expected).abs() <= 1e-15);
}

#[test]
fn single_jacobi_particle_is_scalar_jacobi() {
    let (q, r, x, dnu, dt) = (3.0, 2.0, 0.4, 0.01, 1e-3);
    let expected = x + 2.0 * f64::sqrt(x * (1.0 - x)) * dnu + (q - (q + r) * x) * dt;
    assert!((one_step(&ModelId::jacobi(q, r), x, dnu, dt) - expected).abs() <= 1e-15);
}

#[test]
fn beta_one_deformations_equal_undeformed_models() {
    let lambda = [0.1, 0.35, 0.8];
    let pairs = [
        (ModelId::beta_wishart(3.0, 1.0), ModelId::wishart(3.0)),
        (ModelId::beta_jacobi(3.0, 4.0, 1.0), ModelId::jacobi(3.0, 4.0)),
        (ModelId::dyson(1.0), ModelId::new(spectral_sde::ModelFamily::Dyson, &[])),
    ];
    for (deformed, plain) in &pairs {
        let a = catalog(deformed, 3).unwrap();
        let b = catalog(plain, 3).unwrap();
        assert_eq!(eigen_drift(&a, &lambda).unwrap(), eigen_drift(&b, &lambda).unwrap());
        let cfg = SpectralSchemeConfig::new(1e-3, 0.2);
        let noise = NoiseBundle::new(NoiseKind::Spectral, 3, cfg.steps(), cfg.dt, 4, 0).unwrap();
        let x = simulate_spectral(&lambda, None, &a, &noise, &cfg).unwrap();
        let y = simulate_spectral(&lambda, None, &b, &noise, &cfg).unwrap();
        assert_eq!(x.samples, y.samples);
    }
}

#[test]
fn hermitian_mode_adds_one_interaction_sum() {
    let lambda = [-0.4, 0.3, 1.1, 2.0];
    for id in [ModelId::dyson(1.0), ModelId::wishart(5.0), ModelId::jacobi(6.0, 6.0)] {
        let lambda: Vec<f64> = if id.family == spectral_sde::ModelFamily::Jacobi {
            lambda.iter().map(|l| (l + 0.5) / 3.0).collect()
        } else {
            lambda.iter().map(|l| l + 0.5).collect()
        };
        let real = catalog(&id, 4).unwrap();
        let complex = catalog(&id.clone().with_complex(true), 4).unwrap();
        let s = interaction_sums(&real, &lambda).unwrap();
        assert_eq!(s, interaction_sums(&complex, &lambda).unwrap());
        let dr = eigen_drift(&real, &lambda).unwrap();
        let dc = eigen_drift(&complex, &lambda).unwrap();
        for i in 0..4 {
            let diff = dc[i] - dr[i];
            if id.family == spectral_sde::ModelFamily::Dyson {
                // b = 0: 2S − S is exact
                assert_eq!(diff, s[i]);
            } else {
                assert!((diff - s[i]).abs() <= 4.0 * f64::EPSILON * (dc[i].abs() + dr[i].abs()));
            }
        }
    }
}

/// Spectral increments whose `dν₁` is the `dB₁₁` entry of a 1×1 matrix path.
struct FromMatrix(NoiseBundle);

impl IncrementSource for FromMatrix {
    fn kind(&self) -> NoiseKind {
        NoiseKind::Spectral
    }
    fn dim(&self) -> usize {
        1
    }
    fn steps(&self) -> u64 {
        self.0.steps
    }
    fn dt(&self) -> f64 {
        self.0.dt
    }
    fn increment(&self, step: u64) -> Result<Increments, NoiseError> {
        Increments::new(NoiseKind::Spectral, 1, self.0.draw_increments(step)?.values().to_vec())
    }
    fn split(&self, _: &Increments, _: u32, _: u128) -> (Increments, Increments) {
        unreachable!("single-particle runs never split")
    }
    fn max_split_depth(&self) -> u32 {
        64
    }
}

#[test]
fn one_by_one_matrix_and_eigenvalue_paths_coincide() {
    let models = [
        (ModelId::generalized_wishart(2.0), 1.0),
        (ModelId::wishart(4.0), 1.0),
        (ModelId::jacobi(4.0, 3.0), 0.4),
        (ModelId::custom("1 + 0.1 * x * x", "sqrt(1 + abs(x))", "-x"), 0.2),
    ];
    for (id, x0) in models {
        let coeff = catalog(&id, 1).unwrap();
        let mcfg = MatrixSchemeConfig::new(1e-3, 0.5);
        let mut scfg = SpectralSchemeConfig::new(1e-3, 0.5);
        scfg.adaptive = false;
        for path in 0..20 {
            let bundle = NoiseBundle::new(NoiseKind::Matrix, 1, mcfg.steps(), mcfg.dt, 12, path).unwrap();
            let m = simulate_matrix(&SymmetricMatrixState::diagonal(&[x0]), &coeff, &bundle, &mcfg).unwrap();
            let s = simulate_spectral(&[x0], None, &coeff, &FromMatrix(bundle), &scfg).unwrap();
            if s.diagnostics.truncations > 0 || m.events.iter().any(|e| e.kind == spectral_sde::EventKind::Boundary) {
                continue;
            }
            assert_eq!(m.samples.len(), s.samples.len());
            for (a, b) in m.samples.iter().zip(&s.samples) {
                assert_eq!(a.t, b.t);
                let (x, l) = (a.state.get(0, 0), b.eigenvalues[0]);
                assert!((x - l).abs() <= 1e-12 * (1.0 + x.abs()), "{id:?} t = {}: {x} vs {l}", a.t);
            }
        }
    }
}
