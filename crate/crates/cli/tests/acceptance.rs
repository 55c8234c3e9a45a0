//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 even when a criterion fails so the workspace test run stays usable;
//! set `ACCEPTANCE_STRICT=1` to turn any failure into a non-zero exit.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_sde::linalg::{eigendecompose, Matrix, SymmetricMatrixState};
use spectral_sde::models::{catalog, eigen_drift, interaction_sums, kernel_g, ModelId};
use spectral_sde::noise::{Increments, NoiseBundle, NoiseKind};
use spectral_sde::spectral_sde::{build_da, simulate_spectral, step_eigenvalues, SpectralSchemeConfig};
use spectral_sde::verify::{lyapunov_drift_components, lyapunov_u};
use spectral_sde::ExperimentReport;
use spectral_sde_cli::{parse_config, run, Report};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(checks: &[(bool, String)]) -> Outcome {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.0).map(|c| c.1.as_str()).collect();
    let detail = if failed.is_empty() {
        checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; ")
    } else {
        format!("failed: {}", failed.join("; "))
    };
    Outcome { passed: failed.is_empty(), detail }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn ordered(rng: &mut ChaCha8Rng, p: usize, hi: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..p).map(|_| hi * uniform(rng)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] > 1e-9) {
            return v;
        }
    }
}

fn catalog_models(p: usize) -> Vec<ModelId> {
    vec![
        ModelId::dyson(1.0),
        ModelId::dyson(0.5),
        ModelId::wishart(3.0),
        ModelId::generalized_wishart(1.5),
        ModelId::wishart_ou(3.0, -1.0),
        ModelId::besq_particles(-0.5, p),
        ModelId::jacobi(3.0, 3.0),
        ModelId::beta_wishart(2.0, 1.7),
        ModelId::beta_jacobi(3.0, 4.0, 0.8),
        ModelId::laguerre_complex(4.0),
        ModelId::custom("1 + 0.1 * x * x", "sqrt(1 + abs(x))", "-x"),
    ]
}

fn exact_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut a3_max: f64 = 0.0;
    for n in 0..10_000 {
        let p = 2 + n % 7;
        for id in catalog_models(p) {
            let coeff = catalog(&id, p).unwrap();
            let hi = if coeff.domain.upper.is_finite() { 1.0 } else { 4.0 };
            let lambda = ordered(&mut rng, p, hi);
            let sums = interaction_sums(&coeff, &lambda).unwrap();
            let mut scale = 0.0;
            for i in 0..p {
                for k in (0..p).filter(|&k| k != i) {
                    scale += (kernel_g(&coeff, lambda[i], lambda[k]) / (lambda[i] - lambda[k])).abs();
                }
            }
            worst = worst.max(sums.iter().sum::<f64>().abs() / scale);
            if p == 2 {
                a3_max = a3_max.max(lyapunov_drift_components(&lambda, &coeff).unwrap().a3.abs());
            }
        }
    }

    let u = lyapunov_u(&[1.0, 3.0, 4.0]).unwrap();
    let u_err = (u + 6.0f64.ln()).abs();

    let coeff = catalog(&ModelId::wishart(3.0), 6).unwrap();
    let mut skew = true;
    for _ in 0..1000 {
        let lambda = ordered(&mut rng, 6, 4.0);
        let inc = Increments::new(NoiseKind::Spectral, 6, (0..21).map(|_| uniform(&mut rng) - 0.5).collect()).unwrap();
        let da = build_da(&lambda, &coeff, &inc, 1e-3, 1e-12).unwrap().da;
        for i in 0..6 {
            skew &= da[(i, i)] == 0.0;
            for j in (0..6).filter(|&j| j != i) {
                skew &= da[(i, j)].to_bits() == (-da[(j, i)]).to_bits();
            }
        }
    }

    let mut recon: f64 = 0.0;
    for p in 1..=8 {
        for _ in 0..200 {
            let a = Matrix::from_fn(p, p, |_, _| 2.0 * uniform(&mut rng) - 1.0);
            let x = a.add(&a.transpose()).scale(0.5);
            let s = eigendecompose(&SymmetricMatrixState::from_symmetric(x.clone()).unwrap(), 1e-12).unwrap();
            let mut err: f64 = 0.0;
            for i in 0..p {
                for j in 0..p {
                    let r: f64 = (0..p).map(|k| s.eigenvectors[(i, k)] * s.eigenvalues[k] * s.eigenvectors[(j, k)]).sum();
                    err += (r - x[(i, j)]).powi(2);
                }
            }
            recon = recon.max(err.sqrt() / x.frobenius_norm());
        }
    }

    outcome(&[
        (worst <= 1e-10, format!("cancellation {worst:.1e} <= 1e-10 over 10^4 tuples x 11 models")),
        (a3_max == 0.0, format!("p=2 a3 max {a3_max:e}")),
        (u_err < 1e-15, format!("U(1,3,4) = -log 6 within {u_err:.1e}")),
        (skew, "dA skew-symmetric bitwise".to_string()),
        (recon <= 1e-9, format!("reconstruction {recon:.1e} <= 1e-9 for p <= 8")),
    ])
}

fn reductions() -> Outcome {
    let step = |id: ModelId, x: f64, w: f64, dt: f64| step_eigenvalues(&[x], &catalog(&id, 1).unwrap(), &[w], dt).unwrap()[0];
    let (x, w, dt) = (0.6, 0.02, 1e-3);
    let wishart = (step(ModelId::wishart(3.0), x, w, dt) - (x + 2.0 * x.sqrt() * w + 3.0 * dt)).abs();
    let besq = (step(ModelId::besq_particles(-0.5, 1), x, w, dt) - (x + 2.0 * x.sqrt() * w + 2.0 * (-0.5 + 1.0) * dt)).abs();
    let jacobi = (step(ModelId::jacobi(3.0, 2.0), x, w, dt) - (x + 2.0 * (x * (1.0 - x)).sqrt() * w + (3.0 - 5.0 * x) * dt)).abs();

    let lambda = [0.1, 0.35, 0.8];
    let mut beta_one = true;
    for (a, b) in [
        (ModelId::beta_wishart(3.0, 1.0), ModelId::wishart(3.0)),
        (ModelId::beta_jacobi(3.0, 4.0, 1.0), ModelId::jacobi(3.0, 4.0)),
    ] {
        let (a, b) = (catalog(&a, 3).unwrap(), catalog(&b, 3).unwrap());
        let cfg = SpectralSchemeConfig::new(1e-3, 0.5);
        let noise = NoiseBundle::new(NoiseKind::Spectral, 3, cfg.steps(), cfg.dt, 4, 0).unwrap();
        beta_one &= eigen_drift(&a, &lambda).unwrap() == eigen_drift(&b, &lambda).unwrap();
        beta_one &= simulate_spectral(&lambda, None, &a, &noise, &cfg).unwrap().samples
            == simulate_spectral(&lambda, None, &b, &noise, &cfg).unwrap().samples;
    }

    let mut complex_exact = true;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let l = ordered(&mut rng, 5, 4.0);
        let real = catalog(&ModelId::dyson(1.0), 5).unwrap();
        let cplx = catalog(&ModelId::dyson(1.0).with_complex(true), 5).unwrap();
        let s = interaction_sums(&real, &l).unwrap();
        complex_exact &= s == interaction_sums(&cplx, &l).unwrap();
        let (dr, dc) = (eigen_drift(&real, &l).unwrap(), eigen_drift(&cplx, &l).unwrap());
        complex_exact &= (0..5).all(|i| dc[i] - dr[i] == s[i]);
    }

    outcome(&[
        (wishart <= 1e-15, format!("p=1 wishart step error {wishart:e}")),
        (besq <= 1e-15, format!("p=1 besq-particles step error {besq:e}")),
        (jacobi <= 1e-15, format!("p=1 jacobi step error {jacobi:e}")),
        (beta_one, "beta=1 systems bitwise equal (drift and paths)".to_string()),
        (complex_exact, "complex drift - real drift == interaction sum, bitwise".to_string()),
    ])
}

fn experiment(dir: &Path, name: &str, text: &str, seed: u64) -> ExperimentReport {
    let out = dir.join(name);
    let text = text.replace("[run]\n", &format!("[run]\nout = \"{}\"\n", out.display()));
    match run(&parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}")), seed).unwrap() {
        Report::Experiment(r) => r,
        Report::Simulation(_) => unreachable!(),
    }
}

fn check(r: &ExperimentReport, criterion: &str, label: &str) -> (bool, String) {
    let v = r.verdict(criterion).unwrap_or_else(|| panic!("no verdict {criterion} in {}", r.experiment));
    (v.passed == Some(true), format!("{label}: {criterion} value {:.4} vs {}", v.value, v.threshold))
}

const WISHART_CONSISTENCY: &str = "command = \"verify-consistency\"
[model]
model = \"wishart\"
alpha = 3
p = 2
[init]
matrix = [[1.0, 0.0], [0.0, 2.0]]
[scheme]
dt = 1e-3
T = 0.5
max_halvings = 64
[run]
paths = 10000";

fn trace_and_consistency(dir: &Path) -> (Outcome, Outcome) {
    let w = experiment(dir, "wishart-consistency", WISHART_CONSISTENCY, 3);
    let ou = experiment(
        dir,
        "wishart-ou-consistency",
        &WISHART_CONSISTENCY.replace("\"wishart\"", "\"wishart-ou\"").replace("alpha = 3", "alpha = 3\nc = -1.0"),
        3,
    );
    let j = experiment(
        dir,
        "jacobi-consistency",
        &WISHART_CONSISTENCY
            .replace("\"wishart\"", "\"jacobi\"")
            .replace("alpha = 3", "q = 3\nr = 3")
            .replace("[[1.0, 0.0], [0.0, 2.0]]", "[[0.3, 0.0], [0.0, 0.7]]"),
        3,
    );
    let trace = outcome(&[
        check(&w, "trace-matrix", "wishart"),
        check(&w, "trace-spectral", "wishart"),
        check(&ou, "trace-matrix", "wishart-ou"),
        check(&ou, "trace-spectral", "wishart-ou"),
    ]);
    let consistency = outcome(&[check(&w, "moments-agree", "wishart"), check(&j, "moments-agree", "jacobi")]);
    (trace, consistency)
}

const DYSON_COLLISION: &str = "command = \"verify-collision\"
[model]
model = \"dyson\"
beta = 1.5
p = 2
[init]
eigenvalues = [0.0, 0.1]
[scheme]
dt = 1e-4
T = 1.0
max_halvings = 64
[run]
paths = 200";

fn collisions(dir: &Path) -> Outcome {
    let high = experiment(dir, "dyson-1.5", DYSON_COLLISION, 7);
    let wishart = experiment(
        dir,
        "wishart-3",
        &DYSON_COLLISION
            .replace("\"dyson\"", "\"wishart\"")
            .replace("beta = 1.5", "alpha = 3")
            .replace("p = 2", "p = 3")
            .replace("[0.0, 0.1]", "[1.0, 2.0, 3.0]"),
        7,
    );
    let low = experiment(
        dir,
        "dyson-0.5",
        &DYSON_COLLISION
            .replace("beta = 1.5", "beta = 0.5")
            .replace("max_halvings = 64", "max_halvings = 64\neps_gap = 1e-6")
            .replace("paths = 200", "paths = 200\nmin_collision_fraction = 0.2"),
        7,
    );
    outcome(&[
        check(&high, "no-collisions", "dyson beta=1.5"),
        check(&wishart, "no-collisions", "wishart alpha=3 p=3"),
        check(&low, "collision-fraction", "dyson beta=0.5 eps 1e-6"),
    ])
}

const BESQ_POSITIVITY: &str = "command = \"verify-positivity\"
[model]
model = \"besq-particles\"
nu = -0.5
N = 3
p = 3
[scheme]
dt = 1e-4
T = 1.0
max_halvings = 64
[run]
paths = 200";

fn boundaries(dir: &Path) -> Outcome {
    let besq = experiment(dir, "besq-positivity", BESQ_POSITIVITY, 11);
    let jacobi = experiment(
        dir,
        "jacobi-positivity",
        &BESQ_POSITIVITY.replace("\"besq-particles\"", "\"jacobi\"").replace("nu = -0.5\nN = 3", "q = 3\nr = 3"),
        11,
    );
    outcome(&[check(&besq, "domain-preserved", "besq nu=-0.5 N=3"), check(&jacobi, "domain-preserved", "jacobi q=r=3 p=3")])
}

const CONVERGENCE: &str = "command = \"verify-convergence\"
[model]
model = \"wishart\"
alpha = 3
p = 2
[init]
eigenvalues = [1.0, 2.0]
[scheme]
dt = 0.01
T = 0.25
levels = 4
max_halvings = 40
[run]
paths = 512";

fn convergence(dir: &Path) -> Outcome {
    let r = experiment(dir, "convergence", CONVERGENCE, 5);
    let rows = r.convergence.iter().filter(|c| c.rms_difference.is_some()).count();
    outcome(&[
        check(&r, "monotone-decrease", "wishart p=2 levels 0-3"),
        check(&r, "determinism", "rerun of level 0"),
        (rows == 3, format!("{rows} RMS rows")),
    ])
}

fn reproducibility(dir: &Path) -> Outcome {
    let small = |t: &str| t.replace("paths = 10000", "paths = 300").replace("paths = 512", "paths = 64").replace("paths = 200", "paths = 50");
    let configs = [
        ("collision", small(DYSON_COLLISION)),
        ("consistency", small(WISHART_CONSISTENCY)),
        ("positivity", small(BESQ_POSITIVITY)),
        ("convergence", small(CONVERGENCE)),
    ];
    let mut checks = Vec::new();
    for (name, text) in configs {
        let a = dir.join(format!("repro-{name}-a"));
        let b = dir.join(format!("repro-{name}-b"));
        experiment(&a, name, &text, 99);
        experiment(&b, name, &text, 99);
        let same = ["report.json", "report.txt"]
            .iter()
            .all(|f| fs::read(a.join(name).join(f)).unwrap() == fs::read(b.join(name).join(f)).unwrap());
        checks.push((same, format!("{name} reports byte-identical")));
    }
    outcome(&checks)
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut results = Vec::new();
    let mut timed = |n: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let line = format!(
            "criterion {n} [{}] {name} ({:.1}s): {}",
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        println!("{line}");
        results.push(o.passed);
    };
    timed(1, "exact identities", &mut exact_identities);
    timed(2, "reductions", &mut reductions);
    let mut pair = None;
    timed(3, "trace-drift identity", &mut || {
        let (t, c) = trace_and_consistency(dir.path());
        pair = Some(c);
        t
    });
    let mut consistency = pair.take();
    timed(4, "matrix/spectral consistency (same runs as 3)", &mut || consistency.take().unwrap());
    timed(5, "collision thresholds", &mut || collisions(dir.path()));
    timed(6, "boundary preservation", &mut || boundaries(dir.path()));
    timed(7, "strong-convergence surrogate", &mut || convergence(dir.path()));
    timed(8, "reproducibility", &mut || reproducibility(dir.path()));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if strict && passed != results.len() {
        std::process::exit(1);
    }
}
