use std::fs;
use std::path::Path;
use std::process::Command as Process;

use proptest::prelude::*;
use spectral_sde::{ModelFamily, TruncationMode};
use spectral_sde_cli::config::{InitBlock, ModelBlock, RunBlock, SchemeBlock};
use spectral_sde_cli::{parse_config, run, serialize, Command, RunConfig, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_spectral-sde"))
}

fn config_text(command: &str, out: &Path, extra_run: &str) -> String {
    format!(
        "command = \"{command}\"\n[model]\nmodel = \"dyson\"\nbeta = 1.5\np = 2\n[init]\neigenvalues = [0.0, 0.1]\n\
         [scheme]\ndt = 1e-3\nT = 0.2\nmax_halvings = 40\n[run]\npaths = 8\nout = \"{}\"\n{extra_run}",
        out.display()
    )
}

#[test]
fn simulate_spectral_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_text("simulate-spectral", dir.path(), "seed = 1\n")
        .replace("max_halvings = 40", "adaptive = false")
        .replace("paths = 8", "paths = 1")
        .replace("[0.0, 0.1]", "[-1.0, 1.0]");
    let config = parse_config(&text).unwrap();
    let report = run(&config, 1).unwrap();
    assert_eq!(report.exit_code(), EXIT_PASS);
    let csv = fs::read_to_string(dir.path().join("spectral_0000.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,lambda_1,lambda_2,mingap,lyapunovU");
    assert_eq!(lines.count(), (0.2f64 / 1e-3).floor() as usize + 1);
    assert!(dir.path().join("events_0000.jsonl").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn simulate_matrix_writes_upper_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_text("simulate-matrix", dir.path(), "seed = 1\ndump_noise = true\n")
        .replace("beta = 1.5", "beta = 1")
        .replace("paths = 8", "paths = 2")
        .replace("[0.0, 0.1]", "[-1.0, 1.0]");
    run(&parse_config(&text).unwrap(), 3).unwrap();
    let csv = fs::read_to_string(dir.path().join("matrix_0001.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x_11,x_12,x_22");
    assert_eq!(csv.lines().count(), 202);
    let dump = fs::read(dir.path().join("noise_0000.bin")).unwrap();
    let (header, steps) = spectral_sde::noise::read_dump(dump.as_slice()).unwrap();
    assert_eq!((header.seed, steps.len()), (3, 200));
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for command in ["verify-collision", "simulate-spectral"] {
        for dir in [&a, &b] {
            run(&parse_config(&config_text(command, dir.path(), "")).unwrap(), 42).unwrap();
        }
        for entry in fs::read_dir(a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            if name == "manifest.json" {
                continue;
            }
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
        }
        let strip = |p: &Path| {
            let mut v: serde_json::Value = serde_json::from_slice(&fs::read(p.join("manifest.json")).unwrap()).unwrap();
            let m = v.as_object_mut().unwrap();
            m.remove("timestamp");
            m.remove("wall_time_seconds");
            m["config"]["run"].as_object_mut().unwrap().remove("out");
            v
        };
        assert_eq!(strip(a.path()), strip(b.path()));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");

    fs::write(&cfg, config_text("verify-collision", &dir.path().join("pass"), "seed = 42\n")).unwrap();
    let status = binary().arg("--config").arg(&cfg).arg("--quiet").status().unwrap();
    assert_eq!(status.code(), Some(EXIT_PASS));

    fs::write(&cfg, config_text("verify-collision", &dir.path().join("fail"), "min_collision_fraction = 0.9\n")).unwrap();
    let status = binary().arg("--config").arg(&cfg).arg("--quiet").status().unwrap();
    assert_eq!(status.code(), Some(EXIT_FAIL));

    fs::write(&cfg, config_text("verify-collision", dir.path(), "").replace("p = 2", "p = 2\ngamma = 1")).unwrap();
    let out = binary().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.gamma"));

    let out = binary().arg("--config").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
}

#[test]
fn seed_sources_in_priority_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let seed_of = |out: &Path| -> u64 {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        v["seed"].as_u64().unwrap()
    };
    let out = dir.path().join("o");
    fs::write(&cfg, config_text("simulate-spectral", &out, "")).unwrap();
    binary().arg("--config").arg(&cfg).arg("--quiet").env_remove("SPECTRAL_SDE_SEED").status().unwrap();
    assert_eq!(seed_of(&out), 0);
    binary().arg("--config").arg(&cfg).arg("--quiet").env("SPECTRAL_SDE_SEED", "5").status().unwrap();
    assert_eq!(seed_of(&out), 5);
    fs::write(&cfg, config_text("simulate-spectral", &out, "seed = 6\n")).unwrap();
    binary().arg("--config").arg(&cfg).arg("--quiet").env("SPECTRAL_SDE_SEED", "5").status().unwrap();
    assert_eq!(seed_of(&out), 6);
    let status = binary()
        .args(["--seed", "7", "--paths", "2", "--quiet", "verify-collision", "--config"])
        .arg(&cfg)
        .env("SPECTRAL_SDE_SEED", "5")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_PASS));
    assert_eq!(seed_of(&out), 7);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "collision");
    assert_eq!(report["paths"], 2);
}

fn model_strategy() -> impl Strategy<Value = ModelBlock> {
    let pick = prop_oneof![
        (0.5f64..3.0).prop_map(|b| (ModelFamily::Dyson, vec![("beta", b)])),
        (2.0f64..10.0).prop_map(|a| (ModelFamily::Wishart, vec![("alpha", a)])),
        (2.0f64..10.0, -2.0f64..2.0).prop_map(|(a, c)| (ModelFamily::WishartOu, vec![("alpha", a), ("c", c)])),
        (3.0f64..8.0, 3.0f64..8.0).prop_map(|(q, r)| (ModelFamily::Jacobi, vec![("q", q), ("r", r)])),
    ];
    (pick, 1usize..5, any::<bool>()).prop_map(|((family, params), p, complex)| ModelBlock {
        family,
        p,
        params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        complex,
        custom: None,
    })
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (
        model_strategy(),
        prop::sample::select(vec![Command::SimulateSpectral, Command::VerifyCollision, Command::VerifyConvergence]),
        (1e-5f64..1e-2, 1.0f64..4.0, 1e-14f64..1e-6, any::<bool>(), 0u32..60, 1u64..50, 2u32..8),
        (1u64..10_000, prop::option::of(any::<u64>()), 0usize..16, prop::option::of(0.0f64..0.9), any::<bool>()),
        any::<bool>(),
    )
        .prop_map(|(model, command, s, r, reflect)| RunConfig {
            command,
            init: InitBlock::default(),
            scheme: SchemeBlock {
                dt: s.0,
                t_end: s.1,
                eps_gap: s.2,
                adaptive: s.3,
                max_halvings: s.4,
                truncation: if reflect { TruncationMode::ReflectReject } else { TruncationMode::FullTruncation },
                stride: s.5,
                eigenvectors: false,
                symmetrize: true,
                levels: s.6,
                explosion_bound: 1e12,
            },
            run: RunBlock {
                paths: r.0,
                seed: r.1,
                workers: r.2,
                out: format!("out-{}", r.0).into(),
                min_collision_fraction: r.3,
                dump_noise: r.4,
            },
            model,
        })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(config in config_strategy()) {
        let text = serialize(&config);
        let parsed = parse_config(&text);
        prop_assert!(parsed.is_ok(), "{text}\n{}", parsed.unwrap_err());
        prop_assert_eq!(parsed.unwrap(), config);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 5);
}
