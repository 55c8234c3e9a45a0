//! Run configuration: TOML with `[model]`, `[init]`, `[scheme]` and `[run]`
//! tables (dotted keys such as `model.beta = 1` work as well). Unknown keys
//! are rejected, and every problem found is reported, not just the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use spectral_sde::models::CustomCoefficients;
use spectral_sde::spectral_sde::{DEFAULT_EPS_GAP, DEFAULT_EXPLOSION_BOUND, DEFAULT_MAX_HALVINGS};
use spectral_sde::{catalog, Matrix, ModelFamily, ModelId, SpectralCoefficients, SymmetricMatrixState, TruncationMode};
use toml::{Table, Value};

pub const MAX_DIMENSION: usize = 64;
pub const MAX_LEVELS: u32 = 12;
pub const MAX_HALVINGS_LIMIT: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SimulateMatrix,
    SimulateSpectral,
    VerifyCollision,
    VerifyConsistency,
    VerifyPositivity,
    VerifyConvergence,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::SimulateMatrix,
        Command::SimulateSpectral,
        Command::VerifyCollision,
        Command::VerifyConsistency,
        Command::VerifyPositivity,
        Command::VerifyConvergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateMatrix => "simulate-matrix",
            Command::SimulateSpectral => "simulate-spectral",
            Command::VerifyCollision => "verify-collision",
            Command::VerifyConsistency => "verify-consistency",
            Command::VerifyPositivity => "verify-positivity",
            Command::VerifyConvergence => "verify-convergence",
        }
    }

    pub fn is_verify(self) -> bool {
        !matches!(self, Command::SimulateMatrix | Command::SimulateSpectral)
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
            format!("unknown command `{s}` (expected one of {})", names.join(", "))
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBlock {
    pub family: ModelFamily,
    pub p: usize,
    /// Family parameters (`alpha`, `beta`, `nu`, `N`, `q`, `r`, `c`).
    pub params: BTreeMap<String, f64>,
    pub complex: bool,
    pub custom: Option<CustomCoefficients>,
}

impl ModelBlock {
    pub fn id(&self) -> ModelId {
        ModelId {
            family: self.family,
            params: self.params.clone(),
            complex: self.complex,
            custom: self.custom.clone(),
        }
    }

    pub fn coefficients(&self) -> Result<SpectralCoefficients, spectral_sde::ModelError> {
        catalog(&self.id(), self.p)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitBlock {
    pub eigenvalues: Option<Vec<f64>>,
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Imaginary part of a Hermitian initial matrix.
    pub matrix_im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeBlock {
    pub dt: f64,
    pub t_end: f64,
    pub eps_gap: f64,
    pub adaptive: bool,
    pub max_halvings: u32,
    pub truncation: TruncationMode,
    pub stride: u64,
    pub eigenvectors: bool,
    pub symmetrize: bool,
    pub levels: u32,
    pub explosion_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunBlock {
    pub paths: u64,
    pub seed: Option<u64>,
    pub workers: usize,
    pub out: PathBuf,
    pub min_collision_fraction: Option<f64>,
    pub dump_noise: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelBlock,
    pub init: InitBlock,
    pub scheme: SchemeBlock,
    pub run: RunBlock,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted key path, empty for syntax errors.
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.key.is_empty()) {
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (Some(l), false) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            (None, true) => write!(f, "{}", self.message),
            (None, false) => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.issues.len(), if self.issues.len() == 1 { "" } else { "s" })?;
        for issue in &self.issues {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn has_key(&self, key: &str) -> bool {
        self.issues.iter().any(|i| i.key == key)
    }
}

const MODEL_PARAMS: [&str; 7] = ["alpha", "beta", "nu", "N", "q", "r", "c"];
const TOP_KEYS: [&str; 5] = ["command", "model", "init", "scheme", "run"];
const MODEL_KEYS: [&str; 4] = ["model", "p", "complex", "g"];
const INIT_KEYS: [&str; 3] = ["eigenvalues", "matrix", "matrix_im"];
const SCHEME_KEYS: [&str; 11] = [
    "dt",
    "T",
    "eps_gap",
    "adaptive",
    "max_halvings",
    "truncation",
    "stride",
    "eigenvectors",
    "symmetrize",
    "levels",
    "explosion_bound",
];
const RUN_KEYS: [&str; 6] = ["paths", "seed", "workers", "out", "min_collision_fraction", "dump_noise"];

/// Best-effort line of `key` (`section.name`) in `text`.
fn locate(text: &str, key: &str) -> Option<usize> {
    let (section, name) = key.split_once('.').unwrap_or(("", key));
    let mut current = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            current = h.trim_end_matches(']').trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim().trim_matches('"');
        let full = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
        if full == key || (section.is_empty() && current.is_empty() && k == name) {
            return Some(n + 1);
        }
    }
    if !section.is_empty() {
        for (n, raw) in text.lines().enumerate() {
            if raw.trim().trim_start_matches('[').trim_end_matches(']').trim() == section {
                return Some(n + 1);
            }
        }
    }
    None
}

struct Checker<'a> {
    text: &'a str,
    issues: Vec<ConfigIssue>,
}

impl Checker<'_> {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue { key: key.to_string(), line: locate(self.text, key), message: message.into() });
    }

    fn table<'t>(&mut self, root: &'t Table, name: &str, allowed: &[&str]) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                for k in t.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.issue(&format!("{name}.{k}"), "unknown key");
                    }
                }
                Some(t)
            }
            Some(_) => {
                self.issue(name, "expected a table");
                None
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, section: &str, name: &str) -> Option<f64> {
        let key = format!("{section}.{name}");
        match t?.get(name)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.issue(&key, "expected a number");
                None
            }
        }
    }

    fn positive(&mut self, t: Option<&Table>, section: &str, name: &str, default: Option<f64>) -> f64 {
        let key = format!("{section}.{name}");
        match self.float(t, section, name).or(default) {
            Some(v) if v > 0.0 && v.is_finite() => v,
            Some(v) => {
                self.issue(&key, format!("must be positive and finite, got {v}"));
                f64::NAN
            }
            None => {
                self.issue(&key, "missing required key");
                f64::NAN
            }
        }
    }

    fn integer(&mut self, t: Option<&Table>, section: &str, name: &str, min: i64, max: i64) -> Option<i64> {
        let key = format!("{section}.{name}");
        match t?.get(name)? {
            Value::Integer(i) if (min..=max).contains(i) => Some(*i),
            Value::Integer(i) => {
                self.issue(&key, format!("must be between {min} and {max}, got {i}"));
                None
            }
            _ => {
                self.issue(&key, "expected an integer");
                None
            }
        }
    }

    fn boolean(&mut self, t: Option<&Table>, section: &str, name: &str, default: bool) -> bool {
        match t.and_then(|t| t.get(name)) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.issue(&format!("{section}.{name}"), "expected true or false");
                default
            }
        }
    }

    fn string<'t>(&mut self, t: Option<&'t Table>, section: &str, name: &str) -> Option<&'t str> {
        match t?.get(name)? {
            Value::String(s) => Some(s),
            _ => {
                self.issue(&format!("{section}.{name}"), "expected a string");
                None
            }
        }
    }

    fn vector(&mut self, v: &Value, key: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = v else {
            self.issue(key, "expected an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(f) if f.is_finite() => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.issue(key, "expected an array of finite numbers");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn matrix(&mut self, t: Option<&Table>, name: &str, p: usize) -> Option<Vec<Vec<f64>>> {
        let key = format!("init.{name}");
        let v = t?.get(name)?;
        let Value::Array(rows) = v else {
            self.issue(&key, "expected an array of rows");
            return None;
        };
        let mut out = Vec::new();
        for row in rows {
            out.push(self.vector(row, &key)?);
        }
        if p > 0 && (out.len() != p || out.iter().any(|r| r.len() != p)) {
            self.issue(&key, format!("expected a {p}x{p} matrix"));
            return None;
        }
        Some(out)
    }
}

fn model_param_key(name: &str) -> String {
    if MODEL_PARAMS.contains(&name) || ["g", "h", "b"].contains(&name) {
        format!("model.{name}")
    } else {
        "model".into()
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError {
            issues: vec![ConfigIssue { key: String::new(), line, message: e.message().trim().to_string() }],
        }
    })?;
    let mut c = Checker { text, issues: Vec::new() };
    for k in root.keys() {
        if !TOP_KEYS.contains(&k.as_str()) {
            c.issue(k, "unknown key");
        }
    }

    let command = match root.get("command") {
        None => Command::SimulateSpectral,
        Some(Value::String(s)) => s.parse().unwrap_or_else(|e: String| {
            c.issue("command", e);
            Command::SimulateSpectral
        }),
        Some(_) => {
            c.issue("command", "expected a string");
            Command::SimulateSpectral
        }
    };

    // [model]
    let mut model_keys: Vec<&str> = MODEL_KEYS.to_vec();
    model_keys.extend(MODEL_PARAMS);
    model_keys.extend(["h", "b"]);
    let mt = c.table(&root, "model", &model_keys);
    if mt.is_none() && !root.contains_key("model") {
        c.issue("model", "missing required table");
    }
    let family = match c.string(mt, "model", "model") {
        Some(name) => name.parse::<ModelFamily>().map_err(|e| c.issue("model.model", e.to_string())).ok(),
        None => {
            if mt.is_some() {
                c.issue("model.model", "missing required key");
            }
            None
        }
    };
    let p = match c.integer(mt, "model", "p", 1, MAX_DIMENSION as i64) {
        Some(p) => p as usize,
        None => {
            if mt.is_some_and(|t| !t.contains_key("p")) {
                c.issue("model.p", "missing required key");
            }
            0
        }
    };
    let mut params = BTreeMap::new();
    for name in MODEL_PARAMS {
        if let Some(v) = c.float(mt, "model", name) {
            if !v.is_finite() {
                c.issue(&format!("model.{name}"), "must be finite");
            }
            params.insert(name.to_string(), v);
        }
    }
    let complex = c.boolean(mt, "model", "complex", false);
    let exprs: Vec<Option<&str>> = ["g", "h", "b"].iter().map(|k| c.string(mt, "model", k)).collect();
    let custom = if exprs.iter().any(Option::is_some) {
        Some(CustomCoefficients {
            g: exprs[0].unwrap_or("").to_string(),
            h: exprs[1].unwrap_or("").to_string(),
            b: exprs[2].unwrap_or("").to_string(),
        })
    } else {
        None
    };
    let model = family.map(|family| ModelBlock { family, p, params, complex, custom });
    let mut coeff = None;
    if let Some(m) = &model {
        if m.family == ModelFamily::Custom {
            for (k, e) in ["g", "h", "b"].iter().zip(&exprs) {
                if e.is_none() {
                    c.issue(&format!("model.{k}"), "custom model needs g, h and b");
                }
            }
        }
        if p > 0 {
            match m.coefficients() {
                Ok(cf) => coeff = Some(cf),
                Err(spectral_sde::ModelError::InvalidParameter { name, reason }) => c.issue(&model_param_key(&name), reason),
                Err(spectral_sde::ModelError::Expression { position, message }) => {
                    c.issue("model", format!("coefficient expression, byte {position}: {message}"))
                }
                Err(e) => c.issue("model", e.to_string()),
            }
        }
        if matches!(command, Command::SimulateMatrix | Command::VerifyConsistency) && m.params.get("beta").is_some_and(|&b| b != 1.0) {
            c.issue("model.beta", format!("`{command}` needs beta = 1 (no matrix model otherwise)"));
        }
        if command == Command::VerifyPositivity && !m.family.has_positivity_theory() {
            c.issue("model.model", format!("`{command}` does not apply to model `{}`", m.family));
        }
    }

    // [scheme]
    let st = c.table(&root, "scheme", &SCHEME_KEYS);
    if st.is_none() && !root.contains_key("scheme") {
        c.issue("scheme", "missing required table");
    }
    let dt = c.positive(st, "scheme", "dt", None);
    let t_end = c.positive(st, "scheme", "T", None);
    if dt > t_end * (1.0 + 1e-9) {
        c.issue("scheme.dt", format!("dt = {dt} exceeds T = {t_end}"));
    }
    let eps_gap = c.positive(st, "scheme", "eps_gap", Some(DEFAULT_EPS_GAP));
    let adaptive = c.boolean(st, "scheme", "adaptive", true);
    let max_halvings =
        c.integer(st, "scheme", "max_halvings", 0, MAX_HALVINGS_LIMIT as i64).map_or(DEFAULT_MAX_HALVINGS, |v| v as u32);
    let truncation = match c.string(st, "scheme", "truncation") {
        None => TruncationMode::FullTruncation,
        Some(s) => TruncationMode::from_name(s).unwrap_or_else(|| {
            c.issue("scheme.truncation", format!("expected `full-truncation` or `reflect-reject`, got `{s}`"));
            TruncationMode::FullTruncation
        }),
    };
    let stride = c.integer(st, "scheme", "stride", 1, i64::MAX).map_or(1, |v| v as u64);
    let eigenvectors = c.boolean(st, "scheme", "eigenvectors", false);
    let symmetrize = c.boolean(st, "scheme", "symmetrize", true);
    let levels = c.integer(st, "scheme", "levels", 2, MAX_LEVELS as i64).map_or(4, |v| v as u32);
    let explosion_bound = c.positive(st, "scheme", "explosion_bound", Some(DEFAULT_EXPLOSION_BOUND));
    if eigenvectors {
        if let Some(cf) = &coeff {
            if cf.complex_mode || cf.beta != 1.0 {
                c.issue("scheme.eigenvectors", "eigenvector dynamics need a real model with beta = 1");
            }
        }
    }
    let scheme = SchemeBlock {
        dt,
        t_end,
        eps_gap,
        adaptive,
        max_halvings,
        truncation,
        stride,
        eigenvectors,
        symmetrize,
        levels,
        explosion_bound,
    };

    // [run]
    let rt = c.table(&root, "run", &RUN_KEYS);
    let paths = c.integer(rt, "run", "paths", 1, i64::MAX).map_or(1, |v| v as u64);
    let seed = match rt.and_then(|t| t.get("seed")) {
        None => None,
        Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
        Some(Value::String(s)) => s.parse::<u64>().map_err(|_| c.issue("run.seed", "expected an unsigned 64-bit integer")).ok(),
        Some(_) => {
            c.issue("run.seed", "expected a non-negative integer");
            None
        }
    };
    let workers = c.integer(rt, "run", "workers", 0, 4096).map_or(0, |v| v as usize);
    let out = c.string(rt, "run", "out").map_or_else(|| PathBuf::from("out"), PathBuf::from);
    let min_collision_fraction = c.float(rt, "run", "min_collision_fraction");
    if let Some(f) = min_collision_fraction {
        if !(0.0..1.0).contains(&f) {
            c.issue("run.min_collision_fraction", "must be in [0, 1)");
        }
    }
    let dump_noise = c.boolean(rt, "run", "dump_noise", false);
    let run = RunBlock { paths, seed, workers, out, min_collision_fraction, dump_noise };

    // [init]
    let it = c.table(&root, "init", &INIT_KEYS);
    let eigenvalues = it.and_then(|t| t.get("eigenvalues")).and_then(|v| c.vector(v, "init.eigenvalues"));
    let matrix = c.matrix(it, "matrix", p);
    let matrix_im = c.matrix(it, "matrix_im", p);
    if eigenvalues.is_some() && matrix.is_some() {
        c.issue("init.eigenvalues", "give either init.eigenvalues or init.matrix, not both");
    }
    if matrix_im.is_some() && matrix.is_none() {
        c.issue("init.matrix_im", "needs init.matrix");
    }
    if matrix_im.is_some() && !complex {
        c.issue("init.matrix_im", "only valid with model.complex = true");
    }
    let init = InitBlock { eigenvalues, matrix, matrix_im };
    if let (Some(cf), true) = (&coeff, p > 0) {
        if let Some(l) = &init.eigenvalues {
            if l.len() != p {
                c.issue("init.eigenvalues", format!("expected {p} values, got {}", l.len()));
            } else if l.windows(2).any(|w| !(w[1] - w[0] > eps_gap)) {
                c.issue("init.eigenvalues", format!("must be strictly ascending with gaps above eps_gap = {eps_gap}"));
            } else if let Some(v) = l.iter().find(|&&v| !cf.domain.contains(v)) {
                c.issue("init.eigenvalues", format!("{v} is outside [{}, {}]", cf.domain.lower, cf.domain.upper));
            }
        }
        if let Some(m) = &init.matrix {
            let re = Matrix::from_rows(m);
            if !re.is_symmetric() {
                c.issue("init.matrix", "must be symmetric");
            }
            if let Some(im) = &init.matrix_im {
                let im = Matrix::from_rows(im);
                if im.add(&im.transpose()).frobenius_norm() != 0.0 {
                    c.issue("init.matrix_im", "must be antisymmetric");
                }
            }
        }
    }

    match (c.issues.is_empty(), model) {
        (true, Some(model)) => Ok(RunConfig { command, model, init, scheme, run }),
        _ => {
            if c.issues.is_empty() {
                c.issue("model.model", "missing required key");
            }
            Err(ConfigError { issues: c.issues })
        }
    }
}

fn number(v: f64) -> Value {
    Value::Float(v)
}

fn matrix_value(m: &[Vec<f64>]) -> Value {
    Value::Array(m.iter().map(|r| Value::Array(r.iter().map(|&v| number(v)).collect())).collect())
}

/// Canonical TOML rendering; `parse_config(&serialize(c)) == c`.
pub fn serialize(config: &RunConfig) -> String {
    toml::to_string(&to_table(config)).expect("plain tables always serialize")
}

pub fn to_table(config: &RunConfig) -> Table {
    let mut root = Table::new();
    root.insert("command".into(), Value::String(config.command.name().into()));

    let m = &config.model;
    let mut model = Table::new();
    model.insert("model".into(), Value::String(m.family.name().into()));
    model.insert("p".into(), Value::Integer(m.p as i64));
    for (k, v) in &m.params {
        model.insert(k.clone(), number(*v));
    }
    model.insert("complex".into(), Value::Boolean(m.complex));
    if let Some(cc) = &m.custom {
        model.insert("g".into(), Value::String(cc.g.clone()));
        model.insert("h".into(), Value::String(cc.h.clone()));
        model.insert("b".into(), Value::String(cc.b.clone()));
    }
    root.insert("model".into(), Value::Table(model));

    let mut init = Table::new();
    if let Some(l) = &config.init.eigenvalues {
        init.insert("eigenvalues".into(), Value::Array(l.iter().map(|&v| number(v)).collect()));
    }
    if let Some(mx) = &config.init.matrix {
        init.insert("matrix".into(), matrix_value(mx));
    }
    if let Some(mx) = &config.init.matrix_im {
        init.insert("matrix_im".into(), matrix_value(mx));
    }
    if !init.is_empty() {
        root.insert("init".into(), Value::Table(init));
    }

    let s = &config.scheme;
    let mut scheme = Table::new();
    scheme.insert("dt".into(), number(s.dt));
    scheme.insert("T".into(), number(s.t_end));
    scheme.insert("eps_gap".into(), number(s.eps_gap));
    scheme.insert("adaptive".into(), Value::Boolean(s.adaptive));
    scheme.insert("max_halvings".into(), Value::Integer(s.max_halvings as i64));
    scheme.insert("truncation".into(), Value::String(s.truncation.name().into()));
    scheme.insert("stride".into(), Value::Integer(s.stride as i64));
    scheme.insert("eigenvectors".into(), Value::Boolean(s.eigenvectors));
    scheme.insert("symmetrize".into(), Value::Boolean(s.symmetrize));
    scheme.insert("levels".into(), Value::Integer(s.levels as i64));
    scheme.insert("explosion_bound".into(), number(s.explosion_bound));
    root.insert("scheme".into(), Value::Table(scheme));

    let r = &config.run;
    let mut run = Table::new();
    run.insert("paths".into(), Value::Integer(r.paths as i64));
    if let Some(seed) = r.seed {
        run.insert(
            "seed".into(),
            i64::try_from(seed).map_or_else(|_| Value::String(seed.to_string()), Value::Integer),
        );
    }
    run.insert("workers".into(), Value::Integer(r.workers as i64));
    run.insert("out".into(), Value::String(r.out.to_string_lossy().into_owned()));
    if let Some(f) = r.min_collision_fraction {
        run.insert("min_collision_fraction".into(), number(f));
    }
    run.insert("dump_noise".into(), Value::Boolean(r.dump_noise));
    root.insert("run".into(), Value::Table(run));
    root
}

impl RunConfig {
    /// Initial eigenvalues, from `init.eigenvalues`, the spectrum of
    /// `init.matrix`, or a default spread inside the model domain.
    pub fn initial_eigenvalues(&self) -> Result<Vec<f64>, spectral_sde::SdeError> {
        if let Some(l) = &self.init.eigenvalues {
            return Ok(l.clone());
        }
        if self.init.matrix.is_some() {
            return Ok(spectral_sde::linalg::eigenvalues(&self.initial_matrix()?, 1e-10)?);
        }
        let p = self.model.p;
        let coeff = self.model.coefficients()?;
        Ok(if coeff.domain.upper.is_finite() {
            (1..=p).map(|i| i as f64 / (p + 1) as f64).collect()
        } else {
            (1..=p).map(|i| i as f64).collect()
        })
    }

    /// Initial matrix: `init.matrix` (plus `init.matrix_im`) or the diagonal
    /// of the initial eigenvalues; Hermitian for complex models.
    pub fn initial_matrix(&self) -> Result<SymmetricMatrixState, spectral_sde::SdeError> {
        let complex = self.model.coefficients()?.complex_mode;
        let re = match &self.init.matrix {
            Some(m) => Matrix::from_rows(m),
            None => Matrix::diagonal(&self.initial_eigenvalues()?),
        };
        Ok(match (&self.init.matrix_im, complex) {
            (Some(im), _) => SymmetricMatrixState::hermitian(&re, &Matrix::from_rows(im))?,
            (None, true) => SymmetricMatrixState::hermitian_from_real(re)?,
            (None, false) => SymmetricMatrixState::from_symmetric(re)?,
        })
    }
}
