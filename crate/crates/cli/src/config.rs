//! Run configuration: flat `key=value` text or a JSON object with the same keys.

use std::fmt;
use std::path::PathBuf;

use dyadic_core::diagnostics::LyapunovParams;
use dyadic_core::integrator::{EventSpec, IntegratorConfig, Method, NormThreshold};
use dyadic_core::models::{ModelKind, ModelSpec, Nonlinearity, ShellState};
use dyadic_core::steady::{fixed_point, FamilyParam, TopClosure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "model",
    "lambda",
    "theta",
    "delta",
    "shells",
    "f0",
    "initial",
    "t_end",
    "method",
    "tol",
    "abs_tol",
    "rel_tol",
    "dt",
    "dt_max",
    "sample_every",
    "diagnostics",
    "lyapunov",
    "events",
    "output_dir",
    "seed",
    "channel",
    "scan",
    "depth",
    "a0_sign",
    "closure",
    "newton_tol",
    "max_iter",
];

/// Where a `key=value` pair came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Json,
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Json => write!(f, "JSON"),
            Origin::Flag => write!(f, "flag"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub origin: Origin,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub origin: Option<Origin>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.origin {
            Some(origin) => write!(f, "{origin}, key `{}`: {}", self.key, self.message),
            None => write!(f, "key `{}`: {}", self.key, self.message),
        }
    }
}

/// All problems found in one configuration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError(pub Vec<FieldError>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("\n"))
    }
}

impl ConfigError {
    fn single(origin: Option<Origin>, key: &str, message: impl Into<String>) -> Self {
        ConfigError(vec![FieldError {
            origin,
            key: key.into(),
            message: message.into(),
        }])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Theta(f64),
    Delta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingAmplitude {
    Value(f64),
    /// `λ^{−θ/3}`, the forcing under which the steady profile is `λ_j^{−θ/3}`.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// Explicit amplitudes; `b` empty means zero.
    List {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// `a_j = b_j = λ_j^{−α}` (`b = 0` for Euler).
    Power(f64),
    FixedPoint {
        a0: f64,
        b0: f64,
    },
    /// A fixed point plus uniform noise in `[−σ, σ)` drawn from ChaCha8.
    /// `point = None` means `(A₀, B₀) = (1, 0)`; `seed = None` uses the run seed.
    FixedPointNoise {
        point: Option<(f64, f64)>,
        sigma: f64,
        seed: Option<u64>,
    },
    /// Uniform amplitudes in `(0, 1]` drawn from ChaCha8 with the run seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Rk45,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Velocity,
    Magnetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Events {
    pub positivity: bool,
    pub norm: Option<NormThreshold>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub lambda: f64,
    pub exponent: Exponent,
    /// Index `k` of the last shell.
    pub shells: usize,
    pub f0: ForcingAmplitude,
    pub initial: Initial,
    pub t_end: f64,
    pub method: MethodKind,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// RK4 step.
    pub dt: Option<f64>,
    pub dt_max: f64,
    /// `None` means `t_end / 500`.
    pub sample_every: Option<f64>,
    pub diagnostics: Vec<f64>,
    pub lyapunov: Option<LyapunovParams>,
    pub events: Events,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub channel: ChannelKind,
    /// `(from, to, step)`; `None` uses the channel default.
    pub scan: Option<(f64, f64, f64)>,
    pub depth: usize,
    pub a0_sign: f64,
    pub closure: TopClosure,
    pub newton_tol: f64,
    pub max_iter: usize,
}

impl RunConfig {
    /// Defaults for every key except `model`.
    pub fn with_model(model: ModelKind) -> Self {
        RunConfig {
            model,
            lambda: 2.0,
            exponent: Exponent::Theta(1.0),
            shells: 20,
            f0: ForcingAmplitude::Value(0.0),
            initial: Initial::Power(2.0 / 3.0),
            t_end: 1.0,
            method: MethodKind::Rk45,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            dt: None,
            dt_max: 0.1,
            sample_every: None,
            diagnostics: Vec::new(),
            lyapunov: None,
            events: Events {
                positivity: false,
                norm: None,
            },
            output_dir: PathBuf::from("out"),
            seed: 0,
            channel: ChannelKind::Velocity,
            scan: None,
            depth: 200,
            a0_sign: 1.0,
            closure: TopClosure::Geometric,
            newton_tol: 1e-12,
            max_iter: 100,
        }
    }

    pub fn theta(&self) -> f64 {
        match self.exponent {
            Exponent::Theta(t) => t,
            Exponent::Delta(d) => (5.0 - d) / 2.0,
        }
    }

    pub fn f0(&self) -> f64 {
        match self.f0 {
            ForcingAmplitude::Value(v) => v,
            ForcingAmplitude::Auto => self.lambda.powf(-self.theta() / 3.0),
        }
    }

    pub fn sample_every(&self) -> f64 {
        self.sample_every.unwrap_or(self.t_end / 500.0)
    }

    pub fn scan_range(&self) -> (f64, f64, f64) {
        self.scan.unwrap_or(match self.channel {
            ChannelKind::Velocity => (0.0, 10.0, 0.01),
            ChannelKind::Magnetic => (-2.0, 2.0, 0.1),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        let nonlinearity = match self.exponent {
            Exponent::Theta(t) => Nonlinearity::Theta(t),
            Exponent::Delta(d) => Nonlinearity::Delta(d),
        };
        let f0 = self.f0();
        let forcing: &[f64] = if f0 == 0.0 { &[] } else { &[f0] };
        ModelSpec::new(self.model, self.lambda, nonlinearity, self.shells, forcing)
            .expect("validated at parse time")
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let method = match self.method {
            MethodKind::Rk4 => Method::Rk4Fixed {
                dt: self.dt.expect("validated at parse time"),
            },
            MethodKind::Rk45 => Method::Rk45Adaptive {
                abs_tol: self.abs_tol,
                rel_tol: self.rel_tol,
                dt_min: 1e-14,
                dt_max: self.dt_max,
            },
        };
        IntegratorConfig {
            method,
            t_end: self.t_end,
            sample_every: self.sample_every(),
        }
    }

    pub fn event_spec(&self) -> EventSpec {
        EventSpec {
            positivity_watch: self.events.positivity,
            norm_threshold: self.events.norm,
        }
    }

    /// Fixed point named by a `fixedpoint` initial condition.
    pub fn fixed_point_amplitudes(&self) -> Option<(f64, f64)> {
        match self.initial {
            Initial::FixedPoint { a0, b0 } => Some((a0, b0)),
            Initial::FixedPointNoise { point, .. } => Some(point.unwrap_or((1.0, 0.0))),
            _ => None,
        }
    }

    pub fn initial_state(&self) -> ShellState {
        let spec = self.spec();
        let n = spec.len();
        let magnetic = self.model.has_magnetic_field();
        match &self.initial {
            Initial::List { a, b } => {
                let b = if b.is_empty() {
                    vec![0.0; n]
                } else {
                    b.clone()
                };
                ShellState::new(a.clone(), b)
            }
            Initial::Power(alpha) => {
                let a: Vec<f64> = (0..n).map(|j| spec.wavenumber(j).powf(-alpha)).collect();
                let b = if magnetic { a.clone() } else { vec![0.0; n] };
                ShellState::new(a, b)
            }
            Initial::FixedPoint { a0, b0 } => self.fixed_point_state(*a0, *b0),
            Initial::FixedPointNoise { point, sigma, seed } => {
                let (a0, b0) = point.unwrap_or((1.0, 0.0));
                let mut state = self.fixed_point_state(a0, b0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(self.seed));
                for x in state.a.iter_mut() {
                    *x += sigma * rng.gen_range(-1.0..1.0);
                }
                if magnetic {
                    for x in state.b.iter_mut() {
                        *x += sigma * rng.gen_range(-1.0..1.0);
                    }
                }
                state
            }
            Initial::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut draw = || 1.0 - rng.gen::<f64>();
                let a: Vec<f64> = (0..n).map(|_| draw()).collect();
                let b: Vec<f64> = if magnetic {
                    (0..n).map(|_| draw()).collect()
                } else {
                    vec![0.0; n]
                };
                ShellState::new(a, b)
            }
        }
    }

    fn fixed_point_state(&self, a0: f64, b0: f64) -> ShellState {
        fixed_point(
            self.model,
            self.lambda,
            self.theta(),
            self.f0(),
            self.shells,
            FamilyParam::Amplitudes { a0, b0 },
        )
        .expect("validated at parse time")
        .state()
    }

    /// Canonical `key=value` text; `parse_config` maps it back to `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("model", self.model.name().into());
        put("lambda", self.lambda.to_string());
        match self.exponent {
            Exponent::Theta(t) => put("theta", t.to_string()),
            Exponent::Delta(d) => put("delta", d.to_string()),
        }
        put("shells", self.shells.to_string());
        put(
            "f0",
            match self.f0 {
                ForcingAmplitude::Value(v) => v.to_string(),
                ForcingAmplitude::Auto => "auto".into(),
            },
        );
        put("initial", format_initial(&self.initial));
        put("t_end", self.t_end.to_string());
        put(
            "method",
            match self.method {
                MethodKind::Rk45 => "rk45",
                MethodKind::Rk4 => "rk4",
            }
            .into(),
        );
        put("abs_tol", self.abs_tol.to_string());
        put("rel_tol", self.rel_tol.to_string());
        if let Some(dt) = self.dt {
            put("dt", dt.to_string());
        }
        put("dt_max", self.dt_max.to_string());
        if let Some(s) = self.sample_every {
            put("sample_every", s.to_string());
        }
        put("diagnostics", join(&self.diagnostics));
        if let Some(p) = self.lyapunov {
            put("lyapunov", join(&[p.s, p.gamma, p.c0]));
        }
        put("events", format_events(&self.events));
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        put(
            "channel",
            match self.channel {
                ChannelKind::Velocity => "velocity",
                ChannelKind::Magnetic => "magnetic",
            }
            .into(),
        );
        if let Some((from, to, step)) = self.scan {
            put("scan", join(&[from, to, step]));
        }
        put("depth", self.depth.to_string());
        put("a0_sign", self.a0_sign.to_string());
        put(
            "closure",
            match self.closure {
                TopClosure::Geometric => "geometric",
                TopClosure::Truncated => "truncated",
            }
            .into(),
        );
        put("newton_tol", self.newton_tol.to_string());
        put("max_iter", self.max_iter.to_string());
        out
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn format_initial(initial: &Initial) -> String {
    match initial {
        Initial::List { a, b } if b.is_empty() => format!("list:{}", join(a)),
        Initial::List { a, b } => format!("list:{}/{}", join(a), join(b)),
        Initial::Power(alpha) => format!("power:{alpha}"),
        Initial::FixedPoint { a0, b0 } => format!("fixedpoint:{a0},{b0}"),
        Initial::FixedPointNoise { point, sigma, seed } => match (point, seed) {
            (Some((a0, b0)), Some(seed)) => format!("fixedpoint+noise:{a0},{b0},{sigma},{seed}"),
            (Some((a0, b0)), None) => format!("fixedpoint+noise:{a0},{b0},{sigma}"),
            (None, Some(seed)) => format!("fixedpoint+noise:{sigma},{seed}"),
            (None, None) => format!("fixedpoint+noise:{sigma}"),
        },
        Initial::Random => "random".into(),
    }
}

fn format_events(events: &Events) -> String {
    let mut parts = Vec::new();
    if events.positivity {
        parts.push("positivity".to_string());
    }
    if let Some(n) = events.norm {
        parts.push(format!("norm:{},{}", n.s, n.limit));
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(";")
    }
}

/// Splits `key=value` text into entries; `#` starts a comment.
pub fn entries_from_text(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = Origin::Line(i + 1);
        match line.split_once('=') {
            Some((k, v)) => entries.push(Entry {
                origin,
                key: k.trim().into(),
                value: v.trim().into(),
            }),
            None => errors.push(FieldError {
                origin: Some(origin),
                key: line.into(),
                message: "expected key=value".into(),
            }),
        }
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(ConfigError(errors))
    }
}

/// Converts a JSON object into entries. Arrays of numbers are joined with
/// commas, arrays of strings with semicolons.
pub fn entries_from_json(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let map: serde_json::Map<String, Value> = serde_json::from_str(text).map_err(|e| {
        ConfigError::single(
            Some(Origin::Line(e.line())),
            "<json>",
            format!("invalid JSON object: {e}"),
        )
    })?;
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (key, value) in map {
        match json_scalar(&value) {
            Ok(value) => entries.push(Entry {
                origin: Origin::Json,
                key,
                value,
            }),
            Err(message) => errors.push(FieldError {
                origin: Some(Origin::Json),
                key,
                message,
            }),
        }
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(ConfigError(errors))
    }
}

fn json_scalar(value: &Value) -> Result<String, String> {
    match value {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(json_scalar)
                .collect::<Result<Vec<_>, _>>()?;
            let sep = if items.iter().all(Value::is_number) {
                ","
            } else {
                ";"
            };
            Ok(parts.join(sep))
        }
        Value::Null => Err("null is not a value".into()),
        Value::Object(_) => Err("nested objects are not supported".into()),
    }
}

/// Entries from either format, chosen by whether the text starts with `{`.
pub fn entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    if text.trim_start().starts_with('{') {
        entries_from_json(text)
    } else {
        entries_from_text(text)
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    build(&entries(text)?, &[])
}

/// Validates `base` (from a file) followed by `overrides` (from flags, which
/// win over the file).
pub fn build(base: &[Entry], overrides: &[Entry]) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    for (i, e) in base.iter().enumerate() {
        if base[..i].iter().any(|p| p.key == e.key) {
            errors.push(FieldError {
                origin: Some(e.origin),
                key: e.key.clone(),
                message: "duplicate key".into(),
            });
        }
    }
    let all: Vec<&Entry> = base.iter().chain(overrides).collect();
    let mut model = None;
    let mut cfg = RunConfig::with_model(ModelKind::Euler);
    let mut exponent_keys: Vec<&Entry> = Vec::new();
    for e in &all {
        let fail = |message: String| FieldError {
            origin: Some(e.origin),
            key: e.key.clone(),
            message,
        };
        let result: Result<(), String> = (|| {
            match e.key.as_str() {
                "model" => model = Some(e.value.parse::<ModelKind>()?),
                "lambda" => {
                    let v = real(&e.value)?;
                    if v <= 1.0 {
                        return Err(format!("lambda must satisfy lambda > 1, got {v}"));
                    }
                    cfg.lambda = v;
                }
                "theta" => {
                    let v = real(&e.value)?;
                    if v <= 0.0 {
                        return Err(format!("theta must be > 0, got {v}"));
                    }
                    cfg.exponent = Exponent::Theta(v);
                    exponent_keys.push(e);
                }
                "delta" => {
                    let v = real(&e.value)?;
                    if !(0.0..=3.0).contains(&v) {
                        return Err(format!("delta must lie in [0, 3], got {v}"));
                    }
                    cfg.exponent = Exponent::Delta(v);
                    exponent_keys.push(e);
                }
                "shells" => {
                    cfg.shells = e
                        .value
                        .parse()
                        .map_err(|_| format!("expected a shell index, got '{}'", e.value))?
                }
                "f0" => {
                    cfg.f0 = if e.value == "auto" {
                        ForcingAmplitude::Auto
                    } else {
                        let v = real(&e.value)?;
                        if v < 0.0 {
                            return Err(format!("f0 must be >= 0 or 'auto', got {v}"));
                        }
                        ForcingAmplitude::Value(v)
                    }
                }
                "initial" => cfg.initial = parse_initial(&e.value)?,
                "t_end" => cfg.t_end = positive(&e.value, "t_end")?,
                "method" => {
                    cfg.method = match e.value.as_str() {
                        "rk45" => MethodKind::Rk45,
                        "rk4" => MethodKind::Rk4,
                        other => {
                            return Err(format!("unknown method '{other}' (expected rk45 or rk4)"))
                        }
                    }
                }
                "tol" => {
                    let v = positive(&e.value, "tol")?;
                    cfg.abs_tol = v;
                    cfg.rel_tol = v;
                }
                "abs_tol" => cfg.abs_tol = positive(&e.value, "abs_tol")?,
                "rel_tol" => cfg.rel_tol = positive(&e.value, "rel_tol")?,
                "dt" => cfg.dt = Some(positive(&e.value, "dt")?),
                "dt_max" => cfg.dt_max = positive(&e.value, "dt_max")?,
                "sample_every" => cfg.sample_every = Some(positive(&e.value, "sample_every")?),
                "diagnostics" => cfg.diagnostics = reals(&e.value)?,
                "lyapunov" => {
                    let v = reals(&e.value)?;
                    let [s, gamma, c0] = v[..] else {
                        return Err("expected s,gamma,c0".into());
                    };
                    if gamma <= 0.0 || !(c0 > 0.0 && c0 < 1.0) {
                        return Err(format!(
                            "need gamma > 0 and 0 < c0 < 1, got gamma={gamma}, c0={c0}"
                        ));
                    }
                    cfg.lyapunov = Some(LyapunovParams { s, gamma, c0 });
                }
                "events" => cfg.events = parse_events(&e.value)?,
                "output_dir" => {
                    if e.value.is_empty() {
                        return Err("output_dir must not be empty".into());
                    }
                    cfg.output_dir = PathBuf::from(&e.value);
                }
                "seed" => {
                    cfg.seed = e
                        .value
                        .parse()
                        .map_err(|_| format!("expected an unsigned integer, got '{}'", e.value))?
                }
                "channel" => {
                    cfg.channel = match e.value.as_str() {
                        "velocity" => ChannelKind::Velocity,
                        "magnetic" => ChannelKind::Magnetic,
                        other => {
                            return Err(format!(
                                "unknown channel '{other}' (expected velocity or magnetic)"
                            ))
                        }
                    }
                }
                "scan" => {
                    let v = reals(&e.value)?;
                    let [from, to, step] = v[..] else {
                        return Err("expected from,to,step".into());
                    };
                    if !(step > 0.0 && to >= from) {
                        return Err("need step > 0 and to >= from".into());
                    }
                    cfg.scan = Some((from, to, step));
                }
                "depth" => {
                    cfg.depth = e
                        .value
                        .parse()
                        .map_err(|_| format!("expected an integer, got '{}'", e.value))?;
                    if cfg.depth < 2 {
                        return Err("depth must be >= 2".into());
                    }
                }
                "a0_sign" => {
                    let v = real(&e.value)?;
                    if v != 1.0 && v != -1.0 {
                        return Err(format!("a0_sign must be 1 or -1, got {v}"));
                    }
                    cfg.a0_sign = v;
                }
                "closure" => {
                    cfg.closure = match e.value.as_str() {
                        "geometric" => TopClosure::Geometric,
                        "truncated" => TopClosure::Truncated,
                        other => {
                            return Err(format!(
                                "unknown closure '{other}' (expected geometric or truncated)"
                            ))
                        }
                    }
                }
                "newton_tol" => cfg.newton_tol = positive(&e.value, "newton_tol")?,
                "max_iter" => {
                    cfg.max_iter = e
                        .value
                        .parse()
                        .map_err(|_| format!("expected an integer, got '{}'", e.value))?
                }
                other => {
                    return Err(format!("unknown key '{other}'"));
                }
            }
            Ok(())
        })();
        if let Err(message) = result {
            errors.push(fail(message));
        }
    }
    let from_base: Vec<&&Entry> = exponent_keys
        .iter()
        .filter(|e| e.origin != Origin::Flag)
        .collect();
    if from_base.iter().any(|e| e.key == "theta") && from_base.iter().any(|e| e.key == "delta") {
        let e = from_base[1];
        errors.push(FieldError {
            origin: Some(e.origin),
            key: e.key.clone(),
            message: "give either theta or delta, not both".into(),
        });
    }
    match model {
        Some(m) => cfg.model = m,
        None => errors.push(FieldError {
            origin: None,
            key: "model".into(),
            message: "required key is missing".into(),
        }),
    }
    if errors.is_empty() {
        if let Err(e) = cross_check(&cfg, &all) {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError(errors))
    }
}

/// Constraints between fields.
fn cross_check(cfg: &RunConfig, all: &[&Entry]) -> Result<(), FieldError> {
    let origin_of = |key: &str| all.iter().rev().find(|e| e.key == key).map(|e| e.origin);
    let err = |key: &str, message: String| FieldError {
        origin: origin_of(key),
        key: key.into(),
        message,
    };
    let n = cfg.shells + 1;
    let nonlinearity = match cfg.exponent {
        Exponent::Theta(t) => Nonlinearity::Theta(t),
        Exponent::Delta(d) => Nonlinearity::Delta(d),
    };
    ModelSpec::new(cfg.model, cfg.lambda, nonlinearity, cfg.shells, &[cfg.f0()])
        .map_err(|e| err("shells", e.to_string()))?;
    if cfg.channel == ChannelKind::Magnetic && !cfg.model.has_magnetic_field() {
        return Err(err(
            "channel",
            "the euler model has no magnetic channel".into(),
        ));
    }
    if cfg.method == MethodKind::Rk4 && cfg.dt.is_none() {
        return Err(err("method", "rk4 needs dt".into()));
    }
    if let Some(s) = cfg.sample_every {
        if s > cfg.t_end {
            return Err(err(
                "sample_every",
                format!("must not exceed t_end = {}", cfg.t_end),
            ));
        }
    }
    match &cfg.initial {
        Initial::List { a, b } => {
            if a.len() != n || !(b.is_empty() || b.len() == n) {
                return Err(err(
                    "initial",
                    format!("lists need {n} values (shells 0..={})", cfg.shells),
                ));
            }
            if cfg.model == ModelKind::Euler && b.iter().any(|&x| x != 0.0) {
                return Err(err(
                    "initial",
                    "the euler model has no magnetic amplitudes".into(),
                ));
            }
        }
        Initial::FixedPoint { .. } | Initial::FixedPointNoise { .. } => {
            let (a0, b0) = cfg.fixed_point_amplitudes().expect("fixed point initial");
            if cfg.f0() <= 0.0 {
                return Err(err("initial", "fixed points need f0 > 0".into()));
            }
            fixed_point(
                cfg.model,
                cfg.lambda,
                cfg.theta(),
                cfg.f0(),
                cfg.shells,
                FamilyParam::Amplitudes { a0, b0 },
            )
            .map_err(|e| err("initial", e.to_string()))?;
        }
        Initial::Power(_) | Initial::Random => {}
    }
    Ok(())
}

fn real(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("expected a number, got '{s}'"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got '{s}'"))
    }
}

fn positive(s: &str, name: &str) -> Result<f64, String> {
    let v = real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{name} must be > 0, got {v}"))
    }
}

fn reals(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(real).collect()
}

fn parse_initial(s: &str) -> Result<Initial, String> {
    let (form, args) = s.split_once(':').unwrap_or((s, ""));
    match form {
        "random" if args.is_empty() => Ok(Initial::Random),
        "list" => {
            let (a, b) = args.split_once('/').unwrap_or((args, ""));
            Ok(Initial::List { a: reals(a)?, b: reals(b)? })
        }
        "power" => Ok(Initial::Power(real(args)?)),
        "fixedpoint" => match reals(args)?[..] {
            [a0, b0] => Ok(Initial::FixedPoint { a0, b0 }),
            _ => Err("expected fixedpoint:A0,B0".into()),
        },
        "fixedpoint+noise" => {
            let parts: Vec<&str> = args.split(',').collect();
            let seed = |p: &str| p.trim().parse::<u64>().map_err(|_| format!("expected an unsigned seed, got '{p}'"));
            let sigma = |p: &str| {
                let v = real(p)?;
                if v >= 0.0 {
                    Ok(v)
                } else {
                    Err(format!("noise amplitude must be >= 0, got {v}"))
                }
            };
            match parts[..] {
                [s] => Ok(Initial::FixedPointNoise { point: None, sigma: sigma(s)?, seed: None }),
                [s, k] => Ok(Initial::FixedPointNoise { point: None, sigma: sigma(s)?, seed: Some(seed(k)?) }),
                [a0, b0, s] => Ok(Initial::FixedPointNoise { point: Some((real(a0)?, real(b0)?)), sigma: sigma(s)?, seed: None }),
                [a0, b0, s, k] => Ok(Initial::FixedPointNoise {
                    point: Some((real(a0)?, real(b0)?)),
                    sigma: sigma(s)?,
                    seed: Some(seed(k)?),
                }),
                _ => Err("expected fixedpoint+noise:[A0,B0,]sigma[,seed]".into()),
            }
        }
        _ => Err(format!(
            "unknown initial condition '{s}' (expected list:..., power:alpha, fixedpoint:A0,B0, fixedpoint+noise:..., random)"
        )),
    }
}

fn parse_events(s: &str) -> Result<Events, String> {
    let mut events = Events {
        positivity: false,
        norm: None,
    };
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once(':') {
            None if part == "positivity" => events.positivity = true,
            None if part == "none" => {}
            Some(("norm", args)) => match reals(args)?[..] {
                [s, limit] if limit > 0.0 => events.norm = Some(NormThreshold { s, limit }),
                _ => return Err("expected norm:s,limit with limit > 0".into()),
            },
            _ => {
                return Err(format!(
                    "unknown event '{part}' (expected positivity, norm:s,limit or none)"
                ))
            }
        }
    }
    Ok(events)
}
