//! Explicit Runge–Kutta time stepping for the truncated shell systems.
//!
//! Two methods are provided: the classical fixed-step RK4 and the
//! Dormand–Prince 5(4) embedded pair (FSAL, local extrapolation) with an
//! I-controller (safety 0.9, step ratio clamped to `[0.2, 5]`). The error
//! test is `‖err‖_∞ ≤ abs_tol + rel_tol · ‖y‖_∞`.
//!
//! Events are bracketed by bisection on the length of a single step taken
//! from the last accepted state, so the reported time is accurate to the
//! bracketing tolerance without any dense output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::sobolev_norm_sq;
use crate::models::{ModelError, ModelSpec, ShellState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite value produced at component {component} (t = {t})")]
    NonFinite { component: usize, t: f64 },
    #[error("invalid integrator configuration: {0}")]
    Config(String),
}

/// A first-order autonomous ODE system `y' = f(y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], dy: &mut [f64]);
}

/// A truncated shell model viewed as an ODE on `[a_0..a_k, b_0..b_k]`.
pub struct ShellSystem<'a> {
    spec: &'a ModelSpec,
}

impl<'a> ShellSystem<'a> {
    pub fn new(spec: &'a ModelSpec) -> Self {
        Self { spec }
    }
}

impl OdeSystem for ShellSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.spec.len()
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.spec.len();
        let (a, b) = y.split_at(n);
        let (da, db) = dy.split_at_mut(n);
        self.spec.rhs_into(a, b, da, db);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed {
        dt: f64,
    },
    Rk45Adaptive {
        abs_tol: f64,
        rel_tol: f64,
        dt_min: f64,
        dt_max: f64,
    },
}

impl Method {
    pub fn adaptive(tol: f64) -> Self {
        Method::Rk45Adaptive {
            abs_tol: tol,
            rel_tol: tol,
            dt_min: 1e-14,
            dt_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_end: f64,
    pub sample_every: f64,
}

impl IntegratorConfig {
    pub fn validate(&self, t_start: f64) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::Config(m.to_string()));
        if !(self.t_end.is_finite() && self.t_end > t_start) {
            return bad("t_end must be finite and greater than the start time");
        }
        if !(self.sample_every.is_finite() && self.sample_every > 0.0) {
            return bad("sample_every must be > 0");
        }
        match self.method {
            Method::Rk4Fixed { dt } => {
                if !(dt.is_finite() && dt > 0.0) {
                    return bad("dt must be > 0");
                }
            }
            Method::Rk45Adaptive {
                abs_tol,
                rel_tol,
                dt_min,
                dt_max,
            } => {
                if !(abs_tol > 0.0 && rel_tol > 0.0) {
                    return bad("tolerances must be > 0");
                }
                if !(dt_min > 0.0 && dt_min <= dt_max && dt_max.is_finite()) {
                    return bad("need 0 < dt_min <= dt_max");
                }
            }
        }
        Ok(())
    }

    /// Resolution used when bracketing events.
    pub fn event_resolution(&self) -> f64 {
        match self.method {
            Method::Rk4Fixed { dt } => dt * 1e-9,
            Method::Rk45Adaptive { dt_min, .. } => dt_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormThreshold {
    /// Sobolev index of the monitored norm.
    pub s: f64,
    /// Stop once `‖a‖_s² + ‖b‖_s² ≥ limit`.
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventSpec {
    pub positivity_watch: bool,
    pub norm_threshold: Option<NormThreshold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PositivityLoss,
    NormThreshold,
    NonFinite,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TimeEnd,
    NormThreshold,
    NonFinite,
    StepUnderflow,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::TimeEnd => "time_end",
            Termination::NormThreshold => "norm_threshold",
            Termination::NonFinite => "non_finite",
            Termination::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<ShellState>,
    pub events: Vec<Event>,
    pub terminated_by: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &ShellState {
        self.samples.last().expect("trajectories are never empty")
    }

    pub fn first_event(&self, kind: EventKind) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == kind)
    }
}

/// Scratch space for the classical RK4 step.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    #[allow(clippy::needless_range_loop)]
    pub fn step<S: OdeSystem>(&mut self, sys: &S, y: &[f64], h: f64, out: &mut [f64]) {
        let n = y.len();
        sys.eval(y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        sys.eval(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        sys.eval(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        sys.eval(&self.tmp, &mut self.k4);
        for i in 0..n {
            out[i] = y[i] + h / 6.0 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Scratch space for a Dormand–Prince step.
pub struct Dopri5 {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    /// Whether `k[0]` holds `f(y)` for the state passed to the next attempt.
    fsal: bool,
}

impl Dopri5 {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            fsal: false,
        }
    }

    /// Forgets the cached derivative (call after the state changes externally).
    pub fn reset(&mut self) {
        self.fsal = false;
    }

    /// One trial step of size `h`; writes the 5th-order solution to `out`
    /// and returns the max-norm of the embedded error estimate.
    pub fn attempt<S: OdeSystem>(&mut self, sys: &S, y: &[f64], h: f64, out: &mut [f64]) -> f64 {
        let n = y.len();
        if !self.fsal {
            sys.eval(y, &mut self.k[0]);
            self.fsal = true;
        }
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.eval(tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.eval(tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.eval(tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.eval(tmp, k5);
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.eval(tmp, k6);
        for i in 0..n {
            out[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        sys.eval(out, k7);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err = err.max(e.abs());
        }
        // A NaN anywhere must fail the error test.
        if out.iter().any(|v| !v.is_finite()) || !err.is_finite() {
            err = f64::INFINITY;
        }
        err
    }

    /// Marks the last attempt as accepted: its final stage `f(out)` becomes
    /// the first stage of the next step.
    pub fn accept(&mut self) {
        self.k.swap(0, 6);
    }
}

fn max_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// A single classical RK4 step on a shell state.
pub fn step_fixed(
    spec: &ModelSpec,
    state: &ShellState,
    dt: f64,
) -> Result<ShellState, IntegratorError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(IntegratorError::Config("dt must be > 0".into()));
    }
    spec.check_state(state)?;
    let sys = ShellSystem::new(spec);
    let y = state.to_flat();
    let mut out = vec![0.0; y.len()];
    Rk4::new(y.len()).step(&sys, &y, dt, &mut out);
    if let Some(component) = out.iter().position(|v| !v.is_finite()) {
        return Err(IntegratorError::NonFinite {
            component: component % spec.len(),
            t: state.t + dt,
        });
    }
    Ok(ShellState::from_flat(&out, state.t + dt))
}

/// Stepper shared by the event-aware shell integration and the plain
/// propagation of arbitrary systems.
enum Stepper {
    Fixed {
        rk: Rk4,
        dt: f64,
    },
    Adaptive {
        dp: Dopri5,
        abs_tol: f64,
        rel_tol: f64,
        dt_min: f64,
        dt_max: f64,
        h: f64,
    },
}

enum StepResult {
    /// Step of the given length accepted; new state in the output buffer.
    Accepted(f64),
    NonFinite,
    Underflow,
}

impl Stepper {
    fn new(method: Method, dim: usize, span: f64) -> Self {
        match method {
            Method::Rk4Fixed { dt } => Stepper::Fixed {
                rk: Rk4::new(dim),
                dt,
            },
            Method::Rk45Adaptive {
                abs_tol,
                rel_tol,
                dt_min,
                dt_max,
            } => Stepper::Adaptive {
                dp: Dopri5::new(dim),
                abs_tol,
                rel_tol,
                dt_min,
                dt_max,
                h: (span * 1e-3).clamp(dt_min, dt_max),
            },
        }
    }

    /// Advances `y` by at most `limit`, writing the new state to `out`.
    fn advance<S: OdeSystem>(
        &mut self,
        sys: &S,
        y: &[f64],
        limit: f64,
        out: &mut [f64],
        rejected: &mut usize,
    ) -> StepResult {
        match self {
            Stepper::Fixed { rk, dt } => {
                let h = dt.min(limit);
                rk.step(sys, y, h, out);
                if out.iter().any(|v| !v.is_finite()) {
                    StepResult::NonFinite
                } else {
                    StepResult::Accepted(h)
                }
            }
            Stepper::Adaptive {
                dp,
                abs_tol,
                rel_tol,
                dt_min,
                dt_max,
                h,
            } => loop {
                // A step clipped to reach a sample time may legitimately be
                // shorter than dt_min.
                let clipped = *h >= limit;
                let trial = if clipped { limit } else { *h };
                let err = dp.attempt(sys, y, trial, out);
                let scale = *abs_tol + *rel_tol * max_abs(y).max(max_abs(out));
                let ratio = err / scale;
                let factor = if ratio == 0.0 {
                    5.0
                } else {
                    (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
                };
                if ratio <= 1.0 {
                    dp.accept();
                    if !clipped {
                        *h = (trial * factor).min(*dt_max);
                    } else {
                        *h = h.max(trial * factor).min(*dt_max);
                    }
                    return StepResult::Accepted(trial);
                }
                *rejected += 1;
                *h = trial * factor.min(1.0);
                if *h < *dt_min {
                    return StepResult::Underflow;
                }
            },
        }
    }

    /// Single uncontrolled step of length `h` (event bracketing).
    fn probe<S: OdeSystem>(&mut self, sys: &S, y: &[f64], h: f64, out: &mut [f64]) {
        match self {
            Stepper::Fixed { rk, .. } => rk.step(sys, y, h, out),
            Stepper::Adaptive { dp, .. } => {
                dp.reset();
                dp.attempt(sys, y, h, out);
            }
        }
    }

    fn after_probe(&mut self) {
        if let Stepper::Adaptive { dp, .. } = self {
            dp.reset();
        }
    }
}

/// Sampled `(t, y)` pairs.
pub type Samples = Vec<(f64, Vec<f64>)>;

/// Propagates an arbitrary system from `y0` at `t0`, returning samples at
/// `t0 + m·sample_every` (and at `t_end`). Stops early with the partial
/// samples on step underflow or non-finite values.
pub fn propagate<S: OdeSystem>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    config: &IntegratorConfig,
) -> Result<(Samples, Termination), IntegratorError> {
    config.validate(t0)?;
    let mut stepper = Stepper::new(config.method, y0.len(), config.t_end - t0);
    let mut y = y0.to_vec();
    let mut out = vec![0.0; y.len()];
    let mut t = t0;
    let mut samples = vec![(t, y.clone())];
    let mut m = 1u64;
    let mut rejected = 0;
    loop {
        let target = sample_time(t0, config, m);
        if t >= config.t_end {
            return Ok((samples, Termination::TimeEnd));
        }
        match stepper.advance(sys, &y, target - t, &mut out, &mut rejected) {
            StepResult::Accepted(h) => {
                std::mem::swap(&mut y, &mut out);
                t = if h >= target - t { target } else { t + h };
                if t == target {
                    samples.push((t, y.clone()));
                    m += 1;
                }
            }
            StepResult::NonFinite => return Ok((samples, Termination::NonFinite)),
            StepResult::Underflow => return Ok((samples, Termination::StepUnderflow)),
        }
    }
}

fn sample_time(t0: f64, config: &IntegratorConfig, m: u64) -> f64 {
    (t0 + m as f64 * config.sample_every).min(config.t_end)
}

/// Integrates a shell model with sampling and event detection.
pub fn integrate(
    spec: &ModelSpec,
    state: &ShellState,
    config: &IntegratorConfig,
    events: &EventSpec,
) -> Result<Trajectory, IntegratorError> {
    spec.check_state(state)?;
    config.validate(state.t)?;
    if let Some(nt) = events.norm_threshold {
        if !(nt.limit > 0.0 && nt.s.is_finite()) {
            return Err(IntegratorError::Config(
                "norm threshold limit must be > 0".into(),
            ));
        }
    }
    let sys = ShellSystem::new(spec);
    let n = spec.len();
    let t0 = state.t;
    let mut stepper = Stepper::new(config.method, 2 * n, config.t_end - t0);
    let resolution = config.event_resolution();

    let magnetic = spec.kind().has_magnetic_field();
    let min_component = |y: &[f64]| -> f64 {
        let upto = if magnetic { 2 * n } else { n };
        y[..upto].iter().fold(f64::INFINITY, |m, &v| m.min(v))
    };
    let norm_excess = |y: &[f64]| -> f64 {
        let nt = events.norm_threshold.expect("only called with a threshold");
        let (a, b) = y.split_at(n);
        sobolev_norm_sq(a, nt.s, spec.lambda()) + sobolev_norm_sq(b, nt.s, spec.lambda()) - nt.limit
    };

    let mut y = state.to_flat();
    let mut out = vec![0.0; y.len()];
    let mut probe = vec![0.0; y.len()];
    let mut t = t0;
    let mut samples = vec![state.clone()];
    let mut found = Vec::new();
    let mut watching_positivity = events.positivity_watch;
    let mut accepted = 0;
    let mut rejected = 0;

    if watching_positivity && min_component(&y) <= 0.0 {
        found.push(Event {
            t,
            kind: EventKind::PositivityLoss,
            detail: describe_min(&y, n, magnetic),
        });
        watching_positivity = false;
    }
    if events.norm_threshold.is_some() && norm_excess(&y) >= 0.0 {
        found.push(Event {
            t,
            kind: EventKind::NormThreshold,
            detail: "threshold already exceeded by the initial state".into(),
        });
        return Ok(Trajectory {
            samples,
            events: found,
            terminated_by: Termination::NormThreshold,
            accepted_steps: 0,
            rejected_steps: 0,
        });
    }

    let mut m = 1u64;
    let terminated_by = loop {
        if t >= config.t_end {
            break Termination::TimeEnd;
        }
        let target = sample_time(t0, config, m);
        let h = match stepper.advance(&sys, &y, target - t, &mut out, &mut rejected) {
            StepResult::Accepted(h) => h,
            StepResult::NonFinite => {
                found.push(Event {
                    t,
                    kind: EventKind::NonFinite,
                    detail: "non-finite value in the next step".into(),
                });
                samples.push(ShellState::from_flat(&y, t));
                break Termination::NonFinite;
            }
            StepResult::Underflow => {
                found.push(Event {
                    t,
                    kind: EventKind::StepUnderflow,
                    detail: "adaptive step fell below dt_min".into(),
                });
                if samples.last().map(|s| s.t) != Some(t) {
                    samples.push(ShellState::from_flat(&y, t));
                }
                break Termination::StepUnderflow;
            }
        };
        accepted += 1;
        let t_new = if h >= target - t { target } else { t + h };

        if watching_positivity && min_component(&out) <= 0.0 {
            let tau = bisect(0.0, h, resolution, |s| {
                stepper.probe(&sys, &y, s, &mut probe);
                min_component(&probe) <= 0.0
            });
            stepper.probe(&sys, &y, tau, &mut probe);
            stepper.after_probe();
            found.push(Event {
                t: t + tau,
                kind: EventKind::PositivityLoss,
                detail: describe_min(&probe, n, magnetic),
            });
            watching_positivity = false;
        }
        if events.norm_threshold.is_some() && norm_excess(&out) >= 0.0 {
            let tau = bisect(0.0, h, resolution, |s| {
                stepper.probe(&sys, &y, s, &mut probe);
                norm_excess(&probe) >= 0.0
            });
            stepper.probe(&sys, &y, tau, &mut probe);
            found.push(Event {
                t: t + tau,
                kind: EventKind::NormThreshold,
                detail: format!("norm excess {:.3e}", norm_excess(&probe)),
            });
            samples.push(ShellState::from_flat(&probe, t + tau));
            break Termination::NormThreshold;
        }

        std::mem::swap(&mut y, &mut out);
        t = t_new;
        if t == target {
            samples.push(ShellState::from_flat(&y, t));
            m += 1;
        }
    };

    Ok(Trajectory {
        samples,
        events: found,
        terminated_by,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

fn describe_min(y: &[f64], n: usize, magnetic: bool) -> String {
    let upto = if magnetic { 2 * n } else { n };
    let (idx, v) = y[..upto]
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, &v)| {
                if v < bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            },
        );
    let field = if idx < n { 'a' } else { 'b' };
    format!("{field}_{} = {v:.6e}", idx % n)
}

/// Smallest `s ∈ (lo, hi]` (to within `tol`) at which `crossed(s)` holds,
/// given `crossed(hi)`.
fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut crossed: impl FnMut(f64) -> bool) -> f64 {
    let tol = tol.max(f64::EPSILON * hi.abs());
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if crossed(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
