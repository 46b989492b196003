//! Scalar functionals of shell states and trajectories.
//!
//! Every infinite sum is truncated at the model's top shell; nothing is
//! extrapolated into the tail.
//!
//! The blow-up machinery works with the rescaled variables `w_j = λ_j^θ a_j`,
//! `z_j = λ_j^θ b_j` and the pair
//!
//! ```text
//! φ = Σ λ_j^{−γ} (w_j² + z_j²),     ψ = Σ λ_j^{−γ} (w_j + c₀ z_j).
//! ```
//!
//! Along the forward MHD flow `ψ' ≥ κ φ + F − B`, where
//! `κ = λ^{θ−γ} − (1 + 2c₀) λ^{γ/2−θ}`, `F = Σ λ_j^{θ−γ} f_j` and `B` is the
//! inflow the truncation withholds from shell `k + 1`. Cauchy–Schwarz gives
//! `ψ² ≤ C φ` with the sharp constant `C = 2 max(1, c₀²)/(1 − λ^{−γ})`, hence
//! the Riccati inequality `ψ' ≥ K ψ² + F − B` with `K = κ / C`.
//!
//! The commonly quoted constant `2c₀²/(1 − λ^{−γ})` is only valid for
//! `c₀ ≥ 1`; it is kept as [`LyapunovReport::k_printed`] for comparison and
//! never used to certify anything.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelKind, ModelSpec, ShellState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("weighted norm overflowed at entry {index}")]
    Overflow { index: usize },
    #[error("Riccati coefficient must be > 0, got {0}")]
    NonPositiveCoefficient(f64),
    #[error("need f0 > 0 or psi0 > 0 for a finite blow-up bound (f0 = {f0}, psi0 = {psi0})")]
    NoBlowUp { f0: f64, psi0: f64 },
    #[error("forcing must be >= 0, got {0}")]
    NegativeForcing(f64),
}

/// `½ Σ (a_j² + b_j²)` over all truncated shells, starting at `j = 0`.
pub fn energy(state: &ShellState) -> f64 {
    0.5 * state.a.iter().chain(&state.b).map(|x| x * x).sum::<f64>()
}

/// `Σ a_j b_j`.
pub fn cross_helicity(state: &ShellState) -> f64 {
    state.a.iter().zip(&state.b).map(|(a, b)| a * b).sum()
}

/// `Σ λ_j^{2s} u_j²` without overflow checks.
pub fn sobolev_norm_sq(u: &[f64], s: f64, lambda: f64) -> f64 {
    let ratio = lambda.powf(2.0 * s);
    let mut weight = 1.0;
    let mut acc = 0.0;
    for &x in u {
        acc += weight * x * x;
        weight *= ratio;
    }
    acc
}

/// `‖u‖_s = sqrt(Σ λ_j^{2s} u_j²)`.
pub fn sobolev_norm(u: &[f64], s: f64, lambda: f64) -> Result<f64, DiagnosticsError> {
    let mut acc = 0.0;
    for (j, &x) in u.iter().enumerate() {
        let w = (lambda.ln() * 2.0 * s * j as f64).exp();
        acc += w * x * x;
        if !acc.is_finite() {
            return Err(DiagnosticsError::Overflow { index: j });
        }
    }
    Ok(acc.sqrt())
}

/// `Σ λ^{−j²} |u_j − v_j| / (1 + |u_j − v_j|)`, zero-padding the shorter input.
pub fn weak_distance(u: &[f64], v: &[f64], lambda: f64) -> f64 {
    let n = u.len().max(v.len());
    (0..n)
        .map(|j| {
            let d = (u.get(j).copied().unwrap_or(0.0) - v.get(j).copied().unwrap_or(0.0)).abs();
            let w = (-(j as f64).powi(2) * lambda.ln()).exp();
            w * d / (1.0 + d)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    /// Sobolev index whose norm is being shown to blow up.
    pub s: f64,
    /// Weight exponent `γ`.
    pub gamma: f64,
    /// Magnetic mixing constant `c₀`.
    pub c0: f64,
}

impl LyapunovParams {
    /// `κ = λ^{θ−γ} − (1 + 2c₀) λ^{γ/2−θ}`.
    pub fn kappa(&self, lambda: f64, theta: f64) -> f64 {
        lambda.powf(theta - self.gamma)
            - (1.0 + 2.0 * self.c0) * lambda.powf(self.gamma / 2.0 - theta)
    }

    /// Whether `(s, γ, c₀)` lies in the admissible window for `(λ, θ)`:
    /// `2θ − γ ≤ 2s`, `0 < γ < 4θ/3`, `0 < c₀ < ½ λ^{2θ − 3γ/2} − ½`.
    pub fn is_valid(&self, lambda: f64, theta: f64) -> bool {
        let c0_max = 0.5 * lambda.powf(2.0 * theta - 1.5 * self.gamma) - 0.5;
        self.gamma > 0.0
            && 2.0 * theta - self.gamma <= 2.0 * self.s
            && self.gamma < 4.0 * theta / 3.0
            && self.c0 > 0.0
            && self.c0 < 1.0
            && self.c0 < c0_max
            && self.kappa(lambda, theta) > 0.0
    }

    /// Sharp Cauchy–Schwarz constant `C` in `ψ² ≤ C φ`.
    pub fn psi_phi_constant(&self, lambda: f64) -> f64 {
        2.0 * self.c0.powi(2).max(1.0) / (1.0 - lambda.powf(-self.gamma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub phi: f64,
    pub psi: f64,
    /// `κ`, the coefficient of `φ` in the lower bound for `ψ'`.
    pub kappa: f64,
    /// `(1 − λ^{−γ})/(2c₀²) · κ`, the coefficient quoted with the blow-up
    /// argument. Not a valid Riccati constant for `c₀ < 1`.
    pub k_printed: f64,
    /// `κ / C` with the sharp constant; the coefficient actually certified.
    pub k_sharp: f64,
    /// Effective forcing in the `ψ` equation, `Σ λ_j^{θ−γ} f_j`.
    pub forcing: f64,
    pub valid: bool,
    /// Upper bound on the blow-up time from `ψ' ≥ K_sharp ψ² + forcing`.
    pub t_upper: Option<f64>,
}

/// `(φ, ψ)` of a state.
pub fn lyapunov_pair(state: &ShellState, spec: &ModelSpec, params: &LyapunovParams) -> (f64, f64) {
    let theta = spec.theta();
    let mut phi = 0.0;
    let mut psi = 0.0;
    for j in 0..state.a.len() {
        let lj = spec.wavenumber(j);
        let scale = lj.powf(theta);
        let (w, z) = (scale * state.a[j], scale * state.b[j]);
        let weight = lj.powf(-params.gamma);
        phi += weight * (w * w + z * z);
        psi += weight * (w + params.c0 * z);
    }
    (phi, psi)
}

pub fn lyapunov(state: &ShellState, spec: &ModelSpec, params: &LyapunovParams) -> LyapunovReport {
    let (lambda, theta) = (spec.lambda(), spec.theta());
    let (phi, psi) = lyapunov_pair(state, spec, params);
    let kappa = params.kappa(lambda, theta);
    let k_printed = (1.0 - lambda.powf(-params.gamma)) / (2.0 * params.c0 * params.c0) * kappa;
    let k_sharp = kappa / params.psi_phi_constant(lambda);
    let forcing = effective_forcing(spec, params);
    let valid = params.is_valid(lambda, theta);
    let t_upper = if valid && psi > 0.0 && forcing >= 0.0 {
        riccati_blowup_bound(psi, k_sharp, forcing).ok()
    } else {
        None
    };
    LyapunovReport {
        phi,
        psi,
        kappa,
        k_printed,
        k_sharp,
        forcing,
        valid,
        t_upper,
    }
}

/// `Σ λ_j^{θ−γ} f_j`; equals `f₀` for forcing confined to shell 0.
pub fn effective_forcing(spec: &ModelSpec, params: &LyapunovParams) -> f64 {
    spec.forcing()
        .iter()
        .enumerate()
        .map(|(j, f)| spec.wavenumber(j).powf(spec.theta() - params.gamma) * f)
        .sum()
}

/// Inflow `ψ` loses because the truncation has no shell `k + 1`:
/// `λ^{θ−γ} λ_k^{−γ} (w_k² + z_k²)`.
pub fn boundary_loss(state: &ShellState, spec: &ModelSpec, params: &LyapunovParams) -> f64 {
    let k = spec.n_shells();
    let lk = spec.wavenumber(k);
    let scale = lk.powf(spec.theta());
    let (w, z) = (scale * state.a[k], scale * state.b[k]);
    spec.lambda().powf(spec.theta() - params.gamma) * lk.powf(-params.gamma) * (w * w + z * z)
}

/// Exact `ψ'` on the truncated forward flow, evaluated from the right-hand side.
pub fn psi_rate(state: &ShellState, spec: &ModelSpec, params: &LyapunovParams) -> f64 {
    let n = spec.len();
    let mut da = vec![0.0; n];
    let mut db = vec![0.0; n];
    spec.rhs_into(&state.a, &state.b, &mut da, &mut db);
    (0..n)
        .map(|j| {
            let lj = spec.wavenumber(j);
            lj.powf(spec.theta() - params.gamma) * (da[j] + params.c0 * db[j])
        })
        .sum()
}

/// Checks `ψ² ≤ C φ` link by link:
/// `ψ² ≤ (Σ λ_j^{−γ}) Σ λ_j^{−γ}(w_j + c₀z_j)² ≤ 2/(1−λ^{−γ}) Σ λ_j^{−γ}(w_j² + c₀²z_j²) ≤ C φ`,
/// each up to `1e−12` relative slack.
pub fn psi_squared_bound_check(
    state: &ShellState,
    spec: &ModelSpec,
    params: &LyapunovParams,
) -> bool {
    let lambda = spec.lambda();
    let theta = spec.theta();
    let (phi, psi) = lyapunov_pair(state, spec, params);
    let mut weight_sum = 0.0;
    let mut mixed = 0.0;
    let mut split = 0.0;
    for j in 0..state.a.len() {
        let lj = spec.wavenumber(j);
        let scale = lj.powf(theta);
        let (w, z) = (scale * state.a[j], scale * state.b[j]);
        let weight = lj.powf(-params.gamma);
        weight_sum += weight;
        mixed += weight * (w + params.c0 * z).powi(2);
        split += weight * (w * w + params.c0 * params.c0 * z * z);
    }
    let geometric = 1.0 / (1.0 - lambda.powf(-params.gamma));
    let le = |x: f64, y: f64| x <= y + 1e-12 * y.abs().max(x.abs());
    le(psi * psi, weight_sum * mixed)
        && le(weight_sum * mixed, 2.0 * geometric * split)
        && le(
            2.0 * geometric * split,
            params.psi_phi_constant(lambda) * phi,
        )
}

/// The same bound with the quoted constant `2c₀²/(1 − λ^{−γ})`. Fails for
/// velocity-dominated states whenever `c₀ < 1`.
pub fn psi_squared_bound_printed(
    state: &ShellState,
    spec: &ModelSpec,
    params: &LyapunovParams,
) -> bool {
    let (phi, psi) = lyapunov_pair(state, spec, params);
    let c = 2.0 * params.c0 * params.c0 / (1.0 - spec.lambda().powf(-params.gamma));
    psi * psi <= c * phi * (1.0 + 1e-12)
}

/// `∫_{ψ₀}^∞ dψ / (K ψ² + f₀)`, the time by which `ψ' ≥ K ψ² + f₀` forces
/// `ψ` to infinity.
pub fn riccati_blowup_bound(psi0: f64, k: f64, f0: f64) -> Result<f64, DiagnosticsError> {
    if k.is_nan() || k <= 0.0 {
        return Err(DiagnosticsError::NonPositiveCoefficient(k));
    }
    if f0 < 0.0 {
        return Err(DiagnosticsError::NegativeForcing(f0));
    }
    if f0 == 0.0 {
        if psi0 > 0.0 {
            return Ok(1.0 / (k * psi0));
        }
        return Err(DiagnosticsError::NoBlowUp { f0, psi0 });
    }
    let root = (k * f0).sqrt();
    // π/2 − arctan(x) = arctan(1/x) for x > 0; the latter keeps precision
    // when ψ₀ is large.
    let x = psi0 * (k / f0).sqrt();
    let angle = if x > 0.0 {
        (1.0 / x).atan()
    } else {
        std::f64::consts::FRAC_PI_2 - x.atan()
    };
    Ok(angle / root)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RiccatiConstant {
    Sharp,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiOptions {
    pub constant: RiccatiConstant,
    /// Absolute error of each sampled `ψ` (from the integrator tolerance).
    pub sample_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiPoint {
    pub t: f64,
    pub psi: f64,
    pub dpsi_dt: f64,
    pub lower_bound: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiCheck {
    pub k: f64,
    pub points: Vec<RiccatiPoint>,
    pub violations: usize,
}

impl RiccatiCheck {
    pub fn fraction_ok(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        1.0 - self.violations as f64 / self.points.len() as f64
    }
}

/// Tests `dψ/dt ≥ K ψ² + F − B − slack` on the sample grid.
///
/// `dψ/dt` is a centred difference; its truncation error is estimated from
/// the third difference and added to the slack together with the sample
/// noise. Only points whose five-point stencil is uniform and entirely
/// positive are checked.
pub fn riccati_check(
    samples: &[ShellState],
    spec: &ModelSpec,
    params: &LyapunovParams,
    opts: &RiccatiOptions,
) -> RiccatiCheck {
    let first = samples.first();
    let k = match (first, opts.constant) {
        (Some(s), RiccatiConstant::Sharp) => lyapunov(s, spec, params).k_sharp,
        (Some(s), RiccatiConstant::Printed) => lyapunov(s, spec, params).k_printed,
        (None, _) => 0.0,
    };
    let forcing = effective_forcing(spec, params);
    let psi: Vec<f64> = samples
        .iter()
        .map(|s| lyapunov_pair(s, spec, params).1)
        .collect();
    let positive: Vec<bool> = samples
        .iter()
        .map(|s| s.a.iter().chain(&s.b).all(|&x| x > 0.0))
        .collect();
    let mut points = Vec::new();
    let mut violations = 0;
    for i in 2..samples.len().saturating_sub(2) {
        if !positive[i - 2..=i + 2].iter().all(|&p| p) {
            continue;
        }
        let h = samples[i].t - samples[i - 1].t;
        let uniform = (i - 1..=i + 2).all(|m| {
            let dt = samples[m].t - samples[m - 1].t;
            (dt - h).abs() <= 1e-9 * h
        });
        if !uniform || h <= 0.0 {
            continue;
        }
        let dpsi = (psi[i + 1] - psi[i - 1]) / (2.0 * h);
        let third =
            (psi[i + 2] - 2.0 * psi[i + 1] + 2.0 * psi[i - 1] - psi[i - 2]) / (2.0 * h.powi(3));
        let slack = third.abs() * h * h / 6.0 + opts.sample_error / h;
        let lower = k * psi[i] * psi[i] + forcing - boundary_loss(&samples[i], spec, params);
        let holds = dpsi >= lower - slack;
        if !holds {
            violations += 1;
        }
        points.push(RiccatiPoint {
            t: samples[i].t,
            psi: psi[i],
            dpsi_dt: dpsi,
            lower_bound: lower,
            slack,
            holds,
        });
    }
    RiccatiCheck {
        k,
        points,
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MonitorOptions {
    /// Evaluate the rescaled-monotonicity flag for MHD runs too (always on
    /// for Euler runs).
    pub monotonicity_for_mhd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub min_a: Vec<f64>,
    pub min_b: Vec<f64>,
    /// First sample at which some `a_j` or `b_j` is `≤ 0`, as `(index, t)`.
    pub positivity_loss: Option<(usize, f64)>,
    /// Per sample: is `λ_j^{θ/3} a_j` non-increasing in `j`?
    pub monotone: Option<Vec<bool>>,
}

pub fn monitors(samples: &[ShellState], spec: &ModelSpec, opts: &MonitorOptions) -> MonitorReport {
    let magnetic = spec.kind().has_magnetic_field();
    let min_of = |v: &[f64]| v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let min_a: Vec<f64> = samples.iter().map(|s| min_of(&s.a)).collect();
    let min_b: Vec<f64> = samples.iter().map(|s| min_of(&s.b)).collect();
    let positivity_loss = samples
        .iter()
        .enumerate()
        .find(|(i, _)| min_a[*i] <= 0.0 || (magnetic && min_b[*i] <= 0.0))
        .map(|(i, s)| (i, s.t));
    let monotone = (spec.kind() == ModelKind::Euler || opts.monotonicity_for_mhd).then(|| {
        samples
            .iter()
            .map(|s| rescaled_monotone(&s.a, spec))
            .collect()
    });
    MonitorReport {
        min_a,
        min_b,
        positivity_loss,
        monotone,
    }
}

/// Whether `λ_j^{θ/3} u_j` is non-increasing in `j` (relative slack `1e−12`).
pub fn rescaled_monotone(u: &[f64], spec: &ModelSpec) -> bool {
    let exponent = spec.theta() / 3.0;
    let r: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(j, x)| spec.wavenumber(j).powf(exponent) * x)
        .collect();
    r.windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(w[1].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Nonlinearity;

    fn spec(kind: ModelKind, k: usize, f: &[f64]) -> ModelSpec {
        ModelSpec::new(kind, 2.0, Nonlinearity::Theta(1.0), k, f).unwrap()
    }

    #[test]
    fn energy_and_helicity_examples() {
        assert_eq!(
            energy(&ShellState::new(vec![3.0, 4.0], vec![0.0, 0.0])),
            12.5
        );
        assert_eq!(energy(&ShellState::zeros(4)), 0.0);
        assert_eq!(
            energy(&ShellState::new(vec![1.0, 1.0], vec![1.0, 0.0])),
            1.5
        );
        assert_eq!(
            cross_helicity(&ShellState::new(vec![1.0, 2.0], vec![3.0, 4.0])),
            11.0
        );
        assert_eq!(
            cross_helicity(&ShellState::velocity_only(vec![1.0, 2.0])),
            0.0
        );
        assert_eq!(
            cross_helicity(&ShellState::new(vec![1.0, 1.0], vec![1.0, 1.0])),
            2.0
        );
    }

    #[test]
    fn sobolev_examples() {
        assert!((sobolev_norm(&[1.0, 1.0], 0.5, 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((sobolev_norm(&[1.0, 1.0], 1.0, 2.0).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(sobolev_norm(&[3.0, 4.0], 0.0, 7.0).unwrap(), 5.0);
        assert!(matches!(
            sobolev_norm(&[1e300; 4], 1.0, 1e10),
            Err(DiagnosticsError::Overflow { .. })
        ));
    }

    #[test]
    fn weak_distance_examples() {
        assert_eq!(weak_distance(&[1.0, 2.0], &[1.0, 2.0], 2.0), 0.0);
        assert_eq!(weak_distance(&[1.0, 0.0, 0.0], &[], 2.0), 0.5);
        // Second shell weighted by 2^{-1}.
        assert_eq!(weak_distance(&[0.0, 1.0], &[0.0], 2.0), 0.25);
    }

    #[test]
    fn lyapunov_examples() {
        let m = spec(ModelKind::MhdForward, 1, &[1.0]);
        let p = LyapunovParams {
            s: 0.5,
            gamma: 1.0,
            c0: 0.1,
        };
        let r = lyapunov(&ShellState::velocity_only(vec![1.0, 1.0]), &m, &p);
        assert!((r.phi - 3.0).abs() < 1e-15);
        assert!((r.psi - 2.0).abs() < 1e-15);
        let oracle = (0.5 / 0.02) * (1.0 - 1.2 * 2f64.powf(-0.5));
        assert!((r.k_printed - oracle).abs() < 1e-12);
        assert!((r.k_printed - 3.7868).abs() < 1e-4);
        assert!((r.k_sharp - oracle * 0.01).abs() < 1e-12);
        assert!(r.valid);
        assert!(r.t_upper.is_some());

        let z = lyapunov(&ShellState::zeros(2), &m, &p);
        assert_eq!((z.phi, z.psi), (0.0, 0.0));
        assert!(z.t_upper.is_none());
    }

    #[test]
    fn parameter_window() {
        let ok = LyapunovParams {
            s: 0.5,
            gamma: 1.0,
            c0: 0.1,
        };
        assert!(ok.is_valid(2.0, 1.0));
        // γ below 2θ − 2s.
        assert!(!LyapunovParams { gamma: 0.9, ..ok }.is_valid(2.0, 1.0));
        // γ ≥ 4θ/3.
        assert!(!LyapunovParams {
            gamma: 1.4,
            s: 1.0,
            ..ok
        }
        .is_valid(2.0, 1.0));
        // c₀ above ½λ^{2θ−3γ/2} − ½ ≈ 0.207.
        assert!(!LyapunovParams { c0: 0.25, ..ok }.is_valid(2.0, 1.0));
    }

    #[test]
    fn psi_squared_bound() {
        let m = spec(ModelKind::MhdForward, 1, &[1.0]);
        let p = LyapunovParams {
            s: 0.5,
            gamma: 1.0,
            c0: 0.1,
        };
        let s = ShellState::velocity_only(vec![1.0, 1.0]);
        assert!(psi_squared_bound_check(&s, &m, &p));
        // 4 ≤ 0.12 is false: the quoted constant is too small here.
        assert!(!psi_squared_bound_printed(&s, &m, &p));
        assert!(psi_squared_bound_check(&ShellState::zeros(2), &m, &p));
        let p1 = LyapunovParams { c0: 1.0, ..p };
        let (phi, psi) = lyapunov_pair(&s, &m, &p1);
        assert!(psi * psi <= 2.0 * phi / 0.5);
        assert!(psi_squared_bound_check(&s, &m, &p1));
    }

    #[test]
    fn riccati_bound_examples() {
        let t = riccati_blowup_bound(2.0, 3.7868, 1.0).unwrap();
        assert!((t - 0.1292).abs() < 1e-4, "{t}");
        assert_eq!(riccati_blowup_bound(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(riccati_blowup_bound(1.0, 0.0, 1.0).is_err());
        assert!(riccati_blowup_bound(0.0, 1.0, 0.0).is_err());
        assert!(riccati_blowup_bound(-1.0, 1.0, 0.0).is_err());
        let mut last = f64::INFINITY;
        for psi0 in [0.0, 0.5, 1.0, 10.0, 1e3, 1e8] {
            let t = riccati_blowup_bound(psi0, 2.0, 0.5).unwrap();
            assert!(t < last);
            last = t;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn monitors_examples() {
        let m = spec(ModelKind::Euler, 5, &[]);
        let fixed: Vec<f64> = (0..6).map(|j| m.wavenumber(j).powf(-1.0 / 3.0)).collect();
        let decreasing: Vec<f64> = (0..6)
            .map(|j| m.wavenumber(j).powf(-1.0 / 3.0) / (1.0 + j as f64))
            .collect();
        let mut negative = fixed.clone();
        negative[3] = -0.1;
        let samples = vec![
            ShellState::velocity_only(fixed).at(0.0),
            ShellState::velocity_only(decreasing).at(1.0),
            ShellState::velocity_only(negative).at(2.0),
        ];
        let r = monitors(&samples, &m, &MonitorOptions::default());
        let mono = r.monotone.unwrap();
        assert!(mono[0] && mono[1] && !mono[2]);
        assert_eq!(r.positivity_loss, Some((2, 2.0)));
        assert_eq!(r.min_a[2], -0.1);

        let mhd = monitors(
            &samples,
            &m.with_kind(ModelKind::MhdForward),
            &MonitorOptions::default(),
        );
        assert!(mhd.monotone.is_none());
        // b ≡ 0 is not positive for an MHD run.
        assert_eq!(mhd.positivity_loss, Some((0, 0.0)));
    }

    #[test]
    fn psi_rate_matches_finite_difference() {
        let m = spec(ModelKind::MhdForward, 6, &[1.0]);
        let p = LyapunovParams {
            s: 0.5,
            gamma: 1.0,
            c0: 0.1,
        };
        let s = ShellState::new(
            (0..7).map(|j| 0.5 + 0.1 * j as f64).collect(),
            (0..7).map(|j| 0.3 + 0.05 * j as f64).collect(),
        );
        let (_, psi0) = lyapunov_pair(&s, &m, &p);
        let slope = |h: f64| {
            let next = crate::integrator::step_fixed(&m, &s, h).unwrap();
            (lyapunov_pair(&next, &m, &p).1 - psi0) / h
        };
        // Richardson extrapolation removes the O(h) term.
        let fd = 2.0 * slope(5e-7) - slope(1e-6);
        let exact = psi_rate(&s, &m, &p);
        assert!(
            (fd - exact).abs() < 1e-6 * exact.abs().max(1.0),
            "{fd} {exact}"
        );

        // The lower bound κφ + F − B holds at this positive state.
        let r = lyapunov(&s, &m, &p);
        assert!(exact >= r.kappa * r.phi + r.forcing - boundary_loss(&s, &m, &p));
    }
}
