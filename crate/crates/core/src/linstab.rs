//! Perturbations of the steady states `ā_j = A₀ λ_j^{−θ/3}`, `b̄_j = B₀ λ_j^{−θ/3}`
//! (forcing `f₀ = λ^{−θ/3}`), their linearization and the eigenvector
//! recursions.
//!
//! Writing `a = ā + εω`, `b = b̄ + εζ`, `Λ_j = λ_j^{2θ/3}`, `μ = λ^{−θ/3}` and
//! `σ` for the model's magnetic sign, the exact perturbation equations are
//!
//! ```text
//! ω_j' = A₀Λ_j(2μ²ω_{j−1} − μω_j − ω_{j+1}) + σB₀Λ_j(2μ²ζ_{j−1} − μζ_j − ζ_{j+1})
//!        + ε(λ_{j−1}^θ ω_{j−1}² − λ_j^θ ω_jω_{j+1}) + σε(λ_{j−1}^θ ζ_{j−1}² − λ_j^θ ζ_jζ_{j+1})
//! ζ_j' = σ[B₀Λ_j(μω_j − ω_{j+1}) − A₀Λ_j(μζ_j − ζ_{j+1}) + ελ_j^θ(ω_jζ_{j+1} − ζ_jω_{j+1})]
//! ```
//!
//! With `B₀ = 0`, `A₀ = ±1` the channels decouple. `ω_j = c_j e^{pt}` gives
//! `c_{j+1} + α_j c_j − 2μ² c_{j−1} = 0` with `α_j = μ + A₀ p Λ_j^{−1}`, and
//! `ζ_j = d_j e^{qt}` gives `d_{j+1} = (μ + σA₀ q Λ_j^{−1}) d_j`.
//!
//! The velocity recursion has characteristic roots `μ` and `−2μ`. An
//! eigenvalue is admissible when the solution started from `c_{−1} = 0`,
//! `c₀ = 1` has no `(−2μ)^j` component; the amplitude of that component is
//! tracked exactly through `e_j = c_j / (−2μ)^j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::OdeSystem;
use crate::models::{shell_wavenumber, ModelKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinstabError {
    #[error("omega has {omega} entries but zeta has {zeta}")]
    DimensionMismatch { omega: usize, zeta: usize },
    #[error("need at least {min} shells, got {got}")]
    TooFewShells { min: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("continued fraction has a zero denominator at level {level}")]
    ZeroDenominator { level: usize },
    #[error("the Euler model has no magnetic channel")]
    NoMagneticChannel,
}

/// Steady state about which perturbations are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Base {
    pub kind: ModelKind,
    pub a0: f64,
    pub b0: f64,
    pub lambda: f64,
    pub theta: f64,
}

impl Base {
    pub fn new(
        kind: ModelKind,
        a0: f64,
        b0: f64,
        lambda: f64,
        theta: f64,
    ) -> Result<Self, LinstabError> {
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(LinstabError::InvalidParameter(format!("lambda = {lambda}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(LinstabError::InvalidParameter(format!("theta = {theta}")));
        }
        Ok(Self {
            kind,
            a0,
            b0,
            lambda,
            theta,
        })
    }

    /// `μ = λ^{−θ/3}`.
    pub fn mu(&self) -> f64 {
        self.lambda.powf(-self.theta / 3.0)
    }

    /// `Λ_j = λ_j^{2θ/3}`.
    pub fn growth(&self, j: usize) -> f64 {
        shell_wavenumber(self.lambda, j).powf(2.0 * self.theta / 3.0)
    }

    fn coupling(&self, j: usize) -> f64 {
        shell_wavenumber(self.lambda, j).powf(self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationState {
    pub omega: Vec<f64>,
    pub zeta: Vec<f64>,
    /// `0` selects the linearized equations.
    pub epsilon: f64,
    pub base: Base,
}

/// Values assumed for `ω_{n+1}` and `ζ_{n+1}` beyond the last shell `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FarBoundary {
    /// `ω_{n+1} = ζ_{n+1} = 0`.
    Truncate,
    /// `ω_{n+1} = velocity · ω_n`, `ζ_{n+1} = magnetic · ζ_n`; with the
    /// eigenvector's own ratios this makes the eigenvector exact on `0..=n`.
    Ratio { velocity: f64, magnetic: f64 },
}

/// `(ω', ζ')` with the far boundary truncated.
pub fn perturbation_rhs(state: &PerturbationState) -> Result<(Vec<f64>, Vec<f64>), LinstabError> {
    perturbation_rhs_with(state, FarBoundary::Truncate)
}

pub fn perturbation_rhs_with(
    state: &PerturbationState,
    boundary: FarBoundary,
) -> Result<(Vec<f64>, Vec<f64>), LinstabError> {
    let n = state.omega.len();
    if state.zeta.len() != n {
        return Err(LinstabError::DimensionMismatch {
            omega: n,
            zeta: state.zeta.len(),
        });
    }
    let mut dw = vec![0.0; n];
    let mut dz = vec![0.0; n];
    perturbation_into(
        &state.base,
        state.epsilon,
        boundary,
        &state.omega,
        &state.zeta,
        &mut dw,
        &mut dz,
    );
    Ok((dw, dz))
}

fn perturbation_into(
    base: &Base,
    eps: f64,
    boundary: FarBoundary,
    w: &[f64],
    z: &[f64],
    dw: &mut [f64],
    dz: &mut [f64],
) {
    let n = w.len();
    if n == 0 {
        return;
    }
    let sigma = base.kind.magnetic_sign();
    let mu = base.mu();
    let (w_far, z_far) = match boundary {
        FarBoundary::Truncate => (0.0, 0.0),
        FarBoundary::Ratio { velocity, magnetic } => (velocity * w[n - 1], magnetic * z[n - 1]),
    };
    for j in 0..n {
        let g = base.growth(j);
        let l = base.coupling(j);
        let (wn, zn) = if j + 1 < n {
            (w[j + 1], z[j + 1])
        } else {
            (w_far, z_far)
        };
        let (wp, zp, lp) = if j > 0 {
            (w[j - 1], z[j - 1], base.coupling(j - 1))
        } else {
            (0.0, 0.0, 0.0)
        };
        let vel = 2.0 * mu * mu * wp - mu * w[j] - wn;
        let mag = 2.0 * mu * mu * zp - mu * z[j] - zn;
        dw[j] = base.a0 * g * vel
            + sigma * base.b0 * g * mag
            + eps * (lp * wp * wp - l * w[j] * wn)
            + sigma * eps * (lp * zp * zp - l * z[j] * zn);
        dz[j] = sigma
            * (base.b0 * g * (mu * w[j] - wn) - base.a0 * g * (mu * z[j] - zn)
                + eps * l * (w[j] * zn - z[j] * wn));
    }
}

/// The perturbation equations as an ODE on `[ω_0..ω_n, ζ_0..ζ_n]`.
pub struct PerturbationSystem {
    pub base: Base,
    pub epsilon: f64,
    pub boundary: FarBoundary,
    pub len: usize,
}

impl OdeSystem for PerturbationSystem {
    fn dim(&self) -> usize {
        2 * self.len
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let (w, z) = y.split_at(self.len);
        let (dw, dz) = dy.split_at_mut(self.len);
        perturbation_into(&self.base, self.epsilon, self.boundary, w, z, dw, dz);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Channel {
    Velocity(f64),
    Magnetic(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    /// `c_j` or `d_j` behaves like `λ_j^{−θ/3}`: in `H^s` for `s < s_max`.
    DecayingHs { s_max: f64 },
    /// The `(−2μ)^j` mode is present.
    Growing,
    /// `α_j = 0` at the given shell; all later `d_j` vanish.
    Degenerate { shell: usize },
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DecayingHs { .. } => "decaying",
            Self::Growing => "growing",
            Self::Degenerate { .. } => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenProblem {
    pub channel: Channel,
    pub lambda: f64,
    pub theta: f64,
    /// `c_0..c_n` or `d_0..d_n`.
    pub coeffs: Vec<f64>,
    /// `α_0..α_{n−1}`.
    pub alphas: Vec<f64>,
    pub classification: Classification,
    /// Velocity: signed amplitude `e_n = c_n / (−2μ)^n` of the growing mode.
    /// Magnetic: `d_n / μ^n`, the limit of `d_j λ_j^{θ/3}`.
    pub amplitude: f64,
}

impl EigenProblem {
    /// `coeff_j · λ_j^{θ/3}`.
    pub fn rescaled(&self) -> Vec<f64> {
        let mu = self.lambda.powf(-self.theta / 3.0);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c / mu.powi(j as i32))
            .collect()
    }
}

fn check_params(lambda: f64, theta: f64, value: f64) -> Result<(), LinstabError> {
    Base::new(ModelKind::Euler, 1.0, 0.0, lambda, theta)?;
    if !value.is_finite() {
        return Err(LinstabError::InvalidParameter(format!(
            "eigenvalue {value}"
        )));
    }
    Ok(())
}

/// `α_j = μ + sign · value · Λ_j^{−1}`.
fn alphas(lambda: f64, theta: f64, sign: f64, value: f64, n: usize) -> Vec<f64> {
    let mu = lambda.powf(-theta / 3.0);
    (0..n)
        .map(|j| mu + sign * value * shell_wavenumber(lambda, j).powf(-2.0 * theta / 3.0))
        .collect()
}

/// Solves `c_{j+1} + α_j c_j − 2μ² c_{j−1} = 0`, `c_{−1} = 0`, `c_0 = 1` up to
/// `c_n`, with `α_j = μ + a0_sign · p · Λ_j^{−1}` (`a0_sign = ±1` selects the
/// steady state `A₀ = ±1`).
pub fn velocity_eigenvector(
    p: f64,
    lambda: f64,
    theta: f64,
    n: usize,
    a0_sign: f64,
) -> Result<EigenProblem, LinstabError> {
    check_params(lambda, theta, p)?;
    if n < 2 {
        return Err(LinstabError::TooFewShells { min: 2, got: n });
    }
    let mu = lambda.powf(-theta / 3.0);
    let alphas = alphas(lambda, theta, a0_sign.signum(), p, n);
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut prev = 0.0;
    for j in 0..n {
        let next = -alphas[j] * coeffs[j] + 2.0 * mu * mu * prev;
        prev = coeffs[j];
        if !next.is_finite() {
            break;
        }
        coeffs.push(next);
    }
    let scaled = dominant_amplitudes(&alphas, mu);
    let amplitude = *scaled.last().expect("n >= 2");
    // Bounded rescaled sequence means no growing mode at this resolution.
    let rescaled_end = coeffs.last().unwrap().abs() / mu.powi(coeffs.len() as i32 - 1);
    let classification = if coeffs.len() == n + 1 && rescaled_end <= 1e3 {
        Classification::DecayingHs { s_max: theta / 3.0 }
    } else {
        Classification::Growing
    };
    Ok(EigenProblem {
        channel: Channel::Velocity(p),
        lambda,
        theta,
        coeffs,
        alphas,
        classification,
        amplitude,
    })
}

/// `e_0..e_n` with `e_j = c_j/(−2μ)^j`, from
/// `e_{j+1} = α_j e_j/(2μ) + e_{j−1}/2`. Never overflows.
fn dominant_amplitudes(alphas: &[f64], mu: f64) -> Vec<f64> {
    let mut e = Vec::with_capacity(alphas.len() + 1);
    e.push(1.0);
    let mut prev = 0.0;
    for (j, alpha) in alphas.iter().enumerate() {
        let next = alpha * e[j] / (2.0 * mu) + 0.5 * prev;
        prev = e[j];
        e.push(next);
    }
    e
}

/// The closed product `c_j = μ · Π_{i=1}^{j−1} α_i` that accompanies the
/// velocity recursion in the source analysis. It solves a first-order
/// recursion and differs from [`velocity_eigenvector`]; it is exposed only for
/// comparison.
pub fn velocity_product_formula(
    p: f64,
    lambda: f64,
    theta: f64,
    n: usize,
    a0_sign: f64,
) -> Vec<f64> {
    let mu = lambda.powf(-theta / 3.0);
    let alphas = alphas(lambda, theta, a0_sign.signum(), p, n.max(1));
    let mut c = vec![1.0];
    if n >= 1 {
        c.push(mu);
    }
    for j in 2..=n {
        let next = c[j - 1] * alphas[j - 1];
        c.push(next);
    }
    c
}

/// Solves `d_{j+1} = α_j d_j`, `d_0 = 1`, with
/// `α_j = μ + σ · a0_sign · q · Λ_j^{−1}` for the model's magnetic sign `σ`.
pub fn magnetic_eigenvector(
    q: f64,
    lambda: f64,
    theta: f64,
    n: usize,
    kind: ModelKind,
    a0_sign: f64,
) -> Result<EigenProblem, LinstabError> {
    check_params(lambda, theta, q)?;
    if n < 1 {
        return Err(LinstabError::TooFewShells { min: 1, got: n });
    }
    if !kind.has_magnetic_field() {
        return Err(LinstabError::NoMagneticChannel);
    }
    let mu = lambda.powf(-theta / 3.0);
    let sign = kind.magnetic_sign() * a0_sign.signum();
    let alphas = alphas(lambda, theta, sign, q, n);
    let mut coeffs = vec![1.0];
    let mut degenerate = None;
    for (j, &alpha) in alphas.iter().enumerate() {
        let scale = mu + q.abs() * shell_wavenumber(lambda, j).powf(-2.0 * theta / 3.0);
        if degenerate.is_none() && alpha.abs() <= 4.0 * f64::EPSILON * scale {
            degenerate = Some(j);
        }
        let d = if degenerate.is_some() {
            0.0
        } else {
            coeffs[j] * alpha
        };
        coeffs.push(d);
    }
    let classification = match degenerate {
        Some(shell) => Classification::Degenerate { shell },
        None => Classification::DecayingHs { s_max: theta / 3.0 },
    };
    let amplitude = coeffs[n] / mu.powi(n as i32);
    Ok(EigenProblem {
        channel: Channel::Magnetic(q),
        lambda,
        theta,
        coeffs,
        alphas,
        classification,
        amplitude,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionValue {
    pub value: f64,
    /// `|value(depth) − value(depth − 1)|`; `NaN` at depth 1.
    pub delta: f64,
}

/// `[α_1, α_2, …] = 1/(Aα_1 + A/(Aα_2 + A/(…)))` truncated after `depth`
/// levels with a zero tail. `alpha(i)` supplies `α_i` for `i = 1..=depth`.
pub fn continued_fraction<F: Fn(usize) -> f64>(
    alpha: F,
    a: f64,
    depth: usize,
) -> Result<FractionValue, LinstabError> {
    if depth == 0 {
        return Err(LinstabError::InvalidParameter("depth must be >= 1".into()));
    }
    let full = evaluate_fraction(&alpha, a, depth)?;
    let delta = if depth == 1 {
        f64::NAN
    } else {
        (full - evaluate_fraction(&alpha, a, depth - 1)?).abs()
    };
    Ok(FractionValue { value: full, delta })
}

fn evaluate_fraction<F: Fn(usize) -> f64>(
    alpha: &F,
    a: f64,
    depth: usize,
) -> Result<f64, LinstabError> {
    let mut tail = 0.0;
    for level in (1..=depth).rev() {
        let denominator = a * alpha(level) + a * tail;
        if denominator == 0.0 {
            return Err(LinstabError::ZeroDenominator { level });
        }
        tail = 1.0 / denominator;
    }
    Ok(tail)
}

/// Fraction constant under which the ratios `r_j = c_j/c_{j−1}` of the
/// decaying velocity solution satisfy `r_j = [α_j, α_{j+1}, …]`:
/// `A = 1/(2μ²) = λ^{2θ/3}/2`.
pub fn recursion_fraction_constant(lambda: f64, theta: f64) -> f64 {
    0.5 * lambda.powf(2.0 * theta / 3.0)
}

/// The constant printed alongside the fraction, `λ^{3θ/2}`.
pub fn printed_fraction_constant(lambda: f64, theta: f64) -> f64 {
    lambda.powf(1.5 * theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRequest {
    /// `true` for the velocity channel, `false` for the magnetic one.
    pub velocity: bool,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub lambda: f64,
    pub theta: f64,
    pub n: usize,
    pub kind: ModelKind,
    /// `±1`, the sign of `A₀` of the steady state.
    pub a0_sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub value: f64,
    /// Velocity: `|e_n|`. Magnetic: `d_n λ_n^{θ/3}`.
    pub growth_functional: f64,
    /// Velocity: the growing-mode amplitude changes sign (or vanishes)
    /// between this grid value and the next. Magnetic: not degenerate.
    pub admissible: bool,
    pub classification: Classification,
    /// Magnetic only: `q > 0`, so the mode grows in time.
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Admissible velocity eigenvalues located by bisection.
    pub roots: Vec<f64>,
    /// Roots in the half-line excluded by the stability theorems
    /// (`p ≥ 0` for `A₀ = 1`, `p ≤ 0` for `A₀ = −1`).
    pub forbidden: Vec<f64>,
    /// Magnetic values detected as degenerate.
    pub degenerate: Vec<f64>,
    /// The growth functional had not settled at `n` for some row.
    pub inconclusive: bool,
}

/// Scans the grid `from, from + step, …, to`.
pub fn eigen_scan(req: &ScanRequest) -> Result<ScanReport, LinstabError> {
    if !(req.step > 0.0 && req.from.is_finite() && req.to.is_finite() && req.to >= req.from) {
        return Err(LinstabError::InvalidParameter(format!(
            "grid [{}, {}] step {}",
            req.from, req.to, req.step
        )));
    }
    let count = ((req.to - req.from) / req.step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| req.from + i as f64 * req.step).collect();
    if req.velocity {
        velocity_scan(req, &grid)
    } else {
        magnetic_scan(req, &grid)
    }
}

fn velocity_scan(req: &ScanRequest, grid: &[f64]) -> Result<ScanReport, LinstabError> {
    let mu = req.lambda.powf(-req.theta / 3.0);
    let amplitude = |p: f64| -> (f64, bool) {
        let alphas = alphas(req.lambda, req.theta, req.a0_sign.signum(), p, req.n);
        let e = dominant_amplitudes(&alphas, mu);
        let last = e[req.n];
        let earlier = e[3 * req.n / 4];
        let scale = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (last, (last - earlier).abs() <= 1e-8 * scale)
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut classes = Vec::with_capacity(grid.len());
    let mut inconclusive = false;
    for &p in grid {
        let (e, settled) = amplitude(p);
        inconclusive |= !settled;
        values.push(e);
        classes.push(
            velocity_eigenvector(p, req.lambda, req.theta, req.n, req.a0_sign)?.classification,
        );
    }
    let mut roots = Vec::new();
    let mut rows = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let change = values[i] == 0.0
            || (i + 1 < grid.len()
                && values[i].signum() != values[i + 1].signum()
                && values[i + 1] != 0.0);
        if change {
            let root = if values[i] == 0.0 {
                grid[i]
            } else {
                bisect(|p| amplitude(p).0, grid[i], grid[i + 1])
            };
            roots.push(root);
        }
        rows.push(ScanRow {
            value: grid[i],
            growth_functional: values[i].abs(),
            admissible: change,
            classification: classes[i],
            unstable: false,
        });
    }
    let forbidden = roots
        .iter()
        .copied()
        .filter(|&p| {
            if req.a0_sign >= 0.0 {
                p >= 0.0
            } else {
                p <= 0.0
            }
        })
        .collect();
    Ok(ScanReport {
        rows,
        roots,
        forbidden,
        degenerate: Vec::new(),
        inconclusive,
    })
}

fn magnetic_scan(req: &ScanRequest, grid: &[f64]) -> Result<ScanReport, LinstabError> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut degenerate = Vec::new();
    let mut inconclusive = false;
    for &q in grid {
        let ev = magnetic_eigenvector(q, req.lambda, req.theta, req.n, req.kind, req.a0_sign)?;
        let admissible = !matches!(ev.classification, Classification::Degenerate { .. });
        if admissible {
            let r = ev.rescaled();
            let (last, earlier) = (r[req.n], r[3 * req.n / 4]);
            inconclusive |= (last - earlier).abs() > 1e-8 * last.abs().max(1.0);
        } else {
            degenerate.push(q);
        }
        rows.push(ScanRow {
            value: q,
            growth_functional: ev.amplitude,
            admissible,
            classification: ev.classification,
            unstable: q > 0.0,
        });
    }
    Ok(ScanReport {
        rows,
        roots: Vec::new(),
        forbidden: Vec::new(),
        degenerate,
        inconclusive,
    })
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(a0: f64) -> Base {
        Base::new(ModelKind::MhdForward, a0, 0.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn linearized_velocity_example() {
        let mut omega = vec![0.0; 5];
        omega[0] = 1.0;
        let s = PerturbationState {
            omega,
            zeta: vec![0.0; 5],
            epsilon: 0.0,
            base: base(1.0),
        };
        let (dw, dz) = perturbation_rhs(&s).unwrap();
        assert!((dw[0] + 2f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((dw[1] - 2.0).abs() < 1e-14);
        assert!(dw[2..].iter().all(|&x| x == 0.0));
        assert!(dz.iter().all(|&x| x == 0.0));

        let neg = PerturbationState {
            base: base(-1.0),
            ..s.clone()
        };
        let (dn, _) = perturbation_rhs(&neg).unwrap();
        for (x, y) in dw.iter().zip(&dn) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn zero_perturbation() {
        let s = PerturbationState {
            omega: vec![0.0; 4],
            zeta: vec![0.0; 4],
            epsilon: 0.3,
            base: Base::new(ModelKind::MhdBidirectional, 2f64.sqrt(), 1.0, 2.0, 1.0).unwrap(),
        };
        let (dw, dz) = perturbation_rhs(&s).unwrap();
        assert!(dw.iter().chain(&dz).all(|&x| x == 0.0));
    }

    #[test]
    fn velocity_recursion_examples() {
        let ev = velocity_eigenvector(-1.0, 2.0, 1.0, 10, 1.0).unwrap();
        let mu = 2f64.powf(-1.0 / 3.0);
        assert!((ev.coeffs[1] - (1.0 - mu)).abs() < 1e-15);
        assert!((ev.coeffs[1] - 0.20630).abs() < 1e-5);
        let c2 = -(mu - 2f64.powf(-2.0 / 3.0)) * (1.0 - mu) + 2.0 * mu * mu;
        assert!((ev.coeffs[2] - c2).abs() < 1e-15);
        assert!((ev.coeffs[2] - 1.22614).abs() < 1e-5);

        let zero = velocity_eigenvector(0.0, 2.0, 1.0, 200, 1.0).unwrap();
        assert!((zero.coeffs[1] + mu).abs() < 1e-15);
        assert_eq!(zero.classification, Classification::Growing);
        assert!((zero.amplitude - 2.0 / 3.0).abs() < 1e-12);
        assert!(zero.coeffs.windows(2).take(20).all(|w| w[0] * w[1] < 0.0));
    }

    #[test]
    fn magnetic_recursion_examples() {
        let ev = magnetic_eigenvector(0.0, 2.0, 1.0, 30, ModelKind::MhdForward, 1.0).unwrap();
        for (j, d) in ev.coeffs.iter().enumerate() {
            assert!((d - 2f64.powf(-(j as f64) / 3.0)).abs() < 1e-15);
        }
        let ev = magnetic_eigenvector(1.0, 2.0, 1.0, 30, ModelKind::MhdForward, 1.0).unwrap();
        let d1 = 1.0 + 2f64.powf(-1.0 / 3.0);
        let d2 = d1 * (2f64.powf(-2.0 / 3.0) + 2f64.powf(-1.0 / 3.0));
        assert!((ev.coeffs[1] - d1).abs() < 1e-15 && (ev.coeffs[1] - 1.79370).abs() < 1e-5);
        assert!((ev.coeffs[2] - d2).abs() < 1e-15 && (ev.coeffs[2] - 2.55363).abs() < 1e-5);

        let q = -2f64.powf(-1.0 / 3.0);
        let ev = magnetic_eigenvector(q, 2.0, 1.0, 10, ModelKind::MhdForward, 1.0).unwrap();
        assert_eq!(ev.classification, Classification::Degenerate { shell: 0 });
        assert!(ev.coeffs[1..].iter().all(|&d| d == 0.0));
        assert!(magnetic_eigenvector(1.0, 2.0, 1.0, 10, ModelKind::Euler, 1.0).is_err());
    }

    #[test]
    fn continued_fraction_examples() {
        let a: f64 = 2f64.powf(1.5);
        let alpha = 2f64.powf(-1.0 / 3.0);
        let v = continued_fraction(|_| alpha, a, 200).unwrap();
        let closed = 2.0 / (a * alpha + (a * a * alpha * alpha + 4.0 * a).sqrt());
        assert!((v.value - closed).abs() < 1e-12);
        assert!((v.value - 0.31802).abs() < 1e-5);
        let one = continued_fraction(|_| 0.7, a, 1).unwrap();
        assert_eq!(one.value, 1.0 / (a * 0.7));
        assert!(one.delta.is_nan());
        assert_eq!(
            continued_fraction(|i| if i == 2 { 0.0 } else { 1.0 }, 1.0, 2),
            Err(LinstabError::ZeroDenominator { level: 2 })
        );
    }

    #[test]
    fn product_formula_differs_from_recursion() {
        let rec = velocity_eigenvector(-1.0, 2.0, 1.0, 6, 1.0).unwrap().coeffs;
        let prod = velocity_product_formula(-1.0, 2.0, 1.0, 6, 1.0);
        assert_eq!(prod.len(), rec.len());
        assert!(rec.iter().zip(&prod).any(|(r, p)| (r - p).abs() > 1e-3));
    }
}
