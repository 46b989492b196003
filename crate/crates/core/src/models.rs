//! The three dyadic systems and their Galerkin truncations.
//!
//! Shells are indexed from `j = 0` with wavenumbers `λ_j = λ^j`. A model
//! truncated at index `k` carries shells `0..=k`; its right-hand side is the
//! infinite system evaluated with `a_{k+1} = b_{k+1} = 0`. For the forward
//! MHD model this is exactly the classical Galerkin truncation (the top shell
//! keeps its inflow, `db_k = 0`), and the same closure is used for the other
//! two models so that the energy and cross-helicity telescopes survive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shell spacing lambda must be finite and > 1, got {0}")]
    InvalidLambda(f64),
    #[error("nonlinearity exponent theta must be finite and > 0, got {0}")]
    InvalidTheta(f64),
    #[error("intermittency dimension delta must lie in [0, 3], got {0}")]
    InvalidDelta(f64),
    #[error("forcing has {got} entries but the model only has {shells} shells")]
    ForcingTooLong { got: usize, shells: usize },
    #[error("forcing entry f_{index} is not finite")]
    NonFiniteForcing { index: usize },
    #[error("state has {a} velocity and {b} magnetic entries, model expects {expected}")]
    DimensionMismatch { a: usize, b: usize, expected: usize },
    #[error("state entry {field}_{index} is not finite")]
    NonFiniteState { field: char, index: usize },
    #[error("rescaling overflowed at shell {index}")]
    Overflow { index: usize },
}

/// Which dyadic system is being evolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// The forced KP model for the Euler equation (`b` is ignored).
    Euler,
    /// MHD model with a uni-directional energy cascade.
    MhdForward,
    /// MHD model with forward and backward cascades; conserves cross helicity.
    MhdBidirectional,
}

impl ModelKind {
    /// Sign multiplying every magnetic term: `+1`, `-1`, or `0` for Euler.
    pub fn magnetic_sign(self) -> f64 {
        match self {
            ModelKind::Euler => 0.0,
            ModelKind::MhdForward => 1.0,
            ModelKind::MhdBidirectional => -1.0,
        }
    }

    pub fn has_magnetic_field(self) -> bool {
        !matches!(self, ModelKind::Euler)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Euler => "euler",
            ModelKind::MhdForward => "mhd_forward",
            ModelKind::MhdBidirectional => "mhd_bidirectional",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euler" | "kp" => Ok(ModelKind::Euler),
            "mhd_forward" | "forward" => Ok(ModelKind::MhdForward),
            "mhd_bidirectional" | "bidirectional" => Ok(ModelKind::MhdBidirectional),
            other => Err(format!(
                "unknown model '{other}' (expected euler, mhd_forward or mhd_bidirectional)"
            )),
        }
    }
}

/// How the nonlinearity exponent is supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Theta(f64),
    /// Intermittency dimension `δ ∈ [0, 3]`, mapped to `θ = (5 − δ)/2`.
    Delta(f64),
}

impl Nonlinearity {
    pub fn theta(self) -> Result<f64, ModelError> {
        match self {
            Nonlinearity::Theta(t) => {
                if t.is_finite() && t > 0.0 {
                    Ok(t)
                } else {
                    Err(ModelError::InvalidTheta(t))
                }
            }
            Nonlinearity::Delta(d) => {
                if d.is_finite() && (0.0..=3.0).contains(&d) {
                    Ok((5.0 - d) / 2.0)
                } else {
                    Err(ModelError::InvalidDelta(d))
                }
            }
        }
    }
}

/// A validated, truncated dyadic model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    kind: ModelKind,
    lambda: f64,
    theta: f64,
    forcing: Vec<f64>,
    /// `λ_j^θ` for `j = 0..=k`.
    #[serde(skip)]
    coupling: Vec<f64>,
}

impl ModelSpec {
    /// Builds a model truncated at shell index `n_shells` (shells `0..=n_shells`).
    /// The forcing is zero-padded to `n_shells + 1` entries.
    pub fn new(
        kind: ModelKind,
        lambda: f64,
        nonlinearity: Nonlinearity,
        n_shells: usize,
        forcing: &[f64],
    ) -> Result<Self, ModelError> {
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(ModelError::InvalidLambda(lambda));
        }
        let theta = nonlinearity.theta()?;
        if forcing.len() > n_shells + 1 {
            return Err(ModelError::ForcingTooLong {
                got: forcing.len(),
                shells: n_shells + 1,
            });
        }
        if let Some(index) = forcing.iter().position(|f| !f.is_finite()) {
            return Err(ModelError::NonFiniteForcing { index });
        }
        let mut padded = forcing.to_vec();
        padded.resize(n_shells + 1, 0.0);
        let coupling = (0..=n_shells)
            .map(|j| shell_wavenumber(lambda, j).powf(theta))
            .collect();
        Ok(Self {
            kind,
            lambda,
            theta,
            forcing: padded,
            coupling,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Truncation index `k`; the model has `k + 1` shells.
    pub fn n_shells(&self) -> usize {
        self.forcing.len() - 1
    }

    pub fn len(&self) -> usize {
        self.forcing.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    /// `λ_j = λ^j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        shell_wavenumber(self.lambda, j)
    }

    /// `λ_j^θ`, the coupling strength between shells `j` and `j + 1`.
    pub fn coupling(&self, j: usize) -> f64 {
        self.coupling[j]
    }

    /// The same model with a different truncation index; forcing beyond the
    /// old top shell is zero, forcing above the new top shell is dropped.
    pub fn with_shells(&self, n_shells: usize) -> Self {
        let mut forcing = self.forcing.clone();
        forcing.resize(n_shells + 1, 0.0);
        Self::new(
            self.kind,
            self.lambda,
            Nonlinearity::Theta(self.theta),
            n_shells,
            &forcing,
        )
        .expect("parameters were already validated")
    }

    pub fn with_kind(&self, kind: ModelKind) -> Self {
        let mut out = self.clone();
        out.kind = kind;
        out
    }

    pub fn check_state(&self, state: &ShellState) -> Result<(), ModelError> {
        self.check_slices(&state.a, &state.b)
    }

    fn check_slices(&self, a: &[f64], b: &[f64]) -> Result<(), ModelError> {
        if a.len() != self.len() || b.len() != self.len() {
            return Err(ModelError::DimensionMismatch {
                a: a.len(),
                b: b.len(),
                expected: self.len(),
            });
        }
        if let Some(index) = a.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteState { field: 'a', index });
        }
        if let Some(index) = b.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteState { field: 'b', index });
        }
        Ok(())
    }

    /// Right-hand side `(da, db)` of the truncated system.
    pub fn rhs(&self, state: &ShellState) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        self.check_state(state)?;
        let mut da = vec![0.0; self.len()];
        let mut db = vec![0.0; self.len()];
        self.rhs_into(&state.a, &state.b, &mut da, &mut db);
        Ok((da, db))
    }

    /// Unchecked right-hand side writing into caller-owned buffers.
    ///
    /// All slices must have length `k + 1`.
    pub fn rhs_into(&self, a: &[f64], b: &[f64], da: &mut [f64], db: &mut [f64]) {
        let n = self.len();
        let sigma = self.kind.magnetic_sign();
        let mut inflow = 0.0;
        for j in 0..n {
            let (a_next, b_next) = if j + 1 < n {
                (a[j + 1], b[j + 1])
            } else {
                (0.0, 0.0)
            };
            let l = self.coupling[j];
            da[j] = -l * (a[j] * a_next + sigma * b[j] * b_next) + inflow + self.forcing[j];
            db[j] = sigma * l * (a[j] * b_next - b[j] * a_next);
            inflow = l * (a[j] * a[j] + sigma * b[j] * b[j]);
        }
    }

    /// Energy flux `Π_j` (or `Π̃_j` for the bidirectional model) across each
    /// interior interface `j → j + 1`, `j = 0..k−1`.
    pub fn flux(&self, state: &ShellState) -> Result<FluxProfile, ModelError> {
        self.check_state(state)?;
        let sigma = self.kind.magnetic_sign();
        let values = (0..self.n_shells())
            .map(|j| {
                let (a, b) = (state.a[j], state.b[j]);
                self.coupling[j] * (a * a + sigma * b * b) * state.a[j + 1]
            })
            .collect();
        let variant = match self.kind {
            ModelKind::MhdBidirectional => FluxVariant::Signed,
            _ => FluxVariant::Forward,
        };
        Ok(FluxProfile { values, variant })
    }

    /// Flux that the truncation discards at the top shell: the inflow the
    /// (missing) shell `k + 1` would receive.
    pub fn boundary_flux(&self, state: &ShellState) -> f64 {
        let k = self.n_shells();
        let sigma = self.kind.magnetic_sign();
        let (a, b) = (state.a[k], state.b[k]);
        self.coupling[k] * (a * a + sigma * b * b)
    }

    /// `(λ_j^e a_j, λ_j^e b_j)`.
    pub fn rescale(
        &self,
        state: &ShellState,
        exponent: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        self.check_state(state)?;
        if !exponent.is_finite() {
            return Err(ModelError::Overflow { index: 0 });
        }
        let mut wa = Vec::with_capacity(self.len());
        let mut wb = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            let w = self.wavenumber(j).powf(exponent);
            let (x, y) = (w * state.a[j], w * state.b[j]);
            if !(x.is_finite() && y.is_finite()) {
                return Err(ModelError::Overflow { index: j });
            }
            wa.push(x);
            wb.push(y);
        }
        Ok((wa, wb))
    }
}

/// `λ^j`, computed by exponentiation so that large `j` stay accurate.
pub fn shell_wavenumber(lambda: f64, j: usize) -> f64 {
    lambda.powi(j as i32)
}

/// Velocity and magnetic shell amplitudes at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellState {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t: f64,
}

impl ShellState {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        Self { a, b, t: 0.0 }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len], vec![0.0; len])
    }

    /// A velocity-only state (Euler data), `b ≡ 0`.
    pub fn velocity_only(a: Vec<f64>) -> Self {
        let b = vec![0.0; a.len()];
        Self::new(a, b)
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.b).all(|x| x.is_finite()) && self.t.is_finite()
    }

    /// Packs `[a_0..a_k, b_0..b_k]` into one vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = self.a.clone();
        y.extend_from_slice(&self.b);
        y
    }

    pub fn from_flat(y: &[f64], t: f64) -> Self {
        let n = y.len() / 2;
        Self {
            a: y[..n].to_vec(),
            b: y[n..].to_vec(),
            t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluxVariant {
    /// `Π_j = λ_j^θ (a_j² + b_j²) a_{j+1}`.
    Forward,
    /// `Π̃_j = λ_j^θ (a_j² − b_j²) a_{j+1}`.
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxProfile {
    pub values: Vec<f64>,
    pub variant: FluxVariant,
}
