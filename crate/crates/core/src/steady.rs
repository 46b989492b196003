//! Explicit steady states of the forced systems and a Newton cross-check.
//!
//! With forcing `f = (f₀, 0, 0, …)` the infinite systems have the families
//!
//! ```text
//! ā_j = A₀ λ^{θ/6} f₀^{1/2} λ_j^{−θ/3},    b̄_j = B₀ λ^{θ/6} f₀^{1/2} λ_j^{−θ/3},
//! ```
//!
//! with `A₀² + B₀² = 1` for the forward model, `A₀² − B₀² = 1` for the
//! bidirectional model and `B₀ = 0, A₀ = ±1` for Euler.
//!
//! The truncated system has no such equilibrium: its top shell keeps
//! receiving the flux that would have passed to shell `k + 1`. [`residual`]
//! therefore reports interior shells and the boundary defect separately, and
//! [`newton_steady`] by default replaces the two top-shell equations by the
//! geometric closure `x_k = λ^{−θ/3} x_{k−1}`, which the families satisfy.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, ModelKind, ModelSpec, Nonlinearity, ShellState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("forcing amplitude f0 must be > 0, got {0}")]
    NonPositiveForcing(f64),
    #[error("amplitudes ({a0}, {b0}) violate the {kind} constraint (defect {defect:e})")]
    Constraint {
        kind: &'static str,
        a0: f64,
        b0: f64,
        defect: f64,
    },
    #[error("parameterization does not apply to the {0} model")]
    WrongParameterization(&'static str),
    #[error(
        "Newton iteration did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Jacobian is singular (largest singular value {0:e})")]
    SingularJacobian(f64),
}

/// Position on the family of steady states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyParam {
    /// Forward model: `(A₀, B₀) = (cos φ, sin φ)`.
    Angle(f64),
    /// Bidirectional model: `(A₀, B₀) = (branch · cosh r, sinh r)`, `branch = ±1`.
    Rapidity { rapidity: f64, branch: f64 },
    /// Euler model: `A₀ = sign(x)`.
    EulerSign(f64),
    /// Explicit amplitudes, checked against the model's constraint.
    Amplitudes { a0: f64, b0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub kind: ModelKind,
    pub a0: f64,
    pub b0: f64,
    pub f0: f64,
    pub lambda: f64,
    pub theta: f64,
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
}

impl FixedPoint {
    pub fn state(&self) -> ShellState {
        ShellState::new(self.a_bar.clone(), self.b_bar.clone())
    }

    /// The model with forcing `(f₀, 0, …)` on the same shells.
    pub fn spec(&self) -> ModelSpec {
        ModelSpec::new(
            self.kind,
            self.lambda,
            Nonlinearity::Theta(self.theta),
            self.a_bar.len() - 1,
            &[self.f0],
        )
        .expect("fixed point parameters were validated")
    }

    /// `λ^{θ/6} f₀^{1/2} λ_j^{−θ/3}`.
    pub fn profile(&self, j: usize) -> f64 {
        profile(self.lambda, self.theta, self.f0, j)
    }
}

fn profile(lambda: f64, theta: f64, f0: f64, j: usize) -> f64 {
    lambda.powf(theta / 6.0) * f0.sqrt() * lambda.powf(-theta * j as f64 / 3.0)
}

/// Defect of the family constraint at `(A₀, B₀)`.
pub fn constraint_defect(kind: ModelKind, a0: f64, b0: f64) -> f64 {
    match kind {
        ModelKind::MhdForward => a0 * a0 + b0 * b0 - 1.0,
        ModelKind::MhdBidirectional => a0 * a0 - b0 * b0 - 1.0,
        ModelKind::Euler => (a0.abs() - 1.0).abs() + b0.abs(),
    }
}

/// Builds the steady state at `param` on shells `0..=n_shells`.
pub fn fixed_point(
    kind: ModelKind,
    lambda: f64,
    theta: f64,
    f0: f64,
    n_shells: usize,
    param: FamilyParam,
) -> Result<FixedPoint, SteadyError> {
    // Validates λ and θ.
    ModelSpec::new(kind, lambda, Nonlinearity::Theta(theta), n_shells, &[])?;
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(SteadyError::NonPositiveForcing(f0));
    }
    let (a0, b0) = match (kind, param) {
        (ModelKind::MhdForward, FamilyParam::Angle(phi)) => (phi.cos(), phi.sin()),
        (ModelKind::MhdBidirectional, FamilyParam::Rapidity { rapidity, branch }) => {
            (branch.signum() * rapidity.cosh(), rapidity.sinh())
        }
        (ModelKind::Euler, FamilyParam::EulerSign(x)) => (if x < 0.0 { -1.0 } else { 1.0 }, 0.0),
        (_, FamilyParam::Amplitudes { a0, b0 }) => {
            let defect = constraint_defect(kind, a0, b0);
            if defect.abs() > 1e-12 * (1.0 + a0 * a0 + b0 * b0) {
                return Err(SteadyError::Constraint {
                    kind: kind.name(),
                    a0,
                    b0,
                    defect,
                });
            }
            (a0, b0)
        }
        _ => return Err(SteadyError::WrongParameterization(kind.name())),
    };
    let shape: Vec<f64> = (0..=n_shells)
        .map(|j| profile(lambda, theta, f0, j))
        .collect();
    Ok(FixedPoint {
        kind,
        a0,
        b0,
        f0,
        lambda,
        theta,
        a_bar: shape.iter().map(|p| a0 * p).collect(),
        b_bar: shape.iter().map(|p| b0 * p).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `rhs` of the truncated system, shell by shell.
    pub da: Vec<f64>,
    pub db: Vec<f64>,
    /// `max |rhs|` over shells `j ≤ k − 1`.
    pub interior_max: f64,
    /// `da_k`, the flux piling up in the top shell.
    pub boundary_defect: f64,
}

pub fn residual(spec: &ModelSpec, candidate: &ShellState) -> Result<Residual, SteadyError> {
    let (da, db) = spec.rhs(candidate)?;
    let k = spec.n_shells();
    let interior_max = da[..k]
        .iter()
        .chain(&db[..k])
        .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(Residual {
        boundary_defect: da[k],
        da,
        db,
        interior_max,
    })
}

/// Ratios of consecutive rescaled amplitudes `A_j = λ_j^{θ/3} a_j`,
/// `B_j = λ_j^{θ/3} b_j`:
/// `c_j = (A_j A_{j+1} + B_j B_{j+1}) / (A_j² + B_j²)`,
/// which equals `A_{j+1}/A_j` (or `B_{j+1}/B_j`) when the rescaled pairs are
/// proportional. `None` marks shells where `A_j = B_j = 0`.
pub fn shell_ratios(
    spec: &ModelSpec,
    candidate: &ShellState,
) -> Result<Vec<Option<f64>>, SteadyError> {
    let (ra, rb) = spec.rescale(candidate, spec.theta() / 3.0)?;
    Ok((0..spec.n_shells())
        .map(|j| {
            let norm = ra[j] * ra[j] + rb[j] * rb[j];
            (norm > 0.0).then(|| (ra[j] * ra[j + 1] + rb[j] * rb[j + 1]) / norm)
        })
        .collect())
}

/// Equations used for the top shell in [`newton_steady`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopClosure {
    /// `a_k = λ^{−θ/3} a_{k−1}` and `b_k = λ^{−θ/3} b_{k−1}`.
    Geometric,
    /// The truncated system's own top-shell equations.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target for `max |F|`.
    pub tol: f64,
    pub max_iter: usize,
    pub closure: TopClosure,
    /// Compare the analytic Jacobian with central differences at the guess.
    pub check_jacobian: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            closure: TopClosure::Geometric,
            check_jacobian: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub state: ShellState,
    pub iterations: usize,
    /// `max |F|` at the returned state.
    pub residual: f64,
    /// Largest over smallest singular value of the final Jacobian.
    pub condition: f64,
    /// Number of singular values treated as zero in the final step.
    pub null_dimension: usize,
    /// Whether the iteration was restarted from the flat profile `√f₀`
    /// because the guess had a vanishing Jacobian.
    pub restarted_from_flat: bool,
    pub jacobian_check: Option<f64>,
}

/// Relative cut-off below which singular values are treated as zero.
const SVD_CUTOFF: f64 = 1e-11;

/// Solves the steady equations of shells `0..k−1` together with the chosen
/// top closure by damped Newton iteration.
///
/// Steps use the SVD pseudo-inverse, so the one-parameter families of the
/// MHD models (singular Jacobian along the family) are handled by a
/// minimum-norm step. A guess with a vanishing Jacobian (such as zero) is
/// replaced by the flat profile `a_j = √f₀`.
pub fn newton_steady(
    spec: &ModelSpec,
    guess: &ShellState,
    opts: &NewtonOptions,
) -> Result<NewtonReport, SteadyError> {
    spec.check_state(guess)?;
    let system = SteadySystem::new(spec, opts.closure);
    let mut x = system.pack(guess);
    let jacobian_check = opts.check_jacobian.then(|| system.jacobian_fd_error(&x));
    let mut restarted_from_flat = false;
    // The right-hand side is quadratic, so its Jacobian vanishes only at 0.
    if x.amax() == 0.0 {
        let f0 = spec.forcing()[0].abs();
        x = system.flat(if f0 > 0.0 { f0.sqrt() } else { 1.0 });
        restarted_from_flat = true;
    }
    let mut f = system.eval(&x);
    let mut iterations = 0;
    loop {
        let jac = system.jacobian(&x);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if !smax.is_finite() || smax <= 0.0 {
            return Err(SteadyError::SingularJacobian(smax));
        }
        let cutoff = SVD_CUTOFF * smax;
        let null_dimension = svd.singular_values.iter().filter(|&&s| s <= cutoff).count();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        let res = f.amax();
        if res <= opts.tol {
            return Ok(NewtonReport {
                state: system.unpack(&x),
                iterations,
                residual: res,
                condition,
                null_dimension,
                restarted_from_flat,
                jacobian_check,
            });
        }
        if iterations >= opts.max_iter {
            return Err(SteadyError::NoConvergence {
                iterations,
                residual: res,
            });
        }
        let step = svd
            .solve(&f, cutoff)
            .map_err(|_| SteadyError::SingularJacobian(smax))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &x - &step * t;
            let ft = system.eval(&trial);
            if ft.norm() < f.norm() || ft.amax() <= opts.tol {
                x = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            return Err(SteadyError::NoConvergence {
                iterations,
                residual: res,
            });
        }
    }
}

/// The algebraic system `F(x) = 0` solved by [`newton_steady`], on
/// `x = [a]` for Euler and `x = [a; b]` otherwise.
struct SteadySystem<'a> {
    spec: &'a ModelSpec,
    closure: TopClosure,
    n: usize,
    magnetic: bool,
}

impl<'a> SteadySystem<'a> {
    fn new(spec: &'a ModelSpec, closure: TopClosure) -> Self {
        Self {
            spec,
            closure,
            n: spec.len(),
            magnetic: spec.kind().has_magnetic_field(),
        }
    }

    fn dim(&self) -> usize {
        if self.magnetic {
            2 * self.n
        } else {
            self.n
        }
    }

    fn pack(&self, s: &ShellState) -> DVector<f64> {
        let mut v = s.a.clone();
        if self.magnetic {
            v.extend_from_slice(&s.b);
        }
        DVector::from_vec(v)
    }

    fn unpack(&self, x: &DVector<f64>) -> ShellState {
        let a = x.as_slice()[..self.n].to_vec();
        let b = if self.magnetic {
            x.as_slice()[self.n..].to_vec()
        } else {
            vec![0.0; self.n]
        };
        ShellState::new(a, b)
    }

    fn flat(&self, value: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        x.rows_mut(0, self.n).fill(value);
        x
    }

    fn ratio(&self) -> f64 {
        self.spec.lambda().powf(-self.spec.theta() / 3.0)
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = self.unpack(x);
        let mut da = vec![0.0; self.n];
        let mut db = vec![0.0; self.n];
        self.spec.rhs_into(&s.a, &s.b, &mut da, &mut db);
        let k = self.n - 1;
        if self.closure == TopClosure::Geometric && k > 0 {
            let mu = self.ratio();
            da[k] = s.a[k] - mu * s.a[k - 1];
            db[k] = s.b[k] - mu * s.b[k - 1];
        }
        if self.magnetic {
            da.extend_from_slice(&db);
        }
        DVector::from_vec(da)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let s = self.unpack(x);
        let (a, b) = (&s.a, &s.b);
        let sigma = self.spec.kind().magnetic_sign();
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        // Columns 0..n are a, n..2n are b; rows likewise da, db.
        for j in 0..n {
            let l = self.spec.coupling(j);
            if j + 1 < n {
                jac[(j, j)] -= l * a[j + 1];
                jac[(j, j + 1)] -= l * a[j];
                jac[(j, n + j)] -= sigma * l * b[j + 1];
                jac[(j, n + j + 1)] -= sigma * l * b[j];
                jac[(n + j, j)] += sigma * l * b[j + 1];
                jac[(n + j, n + j + 1)] += sigma * l * a[j];
                jac[(n + j, n + j)] -= sigma * l * a[j + 1];
                jac[(n + j, j + 1)] -= sigma * l * b[j];
            }
            if j > 0 {
                let lm = self.spec.coupling(j - 1);
                jac[(j, j - 1)] += 2.0 * lm * a[j - 1];
                jac[(j, n + j - 1)] += 2.0 * sigma * lm * b[j - 1];
            }
        }
        let k = n - 1;
        if self.closure == TopClosure::Geometric && k > 0 {
            let mu = self.ratio();
            for row in [k, n + k] {
                jac.row_mut(row).fill(0.0);
            }
            jac[(k, k)] = 1.0;
            jac[(k, k - 1)] = -mu;
            jac[(n + k, n + k)] = 1.0;
            jac[(n + k, n + k - 1)] = -mu;
        }
        if self.magnetic {
            jac
        } else {
            jac.view((0, 0), (n, n)).into_owned()
        }
    }

    /// Largest entry of `|J_analytic − J_central|`.
    fn jacobian_fd_error(&self, x: &DVector<f64>) -> f64 {
        let jac = self.jacobian(x);
        let mut worst = 0.0f64;
        for c in 0..self.dim() {
            let h = 1e-6 * (1.0 + x[c].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let col = (self.eval(&xp) - self.eval(&xm)) / (2.0 * h);
            for r in 0..self.dim() {
                worst = worst.max((col[r] - jac[(r, c)]).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_example_profile() {
        let f0 = 2f64.powf(-1.0 / 3.0);
        let fp = fixed_point(
            ModelKind::MhdForward,
            2.0,
            1.0,
            f0,
            20,
            FamilyParam::Amplitudes { a0: 0.6, b0: 0.8 },
        )
        .unwrap();
        for j in 0..=20 {
            let g = 2f64.powf(-(j as f64) / 3.0);
            assert!((fp.a_bar[j] - 0.6 * g).abs() < 1e-15);
            assert!((fp.b_bar[j] - 0.8 * g).abs() < 1e-15);
        }
        let r = residual(&fp.spec(), &fp.state()).unwrap();
        assert!(r.interior_max <= 1e-12, "{}", r.interior_max);
        // Top shell receives λ_{k−1}^θ(ā² + b̄²) and gives nothing away.
        let k = 20;
        let expected = 2f64.powi(k - 1) * (fp.a_bar[19].powi(2) + fp.b_bar[19].powi(2));
        assert!((r.boundary_defect - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn degenerate_points() {
        let bi = fixed_point(
            ModelKind::MhdBidirectional,
            2.0,
            1.0,
            1.0,
            6,
            FamilyParam::Rapidity {
                rapidity: 0.0,
                branch: 1.0,
            },
        )
        .unwrap();
        assert!(bi.b_bar.iter().all(|&b| b == 0.0));
        assert_eq!(bi.a_bar[0], 2f64.powf(1.0 / 6.0));
        let mag = fixed_point(
            ModelKind::MhdForward,
            2.0,
            1.0,
            1.0,
            6,
            FamilyParam::Amplitudes { a0: 0.0, b0: 1.0 },
        )
        .unwrap();
        assert!(mag.a_bar.iter().all(|&a| a == 0.0));
        assert!(residual(&mag.spec(), &mag.state()).unwrap().interior_max <= 1e-12);
        let ratios = shell_ratios(&mag.spec(), &mag.state()).unwrap();
        assert!(ratios.iter().all(|r| (r.unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn hyperbola_point_is_stationary() {
        let fp = fixed_point(
            ModelKind::MhdBidirectional,
            2.0,
            1.0,
            0.7,
            15,
            FamilyParam::Amplitudes {
                a0: 2f64.sqrt(),
                b0: 1.0,
            },
        )
        .unwrap();
        assert!(residual(&fp.spec(), &fp.state()).unwrap().interior_max <= 1e-12);
    }

    #[test]
    fn rejections() {
        let bad = |kind, f0, param| fixed_point(kind, 2.0, 1.0, f0, 4, param).is_err();
        assert!(bad(ModelKind::MhdForward, 0.0, FamilyParam::Angle(0.0)));
        assert!(bad(
            ModelKind::MhdForward,
            1.0,
            FamilyParam::Amplitudes { a0: 1.0, b0: 1.0 }
        ));
        assert!(bad(ModelKind::Euler, 1.0, FamilyParam::Angle(0.0)));
        assert!(bad(
            ModelKind::Euler,
            1.0,
            FamilyParam::Amplitudes { a0: 1.0, b0: 0.1 }
        ));
    }

    #[test]
    fn zero_state_residual_is_forcing() {
        let spec = ModelSpec::new(
            ModelKind::MhdForward,
            2.0,
            Nonlinearity::Theta(1.0),
            3,
            &[0.5],
        )
        .unwrap();
        let r = residual(&spec, &ShellState::zeros(4)).unwrap();
        assert_eq!(r.da, vec![0.5, 0.0, 0.0, 0.0]);
        assert_eq!(r.interior_max, 0.5);
    }

    #[test]
    fn ratio_recursion_negative_example() {
        let spec = ModelSpec::new(ModelKind::Euler, 2.0, Nonlinearity::Theta(1.0), 5, &[]).unwrap();
        let c0: f64 = 2.0;
        let a: Vec<f64> = (0..6)
            .map(|j| c0.powf((1.0 - (-2f64).powi(j)) / 3.0) * 2f64.powf(-(j as f64) / 3.0))
            .collect();
        let r = shell_ratios(&spec, &ShellState::velocity_only(a)).unwrap();
        let mut expected = c0;
        for x in r {
            let x = x.unwrap();
            assert!((x - expected).abs() < 1e-9 * expected.max(1.0));
            expected = expected.powi(-2);
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        for kind in [
            ModelKind::Euler,
            ModelKind::MhdForward,
            ModelKind::MhdBidirectional,
        ] {
            for closure in [TopClosure::Geometric, TopClosure::Truncated] {
                let spec = ModelSpec::new(kind, 2.0, Nonlinearity::Theta(1.0), 5, &[1.0]).unwrap();
                let sys = SteadySystem::new(&spec, closure);
                let s = ShellState::new(
                    (0..6).map(|j| 0.3 + 0.1 * j as f64).collect(),
                    (0..6).map(|j| 0.2 - 0.07 * j as f64).collect(),
                );
                assert!(
                    sys.jacobian_fd_error(&sys.pack(&s)) < 1e-7,
                    "{kind:?} {closure:?}"
                );
            }
        }
    }

    #[test]
    fn newton_fixed_point_is_unchanged() {
        let fp = fixed_point(
            ModelKind::MhdForward,
            2.0,
            1.0,
            1.0,
            12,
            FamilyParam::Angle(0.9),
        )
        .unwrap();
        let r = newton_steady(&fp.spec(), &fp.state(), &NewtonOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.state, fp.state());
    }

    #[test]
    fn newton_euler_from_zero() {
        let spec =
            ModelSpec::new(ModelKind::Euler, 2.0, Nonlinearity::Theta(1.0), 4, &[1.0]).unwrap();
        let r = newton_steady(&spec, &ShellState::zeros(5), &NewtonOptions::default()).unwrap();
        assert!(r.restarted_from_flat);
        let fp = fixed_point(
            ModelKind::Euler,
            2.0,
            1.0,
            1.0,
            4,
            FamilyParam::EulerSign(1.0),
        )
        .unwrap();
        for j in 0..5 {
            assert!(
                (r.state.a[j] - fp.a_bar[j]).abs() < 1e-10,
                "{j}: {:?}",
                r.state.a
            );
        }
    }
}
