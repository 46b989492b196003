use dyadic_core::diagnostics::{
    cross_helicity, energy, lyapunov_pair, psi_squared_bound_check, riccati_blowup_bound,
    sobolev_norm, weak_distance, LyapunovParams,
};
use dyadic_core::integrator::{
    integrate, EventKind, EventSpec, IntegratorConfig, Method, NormThreshold,
};
use dyadic_core::linstab::{
    continued_fraction, magnetic_eigenvector, perturbation_rhs, Base, PerturbationState,
};
use dyadic_core::models::{ModelKind, ModelSpec, Nonlinearity, ShellState};
use dyadic_core::steady::{fixed_point, residual, shell_ratios, FamilyParam};
use proptest::prelude::*;

const KINDS: [ModelKind; 3] = [
    ModelKind::Euler,
    ModelKind::MhdForward,
    ModelKind::MhdBidirectional,
];

fn kind() -> impl Strategy<Value = ModelKind> {
    prop::sample::select(KINDS.to_vec())
}

/// A model with `k ≤ 30`, θ ∈ [1, 5/2], λ ∈ (1, 3] and a random forcing, plus
/// a matching state (with `b = 0` for Euler).
fn model_and_state() -> impl Strategy<Value = (ModelSpec, ShellState)> {
    (kind(), 1.1f64..3.0, 1.0f64..2.5, 1usize..=30).prop_flat_map(|(kind, lambda, theta, k)| {
        let n = k + 1;
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
            .prop_map(move |(a, b, f)| {
                let spec = ModelSpec::new(kind, lambda, Nonlinearity::Theta(theta), k, &f).unwrap();
                let b = if kind == ModelKind::Euler {
                    vec![0.0; n]
                } else {
                    b
                };
                (spec, ShellState::new(a, b))
            })
    })
}

/// Sum of absolute values of the products entering an identity, used as the
/// scale for its relative tolerance.
fn scale(terms: impl Iterator<Item = f64>) -> f64 {
    terms.map(f64::abs).sum::<f64>().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn energy_telescopes((spec, s) in model_and_state()) {
        let (da, db) = spec.rhs(&s).unwrap();
        let lhs: f64 = (0..s.len()).map(|j| s.a[j] * da[j] + s.b[j] * db[j]).sum();
        let rhs: f64 = (0..s.len()).map(|j| spec.forcing()[j] * s.a[j]).sum();
        let magnitude = scale((0..s.len()).flat_map(|j| {
            let l = spec.coupling(j);
            let bulk = l * (s.a[j].powi(2) + s.b[j].powi(2)) * (s.a[j].abs() + s.b[j].abs() + 1.0);
            [bulk * 2.0, s.a[j] * spec.forcing()[j]]
        }));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * magnitude, "{lhs} vs {rhs}");
    }

    #[test]
    fn cross_helicity_telescopes((spec, s) in model_and_state()) {
        let spec = spec.with_kind(ModelKind::MhdBidirectional);
        let (da, db) = spec.rhs(&s).unwrap();
        let lhs: f64 = (0..s.len()).map(|j| da[j] * s.b[j] + s.a[j] * db[j]).sum();
        let rhs: f64 = (0..s.len()).map(|j| spec.forcing()[j] * s.b[j]).sum();
        let magnitude = scale((0..s.len()).flat_map(|j| {
            let l = spec.coupling(j);
            let bulk = l * (s.a[j].powi(2) + s.b[j].powi(2)) * (s.a[j].abs() + s.b[j].abs() + 1.0);
            [bulk * 2.0, s.b[j] * spec.forcing()[j]]
        }));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * magnitude, "{lhs} vs {rhs}");
    }

    #[test]
    fn magnetic_models_embed_euler((spec, s) in model_and_state()) {
        let fluid = ShellState::velocity_only(s.a.clone());
        let (euler, _) = spec.with_kind(ModelKind::Euler).rhs(&fluid).unwrap();
        for kind in [ModelKind::MhdForward, ModelKind::MhdBidirectional] {
            let (da, db) = spec.with_kind(kind).rhs(&fluid).unwrap();
            prop_assert_eq!(&da, &euler);
            prop_assert!(db.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn coupling_is_nearest_neighbour((spec, s) in model_and_state(), pick in 0usize..31, bump in 0.1f64..1.0) {
        let j = pick % s.len();
        let (da0, db0) = spec.rhs(&s).unwrap();
        let mut moved = s.clone();
        moved.a[j] += bump;
        let (da1, db1) = spec.rhs(&moved).unwrap();
        for i in 0..s.len() {
            if i + 1 < j || i > j + 1 {
                prop_assert_eq!(da0[i], da1[i]);
                prop_assert_eq!(db0[i], db1[i]);
            }
        }
    }

    #[test]
    fn phi_is_nonnegative_and_vanishes_only_at_zero((spec, s) in model_and_state(), gamma in 0.1f64..1.3, c0 in 0.01f64..0.99) {
        let p = LyapunovParams { s: 1.0, gamma, c0 };
        let (phi, _) = lyapunov_pair(&s, &spec, &p);
        prop_assert!(phi >= 0.0);
        let zero = s.a.iter().chain(&s.b).all(|&x| x == 0.0);
        prop_assert_eq!(phi == 0.0, zero);
        prop_assert!(psi_squared_bound_check(&s, &spec, &p));
    }

    #[test]
    fn psi_is_positive_on_positive_states((spec, s) in model_and_state()) {
        let p = LyapunovParams { s: 0.5, gamma: 1.0, c0: 0.1 };
        let positive = ShellState::new(
            s.a.iter().map(|x| x.abs() + 1e-3).collect(),
            s.b.iter().map(|x| x.abs() + 1e-3).collect(),
        );
        prop_assert!(lyapunov_pair(&positive, &spec, &p).1 > 0.0);
    }

    #[test]
    fn energy_is_half_the_l2_norms((spec, s) in model_and_state()) {
        let l2a = sobolev_norm(&s.a, 0.0, spec.lambda()).unwrap();
        let l2b = sobolev_norm(&s.b, 0.0, spec.lambda()).unwrap();
        let e = energy(&s);
        prop_assert!((e - 0.5 * (l2a * l2a + l2b * l2b)).abs() <= 1e-14 * e.max(1.0));
    }

    #[test]
    fn weak_distance_is_a_bounded_symmetric_metric(
        u in prop::collection::vec(-5.0f64..5.0, 0..12),
        v in prop::collection::vec(-5.0f64..5.0, 0..12),
        lambda in 1.1f64..4.0,
    ) {
        let d = weak_distance(&u, &v, lambda);
        prop_assert_eq!(d, weak_distance(&v, &u, lambda));
        let cap: f64 = (0..12).map(|n| lambda.powf(-((n * n) as f64))).sum();
        prop_assert!(d >= 0.0 && d < cap);
        prop_assert_eq!(weak_distance(&u, &u, lambda), 0.0);
    }

    #[test]
    fn riccati_bound_decreases_with_psi0(k in 0.01f64..10.0, f0 in 0.0f64..5.0, psi0 in 0.01f64..100.0, bump in 0.01f64..10.0) {
        let t0 = riccati_blowup_bound(psi0, k, f0).unwrap();
        let t1 = riccati_blowup_bound(psi0 + bump, k, f0).unwrap();
        prop_assert!(t1 < t0);
    }

    #[test]
    fn fixed_points_lie_on_their_profiles(
        angle in -3.2f64..3.2,
        rapidity in -2.0f64..2.0,
        branch in prop::bool::ANY,
        lambda in 1.2f64..3.0,
        theta in 1.0f64..2.5,
        f0 in 0.1f64..4.0,
    ) {
        let k = 15;
        let params = [
            (ModelKind::MhdForward, FamilyParam::Angle(angle)),
            (ModelKind::MhdBidirectional, FamilyParam::Rapidity { rapidity, branch: if branch { 1.0 } else { -1.0 } }),
            (ModelKind::Euler, FamilyParam::EulerSign(angle)),
        ];
        for (kind, param) in params {
            let fp = fixed_point(kind, lambda, theta, f0, k, param).unwrap();
            let spec = fp.spec();
            let sign = kind.magnetic_sign();
            for j in 0..=k {
                let lhs = fp.a_bar[j].powi(2) + sign * fp.b_bar[j].powi(2);
                let rhs = lambda.powf(theta / 3.0) * f0 * spec.wavenumber(j).powf(-2.0 * theta / 3.0);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }
            // Each interior row cancels terms of size λ_j^θ ā_j ā_{j+1}.
            let r = residual(&spec, &fp.state()).unwrap();
            for j in 0..k {
                let size = spec.coupling(j) * (fp.a_bar[j].abs() + fp.b_bar[j].abs()).powi(2) + f0;
                prop_assert!(r.da[j].abs() <= 1e-13 * size && r.db[j].abs() <= 1e-13 * size);
            }
            for ratio in shell_ratios(&spec, &fp.state()).unwrap() {
                prop_assert!((ratio.unwrap() - 1.0).abs() <= 1e-12);
            }
            let doubled = fixed_point(kind, lambda, theta, 2.0 * f0, k, param).unwrap();
            for j in 0..=k {
                let want = 2f64.sqrt() * fp.a_bar[j];
                prop_assert!((doubled.a_bar[j] - want).abs() <= 4.0 * f64::EPSILON * want.abs());
            }
        }
    }

    #[test]
    fn channels_decouple_without_magnetic_base(
        omega in prop::collection::vec(-1.0f64..1.0, 2..20),
        a0 in prop::sample::select(vec![1.0, -1.0]),
        kind in kind(),
    ) {
        let n = omega.len();
        let base = Base::new(kind, a0, 0.0, 2.0, 1.0).unwrap();
        let velocity = PerturbationState { omega: omega.clone(), zeta: vec![0.0; n], epsilon: 0.0, base };
        let (_, dz) = perturbation_rhs(&velocity).unwrap();
        prop_assert!(dz.iter().all(|&x| x == 0.0));
        let magnetic = PerturbationState { omega: vec![0.0; n], zeta: omega, epsilon: 0.0, base };
        let (dw, _) = perturbation_rhs(&magnetic).unwrap();
        prop_assert!(dw.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn perturbation_equations_match_the_model(
        omega in prop::collection::vec(-1.0f64..1.0, 12),
        zeta in prop::collection::vec(-1.0f64..1.0, 12),
        epsilon in 0.0f64..0.5,
        angle in -3.2f64..3.2,
        rapidity in -1.5f64..1.5,
        kind in kind(),
    ) {
        let (lambda, theta, k) = (2.0f64, 1.0f64, 11);
        let f0 = lambda.powf(-theta / 3.0);
        let param = match kind {
            ModelKind::MhdForward => FamilyParam::Angle(angle),
            ModelKind::MhdBidirectional => FamilyParam::Rapidity { rapidity, branch: 1.0 },
            ModelKind::Euler => FamilyParam::EulerSign(angle),
        };
        let fp = fixed_point(kind, lambda, theta, f0, k, param).unwrap();
        let zeta = if kind == ModelKind::Euler { vec![0.0; 12] } else { zeta };
        let spec = fp.spec();
        let moved = ShellState::new(
            (0..=k).map(|j| fp.a_bar[j] + epsilon * omega[j]).collect(),
            (0..=k).map(|j| fp.b_bar[j] + epsilon * zeta[j]).collect(),
        );
        let (da, db) = spec.rhs(&moved).unwrap();
        let (da0, db0) = spec.rhs(&fp.state()).unwrap();
        let base = Base::new(kind, fp.a0, fp.b0, lambda, theta).unwrap();
        let (dw, dz) = perturbation_rhs(&PerturbationState { omega, zeta, epsilon, base }).unwrap();
        // The top shell differs: the model truncates ā_{k+1} as well.
        for j in 0..k {
            let size = spec.coupling(j) * 16.0 + 1.0;
            if epsilon > 1e-3 {
                prop_assert!(((da[j] - da0[j]) / epsilon - dw[j]).abs() <= 1e-9 * size);
                prop_assert!(((db[j] - db0[j]) / epsilon - dz[j]).abs() <= 1e-9 * size);
            }
        }
    }

    #[test]
    fn magnetic_ratios_stay_in_their_envelope(q in -5.0f64..5.0, kind in prop::sample::select(vec![ModelKind::MhdForward, ModelKind::MhdBidirectional]), a0 in prop::sample::select(vec![1.0, -1.0])) {
        let ev = magnetic_eigenvector(q, 2.0, 1.0, 80, kind, a0).unwrap();
        let mu = 2f64.powf(-1.0 / 3.0);
        for j in 0..80 {
            if ev.coeffs[j] == 0.0 {
                break;
            }
            let ratio = ev.coeffs[j + 1] / ev.coeffs[j];
            let envelope = q.abs() * 2f64.powf(-2.0 * j as f64 / 3.0);
            prop_assert!((ratio - mu).abs() <= envelope * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn continued_fraction_is_positive_for_positive_alphas(
        alphas in prop::collection::vec(0.01f64..5.0, 1..60),
        a in 0.1f64..10.0,
    ) {
        let v = continued_fraction(|i| alphas[i - 1], a, alphas.len()).unwrap();
        prop_assert!(v.value > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unforced_runs_conserve_their_invariants(
        a in prop::collection::vec(0.01f64..1.0, 4..7),
        b in prop::collection::vec(0.01f64..1.0, 7),
        bidirectional in prop::bool::ANY,
    ) {
        let n = a.len();
        let kind = if bidirectional { ModelKind::MhdBidirectional } else { ModelKind::MhdForward };
        let spec = ModelSpec::new(kind, 2.0, Nonlinearity::Theta(1.0), n - 1, &[]).unwrap();
        let s0 = ShellState::new(a, b[..n].to_vec());
        let tol = 1e-10;
        let t_end = 1.0;
        let config = IntegratorConfig { method: Method::adaptive(tol), t_end, sample_every: 0.05 };
        let tr = integrate(&spec, &s0, &config, &EventSpec::default()).unwrap();
        let (e0, h0) = (energy(&s0), cross_helicity(&s0));
        for s in &tr.samples {
            prop_assert!((energy(s) - e0).abs() / e0 <= 10.0 * tol * t_end);
            if bidirectional {
                prop_assert!((cross_helicity(s) - h0).abs() / (1.0 + h0.abs()) <= 10.0 * tol * t_end);
            }
        }
        prop_assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn raising_the_threshold_never_hastens_the_event(
        k in 6usize..12,
        low in 1e2f64..1e3,
        factor in 1.0f64..10.0,
    ) {
        let spec = ModelSpec::new(ModelKind::MhdForward, 2.0, Nonlinearity::Theta(1.0), k, &[1.0]).unwrap();
        let a: Vec<f64> = (0..=k).map(|j| spec.wavenumber(j).powf(-2.0 / 3.0)).collect();
        let s0 = ShellState::new(a.clone(), a);
        let config = IntegratorConfig { method: Method::adaptive(1e-9), t_end: 20.0, sample_every: 0.05 };
        let event_time = |limit: f64| {
            let events = EventSpec { positivity_watch: false, norm_threshold: Some(NormThreshold { s: 0.5, limit }) };
            let tr = integrate(&spec, &s0, &config, &events).unwrap();
            for e in &tr.events {
                assert!(e.t >= 0.0 && e.t <= tr.last().t);
            }
            tr.first_event(EventKind::NormThreshold).map_or(f64::INFINITY, |e| e.t)
        };
        let t_low = event_time(low);
        let t_high = event_time(low * factor);
        prop_assert!(t_low <= t_high, "{t_low} > {t_high}");
    }
}
