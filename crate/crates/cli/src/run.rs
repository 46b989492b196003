//! The four experiments and the files they write.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use dyadic_core::diagnostics::{
    cross_helicity, energy, lyapunov, lyapunov_pair, monitors, riccati_check, sobolev_norm_sq,
    LyapunovParams, MonitorOptions, RiccatiConstant, RiccatiOptions,
};
use dyadic_core::integrator::{integrate, EventKind, NormThreshold, Trajectory};
use dyadic_core::linstab::{eigen_scan, ScanRequest};
use dyadic_core::models::{ModelKind, ModelSpec, ShellState};
use dyadic_core::steady::{
    fixed_point, newton_steady, residual, shell_ratios, FamilyParam, NewtonOptions,
};
use serde::Serialize;

use crate::config::{ChannelKind, RunConfig};
use crate::output::{fmt_num, nums, write_csv, write_json, Num};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Steady,
    Linstab,
    Blowup,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Steady => "steady",
            Experiment::Linstab => "linstab",
            Experiment::Blowup => "blowup",
        }
    }
}

/// Lyapunov parameters used by `blowup` when none are configured.
pub const DEFAULT_LYAPUNOV: LyapunovParams = LyapunovParams {
    s: 0.5,
    gamma: 1.0,
    c0: 0.1,
};
/// Squared-norm threshold used by `blowup` when no norm event is configured.
pub const DEFAULT_ESCAPE_LIMIT: f64 = 1e4;

/// Runs one experiment, writing its files into `out`.
pub fn run(experiment: Experiment, cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match experiment {
        Experiment::Simulate => simulate(cfg, out, "simulate"),
        Experiment::Blowup => {
            let mut cfg = cfg.clone();
            let params = *cfg.lyapunov.get_or_insert(DEFAULT_LYAPUNOV);
            cfg.events.positivity = true;
            cfg.events.norm.get_or_insert(NormThreshold {
                s: params.s,
                limit: DEFAULT_ESCAPE_LIMIT,
            });
            simulate(&cfg, out, "blowup")
        }
        Experiment::Steady => steady(cfg, out),
        Experiment::Linstab => linstab(cfg, out),
    }
}

#[derive(Serialize)]
struct RiccatiSummary {
    #[serde(rename = "K")]
    k: Num,
    k_printed: Num,
    valid: bool,
    psi0: Num,
    t_upper: Option<Num>,
    violations: usize,
    checked_points: usize,
}

#[derive(Serialize)]
struct EventRecord {
    kind: EventKind,
    t: Num,
    detail: String,
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    model: &'static str,
    lambda: Num,
    theta: Num,
    shells: usize,
    f0: Num,
    terminated_by: &'static str,
    t_final: Num,
    event_times: BTreeMap<&'static str, Option<Num>>,
    events: Vec<EventRecord>,
    energy_drift: Num,
    helicity_drift: Num,
    energy_balance_defect: Num,
    accepted_steps: usize,
    rejected_steps: usize,
    riccati: Option<RiccatiSummary>,
}

fn event_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::PositivityLoss => "positivity_loss",
        EventKind::NormThreshold => "norm_threshold",
        EventKind::NonFinite => "non_finite",
        EventKind::StepUnderflow => "step_underflow",
    }
}

fn simulate(cfg: &RunConfig, out: &Path, command: &'static str) -> Result<()> {
    let spec = cfg.spec();
    let s0 = cfg.initial_state();
    let tr = integrate(&spec, &s0, &cfg.integrator(), &cfg.event_spec())?;
    write_trajectory(&out.join("trajectory.csv"), &spec, &tr)?;
    write_diagnostics(&out.join("diagnostics.csv"), cfg, &spec, &tr)?;

    let e0 = energy(&s0);
    let h0 = cross_helicity(&s0);
    let mut energy_drift = 0.0f64;
    let mut helicity_drift = 0.0f64;
    let mut balance = 0.0f64;
    let mut work = 0.0;
    let power =
        |s: &ShellState| -> f64 { spec.forcing().iter().zip(&s.a).map(|(f, a)| f * a).sum() };
    for (i, s) in tr.samples.iter().enumerate() {
        if i > 0 {
            let prev = &tr.samples[i - 1];
            work += 0.5 * (s.t - prev.t) * (power(prev) + power(s));
        }
        let e = energy(s);
        energy_drift = energy_drift.max((e - e0).abs() / if e0 > 0.0 { e0 } else { 1.0 });
        helicity_drift = helicity_drift.max((cross_helicity(s) - h0).abs() / (1.0 + h0.abs()));
        balance = balance.max((e - e0 - work).abs() / (1.0 + e0));
    }

    let mut event_times = BTreeMap::new();
    for kind in [
        EventKind::PositivityLoss,
        EventKind::NormThreshold,
        EventKind::NonFinite,
        EventKind::StepUnderflow,
    ] {
        event_times.insert(event_name(kind), tr.first_event(kind).map(|e| Num(e.t)));
    }
    let riccati = cfg.lyapunov.map(|params| {
        let report = lyapunov(&s0, &spec, &params);
        let opts = RiccatiOptions {
            constant: RiccatiConstant::Sharp,
            sample_error: cfg.abs_tol + cfg.rel_tol * report.psi.abs(),
        };
        let check = riccati_check(&tr.samples, &spec, &params, &opts);
        RiccatiSummary {
            k: Num(report.k_sharp),
            k_printed: Num(report.k_printed),
            valid: report.valid,
            psi0: Num(report.psi),
            t_upper: report.t_upper.map(Num),
            violations: check.violations,
            checked_points: check.points.len(),
        }
    });
    let summary = Summary {
        command,
        model: spec.kind().name(),
        lambda: Num(spec.lambda()),
        theta: Num(spec.theta()),
        shells: spec.n_shells(),
        f0: Num(cfg.f0()),
        terminated_by: tr.terminated_by.name(),
        t_final: Num(tr.last().t),
        event_times,
        events: tr
            .events
            .iter()
            .map(|e| EventRecord {
                kind: e.kind,
                t: Num(e.t),
                detail: e.detail.clone(),
            })
            .collect(),
        energy_drift: Num(energy_drift),
        helicity_drift: Num(helicity_drift),
        energy_balance_defect: Num(balance),
        accepted_steps: tr.accepted_steps,
        rejected_steps: tr.rejected_steps,
        riccati,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

fn write_trajectory(path: &Path, spec: &ModelSpec, tr: &Trajectory) -> Result<()> {
    let n = spec.len();
    let magnetic = spec.kind().has_magnetic_field();
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|j| format!("a_{j}")));
    if magnetic {
        header.extend((0..n).map(|j| format!("b_{j}")));
    }
    let rows = tr.samples.iter().map(|s| {
        let mut row = vec![fmt_num(s.t)];
        row.extend(s.a.iter().map(|&x| fmt_num(x)));
        if magnetic {
            row.extend(s.b.iter().map(|&x| fmt_num(x)));
        }
        row
    });
    write_csv(path, &header, rows).with_context(|| format!("writing {}", path.display()))
}

fn write_diagnostics(
    path: &Path,
    cfg: &RunConfig,
    spec: &ModelSpec,
    tr: &Trajectory,
) -> Result<()> {
    let magnetic = spec.kind().has_magnetic_field();
    let mut header: Vec<String> = vec!["t".into(), "E".into(), "Hc".into()];
    header.extend(cfg.diagnostics.iter().map(|s| format!("Hs_{s}")));
    header.extend(["phi", "psi", "min_a", "min_b", "monotone_flag"].map(String::from));
    let report = monitors(
        &tr.samples,
        spec,
        &MonitorOptions {
            monotonicity_for_mhd: true,
        },
    );
    let monotone = report.monotone.unwrap_or_default();
    let rows = tr.samples.iter().enumerate().map(|(i, s)| {
        let mut row = vec![fmt_num(s.t), fmt_num(energy(s)), fmt_num(cross_helicity(s))];
        for &si in &cfg.diagnostics {
            let sq =
                sobolev_norm_sq(&s.a, si, spec.lambda()) + sobolev_norm_sq(&s.b, si, spec.lambda());
            row.push(fmt_num(sq.sqrt()));
        }
        let (phi, psi) = cfg
            .lyapunov
            .map_or((f64::NAN, f64::NAN), |p| lyapunov_pair(s, spec, &p));
        row.push(fmt_num(phi));
        row.push(fmt_num(psi));
        row.push(fmt_num(report.min_a[i]));
        row.push(fmt_num(if magnetic { report.min_b[i] } else { f64::NAN }));
        row.push(u8::from(monotone[i]).to_string());
        row
    });
    write_csv(path, &header, rows).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct NewtonSummary {
    converged: bool,
    error: Option<String>,
    iterations: usize,
    residual: Num,
    condition: Num,
    null_dimension: usize,
    restarted_from_flat: bool,
    interior_max_residual: Num,
    boundary_defect: Num,
    a: Vec<Num>,
    b: Vec<Num>,
}

#[derive(Serialize)]
struct ExactSummary {
    a0: Num,
    b0: Num,
    interior_max_residual: Num,
    boundary_defect: Num,
    max_ratio_deviation: Num,
    a: Vec<Num>,
    b: Vec<Num>,
}

#[derive(Serialize)]
struct SteadySummary {
    model: &'static str,
    lambda: Num,
    theta: Num,
    f0: Num,
    shells: usize,
    closure: &'static str,
    exact: Option<ExactSummary>,
    newton: NewtonSummary,
}

fn steady(cfg: &RunConfig, out: &Path) -> Result<()> {
    let spec = cfg.spec();
    let exact = match cfg.fixed_point_amplitudes() {
        Some((a0, b0)) => {
            let fp = fixed_point(
                cfg.model,
                cfg.lambda,
                cfg.theta(),
                cfg.f0(),
                cfg.shells,
                FamilyParam::Amplitudes { a0, b0 },
            )?;
            let state = fp.state();
            let r = residual(&spec, &state)?;
            let dev = shell_ratios(&spec, &state)?
                .into_iter()
                .flatten()
                .fold(0.0f64, |m, c| m.max((c - 1.0).abs()));
            Some(ExactSummary {
                a0: Num(a0),
                b0: Num(b0),
                interior_max_residual: Num(r.interior_max),
                boundary_defect: Num(r.boundary_defect),
                max_ratio_deviation: Num(dev),
                a: nums(&fp.a_bar),
                b: nums(&fp.b_bar),
            })
        }
        None => None,
    };
    let opts = NewtonOptions {
        tol: cfg.newton_tol,
        max_iter: cfg.max_iter,
        closure: cfg.closure,
        check_jacobian: false,
    };
    let newton = match newton_steady(&spec, &cfg.initial_state(), &opts) {
        Ok(report) => {
            let r = residual(&spec, &report.state)?;
            NewtonSummary {
                converged: true,
                error: None,
                iterations: report.iterations,
                residual: Num(report.residual),
                condition: Num(report.condition),
                null_dimension: report.null_dimension,
                restarted_from_flat: report.restarted_from_flat,
                interior_max_residual: Num(r.interior_max),
                boundary_defect: Num(r.boundary_defect),
                a: nums(&report.state.a),
                b: nums(&report.state.b),
            }
        }
        Err(e) => NewtonSummary {
            converged: false,
            error: Some(e.to_string()),
            iterations: 0,
            residual: Num(f64::NAN),
            condition: Num(f64::NAN),
            null_dimension: 0,
            restarted_from_flat: false,
            interior_max_residual: Num(f64::NAN),
            boundary_defect: Num(f64::NAN),
            a: Vec::new(),
            b: Vec::new(),
        },
    };
    let summary = SteadySummary {
        model: spec.kind().name(),
        lambda: Num(spec.lambda()),
        theta: Num(spec.theta()),
        f0: Num(cfg.f0()),
        shells: spec.n_shells(),
        closure: match cfg.closure {
            dyadic_core::steady::TopClosure::Geometric => "geometric",
            dyadic_core::steady::TopClosure::Truncated => "truncated",
        },
        exact,
        newton,
    };
    write_json(&out.join("steady.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct ScanSummary {
    channel: &'static str,
    model: &'static str,
    a0_sign: Num,
    from: Num,
    to: Num,
    step: Num,
    depth: usize,
    rows: usize,
    admissible_rows: usize,
    roots: Vec<Num>,
    forbidden: Vec<Num>,
    degenerate: Vec<Num>,
    inconclusive: bool,
}

fn linstab(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (from, to, step) = cfg.scan_range();
    let velocity = cfg.channel == ChannelKind::Velocity;
    let req = ScanRequest {
        velocity,
        from,
        to,
        step,
        lambda: cfg.lambda,
        theta: cfg.theta(),
        n: cfg.depth,
        kind: if velocity {
            ModelKind::Euler
        } else {
            cfg.model
        },
        a0_sign: cfg.a0_sign,
    };
    let report = eigen_scan(&req)?;
    let header = ["value", "growth_functional", "admissible", "classification"].map(String::from);
    let rows = report.rows.iter().map(|r| {
        vec![
            fmt_num(r.value),
            fmt_num(r.growth_functional),
            u8::from(r.admissible).to_string(),
            r.classification.name().to_string(),
        ]
    });
    let path = out.join("scan.csv");
    write_csv(&path, &header, rows).with_context(|| format!("writing {}", path.display()))?;
    let summary = ScanSummary {
        channel: if velocity { "velocity" } else { "magnetic" },
        model: cfg.model.name(),
        a0_sign: Num(cfg.a0_sign),
        from: Num(from),
        to: Num(to),
        step: Num(step),
        depth: cfg.depth,
        rows: report.rows.len(),
        admissible_rows: report.rows.iter().filter(|r| r.admissible).count(),
        roots: nums(&report.roots),
        forbidden: nums(&report.forbidden),
        degenerate: nums(&report.degenerate),
        inconclusive: report.inconclusive,
    };
    write_json(&out.join("linstab.json"), &summary)?;
    Ok(())
}
