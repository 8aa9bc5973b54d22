use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{fit_transient_decay, integrate, IntegratorConfig, Trajectory};
use crate::error::Result;
use crate::model::thermal_product_state;
use crate::params::EngineParams;
use crate::reduced::{
    closed_form_delta, gamma_infinity, lifting_condition_qutrit, qutrit_equal_rates_printed,
    qutrit_stationary, work_rate_qutrit, work_rate_two_qubit, RateMode, ReducedStateTwoQubit,
};
use crate::thermo::{efficiency_report, heat_current_asymptote, heat_report_from_trajectory};

use super::{simulate, to_json_pretty, write_file, ScenarioConfig, SimulationOutcome};

/// Closed-form magnitudes below this are compared with an absolute tolerance.
pub const ZERO_THRESHOLD: f64 = 1e-9;
pub const ZERO_ABS_TOLERANCE: f64 = 1e-6;
/// Modal amplitudes in Δ below this are treated as round-off.
pub const EXCITATION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Tolerance {
    Relative(f64),
    Absolute(f64),
    /// Simulated value must be at least the stated bound.
    AtLeast(f64),
    /// Simulated value must be at most the stated bound.
    AtMost(f64),
    /// Reported only; never fails.
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub name: String,
    pub simulated: f64,
    pub closed_form: Option<f64>,
    /// Relative or absolute error, as the tolerance kind dictates.
    pub error: Option<f64>,
    pub tolerance: Tolerance,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerifyRow {
    /// Relative comparison, falling back to absolute when the closed form vanishes.
    fn compare(name: &str, simulated: f64, closed: f64, rel_tol: f64) -> Self {
        let (error, tolerance) = if closed.abs() < ZERO_THRESHOLD {
            ((simulated - closed).abs(), Tolerance::Absolute(ZERO_ABS_TOLERANCE))
        } else {
            ((simulated - closed).abs() / closed.abs(), Tolerance::Relative(rel_tol))
        };
        let limit = match tolerance {
            Tolerance::Absolute(t) | Tolerance::Relative(t) => t,
            _ => unreachable!(),
        };
        Self {
            name: name.to_string(),
            simulated,
            closed_form: Some(closed),
            error: Some(error),
            tolerance,
            pass: error <= limit,
            note: None,
        }
    }

    fn absolute(name: &str, simulated: f64, closed: f64, tol: f64) -> Self {
        let error = (simulated - closed).abs();
        Self {
            name: name.to_string(),
            simulated,
            closed_form: Some(closed),
            error: Some(error),
            tolerance: Tolerance::Absolute(tol),
            pass: error <= tol,
            note: None,
        }
    }

    fn bound(name: &str, simulated: f64, tolerance: Tolerance) -> Self {
        let pass = match tolerance {
            Tolerance::AtLeast(b) => simulated >= b,
            Tolerance::AtMost(b) => simulated <= b,
            _ => true,
        };
        Self {
            name: name.to_string(),
            simulated,
            closed_form: None,
            error: None,
            tolerance,
            pass,
            note: None,
        }
    }

    fn info(name: &str, simulated: f64, closed: Option<f64>, note: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            simulated,
            closed_form: closed,
            error: closed.map(|c| (simulated - c).abs()),
            tolerance: Tolerance::Informational,
            pass: true,
            note: Some(note.into()),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub model: String,
    pub rows: Vec<VerifyRow>,
    pub pass: bool,
}

impl VerifyReport {
    fn new(model: &str, rows: Vec<VerifyRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        Self {
            model: model.to_string(),
            rows,
            pass,
        }
    }

    pub fn row(&self, name: &str) -> Option<&VerifyRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<28} {:>14} {:>14} {:>11} {:>18}  status",
            "quantity", "simulated", "closed form", "error", "tolerance"
        );
        for r in &self.rows {
            let closed = r.closed_form.map_or("-".to_string(), |c| format!("{c:.6e}"));
            let err = r.error.map_or("-".to_string(), |e| format!("{e:.3e}"));
            let tol = match r.tolerance {
                Tolerance::Relative(t) => format!("rel {t:e}"),
                Tolerance::Absolute(t) => format!("abs {t:e}"),
                Tolerance::AtLeast(b) => format!(">= {b:e}"),
                Tolerance::AtMost(b) => format!("<= {b:e}"),
                Tolerance::Informational => "info".to_string(),
            };
            let status = match (r.tolerance, r.pass) {
                (Tolerance::Informational, _) => "INFO",
                (_, true) => "PASS",
                (_, false) => "FAIL",
            };
            let _ = writeln!(
                s,
                "{:<28} {:>14.6e} {:>14} {:>11} {:>18}  {}",
                r.name, r.simulated, closed, err, tol, status
            );
            if let Some(n) = &r.note {
                let _ = writeln!(s, "    {n}");
            }
        }
        let _ = writeln!(s, "overall: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

fn structural_rows(outcome: &SimulationOutcome) -> Vec<VerifyRow> {
    let s = &outcome.summary;
    vec![
        VerifyRow::bound("trace_residual", s.max_trace_residual, Tolerance::AtMost(1e-6)),
        VerifyRow::bound("hermiticity_residual", s.max_hermiticity_residual, Tolerance::AtMost(1e-8)),
        VerifyRow::bound("min_eigenvalue", s.min_eigenvalue, Tolerance::AtLeast(-1e-6)),
        VerifyRow::bound(
            "interior_commutator",
            outcome.model.interior_commutator_norm(),
            Tolerance::AtMost(1e-12),
        ),
    ]
}

/// Densely recorded run over the transient window.
fn transient_run(outcome: &SimulationOutcome, horizon: f64) -> Result<Trajectory> {
    let model = &outcome.model;
    let base = outcome.config.integrator_config(model);
    let cfg = IntegratorConfig {
        t_max: horizon,
        record_every: 1,
        positivity_check_every: 0,
        ..base
    };
    integrate(model, &thermal_product_state(model)?, &cfg)
}

fn transient_row(outcome: &SimulationOutcome, p: &crate::params::TwoQubitEngineParams) -> Result<VerifyRow> {
    let initial = ReducedStateTwoQubit::product(p)?;
    let sol = closed_form_delta(&initial, p)?;
    let scale: f64 = sol.deltas.iter().map(|d| d.norm()).sum();
    let mut excited: Vec<Complex64> = sol
        .lambdas
        .lambda
        .iter()
        .zip(sol.deltas)
        .filter(|(_, d)| d.norm() > (1e-6 * scale).max(EXCITATION_FLOOR))
        .map(|(l, _)| *l)
        .collect();
    excited.sort_by(|a, b| b.re.total_cmp(&a.re));
    let max_re = sol.lambdas.max_real_part();
    let Some(dominant) = excited.first().copied() else {
        return Ok(VerifyRow::info(
            "transient_decay_rate",
            0.0,
            Some(-max_re),
            "no transient is excited in Δ from the initial state",
        ));
    };
    let horizon = 12.0 / -dominant.re;
    let traj = transient_run(outcome, horizon)?;
    let gap = excited
        .iter()
        .map(|l| dominant.re - l.re)
        .find(|g| *g > 1e-9)
        .unwrap_or(0.0);
    let t_start = if gap > 0.0 { (4.0 / gap).min(0.5 * horizon) } else { 0.0 };
    let times = traj.times();
    let coherence: Vec<Complex64> = traj.rows.iter().map(|r| r.coherence).collect();
    let peak = coherence
        .iter()
        .map(|x| (x - sol.delta_infinity).norm())
        .fold(0.0, f64::max);
    let fit = fit_transient_decay(&times, &coherence, sol.delta_infinity, t_start, 1e-6 * peak)?;
    let mut row = VerifyRow::compare("transient_decay_rate", fit.rate, -dominant.re, 0.05);
    let note = if (dominant.re - max_re).abs() > 1e-9 * max_re.abs() {
        format!(
            "slowest Δ-carrying root {:.6} (largest real part overall {:.6} has no weight in Δ)",
            dominant, max_re
        )
    } else {
        format!("slowest root {dominant:.6}")
    };
    row = row.with_note(note);
    Ok(row)
}

fn verify_two_qubit(outcome: &SimulationOutcome, p: &crate::params::TwoQubitEngineParams) -> Result<Vec<VerifyRow>> {
    let frac = outcome.config.fit_fraction;
    let heat = heat_report_from_trajectory(&outcome.trajectory, frac)?;
    let closed_w = work_rate_two_qubit(p)?;
    let (g1, g2) = gamma_infinity(p)?;
    let last = outcome.trajectory.last();
    let fit = outcome
        .summary
        .fit
        .ok_or_else(|| crate::Error::InsufficientData("drift fit unavailable".into()))?;

    let mut rows = vec![
        VerifyRow::compare("work_rate", heat.work_rate, closed_w, 0.01),
        VerifyRow::absolute("gamma1_infinity", last.pop1, g1, 1e-3),
        VerifyRow::absolute("gamma2_infinity", last.pop2, g2, 1e-3),
        VerifyRow::compare("heat_current_cold", heat.q_c_rate, heat_current_asymptote(p, 1)?, 0.01),
        VerifyRow::compare("heat_current_hot", heat.q_h_rate, heat_current_asymptote(p, 2)?, 0.01),
        VerifyRow::compare("first_law", heat.q_h_rate + heat.q_c_rate, heat.work_rate, 0.01),
        VerifyRow::bound("variance_fit_r_squared", fit.diffusion_r_squared, Tolerance::AtLeast(0.99)),
    ];
    let eff = efficiency_report(p, heat.work_rate, heat.q_h_rate)?;
    match eff.eta {
        Some(eta) if eff.biased => {
            rows.push(VerifyRow::compare("efficiency", eta, eff.eta_ideal, 0.01));
            rows.push(VerifyRow::bound(
                "efficiency_below_carnot",
                eta,
                Tolerance::AtMost(eff.eta_carnot + 1e-9),
            ));
        }
        _ => rows.push(VerifyRow::info(
            "efficiency",
            f64::NAN,
            Some(eff.eta_ideal),
            "no population bias, so no engine regime; efficiency undefined",
        )),
    }
    rows.push(transient_row(outcome, p)?);
    let roots = crate::reduced::characteristic_roots(p.p1, p.p2, p.g)?;
    rows.push(VerifyRow::bound("max_root_real_part", roots.max_real_part(), Tolerance::AtMost(-1e-15)));
    Ok(rows)
}

fn verify_qutrit(outcome: &SimulationOutcome, q: &crate::params::QutritEngineParams) -> Result<Vec<VerifyRow>> {
    let fit = outcome
        .summary
        .fit
        .ok_or_else(|| crate::Error::InsufficientData("drift fit unavailable".into()))?;
    let general = work_rate_qutrit(q, RateMode::General)?.rate;
    let stationary = qutrit_stationary(q)?;
    let last = outcome.trajectory.last();
    let lifting = lifting_condition_qutrit(q)?;
    let mut rows = vec![
        VerifyRow::compare("work_rate", fit.drift, general, 0.02),
        VerifyRow::absolute("b1_infinity", last.pop1, stationary.b1, 1e-3),
        VerifyRow::absolute("b2_infinity", last.pop2, stationary.b2, 1e-3),
    ];
    let consistent = if general.abs() < ZERO_THRESHOLD {
        fit.drift.abs() <= ZERO_ABS_TOLERANCE
    } else {
        (fit.drift > 0.0) == lifting.general
    };
    rows.push(VerifyRow {
        name: "lifting_sign".into(),
        simulated: fit.drift.signum(),
        closed_form: Some(if lifting.general { 1.0 } else { -1.0 }),
        error: None,
        tolerance: Tolerance::Absolute(0.0),
        pass: consistent,
        note: Some(format!("general lifting condition: {}", lifting.general)),
    });
    if q.rates_equal() {
        let th = q.thermals()?;
        let printed = qutrit_equal_rates_printed(q, &th);
        rows.push(VerifyRow::info(
            "equal_rates_printed_formula",
            fit.drift,
            Some(printed),
            format!(
                "main-text equal-rates expression (3p in the denominator) gives {printed:.6e}; \
                 the general formula at equal rates (3p²) gives {general:.6e}"
            ),
        ));
    }
    Ok(rows)
}

/// Runs the simulation and the closed-form pipeline and compares them.
pub fn verify(cfg: &ScenarioConfig) -> Result<(VerifyReport, SimulationOutcome)> {
    let outcome = simulate(cfg)?;
    let mut rows = match &cfg.params {
        EngineParams::TwoQubit(p) => verify_two_qubit(&outcome, p)?,
        EngineParams::Qutrit(q) => verify_qutrit(&outcome, q)?,
    };
    rows.extend(structural_rows(&outcome));
    Ok((VerifyReport::new(cfg.params.kind_name(), rows), outcome))
}

/// `verify` command: writes `<prefix>_verify.json` and `<prefix>_verify.txt`.
pub fn run_verify(cfg: &ScenarioConfig, out_dir: &Path) -> Result<VerifyReport> {
    let (report, _) = verify(cfg)?;
    let prefix = &cfg.output.prefix;
    write_file(out_dir, &format!("{prefix}_verify.json"), &to_json_pretty(&report)?)?;
    write_file(out_dir, &format!("{prefix}_verify.txt"), &report.table())?;
    Ok(report)
}
