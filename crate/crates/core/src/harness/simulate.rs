use std::path::Path;

use serde::Serialize;

use crate::dynamics::{fit_drift_diffusion, integrate, DriftDiffusionFit, Trajectory, TrajectoryRow};
use crate::error::Result;
use crate::model::{thermal_product_state, ModelOperators};
use crate::params::{validate_weak_coupling, EngineParams};
use crate::reduced::{asymptote_report, AsymptoteReport};
use crate::thermo::{efficiency_report, heat_report_from_trajectory, EfficiencyReport, HeatReport};

use super::{to_json_pretty, write_file, ScenarioConfig};

/// Fit windows starting earlier than this many `1/min(p)` get a warning.
pub const TRANSIENT_MULTIPLE: f64 = 5.0;

/// Per-row JSON record; field names match the CSV header.
#[derive(Debug, Serialize)]
struct RowRecord {
    t: f64,
    #[serde(rename = "Ew_mean")]
    ew_mean: f64,
    #[serde(rename = "Ew_var")]
    ew_var: f64,
    delta_re: f64,
    delta_im: f64,
    gamma1: f64,
    gamma2: f64,
    q_c: Option<f64>,
    q_h: Option<f64>,
    boundary_pop: f64,
    trace_residual: f64,
}

impl From<&TrajectoryRow> for RowRecord {
    fn from(r: &TrajectoryRow) -> Self {
        Self {
            t: r.t,
            ew_mean: r.ew_mean,
            ew_var: r.ew_var,
            delta_re: r.coherence.re,
            delta_im: r.coherence.im,
            gamma1: r.pop1,
            gamma2: r.pop2,
            q_c: r.q_c,
            q_h: r.q_h,
            boundary_pop: r.boundary_pop,
            trace_residual: r.trace_residual,
        }
    }
}

#[derive(Debug, Serialize)]
struct TrajectoryDocument<'a> {
    config: &'a serde_json::Value,
    rows: Vec<RowRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub config: serde_json::Value,
    pub dim: usize,
    pub dt: f64,
    pub steps: usize,
    pub final_row: TrajectoryRow,
    pub fit: Option<DriftDiffusionFit>,
    pub asymptotes: AsymptoteReport,
    pub heat: Option<HeatReport>,
    pub efficiency: Option<EfficiencyReport>,
    pub warnings: Vec<String>,
    pub renormalizations: usize,
    pub max_hermiticity_residual: f64,
    pub max_trace_residual: f64,
    pub min_eigenvalue: f64,
}

pub struct SimulationOutcome {
    pub config: ScenarioConfig,
    pub model: ModelOperators,
    pub trajectory: Trajectory,
    pub summary: SimulationSummary,
}

impl SimulationOutcome {
    pub fn trajectory_json(&self) -> Result<String> {
        let doc = TrajectoryDocument {
            config: &self.summary.config,
            rows: self.trajectory.rows.iter().map(RowRecord::from).collect(),
        };
        to_json_pretty(&doc)
    }
}

/// Runs the configured simulation and assembles its summary. No files are written.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulationOutcome> {
    cfg.validate()?;
    let warnings: Vec<String> = validate_weak_coupling(&cfg.params)
        .iter()
        .map(|w| w.to_string())
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    let model = cfg.build_model()?;
    let icfg = cfg.integrator_config(&model);
    let rho0 = thermal_product_state(&model)?;
    let trajectory = integrate(&model, &rho0, &icfg)?;

    let mut warnings = warnings;
    let fit = match fit_drift_diffusion(&trajectory, cfg.fit_fraction) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("drift/diffusion fit skipped: {e}");
            None
        }
    };
    if let Some(f) = &fit {
        let transient = TRANSIENT_MULTIPLE / model.reset_rates().into_iter().fold(f64::INFINITY, f64::min);
        if f.fit_window.0 < transient {
            let w = format!(
                "fit window starts at t = {} before the transient scale {TRANSIENT_MULTIPLE}/min(p) = {transient}",
                f.fit_window.0
            );
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    let (heat, efficiency) = match (&cfg.params, fit) {
        (EngineParams::TwoQubit(p), Some(_)) => {
            let heat = heat_report_from_trajectory(&trajectory, cfg.fit_fraction)?;
            let eff = efficiency_report(p, heat.work_rate, heat.q_h_rate)?;
            (Some(heat), Some(eff))
        }
        _ => (None, None),
    };
    let checks = &trajectory.checks;
    let summary = SimulationSummary {
        config: cfg.to_json_value(),
        dim: model.dim(),
        dt: icfg.dt,
        steps: icfg.n_steps(),
        final_row: *trajectory.last(),
        fit,
        asymptotes: asymptote_report(&cfg.params)?,
        heat,
        efficiency,
        warnings,
        renormalizations: trajectory.renormalizations,
        max_hermiticity_residual: checks.iter().map(|c| c.hermiticity).fold(0.0, f64::max),
        max_trace_residual: checks
            .iter()
            .map(|c| c.trace_residual.abs())
            .fold(0.0, f64::max),
        min_eigenvalue: checks
            .iter()
            .filter_map(|c| c.min_eigenvalue)
            .fold(f64::INFINITY, f64::min),
    };
    Ok(SimulationOutcome {
        config: cfg.clone(),
        model,
        trajectory,
        summary,
    })
}

/// `simulate` command: writes `<prefix>_trajectory.csv`, `<prefix>_trajectory.json`
/// and `<prefix>_summary.json` into `out_dir`.
pub fn run_simulate(cfg: &ScenarioConfig, out_dir: &Path) -> Result<SimulationOutcome> {
    let outcome = simulate(cfg)?;
    let prefix = &cfg.output.prefix;
    write_file(out_dir, &format!("{prefix}_trajectory.csv"), &outcome.trajectory.to_csv())?;
    write_file(out_dir, &format!("{prefix}_trajectory.json"), &outcome.trajectory_json()?)?;
    write_file(out_dir, &format!("{prefix}_summary.json"), &to_json_pretty(&outcome.summary)?)?;
    Ok(outcome)
}
