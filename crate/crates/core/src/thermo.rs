//! Heat currents, efficiency and the approach to the Carnot bound.
//!
//! Sign convention: heat currents are positive when energy flows from the bath
//! into the machine, so the first law in steady state reads `q_h + q_c = W`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{fit_drift_diffusion, fmt_num, Trajectory};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelOperators};
use crate::params::{joint_bias, TwoQubitEngineParams};
use crate::reduced::{gamma_infinity, work_rate_two_qubit};
use crate::state::DensityMatrix;

/// `p_i Tr(H_i (τ_i - ρ_i))` for qubit `bath_index` (1 = cold, 2 = hot), with
/// `H_i = E_i |1⟩⟨1|_i`.
pub fn heat_current(rho: &DensityMatrix, model: &ModelOperators, bath_index: usize) -> Result<f64> {
    if model.kind != ModelKind::TwoQubit {
        return Err(Error::WrongModel {
            expected: "two-qubit",
            actual: model.kind.name(),
        });
    }
    model.check_dim(rho)?;
    let channel = match bath_index {
        1 | 2 => &model.resets[bath_index - 1],
        _ => return Err(Error::invalid("bath_index", "must be 1 (cold) or 2 (hot)")),
    };
    let l = model.ladder_len();
    let excited: f64 = channel
        .excited_levels
        .iter()
        .flat_map(|&m| (0..l).map(move |off| m * l + off))
        .map(|i| rho[(i, i)].re)
        .sum();
    Ok(channel.rate * channel.gap * (channel.thermal.rbar - excited))
}

/// Steady-state heat current from bath `bath_index` in closed form.
pub fn heat_current_asymptote(params: &TwoQubitEngineParams, bath_index: usize) -> Result<f64> {
    let (r1, r2) = params.ground_populations()?;
    let (g, p1, p2) = (params.g, params.p1, params.p2);
    let (energy, sign) = match bath_index {
        1 => (params.e1, -1.0),
        2 => (params.e2, 1.0),
        _ => return Err(Error::invalid("bath_index", "must be 1 (cold) or 2 (hot)")),
    };
    Ok(sign * 2.0 * energy * g * g * p1 * p2 * (r1 - r2) / ((p1 + p2) * (2.0 * g * g + p1 * p2)))
}

/// Steady-state heat current obtained by substituting Γ∞ into `p_i E_i (Γ_i - r_i)`.
pub fn heat_current_from_populations(params: &TwoQubitEngineParams, bath_index: usize) -> Result<f64> {
    let (r1, r2) = params.ground_populations()?;
    let (g1, g2) = gamma_infinity(params)?;
    match bath_index {
        1 => Ok(params.p1 * params.e1 * (g1 - r1)),
        2 => Ok(params.p2 * params.e2 * (g2 - r2)),
        _ => Err(Error::invalid("bath_index", "must be 1 (cold) or 2 (hot)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatReport {
    pub q_c_rate: f64,
    pub q_h_rate: f64,
    pub work_rate: f64,
    /// `q_h + q_c - work_rate`.
    pub first_law_residual: f64,
}

impl HeatReport {
    fn new(q_c_rate: f64, q_h_rate: f64, work_rate: f64) -> Self {
        Self {
            q_c_rate,
            q_h_rate,
            work_rate,
            first_law_residual: q_h_rate + q_c_rate - work_rate,
        }
    }
}

pub fn heat_report_closed_form(params: &TwoQubitEngineParams) -> Result<HeatReport> {
    Ok(HeatReport::new(
        heat_current_asymptote(params, 1)?,
        heat_current_asymptote(params, 2)?,
        work_rate_two_qubit(params)?,
    ))
}

/// Heat currents averaged over the final `window_fraction` of a two-qubit
/// trajectory, with the work rate taken from the fitted drift.
pub fn heat_report_from_trajectory(traj: &Trajectory, window_fraction: f64) -> Result<HeatReport> {
    if traj.kind != ModelKind::TwoQubit {
        return Err(Error::WrongModel {
            expected: "two-qubit",
            actual: traj.kind.name(),
        });
    }
    let rows = traj.final_window(window_fraction)?;
    let fit = fit_drift_diffusion(traj, window_fraction)?;
    let n = rows.len() as f64;
    let q_c = rows.iter().filter_map(|r| r.q_c).sum::<f64>() / n;
    let q_h = rows.iter().filter_map(|r| r.q_h).sum::<f64>() / n;
    Ok(HeatReport::new(q_c, q_h, fit.drift))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// Work rate over hot-bath inflow; `None` outside the engine regime.
    pub eta: Option<f64>,
    /// `1 - E1/E2`.
    pub eta_ideal: f64,
    /// `1 - Tc/Th`.
    pub eta_carnot: f64,
    pub biased: bool,
    /// Whether heat enters from the hot bath (`q_h > 0`).
    pub engine_regime: bool,
}

pub fn efficiency_report(
    params: &TwoQubitEngineParams,
    work_rate: f64,
    q_h_rate: f64,
) -> Result<EfficiencyReport> {
    let bias = joint_bias(params)?;
    let engine_regime = q_h_rate > 0.0;
    Ok(EfficiencyReport {
        eta: engine_regime.then(|| work_rate / q_h_rate),
        eta_ideal: 1.0 - params.e1 / params.e2,
        eta_carnot: 1.0 - params.tc / params.th,
        biased: bias.biased,
        engine_regime,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarnotRow {
    pub th: f64,
    pub bias_gap: f64,
    pub work_rate: f64,
    pub eta_ideal: f64,
    pub eta_carnot: f64,
}

pub const SWEEP_CSV_HEADER: &str = "Th,bias_gap,work_rate,eta_ideal,eta_carnot";

impl CarnotRow {
    pub fn csv_fields(&self) -> [String; 5] {
        [
            fmt_num(self.th),
            fmt_num(self.bias_gap),
            fmt_num(self.work_rate),
            fmt_num(self.eta_ideal),
            fmt_num(self.eta_carnot),
        ]
    }
}

pub fn carnot_row(params: &TwoQubitEngineParams) -> Result<CarnotRow> {
    let bias = joint_bias(params)?;
    Ok(CarnotRow {
        th: params.th,
        bias_gap: bias.bias_gap,
        work_rate: work_rate_two_qubit(params)?,
        eta_ideal: 1.0 - params.e1 / params.e2,
        eta_carnot: 1.0 - params.tc / params.th,
    })
}

/// Closed-form sweep over hot-bath temperatures. Invalid grid points yield an
/// error in their slot without aborting the sweep.
pub fn carnot_sweep(base: &TwoQubitEngineParams, th_grid: &[f64]) -> Vec<Result<CarnotRow>> {
    th_grid
        .iter()
        .map(|&th| carnot_row(&TwoQubitEngineParams { th, ..*base }))
        .collect()
}

/// Hot-bath temperature at which `E1/Tc = E2/Th`.
pub fn carnot_point_th(params: &TwoQubitEngineParams) -> f64 {
    params.e2 * params.tc / params.e1
}

pub fn carnot_sweep_csv(rows: &[Result<CarnotRow>], grid: &[f64]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for (row, &th) in rows.iter().zip(grid) {
        let fields = match row {
            Ok(r) => r.csv_fields().to_vec(),
            Err(_) => {
                let mut v = vec![fmt_num(th)];
                v.extend(std::iter::repeat_n("NaN".to_string(), 4));
                v
            }
        };
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}
