//! Time integration of the reset master equations and the observables read
//! off the full state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelOperators};
use crate::params::LadderWindow;
use crate::state::DensityMatrix;
use crate::thermo;

/// Trace drift above which the integrator renormalises (and logs it).
pub const TRACE_RENORMALIZE_THRESHOLD: f64 = 1e-9;
/// Minimum eigenvalue below which a checkpoint is treated as a positivity failure.
pub const POSITIVITY_FLOOR: f64 = -1e-6;
/// Tolerance for the imaginary residual of the instantaneous work rate.
pub const WORK_RATE_IMAG_TOL: f64 = 1e-10;
/// Number of rungs at each end of the window counted as boundary.
pub const BOUNDARY_SITES: usize = 2;

/// `dρ/dt = -i[H0 + Hint, ρ] + Σ p (R(ρ) - ρ)`.
pub fn master_rhs(rho: &DensityMatrix, model: &ModelOperators) -> Result<DensityMatrix> {
    model.check_dim(rho)?;
    let mut out = DensityMatrix::zeros(rho.dim());
    model.apply_generator(rho.as_slice(), out.as_mut_slice(), true);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Eigenvalue check every this many records (0 disables all but the last).
    #[serde(default = "default_positivity_every")]
    pub positivity_check_every: usize,
    #[serde(default = "default_boundary_tolerance")]
    pub boundary_tolerance: f64,
}

fn default_record_every() -> usize {
    100
}
fn default_positivity_every() -> usize {
    10
}
fn default_boundary_tolerance() -> f64 {
    1e-6
}

/// Largest rate in the generator: g and every reset rate.
fn rate_scale(model: &ModelOperators) -> f64 {
    model
        .reset_rates()
        .into_iter()
        .fold(model.g(), f64::max)
}

impl IntegratorConfig {
    /// `dt = 0.01 / max(g, p...)`. Free evolution is integrated exactly in the
    /// interaction frame, so the energy span of H0 does not limit the step.
    pub fn default_dt(model: &ModelOperators) -> f64 {
        0.01 / rate_scale(model)
    }

    pub fn with_defaults(model: &ModelOperators, t_max: f64) -> Self {
        Self {
            dt: Self::default_dt(model),
            t_max,
            record_every: default_record_every(),
            positivity_check_every: default_positivity_every(),
            boundary_tolerance: default_boundary_tolerance(),
        }
    }

    pub fn validate(&self, model: &ModelOperators) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "time step must be positive"));
        }
        let limit = 0.05 / rate_scale(model);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dt",
                format!("time step {} exceeds stability limit 0.05/max rate = {limit}", self.dt),
            ));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::invalid("t_max", "horizon must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "stride must be at least 1"));
        }
        if !(self.boundary_tolerance.is_finite() && self.boundary_tolerance > 0.0) {
            return Err(Error::invalid("boundary_tolerance", "must be positive"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        let x = self.t_max / self.dt;
        let rounded = x.round();
        if (x - rounded).abs() < 1e-9 * x.max(1.0) {
            rounded as usize
        } else {
            x.ceil() as usize
        }
    }
}

/// Mean, second moment and variance of the weight energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMoments {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitObservables {
    pub delta: Complex64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub moments: WeightMoments,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QutritObservables {
    pub omega: Complex64,
    pub b1: f64,
    pub b2: f64,
    pub moments: WeightMoments,
}

fn machine_populations(rho: &DensityMatrix, model: &ModelOperators) -> Vec<f64> {
    let l = model.ladder_len();
    (0..model.machine_dim)
        .map(|m| (0..l).map(|off| rho[(m * l + off, m * l + off)].re).sum())
        .collect()
}

/// Population of each ladder rung, summed over machine levels.
pub fn ladder_marginal(rho: &DensityMatrix, window: &LadderWindow) -> Result<Vec<f64>> {
    let l = window.len();
    if !rho.dim().is_multiple_of(l) {
        return Err(Error::DimensionMismatch {
            expected: l,
            actual: rho.dim(),
        });
    }
    let machine = rho.dim() / l;
    Ok((0..l)
        .map(|off| (0..machine).map(|m| rho[(m * l + off, m * l + off)].re).sum())
        .collect())
}

pub fn weight_moments(rho: &DensityMatrix, window: &LadderWindow) -> Result<WeightMoments> {
    let marginal = ladder_marginal(rho, window)?;
    let mut mean = 0.0;
    let mut second = 0.0;
    for (off, p) in marginal.iter().enumerate() {
        let e = window.energy(off);
        mean += p * e;
        second += p * e * e;
    }
    Ok(WeightMoments {
        mean,
        second,
        variance: second - mean * mean,
    })
}

/// `Σ (⟨lower|ρ|upper⟩ - ⟨upper|ρ|lower⟩)` over the retained couplings: Δ for
/// the two-qubit engine, Ω for the qutrit.
pub fn lift_coherence(rho: &DensityMatrix, model: &ModelOperators) -> Result<Complex64> {
    model.check_dim(rho)?;
    // Pairs exist even when g = 0; enumerate them from the layout, not from Hint.
    let l = model.ladder_len();
    let (from, to) = match model.kind {
        ModelKind::TwoQubit => (1, 2),
        ModelKind::Qutrit => (2, 1),
    };
    Ok((0..l - 1)
        .map(|off| {
            let a = from * l + off;
            let b = to * l + off + 1;
            rho[(a, b)] - rho[(b, a)]
        })
        .sum())
}

fn expect_kind(model: &ModelOperators, kind: ModelKind) -> Result<()> {
    if model.kind != kind {
        return Err(Error::WrongModel {
            expected: kind.name(),
            actual: model.kind.name(),
        });
    }
    Ok(())
}

pub fn observables_two_qubit(rho: &DensityMatrix, model: &ModelOperators) -> Result<TwoQubitObservables> {
    expect_kind(model, ModelKind::TwoQubit)?;
    model.check_dim(rho)?;
    let pops = machine_populations(rho, model);
    Ok(TwoQubitObservables {
        delta: lift_coherence(rho, model)?,
        gamma1: pops[0] + pops[1],
        gamma2: pops[0] + pops[2],
        moments: weight_moments(rho, &model.window)?,
    })
}

pub fn observables_qutrit(rho: &DensityMatrix, model: &ModelOperators) -> Result<QutritObservables> {
    expect_kind(model, ModelKind::Qutrit)?;
    model.check_dim(rho)?;
    let pops = machine_populations(rho, model);
    Ok(QutritObservables {
        omega: lift_coherence(rho, model)?,
        b1: pops[1],
        b2: pops[2],
        moments: weight_moments(rho, &model.window)?,
    })
}

/// `d⟨E_w⟩/dt = -i g 𝓔_w X` with X = Δ or Ω.
pub fn work_rate_instant(rho: &DensityMatrix, model: &ModelOperators) -> Result<f64> {
    let x = lift_coherence(rho, model)?;
    let rate = Complex64::new(0.0, -model.g() * model.ladder_spacing()) * x;
    if rate.im.abs() > WORK_RATE_IMAG_TOL {
        return Err(Error::NonRealWorkRate { residual: rate.im });
    }
    Ok(rate.re)
}

/// Population on the outermost two rungs at each end of the window.
pub fn boundary_population(rho: &DensityMatrix, window: &LadderWindow) -> Result<f64> {
    let marginal = ladder_marginal(rho, window)?;
    let l = marginal.len();
    let k = BOUNDARY_SITES.min(l);
    Ok(marginal
        .iter()
        .enumerate()
        .filter(|(off, _)| *off < k || *off >= l - k)
        .map(|(_, p)| p)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub ew_mean: f64,
    pub ew_second: f64,
    pub ew_var: f64,
    /// Δ (two-qubit) or Ω (qutrit).
    pub coherence: Complex64,
    /// Γ1 or B1.
    pub pop1: f64,
    /// Γ2 or B2.
    pub pop2: f64,
    pub work_rate: f64,
    /// Heat current from the cold bath into the machine (two-qubit only).
    pub q_c: Option<f64>,
    /// Heat current from the hot bath into the machine (two-qubit only).
    pub q_h: Option<f64>,
    pub boundary_pop: f64,
    pub trace_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateCheck {
    pub t: f64,
    pub trace_residual: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: ModelKind,
    pub rows: Vec<TrajectoryRow>,
    pub checks: Vec<StateCheck>,
    /// Number of trace renormalisations applied.
    pub renormalizations: usize,
    /// State at the last recorded time (Schrödinger picture).
    pub final_state: DensityMatrix,
}

pub const CSV_HEADER: &str =
    "t,Ew_mean,Ew_var,delta_re,delta_im,gamma1,gamma2,q_c,q_h,boundary_pop,trace_residual";

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), fmt_num)
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn last(&self) -> &TrajectoryRow {
        self.rows.last().expect("trajectory has at least one row")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 200);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let fields = [
                fmt_num(r.t),
                fmt_num(r.ew_mean),
                fmt_num(r.ew_var),
                fmt_num(r.coherence.re),
                fmt_num(r.coherence.im),
                fmt_num(r.pop1),
                fmt_num(r.pop2),
                fmt_opt(r.q_c),
                fmt_opt(r.q_h),
                fmt_num(r.boundary_pop),
                fmt_num(r.trace_residual),
            ];
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    /// Rows with `t` inside the final `fraction` of the recorded span.
    pub fn final_window(&self, fraction: f64) -> Result<&[TrajectoryRow]> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid("fit_fraction", "must lie in (0, 1]"));
        }
        let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) else {
            return Err(Error::InsufficientData("empty trajectory".into()));
        };
        let t_start = last.t - fraction * (last.t - first.t);
        let start = self
            .rows
            .iter()
            .position(|r| r.t >= t_start - 1e-9 * last.t.abs().max(1.0))
            .unwrap_or(self.rows.len());
        Ok(&self.rows[start..])
    }
}

fn record(
    model: &ModelOperators,
    rho: &DensityMatrix,
    t: f64,
) -> Result<TrajectoryRow> {
    let moments = weight_moments(rho, &model.window)?;
    let pops = machine_populations(rho, model);
    let coherence = lift_coherence(rho, model)?;
    let (pop1, pop2) = match model.kind {
        ModelKind::TwoQubit => (pops[0] + pops[1], pops[0] + pops[2]),
        ModelKind::Qutrit => (pops[1], pops[2]),
    };
    let (q_c, q_h) = match model.kind {
        ModelKind::TwoQubit => (
            Some(thermo::heat_current(rho, model, 1)?),
            Some(thermo::heat_current(rho, model, 2)?),
        ),
        ModelKind::Qutrit => (None, None),
    };
    let row = TrajectoryRow {
        t,
        ew_mean: moments.mean,
        ew_second: moments.second,
        ew_var: moments.variance,
        coherence,
        pop1,
        pop2,
        work_rate: work_rate_instant(rho, model)?,
        q_c,
        q_h,
        boundary_pop: boundary_population(rho, &model.window)?,
        trace_residual: rho.trace().re - 1.0,
    };
    let finite = [row.ew_mean, row.ew_var, coherence.re, coherence.im, pop1, pop2]
        .iter()
        .all(|x| x.is_finite());
    if !finite {
        return Err(Error::StepInstability {
            t,
            what: "observable",
        });
    }
    Ok(row)
}

struct Rk4Buffers {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Buffers {
    fn new(len: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); len];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

fn axpy_into(dst: &mut [Complex64], y: &[Complex64], a: f64, x: &[Complex64]) {
    for ((d, yi), xi) in dst.iter_mut().zip(y).zip(x) {
        *d = yi + xi * a;
    }
}

/// Classic fourth-order Runge-Kutta step of the interaction-frame generator.
fn rk4_step(model: &ModelOperators, y: &mut [Complex64], dt: f64, b: &mut Rk4Buffers) {
    model.apply_generator(y, &mut b.k1, false);
    axpy_into(&mut b.tmp, y, 0.5 * dt, &b.k1);
    model.apply_generator(&b.tmp, &mut b.k2, false);
    axpy_into(&mut b.tmp, y, 0.5 * dt, &b.k2);
    model.apply_generator(&b.tmp, &mut b.k3, false);
    axpy_into(&mut b.tmp, y, dt, &b.k3);
    model.apply_generator(&b.tmp, &mut b.k4, false);
    let c = dt / 6.0;
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += (b.k1[i] + (b.k2[i] + b.k3[i]) * 2.0 + b.k4[i]) * c;
    }
}

/// Rotates an interaction-frame state back to the Schrödinger picture at time `t`.
fn to_schrodinger(model: &ModelOperators, rho: &mut DensityMatrix, t: f64) {
    let dim = rho.dim();
    for i in 0..dim {
        for k in 0..dim {
            let w = model.h0_diag[i] - model.h0_diag[k];
            if w != 0.0 {
                rho[(i, k)] *= Complex64::from_polar(1.0, -w * t);
            }
        }
    }
}

/// Integrates the master equation from `rho0` over `[0, t_max]`.
///
/// The free part `-i[H0, ρ]` is carried exactly by working in the interaction
/// frame of H0. Every recorded observable (populations, Δ/Ω, ladder moments)
/// is frame-invariant; the returned final state is rotated back.
pub fn integrate(
    model: &ModelOperators,
    rho0: &DensityMatrix,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate(model)?;
    model.check_dim(rho0)?;
    let n_steps = cfg.n_steps();
    // Uniform grid ending exactly at t_max; h never exceeds cfg.dt.
    let h = cfg.t_max / n_steps as f64;
    let time = |step: usize| cfg.t_max * step as f64 / n_steps as f64;
    let mut rho = rho0.clone();
    let mut buffers = Rk4Buffers::new(rho.as_slice().len());
    let mut rows = Vec::with_capacity(n_steps / cfg.record_every + 2);
    let mut checks = Vec::new();
    let mut renormalizations = 0usize;

    let check_state = |rho: &DensityMatrix, t: f64, with_eigen: bool| -> Result<StateCheck> {
        let min_eigenvalue = with_eigen.then(|| rho.min_eigenvalue());
        if let Some(l) = min_eigenvalue {
            if !l.is_finite() {
                return Err(Error::StepInstability { t, what: "eigenvalue" });
            }
            if l < POSITIVITY_FLOOR {
                return Err(Error::PositivityViolation { t, min_eigenvalue: l });
            }
        }
        Ok(StateCheck {
            t,
            trace_residual: rho.trace().re - 1.0,
            hermiticity: rho.hermiticity_residual(),
            min_eigenvalue,
        })
    };

    rows.push(record(model, &rho, 0.0)?);
    checks.push(check_state(&rho, 0.0, cfg.positivity_check_every > 0)?);

    for step in 1..=n_steps {
        rk4_step(model, rho.as_mut_slice(), h, &mut buffers);
        let t = time(step);

        let tr = rho.trace();
        if !(tr.re.is_finite() && tr.im.is_finite()) {
            return Err(Error::StepInstability { t, what: "trace" });
        }
        let drift = tr.re - 1.0;
        if drift.abs() > TRACE_RENORMALIZE_THRESHOLD {
            log::warn!("t = {t}: trace drift {drift:.3e}, renormalising");
            rho.scale(1.0 / tr.re);
            renormalizations += 1;
        }

        let boundary = boundary_population(&rho, &model.window)?;
        if boundary > cfg.boundary_tolerance {
            return Err(Error::BoundaryOverflow {
                t,
                population: boundary,
                tolerance: cfg.boundary_tolerance,
            });
        }

        let last = step == n_steps;
        if step % cfg.record_every == 0 || last {
            rows.push(record(model, &rho, t)?);
            let index = rows.len() - 1;
            let eigen = last
                || (cfg.positivity_check_every > 0 && index % cfg.positivity_check_every == 0);
            checks.push(check_state(&rho, t, eigen)?);
        }
    }

    to_schrodinger(model, &mut rho, cfg.t_max);
    Ok(Trajectory {
        kind: model.kind,
        rows,
        checks,
        renormalizations,
        final_state: rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points for a linear fit, got {}",
            xs.len().min(ys.len())
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let scale = ys.iter().fold(0.0f64, |a, y| a.max(y.abs())).max(f64::MIN_POSITIVE);
    let r_squared = if ss_tot <= (1e-13 * scale).powi(2) * n {
        // Flat data: a horizontal line is a perfect fit.
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusionFit {
    /// Slope of ⟨E_w⟩(t).
    pub drift: f64,
    /// Slope of Var(E_w)(t).
    pub diffusion_slope: f64,
    pub fit_window: (f64, f64),
    pub drift_r_squared: f64,
    pub diffusion_r_squared: f64,
    pub points: usize,
}

/// Linear fits of the weight mean and variance over the final `window_fraction`
/// of the trajectory.
pub fn fit_drift_diffusion(traj: &Trajectory, window_fraction: f64) -> Result<DriftDiffusionFit> {
    let rows = traj.final_window(window_fraction)?;
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "fit window holds {} records; need at least 3",
            rows.len()
        )));
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let mean: Vec<f64> = rows.iter().map(|r| r.ew_mean).collect();
    let var: Vec<f64> = rows.iter().map(|r| r.ew_var).collect();
    let drift = linear_fit(&ts, &mean)?;
    let diffusion = linear_fit(&ts, &var)?;
    Ok(DriftDiffusionFit {
        drift: drift.slope,
        diffusion_slope: diffusion.slope,
        fit_window: (ts[0], *ts.last().unwrap()),
        drift_r_squared: drift.r_squared,
        diffusion_r_squared: diffusion.r_squared,
        points: rows.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted decay rate (positive for decay).
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Whether the envelope was taken through local maxima (oscillating decay).
    pub used_peaks: bool,
}

/// Exponential decay rate of `|X(t) - X∞|` from a densely recorded trajectory.
///
/// Points before `t_start` or after the deviation first drops below
/// `noise_floor` are discarded. A monotone deviation is fitted directly; an
/// oscillating one through its local maxima, which for a damped oscillation lie
/// on the exponential envelope.
pub fn fit_transient_decay(
    times: &[f64],
    coherence: &[Complex64],
    asymptote: Complex64,
    t_start: f64,
    noise_floor: f64,
) -> Result<DecayFit> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (&t, &x) in times.iter().zip(coherence) {
        if t < t_start {
            continue;
        }
        let y = (x - asymptote).norm();
        if y <= noise_floor {
            break;
        }
        pts.push((t, y));
    }
    let monotone = pts.windows(2).all(|w| w[1].1 <= w[0].1);
    let selected: Vec<(f64, f64)> = if monotone {
        pts
    } else {
        pts.windows(3)
            .filter(|w| w[1].1 >= w[0].1 && w[1].1 >= w[2].1)
            .map(|w| w[1])
            .collect()
    };
    if selected.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} usable points for the decay fit",
            selected.len()
        )));
    }
    let ts: Vec<f64> = selected.iter().map(|p| p.0).collect();
    let logs: Vec<f64> = selected.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&ts, &logs)?;
    Ok(DecayFit {
        rate: -fit.slope,
        r_squared: fit.r_squared,
        points: selected.len(),
        used_peaks: !monotone,
    })
}
