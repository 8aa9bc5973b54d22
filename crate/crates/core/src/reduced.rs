//! Closed three-variable systems and the steady-state formulas derived from them.
//!
//! Two-qubit engine: `x = (Δ, Γ1, Γ2)` obeys the linear system
//!
//! ```text
//! dΔ/dt  = 2ig(Γ1 - Γ2) - (p1 + p2) Δ
//! dΓ1/dt = +igΔ + p1 (r1 - Γ1)
//! dΓ2/dt = -igΔ + p2 (r2 - Γ2)
//! ```
//!
//! whose transients decay with the roots of
//! `(λ+p1)(λ+p2)(λ+p1+p2) + 2g²(2λ+p1+p2) = 0`.
//!
//! Qutrit engine: `x = (Ω, B1, B2)` obeys the analogous system with three
//! partial resets.

use nalgebra::{Complex, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{EngineParams, QutritEngineParams, QutritThermals, TwoQubitEngineParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedStateTwoQubit {
    pub delta: Complex64,
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedStateQutrit {
    pub omega: Complex64,
    pub b1: f64,
    pub b2: f64,
}

/// Time derivative of a reduced state. Populations may pick up an imaginary
/// part for unphysical inputs, so the derivative keeps all three components complex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedDerivative {
    pub coherence: Complex64,
    pub pop1: Complex64,
    pub pop2: Complex64,
}

impl ReducedDerivative {
    pub fn max_norm(&self) -> f64 {
        self.coherence.norm().max(self.pop1.norm()).max(self.pop2.norm())
    }
}

impl ReducedStateTwoQubit {
    /// `(Δ, Γ1, Γ2) = (0, r1, r2)`: the uncoupled product state.
    pub fn product(params: &TwoQubitEngineParams) -> Result<Self> {
        let (r1, r2) = params.ground_populations()?;
        Ok(Self {
            delta: c(0.0),
            gamma1: r1,
            gamma2: r2,
        })
    }

    fn to_vector(self) -> Vector3<Complex64> {
        Vector3::new(self.delta, c(self.gamma1), c(self.gamma2))
    }
}

/// `dx/dt = A x + b` for the two-qubit reduced variables.
fn two_qubit_system(params: &TwoQubitEngineParams) -> Result<(Matrix3<Complex64>, Vector3<Complex64>)> {
    let (r1, r2) = params.ground_populations()?;
    let (g, p1, p2) = (params.g, params.p1, params.p2);
    let a = Matrix3::new(
        c(-(p1 + p2)), I * 2.0 * g, -I * 2.0 * g,
        I * g, c(-p1), c(0.0),
        -I * g, c(0.0), c(-p2),
    );
    let b = Vector3::new(c(0.0), c(p1 * r1), c(p2 * r2));
    Ok((a, b))
}

pub fn reduced_rhs_two_qubit(
    s: &ReducedStateTwoQubit,
    params: &TwoQubitEngineParams,
) -> Result<ReducedDerivative> {
    let (r1, r2) = params.ground_populations()?;
    let (g, p1, p2) = (params.g, params.p1, params.p2);
    Ok(ReducedDerivative {
        coherence: I * 2.0 * g * (s.gamma1 - s.gamma2) - s.delta * (p1 + p2),
        pop1: I * g * s.delta + p1 * (r1 - s.gamma1),
        pop2: -I * g * s.delta + p2 * (r2 - s.gamma2),
    })
}

/// Roots of the transient characteristic cubic, sorted by ascending real part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRoots {
    pub lambda: [Complex64; 3],
}

impl CharacteristicRoots {
    /// Root with the largest real part (slowest transient).
    pub fn dominant(&self) -> Complex64 {
        self.lambda[2]
    }

    pub fn max_real_part(&self) -> f64 {
        self.dominant().re
    }
}

/// Monic coefficients `[a0, a1, a2]` of `λ³ + a2 λ² + a1 λ + a0`.
pub fn characteristic_coefficients(p1: f64, p2: f64, g: f64) -> [f64; 3] {
    let s = p1 + p2;
    let g2 = g * g;
    [s * p1 * p2 + 2.0 * g2 * s, s * s + p1 * p2 + 4.0 * g2, 2.0 * s]
}

/// `(λ+p1)(λ+p2)(λ+p1+p2) + 2g²(2λ+p1+p2)` evaluated in factored form.
pub fn characteristic_polynomial(p1: f64, p2: f64, g: f64, lambda: Complex64) -> Complex64 {
    (lambda + p1) * (lambda + p2) * (lambda + p1 + p2) + 2.0 * g * g * (2.0 * lambda + p1 + p2)
}

/// Roots via the eigenvalues of the companion matrix, polished by Newton steps.
pub fn characteristic_roots(p1: f64, p2: f64, g: f64) -> Result<CharacteristicRoots> {
    for (name, v) in [("p1", p1), ("p2", p2)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, "reset rate must be positive"));
        }
    }
    if !(g.is_finite() && g >= 0.0) {
        return Err(Error::invalid("g", "coupling must be non-negative"));
    }
    let [a0, a1, a2] = characteristic_coefficients(p1, p2, g);
    let companion = Matrix3::new(
        -a2, -a1, -a0,
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
    );
    let eig = companion.complex_eigenvalues();
    let mut lambda = [eig[0], eig[1], eig[2]].map(|z: Complex<f64>| Complex64::new(z.re, z.im));
    for z in &mut lambda {
        for _ in 0..3 {
            let f = ((*z + a2) * *z + a1) * *z + a0;
            let df = (3.0 * *z + 2.0 * a2) * *z + a1;
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            if step.norm() > 1e-3 * (z.norm() + 1.0) {
                // Near a multiple root Newton is unreliable; keep the eigenvalue.
                break;
            }
            *z -= step;
        }
    }
    lambda.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(CharacteristicRoots { lambda })
}

/// `Δ∞ = 2ig p1 p2 (r1 - r2) / ((p1+p2)(2g² + p1 p2))`.
pub fn delta_infinity(params: &TwoQubitEngineParams) -> Result<Complex64> {
    let (r1, r2) = params.ground_populations()?;
    let (g, p1, p2) = (params.g, params.p1, params.p2);
    Ok(I * 2.0 * g * p1 * p2 * (r1 - r2) / ((p1 + p2) * (2.0 * g * g + p1 * p2)))
}

/// Asymptotic weight energy gain rate of the two-qubit engine.
pub fn work_rate_two_qubit(params: &TwoQubitEngineParams) -> Result<f64> {
    let (r1, r2) = params.ground_populations()?;
    let (g, p1, p2) = (params.g, params.p1, params.p2);
    let spacing = params.ladder_spacing();
    Ok(2.0 * spacing * g * g * p1 * p2 * (r1 - r2) / ((p1 + p2) * (2.0 * g * g + p1 * p2)))
}

/// `(Γ1∞, Γ2∞)`.
pub fn gamma_infinity(params: &TwoQubitEngineParams) -> Result<(f64, f64)> {
    let (r1, r2) = params.ground_populations()?;
    let (g, p1, p2) = (params.g, params.p1, params.p2);
    let s = p1 + p2;
    let den = s * (2.0 * g * g + p1 * p2);
    let mixed = 2.0 * g * g * (p1 * r1 + p2 * r2);
    Ok((
        (p1 * p2 * s * r1 + mixed) / den,
        (p1 * p2 * s * r2 + mixed) / den,
    ))
}

/// Fixed step RK4 of the two-qubit reduced system from `initial` to `t`.
pub fn integrate_reduced_two_qubit(
    initial: &ReducedStateTwoQubit,
    params: &TwoQubitEngineParams,
    t: f64,
    dt: f64,
) -> Result<Vector3<Complex64>> {
    let (a, b) = two_qubit_system(params)?;
    Ok(rk4_linear(&a, &b, initial.to_vector(), t, dt))
}

fn rk4_linear(
    a: &Matrix3<Complex64>,
    b: &Vector3<Complex64>,
    mut x: Vector3<Complex64>,
    t: f64,
    dt: f64,
) -> Vector3<Complex64> {
    if t <= 0.0 {
        return x;
    }
    let n = (t / dt).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let f = |x: &Vector3<Complex64>| a * x + b;
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&(x + k1 * c(0.5 * h)));
        let k3 = f(&(x + k2 * c(0.5 * h)));
        let k4 = f(&(x + k3 * c(h)));
        x += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0);
    }
    x
}

/// `Δ(t) = Σ δi exp(λi t) + Δ∞` with coefficients fixed by an initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSolution {
    pub deltas: [Complex64; 3],
    pub lambdas: CharacteristicRoots,
    pub delta_infinity: Complex64,
    /// Roots too close for the modal expansion; evaluation integrates numerically.
    pub degenerate: bool,
    /// Full modal amplitudes `c_i v_i` for (Δ, Γ1, Γ2).
    modes: [[Complex64; 3]; 3],
    fixed_point: [Complex64; 3],
    initial: ReducedStateTwoQubit,
    params: TwoQubitEngineParams,
}

/// Step used when the closed form falls back to numerical integration.
pub const FALLBACK_DT: f64 = 1e-3;

impl ClosedFormSolution {
    pub fn delta_at(&self, t: f64) -> Complex64 {
        self.state_at(t)[0]
    }

    /// `(Δ, Γ1, Γ2)` at time `t`.
    pub fn state_at(&self, t: f64) -> [Complex64; 3] {
        if self.degenerate {
            let scale = self.params.p1 + self.params.p2 + self.params.g;
            let x = integrate_reduced_two_qubit(&self.initial, &self.params, t, FALLBACK_DT / scale)
                .expect("parameters were validated at construction");
            return [x[0], x[1], x[2]];
        }
        let mut out = self.fixed_point;
        for (mode, lambda) in self.modes.iter().zip(self.lambdas.lambda) {
            let e = (lambda * t).exp();
            for (o, m) in out.iter_mut().zip(mode) {
                *o += m * e;
            }
        }
        out
    }
}

/// Null vector of a singular 3×3 matrix from the best-conditioned pair of rows.
fn null_vector(m: &Matrix3<Complex64>) -> Vector3<Complex64> {
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    let cross = |u: &Vector3<Complex64>, v: &Vector3<Complex64>| {
        Vector3::new(
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        )
    };
    let candidates = [
        cross(&rows[0], &rows[1]),
        cross(&rows[0], &rows[2]),
        cross(&rows[1], &rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    best / c(best.norm())
}

/// Modal solution of the two-qubit reduced system for the given initial state.
pub fn closed_form_delta(
    initial: &ReducedStateTwoQubit,
    params: &TwoQubitEngineParams,
) -> Result<ClosedFormSolution> {
    params.validate()?;
    let roots = characteristic_roots(params.p1, params.p2, params.g)?;
    let (a, b) = two_qubit_system(params)?;
    let delta_inf = delta_infinity(params)?;
    let (g1, g2) = gamma_infinity(params)?;
    let fixed = [delta_inf, c(g1), c(g2)];
    let scale = params.p1 + params.p2 + params.g;
    let l = roots.lambda;
    let min_gap = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| (l[i] - l[j]).norm())
        .fold(f64::INFINITY, f64::min);
    let degenerate = min_gap < 1e-6 * scale;

    let mut modes = [[c(0.0); 3]; 3];
    let mut deltas = [c(0.0); 3];
    if degenerate {
        log::warn!("characteristic roots nearly degenerate (gap {min_gap:.3e}); using numerical integration");
    } else {
        let mut v = Matrix3::<Complex64>::zeros();
        for (k, &lambda) in l.iter().enumerate() {
            let shifted = a - Matrix3::identity() * lambda;
            v.set_column(k, &null_vector(&shifted));
        }
        let offset = initial.to_vector() - Vector3::from(fixed);
        let coeffs = v
            .lu()
            .solve(&offset)
            .ok_or_else(|| Error::invalid("roots", "eigenvector matrix is singular"))?;
        for k in 0..3 {
            for comp in 0..3 {
                modes[k][comp] = v[(comp, k)] * coeffs[k];
            }
            deltas[k] = modes[k][0];
        }
        // b is consumed via the fixed point; keep it referenced for clarity of the system.
        debug_assert!((a * Vector3::from(fixed) + b).norm() < 1e-9 * scale.max(1.0));
    }
    Ok(ClosedFormSolution {
        deltas,
        lambdas: roots,
        delta_infinity: delta_inf,
        degenerate,
        modes,
        fixed_point: fixed,
        initial: *initial,
        params: *params,
    })
}

fn qutrit_system(params: &QutritEngineParams) -> Result<(Matrix3<Complex64>, Vector3<Complex64>)> {
    let th = params.thermals()?;
    let (g, pc, pr, ph) = (params.g, params.pc, params.pr, params.ph);
    let (bc, br, bh, rh) = (th.c.rbar, th.r.rbar, th.h.rbar, th.h.r);
    let a = Matrix3::new(
        c(-(pc + pr + ph)), -I * 2.0 * g, I * 2.0 * g,
        -I * g, c(-pc - ph * bh), c(-pc * bc + ph * rh),
        I * g, c(-pr * br + ph * bh), c(-pr - ph * rh),
    );
    let b = Vector3::new(c(0.0), c(pc * bc), c(pr * br));
    Ok((a, b))
}

pub fn reduced_rhs_qutrit(s: &ReducedStateQutrit, params: &QutritEngineParams) -> Result<ReducedDerivative> {
    let th = params.thermals()?;
    let (g, pc, pr, ph) = (params.g, params.pc, params.pr, params.ph);
    let (bc, br, bh, rh) = (th.c.rbar, th.r.rbar, th.h.rbar, th.h.r);
    let hot = ph * (bh * s.b1 - rh * s.b2);
    Ok(ReducedDerivative {
        coherence: I * 2.0 * g * (s.b2 - s.b1) - s.omega * (pc + pr + ph),
        pop1: -I * g * s.omega + pc * (bc * (1.0 - s.b2) - s.b1) - hot,
        pop2: I * g * s.omega + pr * (br * (1.0 - s.b1) - s.b2) + hot,
    })
}

/// Stationary `(Ω∞, B1∞, B2∞)` from the 3×3 linear system.
pub fn qutrit_stationary(params: &QutritEngineParams) -> Result<ReducedStateQutrit> {
    let (a, b) = qutrit_system(params)?;
    let x = a
        .lu()
        .solve(&(-b))
        .ok_or_else(|| Error::invalid("qutrit", "stationary system is singular"))?;
    Ok(ReducedStateQutrit {
        omega: x[0],
        b1: x[1].re,
        b2: x[2].re,
    })
}

/// Fixed-step RK4 of the qutrit reduced system; returns `(Ω, B1, B2)`.
pub fn integrate_reduced_qutrit(
    initial: &ReducedStateQutrit,
    params: &QutritEngineParams,
    t: f64,
    dt: f64,
) -> Result<Vector3<Complex64>> {
    let (a, b) = qutrit_system(params)?;
    let x0 = Vector3::new(initial.omega, c(initial.b1), c(initial.b2));
    Ok(rk4_linear(&a, &b, x0, t, dt))
}

/// General three-rate long-time work rate of the qutrit engine.
pub fn qutrit_general_rate(params: &QutritEngineParams, th: &QutritThermals) -> f64 {
    let (g, pc, pr, ph, e2) = (params.g, params.pc, params.pr, params.ph, params.e2);
    let (rc, bc) = (th.c.r, th.c.rbar);
    let (rr, br) = (th.r.r, th.r.rbar);
    let (rh, bh) = (th.h.r, th.h.rbar);
    let g2 = g * g;
    let num = 2.0 * g2 * e2 * (pc * pr * (br - bc) - ph * (rh - bh) * (pc * bc + pr * br));
    let den = 2.0 * g2 * (pc * (1.0 + bc) + pr * (1.0 + br))
        + (pc + pr + ph)
            * (pc * pr * (1.0 - bc * br) + pc * ph * (1.0 - rc * bh) + pr * ph * (1.0 - rr * rh));
    num / den
}

/// The closed form stated for equal rates `p`:
/// `4g²E2 p (r̄r r̄h - r̄c rh) / (2g²(2 + r̄c + r̄r) + 3p(3 - r̄c r̄r - rc r̄h - rr rh))`.
///
/// Reducing the general formula at equal rates gives `3p²` in place of `3p`
/// in the denominator; this expression is kept only for comparison reports.
pub fn qutrit_equal_rates_printed(params: &QutritEngineParams, th: &QutritThermals) -> f64 {
    let (g, p, e2) = (params.g, params.pc, params.e2);
    let (rc, bc) = (th.c.r, th.c.rbar);
    let (rr, br) = (th.r.r, th.r.rbar);
    let (rh, bh) = (th.h.r, th.h.rbar);
    let g2 = g * g;
    4.0 * g2 * e2 * p * (br * bh - bc * rh)
        / (2.0 * g2 * (2.0 + bc + br) + 3.0 * p * (3.0 - bc * br - rc * bh - rr * rh))
}

/// The general formula's equal-rate reduction written in product form.
pub fn qutrit_equal_rates_reduced(params: &QutritEngineParams, th: &QutritThermals) -> f64 {
    let (g, p, e2) = (params.g, params.pc, params.e2);
    let (rc, bc) = (th.c.r, th.c.rbar);
    let (rr, br) = (th.r.r, th.r.rbar);
    let (rh, bh) = (th.h.r, th.h.rbar);
    let g2 = g * g;
    4.0 * g2 * e2 * p * (br * bh - bc * rh)
        / (2.0 * g2 * (2.0 + bc + br) + 3.0 * p * p * (3.0 - bc * br - rc * bh - rr * rh))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    General,
    EqualRates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QutritWorkRate {
    /// General formula.
    pub rate: f64,
    /// Equal-rates mode only: the printed main-text expression, for comparison.
    pub printed_equal_rates: Option<f64>,
}

pub fn work_rate_qutrit(params: &QutritEngineParams, mode: RateMode) -> Result<QutritWorkRate> {
    let th = params.thermals()?;
    let rate = qutrit_general_rate(params, &th);
    let printed_equal_rates = match mode {
        RateMode::General => None,
        RateMode::EqualRates => {
            if !params.rates_equal() {
                return Err(Error::invalid(
                    "pc",
                    format!(
                        "equal-rates mode requires pc = pr = ph (got {}, {}, {})",
                        params.pc, params.pr, params.ph
                    ),
                ));
            }
            Some(qutrit_equal_rates_printed(params, &th))
        }
    };
    Ok(QutritWorkRate {
        rate,
        printed_equal_rates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftingCondition {
    pub general: bool,
    /// `r̄r r̄h > r̄c rh`; `None` unless all three rates are equal.
    pub equal_rates_form: Option<bool>,
}

pub fn lifting_condition_qutrit(params: &QutritEngineParams) -> Result<LiftingCondition> {
    let th = params.thermals()?;
    let (pc, pr, ph) = (params.pc, params.pr, params.ph);
    let lhs = pc * pr * (th.r.rbar - th.c.rbar);
    let rhs = ph * (th.h.r - th.h.rbar) * (pc * th.c.rbar + pr * th.r.rbar);
    Ok(LiftingCondition {
        general: lhs > rhs,
        equal_rates_form: params
            .rates_equal()
            .then_some(th.r.rbar * th.h.rbar > th.c.rbar * th.h.r),
    })
}

/// Every closed-form steady-state quantity for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    pub params: EngineParams,
    /// Ground populations: `[r1, r2]` or `[rc, rr, rh]`.
    pub r_values: Vec<f64>,
    /// Characteristic roots (two-qubit only).
    pub roots: Option<[Complex64; 3]>,
    /// Δ∞ or Ω∞.
    pub coherence_infinity: Complex64,
    pub work_rate: f64,
    /// `(Γ1∞, Γ2∞)` or `(B1∞, B2∞)`.
    pub populations_infinity: (f64, f64),
    /// Two-qubit bias flag or the qutrit general lifting condition.
    pub lifting: bool,
    pub lifting_equal_rates_form: Option<bool>,
    pub printed_equal_rates_work_rate: Option<f64>,
}

pub fn asymptote_report(params: &EngineParams) -> Result<AsymptoteReport> {
    params.validate()?;
    match params {
        EngineParams::TwoQubit(p) => {
            let (r1, r2) = p.ground_populations()?;
            let roots = characteristic_roots(p.p1, p.p2, p.g)?;
            Ok(AsymptoteReport {
                params: *params,
                r_values: vec![r1, r2],
                roots: Some(roots.lambda),
                coherence_infinity: delta_infinity(p)?,
                work_rate: work_rate_two_qubit(p)?,
                populations_infinity: gamma_infinity(p)?,
                lifting: crate::params::joint_bias(p)?.biased,
                lifting_equal_rates_form: None,
                printed_equal_rates_work_rate: None,
            })
        }
        EngineParams::Qutrit(q) => {
            let th = q.thermals()?;
            let stationary = qutrit_stationary(q)?;
            let mode = if q.rates_equal() {
                RateMode::EqualRates
            } else {
                RateMode::General
            };
            let rate = work_rate_qutrit(q, mode)?;
            let lifting = lifting_condition_qutrit(q)?;
            Ok(AsymptoteReport {
                params: *params,
                r_values: vec![th.c.r, th.r.r, th.h.r],
                roots: None,
                coherence_infinity: stationary.omega,
                work_rate: rate.rate,
                populations_infinity: (stationary.b1, stationary.b2),
                lifting: lifting.general,
                lifting_equal_rates_form: lifting.equal_rates_form,
                printed_equal_rates_work_rate: rate.printed_equal_rates,
            })
        }
    }
}
