//! Physical parameters of the two engine models and the thermal quantities
//! derived from them.
//!
//! Units: ħ = 1 throughout. Boltzmann's constant defaults to 1 so energies and
//! temperatures share a unit; set [`PhysicalConstants::k`] for SI-style input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Boltzmann's constant, energy per temperature.
    pub k: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { k: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::invalid("k", "Boltzmann constant must be positive"));
        }
        Ok(())
    }
}

/// Ground (`r`) and excited (`rbar`) populations of a two-level transition in
/// equilibrium with a bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPopulation {
    pub r: f64,
    pub rbar: f64,
}

impl ThermalPopulation {
    /// Population `r - rbar` of the ground level in excess of the excited one.
    pub fn imbalance(&self) -> f64 {
        self.r - self.rbar
    }
}

/// Thermal populations of a transition with gap `energy` at temperature `temperature`.
///
/// `rbar = r * exp(-E/kT)` and `r + rbar = 1`.
pub fn thermal_population(
    energy: f64,
    temperature: f64,
    consts: &PhysicalConstants,
) -> Result<ThermalPopulation> {
    consts.validate()?;
    if !(energy.is_finite() && energy > 0.0) {
        return Err(Error::invalid("E", "energy gap must be positive"));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::invalid("T", "temperature must be positive"));
    }
    let boltzmann = (-energy / (consts.k * temperature)).exp();
    let z = 1.0 + boltzmann;
    Ok(ThermalPopulation {
        r: 1.0 / z,
        rbar: boltzmann / z,
    })
}

fn require_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {value}")))
    }
}

fn require_non_negative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be non-negative, got {value}")))
    }
}

/// Two qubits at gaps `e1 < e2`, qubit 1 on the cold bath, qubit 2 on the hot bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoQubitEngineParams {
    pub e1: f64,
    pub e2: f64,
    pub g: f64,
    pub p1: f64,
    pub p2: f64,
    pub tc: f64,
    pub th: f64,
    #[serde(default)]
    pub constants: PhysicalConstants,
}

impl TwoQubitEngineParams {
    /// Reference parameter set used throughout the test suite.
    pub fn reference() -> Self {
        Self {
            e1: 1.0,
            e2: 2.0,
            g: 0.1,
            p1: 0.1,
            p2: 0.1,
            tc: 1.0,
            th: 4.0,
            constants: PhysicalConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        require_positive("e1", self.e1)?;
        require_positive("e2", self.e2)?;
        if self.e2 <= self.e1 {
            return Err(Error::invalid(
                "e2",
                format!(
                    "energy-matching constraint E2 - E1 = ladder spacing requires E2 > E1 (got E1 = {}, E2 = {})",
                    self.e1, self.e2
                ),
            ));
        }
        // g = 0 is admitted: it is the decoupled reference case.
        require_non_negative("g", self.g)?;
        require_positive("p1", self.p1)?;
        require_positive("p2", self.p2)?;
        require_positive("tc", self.tc)?;
        require_positive("th", self.th)?;
        if self.th <= self.tc {
            return Err(Error::invalid(
                "th",
                format!("hot bath must be hotter than cold bath (Tc = {}, Th = {})", self.tc, self.th),
            ));
        }
        Ok(())
    }

    /// Weight ladder spacing, E2 - E1.
    pub fn ladder_spacing(&self) -> f64 {
        self.e2 - self.e1
    }

    pub fn qubit1_thermal(&self) -> Result<ThermalPopulation> {
        thermal_population(self.e1, self.tc, &self.constants)
    }

    pub fn qubit2_thermal(&self) -> Result<ThermalPopulation> {
        thermal_population(self.e2, self.th, &self.constants)
    }

    /// `(r1, r2)` after validation.
    pub fn ground_populations(&self) -> Result<(f64, f64)> {
        self.validate()?;
        Ok((self.qubit1_thermal()?.r, self.qubit2_thermal()?.r))
    }

    pub fn max_rate(&self) -> f64 {
        self.g.max(self.p1).max(self.p2)
    }
}

/// A single qutrit with levels at 0, E1, E1 + E2; transitions 0-1, 0-2 and 1-2
/// coupled to baths at Tc, Tr and Th respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QutritEngineParams {
    pub e1: f64,
    pub e2: f64,
    pub g: f64,
    pub pc: f64,
    pub pr: f64,
    pub ph: f64,
    pub tc: f64,
    pub tr: f64,
    pub th: f64,
    #[serde(default)]
    pub constants: PhysicalConstants,
}

/// Thermal states of the three qutrit transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QutritThermals {
    /// 0-1 transition (gap E1) at Tc.
    pub c: ThermalPopulation,
    /// 0-2 transition (gap E1 + E2) at Tr.
    pub r: ThermalPopulation,
    /// 1-2 transition (gap E2) at Th.
    pub h: ThermalPopulation,
}

impl QutritEngineParams {
    /// Reference qutrit configuration: lifting at equal reset rates.
    pub fn reference() -> Self {
        Self {
            e1: 1.0,
            e2: 1.0,
            g: 0.05,
            pc: 0.1,
            pr: 0.1,
            ph: 0.1,
            tc: 1.0,
            tr: 20.0,
            th: 10.0,
            constants: PhysicalConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        require_positive("e1", self.e1)?;
        require_positive("e2", self.e2)?;
        require_non_negative("g", self.g)?;
        require_positive("pc", self.pc)?;
        require_positive("pr", self.pr)?;
        require_positive("ph", self.ph)?;
        require_positive("tc", self.tc)?;
        require_positive("tr", self.tr)?;
        require_positive("th", self.th)?;
        Ok(())
    }

    pub fn ladder_spacing(&self) -> f64 {
        self.e2
    }

    pub fn thermals(&self) -> Result<QutritThermals> {
        self.validate()?;
        Ok(QutritThermals {
            c: thermal_population(self.e1, self.tc, &self.constants)?,
            r: thermal_population(self.e1 + self.e2, self.tr, &self.constants)?,
            h: thermal_population(self.e2, self.th, &self.constants)?,
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.pc + self.pr + self.ph
    }

    pub fn max_rate(&self) -> f64 {
        self.g.max(self.pc).max(self.pr).max(self.ph)
    }

    pub fn rates_equal(&self) -> bool {
        let scale = self.pc.abs().max(self.pr.abs()).max(self.ph.abs());
        let tol = 1e-12 * scale;
        (self.pc - self.pr).abs() <= tol && (self.pr - self.ph).abs() <= tol
    }
}

/// Population imbalance between the two degenerate machine states that the
/// weight-coupling swaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Probability of |01⟩ (qubit 1 ground, qubit 2 excited).
    pub q01: f64,
    /// Probability of |10⟩.
    pub q10: f64,
    pub biased: bool,
    /// E1/Tc - E2/Th; positive when the lifting transition is favoured.
    pub bias_gap: f64,
}

pub fn joint_bias(params: &TwoQubitEngineParams) -> Result<BiasReport> {
    params.validate()?;
    let t1 = params.qubit1_thermal()?;
    let t2 = params.qubit2_thermal()?;
    let bias_gap = params.e1 / params.tc - params.e2 / params.th;
    Ok(BiasReport {
        q01: t1.r * t2.rbar,
        q10: t1.rbar * t2.r,
        biased: bias_gap > 0.0,
        bias_gap,
    })
}

/// A soft diagnostic: the reset master equation is only trustworthy when the
/// coupling and reset rates are small against the level spacings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingWarning {
    pub field: String,
    pub value: f64,
    pub threshold: f64,
}

impl std::fmt::Display for CouplingWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "`{}` = {} exceeds the weak-coupling threshold {}",
            self.field, self.value, self.threshold
        )
    }
}

const WEAK_COUPLING_FRACTION: f64 = 0.1;

fn collect_warnings(rates: &[(&str, f64)], smallest_gap: f64) -> Vec<CouplingWarning> {
    let threshold = WEAK_COUPLING_FRACTION * smallest_gap;
    rates
        .iter()
        .filter(|(_, v)| *v > threshold)
        .map(|(name, v)| CouplingWarning {
            field: (*name).to_string(),
            value: *v,
            threshold,
        })
        .collect()
}

impl TwoQubitEngineParams {
    pub fn weak_coupling_warnings(&self) -> Vec<CouplingWarning> {
        let gap = self.e1.min(self.e2).min(self.ladder_spacing().abs());
        collect_warnings(&[("g", self.g), ("p1", self.p1), ("p2", self.p2)], gap)
    }
}

impl QutritEngineParams {
    pub fn weak_coupling_warnings(&self) -> Vec<CouplingWarning> {
        let gap = self.e1.min(self.e2);
        collect_warnings(
            &[("g", self.g), ("pc", self.pc), ("pr", self.pr), ("ph", self.ph)],
            gap,
        )
    }
}

/// Either engine's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EngineParams {
    TwoQubit(TwoQubitEngineParams),
    Qutrit(QutritEngineParams),
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            EngineParams::TwoQubit(p) => p.validate(),
            EngineParams::Qutrit(p) => p.validate(),
        }
    }

    pub fn ladder_spacing(&self) -> f64 {
        match self {
            EngineParams::TwoQubit(p) => p.ladder_spacing(),
            EngineParams::Qutrit(p) => p.ladder_spacing(),
        }
    }

    pub fn max_rate(&self) -> f64 {
        match self {
            EngineParams::TwoQubit(p) => p.max_rate(),
            EngineParams::Qutrit(p) => p.max_rate(),
        }
    }

    pub fn g(&self) -> f64 {
        match self {
            EngineParams::TwoQubit(p) => p.g,
            EngineParams::Qutrit(p) => p.g,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EngineParams::TwoQubit(_) => "two-qubit",
            EngineParams::Qutrit(_) => "qutrit",
        }
    }
}

/// Emits warnings when `g` or any reset rate exceeds a tenth of the smallest gap.
/// Never fails.
pub fn validate_weak_coupling(params: &EngineParams) -> Vec<CouplingWarning> {
    match params {
        EngineParams::TwoQubit(p) => p.weak_coupling_warnings(),
        EngineParams::Qutrit(p) => p.weak_coupling_warnings(),
    }
}

/// The retained slice `[n_min, n_max]` of the weight's infinite energy ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderWindow {
    pub n_min: i64,
    pub n_max: i64,
    /// Initial weight position.
    pub n0: i64,
    /// Energy between adjacent ladder rungs.
    pub spacing: f64,
}

impl LadderWindow {
    pub fn new(n_min: i64, n_max: i64, n0: i64, spacing: f64) -> Result<Self> {
        let window = Self {
            n_min,
            n_max,
            n0,
            spacing,
        };
        window.validate()?;
        Ok(window)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max - self.n_min + 1 < 3 {
            return Err(Error::invalid(
                "window",
                format!("ladder window [{}, {}] must hold at least 3 sites", self.n_min, self.n_max),
            ));
        }
        if !(self.n_min < self.n0 && self.n0 < self.n_max) {
            return Err(Error::invalid(
                "n0",
                format!(
                    "initial position {} must lie strictly inside [{}, {}]",
                    self.n0, self.n_min, self.n_max
                ),
            ));
        }
        require_positive("spacing", self.spacing)
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n_max < self.n_min
    }

    /// Offset of rung `n` inside the window.
    pub fn offset(&self, n: i64) -> Option<usize> {
        (self.n_min..=self.n_max)
            .contains(&n)
            .then(|| (n - self.n_min) as usize)
    }

    pub fn rung(&self, offset: usize) -> i64 {
        self.n_min + offset as i64
    }

    pub fn energy(&self, offset: usize) -> f64 {
        self.rung(offset) as f64 * self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const K1: PhysicalConstants = PhysicalConstants { k: 1.0 };

    #[test]
    fn thermal_population_limits() {
        let hot = thermal_population(1.0, 1e12, &K1).unwrap();
        assert!((hot.r - 0.5).abs() < 1e-9);
        let cold = thermal_population(1.0, 1e-6, &K1).unwrap();
        assert_eq!(cold.r, 1.0);
        assert_eq!(cold.rbar, 0.0);
    }

    #[test]
    fn thermal_population_unit_temperature() {
        let t = thermal_population(1.0, 1.0, &K1).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((t.r - expected).abs() < 1e-15);
        assert!((t.r - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((t.rbar / t.r - (-1.0f64).exp()).abs() < 1e-15);
        assert!((t.r + t.rbar - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_population_rejects_bad_input() {
        assert!(thermal_population(0.0, 1.0, &K1).is_err());
        assert!(thermal_population(1.0, -1.0, &K1).is_err());
        assert!(thermal_population(1.0, 1.0, &PhysicalConstants { k: 0.0 }).is_err());
    }

    #[test]
    fn bias_examples() {
        let mut p = TwoQubitEngineParams::reference();
        let b = joint_bias(&p).unwrap();
        assert!(b.biased);
        assert!((b.bias_gap - 0.5).abs() < 1e-15);
        let t1 = thermal_population(1.0, 1.0, &K1).unwrap();
        let t2 = thermal_population(2.0, 4.0, &K1).unwrap();
        assert_eq!(b.q01, t1.r * t2.rbar);
        assert_eq!(b.q10, t1.rbar * t2.r);
        assert!(b.q01 > b.q10);

        p.th = 2.0;
        let b = joint_bias(&p).unwrap();
        assert!(!b.biased);
        assert_eq!(b.bias_gap, 0.0);
    }

    #[test]
    fn degenerate_gaps_rejected() {
        let mut p = TwoQubitEngineParams::reference();
        p.e2 = p.e1;
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("e2"));
        p.e2 = 0.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn weak_coupling_warnings() {
        let mut p = TwoQubitEngineParams::reference();
        p.g = 0.01;
        p.p1 = 0.01;
        p.p2 = 0.01;
        assert!(p.weak_coupling_warnings().is_empty());
        p.g = 0.5;
        let w = p.weak_coupling_warnings();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].field, "g");
        p.g = 0.01;
        p.p1 = 1.0;
        let w = p.weak_coupling_warnings();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].field, "p1");
    }

    #[test]
    fn window_validation() {
        assert!(LadderWindow::new(-2, 2, 0, 1.0).is_ok());
        assert!(LadderWindow::new(0, 1, 0, 1.0).is_err());
        assert!(LadderWindow::new(-2, 2, 2, 1.0).is_err());
        assert!(LadderWindow::new(-2, 2, 0, 0.0).is_err());
        let w = LadderWindow::new(-2, 2, 0, 1.0).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.offset(-2), Some(0));
        assert_eq!(w.offset(3), None);
    }

    proptest! {
        #[test]
        fn thermal_population_monotone(e in 0.01f64..10.0, t in 0.01f64..10.0, de in 0.001f64..1.0, dt in 0.001f64..1.0) {
            let base = thermal_population(e, t, &K1).unwrap();
            let higher_gap = thermal_population(e + de, t, &K1).unwrap();
            let hotter = thermal_population(e, t + dt, &K1).unwrap();
            prop_assert!(higher_gap.r >= base.r);
            prop_assert!(hotter.r <= base.r);
            prop_assert!(base.r > 0.5 && base.r <= 1.0);
        }

        #[test]
        fn bias_flag_matches_joint_probabilities(
            e1 in 0.1f64..5.0, de in 0.1f64..5.0, tc in 0.1f64..5.0, dtemp in 0.01f64..20.0
        ) {
            let p = TwoQubitEngineParams {
                e1, e2: e1 + de, g: 0.1, p1: 0.1, p2: 0.1, tc, th: tc + dtemp,
                constants: K1,
            };
            let b = joint_bias(&p).unwrap();
            // Skip the measure-zero neighbourhood of the Carnot point where rounding decides.
            prop_assume!(b.bias_gap.abs() > 1e-9);
            prop_assert_eq!(b.biased, b.q01 > b.q10);
        }
    }
}
