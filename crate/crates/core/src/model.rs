//! Hamiltonians and reset channels of the two engines on the truncated
//! machine ⊗ weight-ladder space.
//!
//! Two-qubit machine levels are indexed `2 * q1 + q2`, so `|01⟩` is level 1 and
//! `|10⟩` is level 2. Qutrit levels are indexed by their label 0, 1, 2.
//!
//! The ladder is hard-cut to the window: a coupling term is kept only if both
//! rungs it connects lie inside the window. Every retained term joins two
//! exactly degenerate states, so `[H0, Hint] = 0` on the truncated space.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{
    EngineParams, LadderWindow, QutritEngineParams, ThermalPopulation, TwoQubitEngineParams,
};
use crate::state::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TwoQubit,
    Qutrit,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TwoQubit => "two-qubit",
            ModelKind::Qutrit => "qutrit",
        }
    }
}

/// What a reset channel replaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResetTarget {
    /// Full replacement of one qubit's reduced state (qubit 1 or 2).
    Qubit { index: usize },
    /// Replacement of the `{lower, upper}` block of the qutrit; the spectator
    /// population is kept and its coherences with the block are dropped.
    Transition {
        lower: usize,
        upper: usize,
        spectator: usize,
    },
}

/// One term `w · K ρ K†` of a reset channel, where `K ⊗ 1_ladder` sends machine
/// level `from` to `to` for every listed transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMap {
    pub weight: f64,
    pub transfers: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetChannel {
    /// Bath label: "c"/"h" for the qubits, "c"/"r"/"h" for the qutrit.
    pub bath: String,
    pub rate: f64,
    /// Transition gap the bath equilibrates.
    pub gap: f64,
    pub thermal: ThermalPopulation,
    pub target: ResetTarget,
    /// Machine levels whose population counts as "excited" for this bath.
    pub excited_levels: Vec<usize>,
    pub maps: Vec<LevelMap>,
}

impl ResetChannel {
    fn qubit(
        bath: &str,
        index: usize,
        rate: f64,
        gap: f64,
        thermal: ThermalPopulation,
    ) -> Self {
        let bit = |m: usize, q: usize| if q == 1 { (m >> 1) & 1 } else { m & 1 };
        let set = |m: usize, q: usize, v: usize| {
            if q == 1 {
                (m & 1) | (v << 1)
            } else {
                (m & 2) | v
            }
        };
        let pops = [thermal.r, thermal.rbar];
        let mut maps = Vec::with_capacity(4);
        for (t, &w) in pops.iter().enumerate() {
            for s in 0..2 {
                let transfers = (0..4)
                    .filter(|&m| bit(m, index) == s)
                    .map(|m| (m, set(m, index, t)))
                    .collect();
                maps.push(LevelMap {
                    weight: w,
                    transfers,
                });
            }
        }
        Self {
            bath: bath.to_string(),
            rate,
            gap,
            thermal,
            target: ResetTarget::Qubit { index },
            excited_levels: (0..4).filter(|&m| bit(m, index) == 1).collect(),
            maps,
        }
    }

    fn transition(
        bath: &str,
        lower: usize,
        upper: usize,
        spectator: usize,
        rate: f64,
        gap: f64,
        thermal: ThermalPopulation,
    ) -> Self {
        let block = [lower, upper];
        let pops = [thermal.r, thermal.rbar];
        let mut maps = Vec::with_capacity(5);
        for (t, &w) in pops.iter().enumerate() {
            for &s in &block {
                maps.push(LevelMap {
                    weight: w,
                    transfers: vec![(s, block[t])],
                });
            }
        }
        maps.push(LevelMap {
            weight: 1.0,
            transfers: vec![(spectator, spectator)],
        });
        Self {
            bath: bath.to_string(),
            rate,
            gap,
            thermal,
            target: ResetTarget::Transition {
                lower,
                upper,
                spectator,
            },
            excited_levels: vec![upper],
            maps,
        }
    }

    /// The reset map `R(ρ)` alone (no rate, no `-ρ`).
    pub fn apply(&self, rho: &DensityMatrix, ladder_len: usize) -> DensityMatrix {
        let dim = rho.dim();
        let mut out = DensityMatrix::zeros(dim);
        for map in &self.maps {
            for &(a, m) in &map.transfers {
                for &(a2, m2) in &map.transfers {
                    add_block(
                        out.as_mut_slice(),
                        rho.as_slice(),
                        dim,
                        ladder_len,
                        (m, m2),
                        (a, a2),
                        map.weight,
                    );
                }
            }
        }
        out
    }
}

#[inline]
fn add_block(
    out: &mut [Complex64],
    rho: &[Complex64],
    dim: usize,
    l: usize,
    (m, m2): (usize, usize),
    (a, a2): (usize, usize),
    coeff: f64,
) {
    for n in 0..l {
        let o = (m * l + n) * dim + m2 * l;
        let s = (a * l + n) * dim + a2 * l;
        for (dst, src) in out[o..o + l].iter_mut().zip(&rho[s..s + l]) {
            *dst += src * coeff;
        }
    }
}

/// A Hermitian pair term `amplitude (|lower⟩⟨upper| + |upper⟩⟨lower|)`.
/// `lower` is the state before the weight is raised by one rung, `upper` after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub lower: usize,
    pub upper: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy)]
struct BlockTerm {
    out: (usize, usize),
    input: (usize, usize),
    coeff: f64,
}

#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub kind: ModelKind,
    pub params: EngineParams,
    pub window: LadderWindow,
    pub machine_dim: usize,
    pub machine_energies: Vec<f64>,
    /// Diagonal of H0 (H0 is diagonal in the product basis).
    pub h0_diag: Vec<f64>,
    pub couplings: Vec<Coupling>,
    pub resets: Vec<ResetChannel>,
    partner: Vec<(usize, f64)>,
    block_terms: Vec<BlockTerm>,
}

impl ModelOperators {
    fn assemble(
        kind: ModelKind,
        params: EngineParams,
        window: LadderWindow,
        machine_energies: Vec<f64>,
        lift: (usize, usize),
        g: f64,
        resets: Vec<ResetChannel>,
    ) -> Self {
        let machine_dim = machine_energies.len();
        let l = window.len();
        let dim = machine_dim * l;
        let mut h0_diag = Vec::with_capacity(dim);
        for &em in &machine_energies {
            for off in 0..l {
                h0_diag.push(em + window.energy(off));
            }
        }
        let (from, to) = lift;
        let mut couplings = Vec::new();
        let mut partner: Vec<(usize, f64)> = (0..dim).map(|i| (i, 0.0)).collect();
        if g != 0.0 {
            for off in 0..l - 1 {
                let lower = from * l + off;
                let upper = to * l + off + 1;
                couplings.push(Coupling {
                    lower,
                    upper,
                    amplitude: g,
                });
                partner[lower] = (upper, g);
                partner[upper] = (lower, g);
            }
        }

        let mut block_terms: Vec<BlockTerm> = Vec::new();
        let mut push = |out: (usize, usize), input: (usize, usize), coeff: f64| {
            if let Some(t) = block_terms
                .iter_mut()
                .find(|t| t.out == out && t.input == input)
            {
                t.coeff += coeff;
            } else {
                block_terms.push(BlockTerm { out, input, coeff });
            }
        };
        let total_rate: f64 = resets.iter().map(|c| c.rate).sum();
        for m in 0..machine_dim {
            for m2 in 0..machine_dim {
                push((m, m2), (m, m2), -total_rate);
            }
        }
        for ch in &resets {
            for map in &ch.maps {
                for &(a, m) in &map.transfers {
                    for &(a2, m2) in &map.transfers {
                        push((m, m2), (a, a2), ch.rate * map.weight);
                    }
                }
            }
        }
        block_terms.retain(|t| t.coeff != 0.0);

        Self {
            kind,
            params,
            window,
            machine_dim,
            machine_energies,
            h0_diag,
            couplings,
            resets,
            partner,
            block_terms,
        }
    }

    pub fn dim(&self) -> usize {
        self.machine_dim * self.window.len()
    }

    pub fn ladder_len(&self) -> usize {
        self.window.len()
    }

    pub fn index(&self, level: usize, rung: i64) -> Option<usize> {
        let off = self.window.offset(rung)?;
        (level < self.machine_dim).then(|| level * self.window.len() + off)
    }

    pub fn ladder_spacing(&self) -> f64 {
        self.window.spacing
    }

    /// Coupling strength g.
    pub fn g(&self) -> f64 {
        self.params.g()
    }

    pub fn reset_rates(&self) -> Vec<f64> {
        self.resets.iter().map(|c| c.rate).collect()
    }

    pub fn h0_matrix(&self) -> DMatrix<Complex64> {
        let d: Vec<Complex64> = self.h0_diag.iter().map(|&e| Complex64::new(e, 0.0)).collect();
        DMatrix::from_diagonal(&DVector::from_vec(d))
    }

    pub fn hint_matrix(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for c in &self.couplings {
            m[(c.lower, c.upper)] += Complex64::new(c.amplitude, 0.0);
            m[(c.upper, c.lower)] += Complex64::new(c.amplitude, 0.0);
        }
        m
    }

    /// Basis indices whose ladder rung is not at either end of the window.
    pub fn interior_indices(&self) -> Vec<usize> {
        let l = self.window.len();
        (0..self.dim())
            .filter(|i| {
                let off = i % l;
                off > 0 && off + 1 < l
            })
            .collect()
    }

    /// Max-entry norm of `[H0, Hint]` restricted to the interior block.
    pub fn interior_commutator_norm(&self) -> f64 {
        let h0 = self.h0_matrix();
        let hi = self.hint_matrix();
        let c = &h0 * &hi - &hi * &h0;
        let idx = self.interior_indices();
        let mut worst = 0.0f64;
        for &i in &idx {
            for &k in &idx {
                worst = worst.max(c[(i, k)].norm());
            }
        }
        worst
    }

    pub(crate) fn check_dim(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rho.dim(),
            });
        }
        Ok(())
    }

    /// Writes `L(ρ)` into `out`. With `include_h0 = false` the free evolution is
    /// dropped, which is the generator in the interaction frame of H0 (exact,
    /// since H0 commutes with Hint and every reset channel is H0-covariant).
    pub(crate) fn apply_generator(&self, rho: &[Complex64], out: &mut [Complex64], include_h0: bool) {
        let dim = self.dim();
        let l = self.window.len();
        debug_assert_eq!(rho.len(), dim * dim);
        debug_assert_eq!(out.len(), dim * dim);

        for i in 0..dim {
            let (pi, ai) = self.partner[i];
            let row_i = &rho[i * dim..(i + 1) * dim];
            let row_pi = &rho[pi * dim..(pi + 1) * dim];
            let row_out = &mut out[i * dim..(i + 1) * dim];
            let ei = self.h0_diag[i];
            for k in 0..dim {
                let (pk, ak) = self.partner[k];
                let mut v = row_pi[k] * ai - row_i[pk] * ak;
                if include_h0 {
                    v += row_i[k] * (ei - self.h0_diag[k]);
                }
                // -i v
                row_out[k] = Complex64::new(v.im, -v.re);
            }
        }
        for t in &self.block_terms {
            add_block(out, rho, dim, l, t.out, t.input, t.coeff);
        }
    }

    /// Stationary machine populations of the reset channels alone (g = 0),
    /// from the rate-balance linear system.
    pub fn reset_stationary_populations(&self) -> Result<Vec<f64>> {
        let d = self.machine_dim;
        let mut w = DMatrix::<f64>::zeros(d, d);
        for ch in &self.resets {
            for m in 0..d {
                w[(m, m)] -= ch.rate;
            }
            for map in &ch.maps {
                for &(from, to) in &map.transfers {
                    w[(to, from)] += ch.rate * map.weight;
                }
            }
        }
        // Replace the last balance equation with normalisation.
        for m in 0..d {
            w[(d - 1, m)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(d);
        rhs[d - 1] = 1.0;
        let sol = w
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::invalid("resets", "rate-balance system is singular"))?;
        Ok(sol.iter().cloned().collect())
    }

    /// Machine populations of the product initial state.
    pub fn initial_machine_populations(&self) -> Result<Vec<f64>> {
        match self.params {
            EngineParams::TwoQubit(p) => {
                let t1 = p.qubit1_thermal()?;
                let t2 = p.qubit2_thermal()?;
                let q1 = [t1.r, t1.rbar];
                let q2 = [t2.r, t2.rbar];
                Ok((0..4).map(|m| q1[m >> 1] * q2[m & 1]).collect())
            }
            EngineParams::Qutrit(_) => self.reset_stationary_populations(),
        }
    }
}

fn check_spacing(window: &LadderWindow, expected: f64) -> Result<()> {
    window.validate()?;
    let tol = 1e-12 * expected.abs().max(1.0);
    if (window.spacing - expected).abs() > tol {
        return Err(Error::invalid(
            "spacing",
            format!(
                "ladder spacing {} must equal the machine's lifting gap {}",
                window.spacing, expected
            ),
        ));
    }
    Ok(())
}

/// H0 = E1 |1⟩⟨1|₁ + E2 |1⟩⟨1|₂ + Σ n𝓔 |n⟩⟨n|, Hint = g Σ (|01,n⟩⟨10,n+1| + h.c.),
/// and full resets of each qubit to its bath's thermal state.
pub fn build_two_qubit(params: &TwoQubitEngineParams, window: &LadderWindow) -> Result<ModelOperators> {
    params.validate()?;
    check_spacing(window, params.ladder_spacing())?;
    let t1 = params.qubit1_thermal()?;
    let t2 = params.qubit2_thermal()?;
    let energies = vec![0.0, params.e2, params.e1, params.e1 + params.e2];
    let resets = vec![
        ResetChannel::qubit("c", 1, params.p1, params.e1, t1),
        ResetChannel::qubit("h", 2, params.p2, params.e2, t2),
    ];
    Ok(ModelOperators::assemble(
        ModelKind::TwoQubit,
        EngineParams::TwoQubit(*params),
        *window,
        energies,
        (1, 2),
        params.g,
        resets,
    ))
}

/// H0 = E1 |1⟩⟨1| + (E1+E2) |2⟩⟨2| + E2 Σ n |n⟩⟨n|, Hint = g Σ (|1,n+1⟩⟨2,n| + h.c.),
/// and three partial resets, one per transition.
pub fn build_qutrit(params: &QutritEngineParams, window: &LadderWindow) -> Result<ModelOperators> {
    params.validate()?;
    check_spacing(window, params.ladder_spacing())?;
    let th = params.thermals()?;
    let energies = vec![0.0, params.e1, params.e1 + params.e2];
    let resets = vec![
        ResetChannel::transition("c", 0, 1, 2, params.pc, params.e1, th.c),
        ResetChannel::transition("r", 0, 2, 1, params.pr, params.e1 + params.e2, th.r),
        ResetChannel::transition("h", 1, 2, 0, params.ph, params.e2, th.h),
    ];
    Ok(ModelOperators::assemble(
        ModelKind::Qutrit,
        EngineParams::Qutrit(*params),
        *window,
        energies,
        (2, 1),
        params.g,
        resets,
    ))
}

pub fn build_model(params: &EngineParams, window: &LadderWindow) -> Result<ModelOperators> {
    match params {
        EngineParams::TwoQubit(p) => build_two_qubit(p, window),
        EngineParams::Qutrit(p) => build_qutrit(p, window),
    }
}

/// Machine in its no-coupling steady state, weight localized at `n0`.
pub fn thermal_product_state(model: &ModelOperators) -> Result<DensityMatrix> {
    let pops = model.initial_machine_populations()?;
    let n0 = model.window.n0;
    let mut diag = vec![0.0; model.dim()];
    for (m, p) in pops.iter().enumerate() {
        let i = model
            .index(m, n0)
            .ok_or_else(|| Error::invalid("n0", "initial rung outside window"))?;
        diag[i] = *p;
    }
    Ok(DensityMatrix::from_diagonal(&diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(spacing: f64) -> LadderWindow {
        LadderWindow::new(-2, 2, 0, spacing).unwrap()
    }

    #[test]
    fn two_qubit_dimensions_and_couplings() {
        let p = TwoQubitEngineParams::reference();
        let m = build_two_qubit(&p, &window(1.0)).unwrap();
        assert_eq!(m.dim(), 20);
        let hint = m.hint_matrix();
        let nnz = hint.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nnz, 8);
        assert_eq!(hint, hint.adjoint());
        // |01,-2⟩ couples to |10,-1⟩
        let a = m.index(1, -2).unwrap();
        let b = m.index(2, -1).unwrap();
        assert_eq!(hint[(a, b)].re, 0.1);
        assert_eq!(m.h0_diag[a], m.h0_diag[b]);
        assert!(m.interior_commutator_norm() < 1e-12);
    }

    #[test]
    fn qutrit_dimensions_and_couplings() {
        let p = QutritEngineParams::reference();
        let m = build_qutrit(&p, &window(1.0)).unwrap();
        assert_eq!(m.dim(), 15);
        let nnz = m.hint_matrix().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nnz, 8);
        let a = m.index(2, 0).unwrap();
        let b = m.index(1, 1).unwrap();
        assert_eq!(m.h0_diag[a], m.h0_diag[b]);
        assert!(m.interior_commutator_norm() < 1e-12);
    }

    #[test]
    fn zero_coupling_gives_zero_hint() {
        let mut p = TwoQubitEngineParams::reference();
        p.g = 0.0;
        let m = build_two_qubit(&p, &window(1.0)).unwrap();
        assert!(m.hint_matrix().iter().all(|z| z.norm() == 0.0));
        let mut q = QutritEngineParams::reference();
        q.g = 0.0;
        let m = build_qutrit(&q, &window(1.0)).unwrap();
        assert!(m.hint_matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn spacing_mismatch_rejected() {
        let p = TwoQubitEngineParams::reference();
        let err = build_two_qubit(&p, &window(2.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref field, .. } if field == "spacing"));
        let q = QutritEngineParams::reference();
        assert!(build_qutrit(&q, &window(0.5)).is_err());
    }

    #[test]
    fn product_state_marginals() {
        let p = TwoQubitEngineParams::reference();
        let m = build_two_qubit(&p, &window(1.0)).unwrap();
        let rho = thermal_product_state(&m).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        let r1 = p.qubit1_thermal().unwrap().r;
        let ground1: f64 = [0usize, 1]
            .iter()
            .map(|&lvl| rho[(m.index(lvl, 0).unwrap(), m.index(lvl, 0).unwrap())].re)
            .sum();
        assert!((ground1 - r1).abs() < 1e-15);
    }

    #[test]
    fn qutrit_initial_state_is_reset_fixed_point() {
        let q = QutritEngineParams::reference();
        let m = build_qutrit(&q, &window(1.0)).unwrap();
        let pops = m.reset_stationary_populations().unwrap();
        assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // Independent check: net population flow of each bath's two-level reset.
        let th = q.thermals().unwrap();
        let (p0, p1, p2) = (pops[0], pops[1], pops[2]);
        let flow1 = q.pc * (th.c.rbar * (p0 + p1) - p1) + q.ph * (th.h.r * (p1 + p2) - p1);
        let flow2 = q.pr * (th.r.rbar * (p0 + p2) - p2) + q.ph * (th.h.rbar * (p1 + p2) - p2);
        assert!(flow1.abs() < 1e-12);
        assert!(flow2.abs() < 1e-12);
    }

    #[test]
    fn qubit_reset_maps_replace_the_marginal() {
        let p = TwoQubitEngineParams::reference();
        let m = build_two_qubit(&p, &window(1.0)).unwrap();
        let l = m.ladder_len();
        // Pure |11, 0⟩.
        let mut diag = vec![0.0; m.dim()];
        diag[m.index(3, 0).unwrap()] = 1.0;
        let rho = DensityMatrix::from_diagonal(&diag);
        let out = m.resets[0].apply(&rho, l);
        let t1 = p.qubit1_thermal().unwrap();
        // Qubit 1 reset, qubit 2 stays excited: |01⟩ with r1, |11⟩ with rbar1.
        let i01 = m.index(1, 0).unwrap();
        let i11 = m.index(3, 0).unwrap();
        assert!((out[(i01, i01)].re - t1.r).abs() < 1e-15);
        assert!((out[(i11, i11)].re - t1.rbar).abs() < 1e-15);
        assert!((out.trace().re - 1.0).abs() < 1e-15);
    }
}
