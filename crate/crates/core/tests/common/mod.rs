//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's generator or closed forms; everything is rebuilt from the
//! model definitions with dense matrices and plain arithmetic.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qheat::{DensityMatrix, QutritEngineParams, TwoQubitEngineParams};
use rand::Rng;

pub type C = Complex64;

pub fn c(x: f64) -> C {
    C::new(x, 0.0)
}

pub const I: C = C { re: 0.0, im: 1.0 };

/// `(r, r̄)` for a two-level gap `e` at temperature `t` (k = 1).
pub fn thermal(e: f64, t: f64) -> (f64, f64) {
    let b = (-e / t).exp();
    (1.0 / (1.0 + b), b / (1.0 + b))
}

/// Random full-rank density matrix `A A† / Tr`.
pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C> {
    let a = DMatrix::from_fn(dim, dim, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Random pure state padded into the interior of the ladder: a sharp test of positivity.
pub fn random_pure_state<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C> {
    let v = DMatrix::from_fn(dim, 1, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let n = v.norm();
    let v = v / c(n);
    &v * v.adjoint()
}

pub fn to_density(m: &DMatrix<C>) -> DensityMatrix {
    DensityMatrix::from_matrix(m).unwrap()
}

pub fn min_eigenvalue(m: &DMatrix<C>) -> f64 {
    let h = (m + m.adjoint()) * c(0.5);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

enum Reset {
    /// Full reset of qubit `which` (0 = first, 1 = second) to `(r, r̄)`.
    Qubit { which: usize, r: f64, rbar: f64 },
    /// Reset of the `{a, b}` block to `r|a⟩⟨a| + r̄|b⟩⟨b|`; `s` is the spectator.
    Block { a: usize, b: usize, s: usize, r: f64, rbar: f64 },
}

/// Dense reference generator on the truncated ladder.
pub struct DenseOracle {
    pub machine: usize,
    pub l: usize,
    pub n_min: i64,
    pub h: DMatrix<C>,
    resets: Vec<(f64, Reset)>,
}

impl DenseOracle {
    pub fn dim(&self) -> usize {
        self.machine * self.l
    }

    fn idx(&self, m: usize, n: i64) -> usize {
        m * self.l + (n - self.n_min) as usize
    }

    pub fn two_qubit(p: &TwoQubitEngineParams, n_min: i64, n_max: i64) -> Self {
        let l = (n_max - n_min + 1) as usize;
        let spacing = p.e2 - p.e1;
        let mut o = Self {
            machine: 4,
            l,
            n_min,
            h: DMatrix::zeros(4 * l, 4 * l),
            resets: Vec::new(),
        };
        for q1 in 0..2 {
            for q2 in 0..2 {
                for n in n_min..=n_max {
                    let i = o.idx(2 * q1 + q2, n);
                    o.h[(i, i)] = c(q1 as f64 * p.e1 + q2 as f64 * p.e2 + n as f64 * spacing);
                }
            }
        }
        // |01, n⟩ ↔ |10, n+1⟩
        for n in n_min..n_max {
            let a = o.idx(1, n);
            let b = o.idx(2, n + 1);
            o.h[(a, b)] = c(p.g);
            o.h[(b, a)] = c(p.g);
        }
        let (r1, b1) = thermal(p.e1, p.tc);
        let (r2, b2) = thermal(p.e2, p.th);
        o.resets.push((p.p1, Reset::Qubit { which: 0, r: r1, rbar: b1 }));
        o.resets.push((p.p2, Reset::Qubit { which: 1, r: r2, rbar: b2 }));
        o
    }

    pub fn qutrit(q: &QutritEngineParams, n_min: i64, n_max: i64) -> Self {
        let l = (n_max - n_min + 1) as usize;
        let mut o = Self {
            machine: 3,
            l,
            n_min,
            h: DMatrix::zeros(3 * l, 3 * l),
            resets: Vec::new(),
        };
        let levels = [0.0, q.e1, q.e1 + q.e2];
        for (m, e) in levels.iter().enumerate() {
            for n in n_min..=n_max {
                let i = o.idx(m, n);
                o.h[(i, i)] = c(e + n as f64 * q.e2);
            }
        }
        // |2, n⟩ ↔ |1, n+1⟩
        for n in n_min..n_max {
            let a = o.idx(2, n);
            let b = o.idx(1, n + 1);
            o.h[(a, b)] = c(q.g);
            o.h[(b, a)] = c(q.g);
        }
        let (rc, bc) = thermal(q.e1, q.tc);
        let (rr, br) = thermal(q.e1 + q.e2, q.tr);
        let (rh, bh) = thermal(q.e2, q.th);
        o.resets.push((q.pc, Reset::Block { a: 0, b: 1, s: 2, r: rc, rbar: bc }));
        o.resets.push((q.pr, Reset::Block { a: 0, b: 2, s: 1, r: rr, rbar: br }));
        o.resets.push((q.ph, Reset::Block { a: 1, b: 2, s: 0, r: rh, rbar: bh }));
        o
    }

    fn block(&self, rho: &DMatrix<C>, m: usize, mp: usize) -> DMatrix<C> {
        rho.view((m * self.l, mp * self.l), (self.l, self.l)).into_owned()
    }

    fn set_block(&self, out: &mut DMatrix<C>, m: usize, mp: usize, b: &DMatrix<C>) {
        out.view_mut((m * self.l, mp * self.l), (self.l, self.l)).copy_from(b);
    }

    fn apply_reset(&self, reset: &Reset, rho: &DMatrix<C>) -> DMatrix<C> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        match *reset {
            Reset::Qubit { which, r, rbar } => {
                let tau = [r, rbar];
                let bits = |m: usize| (m >> 1, m & 1);
                let join = |x: usize, y: usize| 2 * x + y;
                for m in 0..4 {
                    for mp in 0..4 {
                        let (a1, a2) = bits(m);
                        let (b1, b2) = bits(mp);
                        let (kept, kept_p, reset_bit, reset_bit_p) = if which == 0 {
                            (a2, b2, a1, b1)
                        } else {
                            (a1, b1, a2, b2)
                        };
                        if reset_bit != reset_bit_p {
                            continue;
                        }
                        // Partial trace over the reset qubit.
                        let mut acc = DMatrix::zeros(self.l, self.l);
                        for s in 0..2 {
                            let (x, xp) = if which == 0 {
                                (join(s, kept), join(s, kept_p))
                            } else {
                                (join(kept, s), join(kept_p, s))
                            };
                            acc += self.block(rho, x, xp);
                        }
                        self.set_block(&mut out, m, mp, &(acc * c(tau[reset_bit])));
                    }
                }
            }
            Reset::Block { a, b, s, r, rbar } => {
                let sum = self.block(rho, a, a) + self.block(rho, b, b);
                self.set_block(&mut out, a, a, &(&sum * c(r)));
                self.set_block(&mut out, b, b, &(&sum * c(rbar)));
                self.set_block(&mut out, s, s, &self.block(rho, s, s));
            }
        }
        out
    }

    /// Each reset map `R_k(ρ)` in declaration order.
    pub fn reset_maps(&self, rho: &DMatrix<C>) -> Vec<DMatrix<C>> {
        self.resets.iter().map(|(_, r)| self.apply_reset(r, rho)).collect()
    }

    pub fn rhs(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let mut out = (&self.h * rho - rho * &self.h) * (-I);
        for (p, r) in &self.resets {
            out += (self.apply_reset(r, rho) - rho) * c(*p);
        }
        out
    }

    /// `Σ_n ⟨x, n|ρ|y, n+1⟩ - c.c.` with `(x, y)` the lifting pair.
    pub fn lift_coherence(&self, rho: &DMatrix<C>, x: usize, y: usize) -> C {
        (0..self.l - 1)
            .map(|off| {
                let a = x * self.l + off;
                let b = y * self.l + off + 1;
                rho[(a, b)] - rho[(b, a)]
            })
            .sum()
    }
}

/// 3×3 complex solve by Cramer's rule.
pub fn cramer(a: [[C; 3]; 3], b: [C; 3]) -> [C; 3] {
    let det = |m: [[C; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut x = [c(0.0); 3];
    for (k, xk) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][k] = b[row];
        }
        *xk = det(m) / d;
    }
    x
}

/// Right-hand side of the two-qubit reduced equations, `(Δ, Γ1, Γ2)`.
pub fn reduced_two_qubit(p: &TwoQubitEngineParams, x: [C; 3]) -> [C; 3] {
    let (r1, _) = thermal(p.e1, p.tc);
    let (r2, _) = thermal(p.e2, p.th);
    let [d, g1, g2] = x;
    [
        I * 2.0 * p.g * (g1 - g2) - d * (p.p1 + p.p2),
        I * p.g * d + (c(r1) - g1) * p.p1,
        -I * p.g * d + (c(r2) - g2) * p.p2,
    ]
}

/// Right-hand side of the qutrit reduced equations, `(Ω, B1, B2)`.
pub fn reduced_qutrit(q: &QutritEngineParams, x: [C; 3]) -> [C; 3] {
    let (_, bc) = thermal(q.e1, q.tc);
    let (_, br) = thermal(q.e1 + q.e2, q.tr);
    let (rh, bh) = thermal(q.e2, q.th);
    let [o, b1, b2] = x;
    let hot = (b1 * bh - b2 * rh) * q.ph;
    [
        I * 2.0 * q.g * (b2 - b1) - o * (q.pc + q.pr + q.ph),
        -I * q.g * o + (c(bc) * (c(1.0) - b2) - b1) * q.pc - hot,
        I * q.g * o + (c(br) * (c(1.0) - b1) - b2) * q.pr + hot,
    ]
}

/// Affine system `f(x) = A x + b` recovered by probing `f`.
fn affine<F: Fn([C; 3]) -> [C; 3]>(f: F) -> ([[C; 3]; 3], [C; 3]) {
    let b = f([c(0.0); 3]);
    let mut a = [[c(0.0); 3]; 3];
    for k in 0..3 {
        let mut e = [c(0.0); 3];
        e[k] = c(1.0);
        let col = f(e);
        for row in 0..3 {
            a[row][k] = col[row] - b[row];
        }
    }
    (a, b)
}

/// Stationary point of the two-qubit reduced equations.
pub fn fixed_point_two_qubit(p: &TwoQubitEngineParams) -> [C; 3] {
    let (a, b) = affine(|x| reduced_two_qubit(p, x));
    cramer(a, [-b[0], -b[1], -b[2]])
}

pub fn fixed_point_qutrit(q: &QutritEngineParams) -> [C; 3] {
    let (a, b) = affine(|x| reduced_qutrit(q, x));
    cramer(a, [-b[0], -b[1], -b[2]])
}

/// `-i g 𝓔 Δ∞`.
pub fn oracle_work_rate_two_qubit(p: &TwoQubitEngineParams) -> f64 {
    let d = fixed_point_two_qubit(p)[0];
    (-I * p.g * (p.e2 - p.e1) * d).re
}

/// `-i g E2 Ω∞`.
pub fn oracle_work_rate_qutrit(q: &QutritEngineParams) -> f64 {
    let o = fixed_point_qutrit(q)[0];
    (-I * q.g * q.e2 * o).re
}

pub fn rk4<F: Fn([C; 3]) -> [C; 3]>(f: F, mut x: [C; 3], t: f64, dt: f64) -> [C; 3] {
    let n = (t / dt).round().max(1.0) as usize;
    let h = t / n as f64;
    let add = |x: [C; 3], k: [C; 3], s: f64| [x[0] + k[0] * s, x[1] + k[1] * s, x[2] + k[2] * s];
    for _ in 0..n {
        let k1 = f(x);
        let k2 = f(add(x, k1, 0.5 * h));
        let k3 = f(add(x, k2, 0.5 * h));
        let k4 = f(add(x, k3, h));
        for i in 0..3 {
            x[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    x
}

/// Roots of `(λ+p1)(λ+p2)(λ+p1+p2) + 2g²(2λ+p1+p2)` by Durand–Kerner.
pub fn oracle_roots(p1: f64, p2: f64, g: f64) -> [C; 3] {
    let s = p1 + p2;
    let prod = p1 * p2;
    let (a2, a1, a0) = (2.0 * s, s * s + prod + 4.0 * g * g, s * prod + 2.0 * g * g * s);
    let f = |z: C| ((z + a2) * z + a1) * z + a0;
    let scale = 1.0 + a2.abs().max(a1.abs()).max(a0.abs());
    let mut z = [C::new(0.4, 0.9) * scale, C::new(0.4, 0.9).powu(2) * scale, C::new(0.4, 0.9).powu(3) * scale];
    for _ in 0..500 {
        let prev = z;
        for i in 0..3 {
            let mut den = c(1.0);
            for j in 0..3 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            z[i] -= f(z[i]) / den;
        }
        let moved = (0..3).map(|i| (z[i] - prev[i]).norm()).fold(0.0, f64::max);
        if moved < 1e-15 * scale {
            break;
        }
    }
    z
}

/// Central differences of equally spaced samples, interior points only.
pub fn central_difference(ts: &[f64], xs: &[C]) -> Vec<(f64, C)> {
    (1..xs.len() - 1)
        .map(|i| (ts[i], (xs[i + 1] - xs[i - 1]) / (ts[i + 1] - ts[i - 1])))
        .collect()
}
