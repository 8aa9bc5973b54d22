//! Dense density matrices over the composite machine ⊗ ladder basis.
//!
//! Storage is row-major. Basis index is `machine_level * ladder_len + rung_offset`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_matrix(m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        let dim = m.nrows();
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for k in 0..dim {
                out[(i, k)] = m[(i, k)];
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    /// `max |ρ - ρ†|` over all entries.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for k in i..self.dim {
                let d = self[(i, k)] - self[(k, i)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Smallest eigenvalue of the Hermitian part. O(dim³).
    pub fn min_eigenvalue(&self) -> f64 {
        let mut m = self.to_matrix();
        // Symmetrise so the Hermitian solver sees exactly Hermitian input.
        let adj = m.adjoint();
        m = (m + adj) * Complex64::new(0.5, 0.0);
        m.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    /// Hermitian with unit trace and non-negative spectrum, within the given tolerances.
    pub fn check_valid(&self, trace_tol: f64, herm_tol: f64, eig_tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::invalid("rho", format!("trace {tr} is not 1")));
        }
        let h = self.hermiticity_residual();
        if h > herm_tol {
            return Err(Error::invalid("rho", format!("not Hermitian (residual {h:.3e})")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -eig_tol {
            return Err(Error::invalid("rho", format!("negative eigenvalue {lmin:.3e}")));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for DensityMatrix {
    type Output = Complex64;
    fn index(&self, (i, k): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + k]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DensityMatrix {
    fn index_mut(&mut self, (i, k): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + k]
    }
}
