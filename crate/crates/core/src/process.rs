//! Process matrices over the located Pauli basis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::codes::located_errors;
use crate::error::{Error, Result};
use crate::pauli::PauliOperator;
use crate::state::{max_abs, pauli_left, pauli_right};

/// `χ` with `E(ρ) = Σ_mn χ_mn F_m ρ F_n†`, indexed by located-error order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    n_p: usize,
    data: DMatrix<Complex64>,
}

impl ProcessMatrix {
    pub fn new(n_p: usize, data: DMatrix<Complex64>) -> Result<Self> {
        let d2 = 1usize << (2 * n_p);
        if data.nrows() != d2 || data.ncols() != d2 {
            return Err(Error::invalid(
                "process matrix",
                format!("{}x{}", data.nrows(), data.ncols()),
                format!("expected {d2}x{d2}"),
            ));
        }
        Ok(Self { n_p, data })
    }

    pub fn zeros(n_p: usize) -> Self {
        let d2 = 1usize << (2 * n_p);
        Self {
            n_p,
            data: DMatrix::zeros(d2, d2),
        }
    }

    /// Expands Kraus operators on `n_p` qubits: `E_a = Σ_m c_am F_m`, `χ_mn = Σ_a c_am c̄_an`.
    pub fn from_kraus(n_p: usize, kraus: &[DMatrix<Complex64>]) -> Result<Self> {
        let d = 1usize << n_p;
        let basis = located_errors(n_p);
        let mut chi = DMatrix::zeros(basis.len(), basis.len());
        for k in kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch {
                    left: n_p,
                    right: (k.nrows() as f64).log2() as usize,
                });
            }
            let coeffs: Vec<Complex64> = basis
                .iter()
                .map(|f| pauli_left(f, k).trace() / d as f64)
                .collect();
            for m in 0..basis.len() {
                for n in 0..basis.len() {
                    chi[(m, n)] += coeffs[m] * coeffs[n].conj();
                }
            }
        }
        Self::new(n_p, chi)
    }

    pub fn n_principal(&self) -> usize {
        self.n_p
    }

    /// Number of basis operators, `d²`.
    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn basis(&self) -> Vec<PauliOperator> {
        located_errors(self.n_p)
    }

    pub fn labels(&self) -> Vec<String> {
        self.basis().iter().map(|p| p.to_string()).collect()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[(m, n)]
    }

    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        self.data[(m, n)] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.data - self.data.adjoint()))
    }

    /// `(χ + χ†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self {
            n_p: self.n_p,
            data: (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs(&(&self.data - &other.data))
    }

    /// `Σ_mn χ_mn F_m ρ F_n†` on an `n_p`-qubit operator.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let d = 1usize << self.n_p;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                left: self.n_p,
                right: (rho.nrows() as f64).log2() as usize,
            });
        }
        let basis = self.basis();
        let left: Vec<DMatrix<Complex64>> = basis.iter().map(|f| pauli_left(f, rho)).collect();
        let mut out = DMatrix::zeros(d, d);
        for (m, f_rho) in left.iter().enumerate() {
            for (n, f_n) in basis.iter().enumerate() {
                let chi = self.data[(m, n)];
                if chi.norm() == 0.0 {
                    continue;
                }
                out += pauli_right(f_rho, &f_n.dagger()) * chi;
            }
        }
        Ok(out)
    }
}
