//! Dense density-matrix engine for small registers.
//!
//! All operations return new states. Randomness enters only through the
//! explicit uniform variate passed to [`DensityMatrix::measure_generator`].

use std::sync::atomic::{AtomicBool, Ordering};

use faer::complex_native::c64;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::pauli::{PauliOperator, MAX_DENSE_QUBITS};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
pub const UNITARY_TOL: f64 = 1e-10;

static CHECK_INVARIANTS: AtomicBool = AtomicBool::new(cfg!(debug_assertions));

/// Enables or disables post-operation invariant checks (on by default in debug builds).
pub fn set_invariant_checks(enabled: bool) {
    CHECK_INVARIANTS.store(enabled, Ordering::Relaxed);
}

pub fn invariant_checks_enabled() -> bool {
    CHECK_INVARIANTS.load(Ordering::Relaxed)
}

/// Eigenvalue sign of a projective measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn bit(self) -> u64 {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub generator_index: usize,
    pub outcome: Outcome,
    /// Born probability of the observed outcome.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: DMatrix<Complex64>,
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

fn check_dense_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSE_QUBITS {
        return Err(Error::TooManyQubits {
            n,
            max: MAX_DENSE_QUBITS,
        });
    }
    Ok(())
}

/// `g·m` using the permutation structure of a Pauli.
pub(crate) fn pauli_left(g: &PauliOperator, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let dim = m.nrows();
    let mut out = DMatrix::zeros(dim, m.ncols());
    for b in 0..dim {
        let (r, amp) = g.basis_action(b);
        for c in 0..m.ncols() {
            out[(r, c)] = amp * m[(b, c)];
        }
    }
    out
}

/// `m·g` using the permutation structure of a Pauli.
pub(crate) fn pauli_right(m: &DMatrix<Complex64>, g: &PauliOperator) -> DMatrix<Complex64> {
    let dim = m.ncols();
    let mut out = DMatrix::zeros(m.nrows(), dim);
    for c in 0..dim {
        let (b, amp) = g.basis_action(c);
        for r in 0..m.nrows() {
            out[(r, c)] = m[(r, b)] * amp;
        }
    }
    out
}

/// `Tr[g m]` without forming `g`.
pub(crate) fn pauli_trace(g: &PauliOperator, m: &DMatrix<Complex64>) -> Complex64 {
    (0..m.nrows())
        .map(|c| {
            let (r, amp) = g.basis_action(c);
            amp * m[(c, r)]
        })
        .sum()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub(crate) fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

fn to_faer(m: &DMatrix<Complex64>) -> faer::Mat<c64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    faer::Mat::from_fn(h.nrows(), h.ncols(), |r, c| c64::new(h[(r, c)].re, h[(r, c)].im))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut vals = to_faer(m).selfadjoint_eigenvalues(faer::Side::Lower);
    vals.sort_by(f64::total_cmp);
    vals
}

/// `f(H)` for the Hermitian part `H` of `m`.
pub(crate) fn hermitian_function(m: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let eig = to_faer(m).selfadjoint_eigendecomposition(faer::Side::Lower);
    let (u, s) = (eig.u(), eig.s().column_vector());
    let d = m.nrows();
    let fs: Vec<f64> = (0..d).map(|k| f(s.read(k).re)).collect();
    DMatrix::from_fn(d, d, |r, c| {
        (0..d)
            .map(|k| {
                let (a, b) = (u.read(r, k), u.read(c, k));
                Complex64::new(a.re, a.im) * Complex64::new(b.re, -b.im) * fs[k]
            })
            .sum()
    })
}

/// Sum of singular values.
pub(crate) fn trace_norm(m: &DMatrix<Complex64>) -> f64 {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |r, c| c64::new(m[(r, c)].re, m[(r, c)].im))
        .singular_values()
        .iter()
        .sum()
}

impl DensityMatrix {
    /// Wraps a matrix after validating Hermiticity, trace and positivity.
    pub fn from_matrix(n: usize, data: DMatrix<Complex64>) -> Result<Self> {
        check_dense_size(n)?;
        let dim = 1usize << n;
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::DimensionMismatch {
                left: n,
                right: (data.nrows() as f64).log2() as usize,
            });
        }
        let rho = Self { n, data };
        rho.validate()?;
        Ok(rho)
    }

    fn from_matrix_unchecked(n: usize, data: DMatrix<Complex64>) -> Self {
        Self { n, data }
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn from_pure(psi: &DVector<Complex64>) -> Result<Self> {
        let n = psi.len().trailing_zeros() as usize;
        if !psi.len().is_power_of_two() {
            return Err(Error::invalid("state length", psi.len(), "must be a power of two"));
        }
        check_dense_size(n)?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::invalid("state norm", norm, "must be 1"));
        }
        Ok(Self {
            n,
            data: psi * psi.adjoint(),
        })
    }

    /// Computational basis state `|b⟩⟨b|`, qubit 1 most significant.
    pub fn basis_state(n: usize, b: usize) -> Result<Self> {
        check_dense_size(n)?;
        let dim = 1usize << n;
        if b >= dim {
            return Err(Error::invalid("basis index", b, format!("must be < {dim}")));
        }
        let mut data = DMatrix::zeros(dim, dim);
        data[(b, b)] = Complex64::new(1.0, 0.0);
        Ok(Self { n, data })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_dense_size(n)?;
        let dim = 1usize << n;
        Ok(Self {
            n,
            data: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.data * &self.data).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.data)
    }

    /// Checks Hermiticity, unit trace and numerical positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = max_abs(&(&self.data - self.data.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::invalid("trace", tr, "density matrix trace must be 1"));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidState { min_eigenvalue: min });
        }
        Ok(())
    }

    fn checked(self) -> Result<Self> {
        if invariant_checks_enabled() {
            self.validate()?;
        }
        Ok(self)
    }

    fn check_operator_dim(&self, m: &DMatrix<Complex64>) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: (m.nrows() as f64).log2() as usize,
            });
        }
        Ok(())
    }

    /// `U ρ U†` for a unitary `U`.
    pub fn apply_unitary(&self, u: &DMatrix<Complex64>) -> Result<Self> {
        self.check_operator_dim(u)?;
        let dev = max_abs(&(u * u.adjoint() - DMatrix::identity(self.dim(), self.dim())));
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Self::from_matrix_unchecked(self.n, u * &self.data * u.adjoint()).checked()
    }

    /// `Σ_a E_a ρ E_a†`.
    pub fn apply_channel(&self, channel: &QuantumChannel) -> Result<Self> {
        if channel.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: channel.n(),
            });
        }
        channel.check_completeness()?;
        Ok(self.apply_kraus_unchecked(channel.kraus())).and_then(Self::checked)
    }

    pub(crate) fn apply_kraus_unchecked(&self, kraus: &[DMatrix<Complex64>]) -> Self {
        let dim = self.dim();
        let data = kraus.iter().fold(DMatrix::zeros(dim, dim), |acc, k| {
            acc + k * &self.data * k.adjoint()
        });
        Self::from_matrix_unchecked(self.n, data)
    }

    /// `g ρ g†` for a Pauli `g`.
    pub fn conjugate_by_pauli(&self, g: &PauliOperator) -> Result<Self> {
        if g.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: g.n(),
            });
        }
        Ok(Self::from_matrix_unchecked(
            self.n,
            pauli_right(&pauli_left(g, &self.data), &g.dagger()),
        ))
    }

    /// `Tr[g ρ]` for a Pauli `g`.
    pub fn pauli_expectation(&self, g: &PauliOperator) -> Result<Complex64> {
        if g.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: g.n(),
            });
        }
        Ok(pauli_trace(g, &self.data))
    }

    /// Unnormalized branch `(1 ± g)/2 · ρ · (1 ± g)/2` and its probability.
    pub(crate) fn project_pauli(&self, g: &PauliOperator, outcome: Outcome) -> (DMatrix<Complex64>, f64) {
        let s = Complex64::new(outcome.sign(), 0.0);
        let g_rho = pauli_left(g, &self.data);
        let rho_g = pauli_right(&self.data, g);
        let g_rho_g = pauli_right(&g_rho, g);
        let branch = (&self.data + (g_rho + rho_g) * s + g_rho_g) * Complex64::new(0.25, 0.0);
        let p = branch.trace().re;
        (branch, p)
    }

    /// Projective measurement of a Hermitian Pauli `g`.
    ///
    /// The outcome is +1 iff `rand < p₊` with `p₊ = Tr[(1+g)ρ/2]`; the returned
    /// state is the renormalized post-measurement branch.
    pub fn measure_generator(
        &self,
        g: &PauliOperator,
        generator_index: usize,
        rand: f64,
    ) -> Result<(MeasurementRecord, DensityMatrix)> {
        if g.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: g.n(),
            });
        }
        if !g.is_hermitian() {
            return Err(Error::NotHermitian { deviation: 1.0 });
        }
        if !(0.0..1.0).contains(&rand) {
            return Err(Error::invalid("rand", rand, "uniform variate must lie in [0, 1)"));
        }
        let p_plus = ((1.0 + pauli_trace(g, &self.data).re) / 2.0).clamp(0.0, 1.0);
        let outcome = if rand < p_plus { Outcome::Plus } else { Outcome::Minus };
        let (branch, p) = self.project_pauli(g, outcome);
        if p <= 0.0 {
            return Err(Error::ImpossibleOutcome {
                generator: generator_index,
                probability: p,
            });
        }
        let post = Self::from_matrix_unchecked(self.n, branch * Complex64::new(1.0 / p, 0.0)).checked()?;
        Ok((
            MeasurementRecord {
                generator_index,
                outcome,
                probability: p,
            },
            post,
        ))
    }

    /// `Tr[O ρ]` for a Hermitian observable.
    pub fn expectation(&self, observable: &DMatrix<Complex64>) -> Result<f64> {
        self.check_operator_dim(observable)?;
        let herm = max_abs(&(observable - observable.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let v = (observable * &self.data).trace();
        if v.im.abs() > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: v.im.abs() });
        }
        Ok(v.re)
    }

    /// Reduced state on the 1-based `keep` sites, in increasing site order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.iter().any(|&s| s == 0 || s > self.n) {
            return Err(Error::invalid("keep", format!("{keep:?}"), format!("sites must lie in 1..={}", self.n)));
        }
        let traced: Vec<usize> = (1..=self.n).filter(|s| !keep.contains(s)).collect();
        let bit = |site: usize| self.n - site;
        let spread = |sites: &[usize], v: usize| -> usize {
            sites
                .iter()
                .enumerate()
                .fold(0, |acc, (i, &s)| acc | ((v >> (sites.len() - 1 - i)) & 1) << bit(s))
        };
        let k = keep.len();
        let dk = 1usize << k;
        let dt = 1usize << traced.len();
        let mut out = DMatrix::zeros(dk, dk);
        for a in 0..dk {
            let ra = spread(&keep, a);
            for b in 0..dk {
                let rb = spread(&keep, b);
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..dt {
                    let rt = spread(&traced, t);
                    acc += self.data[(ra | rt, rb | rt)];
                }
                out[(a, b)] = acc;
            }
        }
        Self::from_matrix_unchecked(k, out).checked()
    }

    /// Real and imaginary parts as CSV rows `row,col,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,re,im\n");
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let v = self.data[(r, c)];
                s.push_str(&format!("{r},{c},{:.16e},{:.16e}\n", v.re, v.im));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::StabilizerCode;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn plus_state() -> DensityMatrix {
        let h = 1.0 / 2f64.sqrt();
        DensityMatrix::from_pure(&DVector::from_vec(vec![c(h, 0.0), c(h, 0.0)])).unwrap()
    }

    #[test]
    fn unitary_examples() {
        let zero = DensityMatrix::basis_state(1, 0).unwrap();
        let same = zero.apply_unitary(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(same, zero);
        let one = zero.apply_unitary(&p("X").to_matrix().unwrap()).unwrap();
        assert_eq!(one, DensityMatrix::basis_state(1, 1).unwrap());
        // (1 + iX)/√2 |0⟩ = (|0⟩ + i|1⟩)/√2
        let u = (DMatrix::identity(2, 2) + p("X").to_matrix().unwrap() * c(0.0, 1.0))
            * c(1.0 / 2f64.sqrt(), 0.0);
        let rotated = zero.apply_unitary(&u).unwrap();
        let y = rotated.expectation(&p("Y").to_matrix().unwrap()).unwrap();
        // direct 2x2 arithmetic: ρ = [[1/2, -i/2],[i/2, 1/2]], Tr[Yρ] = +1
        let want = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)]);
        assert!(max_abs(&(rotated.matrix() - want)) < 1e-12);
        assert!((y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_rejected() {
        let zero = DensityMatrix::basis_state(1, 0).unwrap();
        let m = DMatrix::identity(2, 2) * c(2.0, 0.0);
        assert!(matches!(zero.apply_unitary(&m), Err(Error::NotUnitary { .. })));
        assert!(zero.apply_unitary(&DMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn measurement_probabilities() {
        let (rec, post) = plus_state().measure_generator(&p("Z"), 0, 0.3).unwrap();
        assert!((rec.probability - 0.5).abs() < 1e-12);
        assert_eq!(rec.outcome, Outcome::Plus);
        assert_eq!(post, DensityMatrix::basis_state(1, 0).unwrap());
        let (rec, _) = plus_state().measure_generator(&p("Z"), 0, 0.7).unwrap();
        assert_eq!(rec.outcome, Outcome::Minus);
        // repeated measurement is stable
        let (_, again) = post.measure_generator(&p("Z"), 0, 0.999).unwrap();
        assert_eq!(again, post);
    }

    #[test]
    fn measurement_guards() {
        let zero = DensityMatrix::basis_state(1, 0).unwrap();
        assert!(zero.measure_generator(&p("Z"), 0, 1.0).is_err());
        assert!(zero.measure_generator(&p("iZ"), 0, 0.5).is_err());
        assert!(zero.measure_generator(&p("ZZ"), 0, 0.5).is_err());
    }

    #[test]
    fn rank_one_codeword_spectrum() {
        let code = StabilizerCode::s1();
        let rho = DensityMatrix::from_pure(&code.codeword_vector().unwrap()).unwrap();
        let vals = hermitian_eigenvalues(rho.matrix());
        assert!((vals[63] - 1.0).abs() < 1e-12);
        assert!(vals[..63].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn matrix_square_root() {
        let y = p("Y").to_matrix().unwrap();
        let m = DMatrix::identity(2, 2) * Complex64::new(0.5, 0.0) + &y * Complex64::new(0.3, 0.0);
        let root = hermitian_function(&m, f64::sqrt);
        assert!(max_abs(&(&root * &root - &m)) < 1e-14);
        assert!(max_abs(&(&root - root.adjoint())) < 1e-15);
    }

    #[test]
    fn codeword_generators_read_plus() {
        let code = StabilizerCode::s1();
        let rho = DensityMatrix::from_pure(&code.codeword_vector().unwrap()).unwrap();
        for (j, g) in code.generators().iter().enumerate() {
            let (rec, _) = rho.measure_generator(g, j, 0.999_999).unwrap();
            assert_eq!(rec.outcome, Outcome::Plus);
            assert!((rec.probability - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sequential_syndrome_of_x1() {
        let code = StabilizerCode::s1();
        let rho = DensityMatrix::from_pure(&code.codeword_vector().unwrap())
            .unwrap()
            .conjugate_by_pauli(&p("XIIIII"))
            .unwrap();
        for u in [0.0, 0.5, 0.999] {
            let mut state = rho.clone();
            let mut bits = String::new();
            for (j, g) in code.generators().iter().enumerate() {
                let (rec, post) = state.measure_generator(g, j, u).unwrap();
                bits.push(if rec.outcome == Outcome::Plus { '0' } else { '1' });
                state = post;
            }
            assert_eq!(bits, "000100");
        }
    }

    #[test]
    fn expectation_examples() {
        let zero = DensityMatrix::basis_state(1, 0).unwrap();
        assert!((zero.expectation(&DMatrix::identity(2, 2)).unwrap() - 1.0).abs() < 1e-15);
        assert!((zero.expectation(&p("Z").to_matrix().unwrap()).unwrap() - 1.0).abs() < 1e-15);
        let not_herm = p("iZ").to_matrix().unwrap();
        assert!(zero.expectation(&not_herm).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let zz = DensityMatrix::basis_state(2, 0).unwrap();
        assert_eq!(zz.partial_trace(&[1]).unwrap(), DensityMatrix::basis_state(1, 0).unwrap());
        let h = 1.0 / 2f64.sqrt();
        let bell = DVector::from_vec(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]);
        let bell = DensityMatrix::from_pure(&bell).unwrap();
        let reduced = bell.partial_trace(&[1]).unwrap();
        assert!(max_abs(&(reduced.matrix() - DensityMatrix::maximally_mixed(1).unwrap().matrix())) < 1e-12);
        // |01⟩: keeping site 2 gives |1⟩
        let s01 = DensityMatrix::basis_state(2, 1).unwrap();
        assert_eq!(s01.partial_trace(&[2]).unwrap(), DensityMatrix::basis_state(1, 1).unwrap());
        assert!(s01.partial_trace(&[3]).is_err());
    }

    #[test]
    fn probe_principal_marginal_is_maximally_mixed() {
        let code = StabilizerCode::s1();
        let rho = DensityMatrix::from_pure(&code.codeword_vector().unwrap()).unwrap();
        let reduced = rho.partial_trace(&[1, 2]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(max_abs(&(reduced.matrix() - mixed.matrix())) < 1e-12);
    }

    #[test]
    fn pauli_fast_paths_match_dense() {
        let code = StabilizerCode::s1();
        let rho = DensityMatrix::from_pure(&code.codeword_vector().unwrap()).unwrap();
        let g = p("-XYZIYX");
        let dense = g.to_matrix().unwrap();
        let conj = rho.conjugate_by_pauli(&g).unwrap();
        assert!(max_abs(&(conj.matrix() - &dense * rho.matrix() * dense.adjoint())) < 1e-12);
        let e = rho.pauli_expectation(&g).unwrap();
        assert!((e - (&dense * rho.matrix()).trace()).norm() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let bad = DMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        assert!(matches!(
            DensityMatrix::from_matrix(1, bad),
            Err(Error::InvalidState { .. })
        ));
        let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::from_matrix(1, not_herm).is_err());
        assert!(DensityMatrix::basis_state(9, 0).is_err());
    }

    #[test]
    fn born_statistics_within_four_sigma() {
        // |ψ⟩ = cos(θ)|0⟩ + sin(θ)|1⟩ with p₊ = cos²θ for Z
        use rand::{Rng, SeedableRng};
        let theta: f64 = 0.4;
        let psi = DVector::from_vec(vec![c(theta.cos(), 0.0), c(theta.sin(), 0.0)]);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let trials = 100_000;
        let plus = (0..trials)
            .filter(|_| {
                let (rec, _) = rho.measure_generator(&p("Z"), 0, rng.gen::<f64>()).unwrap();
                rec.outcome == Outcome::Plus
            })
            .count();
        let born = theta.cos().powi(2);
        let sigma = (born * (1.0 - born) / trials as f64).sqrt();
        assert!((plus as f64 / trials as f64 - born).abs() < 4.0 * sigma);
    }
}
