//! Kraus-form noise channels embedded on the full register.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliOperator, MAX_DENSE_QUBITS};
use crate::process::ProcessMatrix;
use crate::state::max_abs;

pub const COMPLETENESS_TOL: f64 = 1e-10;

/// A completely positive map given by Kraus operators on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    n: usize,
    kraus: Vec<DMatrix<Complex64>>,
    label: String,
    support: BTreeSet<usize>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_qubit(letter: Letter) -> DMatrix<Complex64> {
    PauliOperator::from_letters(&[letter], 0)
        .and_then(|p| p.to_matrix())
        .expect("single-qubit Pauli")
}

/// Embeds a 2×2 operator at 1-based `site` of an `n`-qubit register.
pub fn embed_single_qubit(op: &DMatrix<Complex64>, site: usize, n: usize) -> Result<DMatrix<Complex64>> {
    if n == 0 || n > MAX_DENSE_QUBITS {
        return Err(Error::TooManyQubits {
            n,
            max: MAX_DENSE_QUBITS,
        });
    }
    if site == 0 || site > n {
        return Err(Error::invalid("site", site, format!("must lie in 1..={n}")));
    }
    let id = DMatrix::<Complex64>::identity(2, 2);
    let mut full = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for q in 1..=n {
        full = full.kronecker(if q == site { op } else { &id });
    }
    Ok(full)
}

fn check_probability(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::invalid(name, v, "must lie in [0, 1]"));
    }
    Ok(())
}

impl QuantumChannel {
    /// Builds a channel and checks `Σ E†E = 1`.
    pub fn new(
        n: usize,
        kraus: Vec<DMatrix<Complex64>>,
        label: impl Into<String>,
        support: BTreeSet<usize>,
    ) -> Result<Self> {
        if n == 0 || n > MAX_DENSE_QUBITS {
            return Err(Error::TooManyQubits {
                n,
                max: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << n;
        if kraus.is_empty() || kraus.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(Error::invalid("kraus", kraus.len(), format!("need one or more {dim}x{dim} operators")));
        }
        let ch = Self {
            n,
            kraus,
            label: label.into(),
            support,
        };
        ch.check_completeness()?;
        Ok(ch)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let dim = 1usize << n.min(MAX_DENSE_QUBITS + 1);
        Self::new(n, vec![DMatrix::identity(dim, dim)], "identity", BTreeSet::new())
    }

    /// Deterministic application of a Pauli operator.
    pub fn pauli(p: &PauliOperator) -> Result<Self> {
        Self::new(p.n(), vec![p.to_matrix()?], format!("pauli({p})"), p.support())
    }

    /// Amplitude damping on `site` with Kraus operators
    /// `E₀ = (1+√(1−γ))/2·1 + (1−√(1−γ))/2·Z` and `E₁ = √γ (X + iY)/2`.
    pub fn amplitude_damping(gamma: f64, site: usize, n: usize) -> Result<Self> {
        check_probability("gamma", gamma)?;
        let s = (1.0 - gamma).sqrt();
        let id = DMatrix::<Complex64>::identity(2, 2);
        let e0 = id * c((1.0 + s) / 2.0, 0.0) + single_qubit(Letter::Z) * c((1.0 - s) / 2.0, 0.0);
        let e1 = (single_qubit(Letter::X) + single_qubit(Letter::Y) * c(0.0, 1.0)) * c(gamma.sqrt() / 2.0, 0.0);
        Self::new(
            n,
            vec![embed_single_qubit(&e0, site, n)?, embed_single_qubit(&e1, site, n)?],
            format!("amplitude_damping(gamma={gamma}, site={site})"),
            BTreeSet::from([site]),
        )
    }

    /// Depolarizing on `site`: `(1−p)ρ + p(XρX + YρY + ZρZ)/3`.
    pub fn depolarizing(p: f64, site: usize, n: usize) -> Result<Self> {
        check_probability("p", p)?;
        let w = (p / 3.0).sqrt();
        let mut kraus = vec![embed_single_qubit(&DMatrix::identity(2, 2), site, n)? * c((1.0 - p).sqrt(), 0.0)];
        for l in Letter::NON_IDENTITY {
            kraus.push(embed_single_qubit(&single_qubit(l), site, n)? * c(w, 0.0));
        }
        Self::new(n, kraus, format!("depolarizing(p={p}, site={site})"), BTreeSet::from([site]))
    }

    /// Independent depolarizing on each of `sites`.
    pub fn depolarizing_on(p: f64, sites: &[usize], n: usize) -> Result<Self> {
        let mut acc = Self::identity(n)?;
        for &s in sites {
            acc = compose(&Self::depolarizing(p, s, n)?, &acc)?;
        }
        Ok(acc.with_label(format!("depolarizing(p={p}, sites={sites:?})")))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kraus(&self) -> &[DMatrix<Complex64>] {
        &self.kraus
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> &BTreeSet<usize> {
        &self.support
    }

    pub fn completeness_deviation(&self) -> f64 {
        let dim = 1usize << self.n;
        let sum = self
            .kraus
            .iter()
            .fold(DMatrix::zeros(dim, dim), |acc, k| acc + k.adjoint() * k);
        max_abs(&(sum - DMatrix::identity(dim, dim)))
    }

    pub fn check_completeness(&self) -> Result<()> {
        let dev = self.completeness_deviation();
        if dev > COMPLETENESS_TOL {
            return Err(Error::IncompleteKraus { deviation: dev });
        }
        Ok(())
    }
}

/// `outer ∘ inner`, i.e. `inner` acts first. Kraus set is every product `outer_i · inner_j`.
pub fn compose(outer: &QuantumChannel, inner: &QuantumChannel) -> Result<QuantumChannel> {
    if outer.n != inner.n {
        return Err(Error::DimensionMismatch {
            left: outer.n,
            right: inner.n,
        });
    }
    let kraus = outer
        .kraus
        .iter()
        .flat_map(|a| inner.kraus.iter().map(move |b| a * b))
        .collect();
    QuantumChannel::new(
        outer.n,
        kraus,
        format!("{} o {}", outer.label, inner.label),
        outer.support.union(&inner.support).copied().collect(),
    )
}

/// Config-level description of a single-qubit noise channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(rename = "type")]
    pub kind: ChannelKind,
    pub site: usize,
    pub parameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    AmplitudeDamping,
    Depolarizing,
}

impl ChannelSpec {
    pub fn build(&self, n: usize) -> Result<QuantumChannel> {
        match self.kind {
            ChannelKind::AmplitudeDamping => QuantumChannel::amplitude_damping(self.parameter, self.site, n),
            ChannelKind::Depolarizing => QuantumChannel::depolarizing(self.parameter, self.site, n),
        }
    }
}

/// Closed-form process matrix of amplitude damping on principal qubit 1,
/// over the two-qubit located basis.
///
/// Non-zero entries: `χ_II = (1+√(1−γ))²/4`, `χ_XX = χ_YY = γ/4`,
/// `χ_ZZ = (1−√(1−γ))²/4`, `χ_IZ = χ_ZI = γ/4`, `χ_YX = iγ/4 = −χ_XY`.
pub fn theoretical_chi_ad(gamma: f64) -> Result<ProcessMatrix> {
    check_probability("gamma", gamma)?;
    let s = (1.0 - gamma).sqrt();
    let (i, x, y, z) = (0, 1, 2, 3);
    let mut m = DMatrix::zeros(16, 16);
    m[(i, i)] = c((1.0 + s).powi(2) / 4.0, 0.0);
    m[(x, x)] = c(gamma / 4.0, 0.0);
    m[(y, y)] = c(gamma / 4.0, 0.0);
    m[(z, z)] = c((1.0 - s).powi(2) / 4.0, 0.0);
    m[(i, z)] = c(gamma / 4.0, 0.0);
    m[(z, i)] = c(gamma / 4.0, 0.0);
    m[(y, x)] = c(0.0, gamma / 4.0);
    m[(x, y)] = c(0.0, -gamma / 4.0);
    ProcessMatrix::new(2, m)
}
