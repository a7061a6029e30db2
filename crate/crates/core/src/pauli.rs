//! Phase-tracked n-qubit Pauli operators in symplectic form.
//!
//! An operator is stored as `i^phase · σ(x_1, z_1) ⊗ … ⊗ σ(x_n, z_n)` where the
//! single-qubit letter is `(0,0)=I`, `(1,0)=X`, `(1,1)=Y`, `(0,1)=Z`. Qubit 1 is
//! the leftmost letter in text form and the most significant tensor factor in
//! dense form.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register that fits the bit masks.
pub const MAX_PAULI_QUBITS: usize = 64;

/// Largest register for which dense matrices are produced.
pub const MAX_DENSE_QUBITS: usize = 8;

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const NON_IDENTITY: [Letter; 3] = [Letter::X, Letter::Y, Letter::Z];
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }

    /// Exponent of `i` picked up by the product `self · other`.
    fn product_phase(self, other: Letter) -> u8 {
        use Letter::*;
        match (self, other) {
            (X, Y) | (Y, Z) | (Z, X) => 1,
            (Y, X) | (Z, Y) | (X, Z) => 3,
            _ => 0,
        }
    }
}

/// Phase-tracked Pauli operator on `n` qubits.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliOperator {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

fn site_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliOperator {
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_masks(n, 0, 0, 0)
    }

    /// Builds an operator from raw masks. Bit `q` of each mask is qubit `q + 1`.
    pub fn from_masks(n: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", n, "a Pauli operator needs at least one qubit"));
        }
        if n > MAX_PAULI_QUBITS {
            return Err(Error::TooManyQubits {
                n,
                max: MAX_PAULI_QUBITS,
            });
        }
        let m = site_mask(n);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::invalid("mask", format!("{x:#x}/{z:#x}"), "bits set beyond qubit count"));
        }
        Ok(Self {
            n,
            x,
            z,
            phase: phase % 4,
        })
    }

    pub fn from_letters(letters: &[Letter], phase: u8) -> Result<Self> {
        let (mut x, mut z) = (0u64, 0u64);
        for (q, l) in letters.iter().enumerate().take(MAX_PAULI_QUBITS) {
            let (xb, zb) = l.bits();
            x |= (xb as u64) << q;
            z |= (zb as u64) << q;
        }
        Self::from_masks(letters.len(), x, z, phase)
    }

    /// Single non-identity letter at 1-based `site`.
    pub fn single(n: usize, site: usize, letter: Letter) -> Result<Self> {
        if site == 0 || site > n {
            return Err(Error::invalid("site", site, format!("must lie in 1..={n}")));
        }
        let (xb, zb) = letter.bits();
        Self::from_masks(n, (xb as u64) << (site - 1), (zb as u64) << (site - 1), 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Exponent `k` of the global factor `i^k`.
    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    pub fn phase_factor(&self) -> Complex64 {
        i_pow(self.phase)
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn x_bits(&self) -> Vec<bool> {
        (0..self.n).map(|q| self.x >> q & 1 == 1).collect()
    }

    pub fn z_bits(&self) -> Vec<bool> {
        (0..self.n).map(|q| self.z >> q & 1 == 1).collect()
    }

    /// Letter at 1-based `site`.
    pub fn letter(&self, site: usize) -> Letter {
        assert!(site >= 1 && site <= self.n, "site {site} out of range 1..={}", self.n);
        let q = site - 1;
        Letter::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn letters(&self) -> Vec<Letter> {
        (1..=self.n).map(|s| self.letter(s)).collect()
    }

    pub fn with_phase(&self, phase: u8) -> Self {
        Self {
            phase: phase % 4,
            ..self.clone()
        }
    }

    /// The same letters with trivial phase.
    pub fn unsigned(&self) -> Self {
        self.with_phase(0)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    pub fn equal_up_to_phase(&self, other: &Self) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    fn check_same_size(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Exact product `self · other`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same_size(other)?;
        let mut phase = self.phase as u32 + other.phase as u32;
        let overlap = (self.x | self.z) & (other.x | other.z);
        let mut bits = overlap;
        while bits != 0 {
            let q = bits.trailing_zeros() as usize + 1;
            phase += self.letter(q).product_phase(other.letter(q)) as u32;
            bits &= bits - 1;
        }
        Ok(Self {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: (phase % 4) as u8,
        })
    }

    /// Hermitian adjoint, which is also the group inverse.
    pub fn dagger(&self) -> Self {
        self.with_phase((4 - self.phase) % 4)
    }

    pub fn inverse(&self) -> Self {
        self.dagger()
    }

    /// Symplectic commutation test.
    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.check_same_size(other)?;
        Ok(self.symplectic_product(other) == 0)
    }

    /// `x·z' + z·x' mod 2`.
    pub(crate) fn symplectic_product(&self, other: &Self) -> u32 {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones() % 2
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// 1-based sites carrying a non-identity letter.
    pub fn support(&self) -> BTreeSet<usize> {
        let mut bits = self.x | self.z;
        let mut out = BTreeSet::new();
        while bits != 0 {
            out.insert(bits.trailing_zeros() as usize + 1);
            bits &= bits - 1;
        }
        out
    }

    /// Tensor product with `self` on the leading qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n + other.n;
        if n > MAX_PAULI_QUBITS {
            return Err(Error::TooManyQubits {
                n,
                max: MAX_PAULI_QUBITS,
            });
        }
        Self::from_masks(
            n,
            self.x | other.x << self.n,
            self.z | other.z << self.n,
            self.phase + other.phase,
        )
    }

    /// Places this operator's qubits onto the given 1-based `sites` of an
    /// `n`-qubit register, identity elsewhere.
    pub fn embed(&self, n: usize, sites: &[usize]) -> Result<Self> {
        if sites.len() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: sites.len(),
            });
        }
        let mut letters = vec![Letter::I; n];
        for (q, &site) in sites.iter().enumerate() {
            if site == 0 || site > n {
                return Err(Error::invalid("site", site, format!("must lie in 1..={n}")));
            }
            letters[site - 1] = self.letter(q + 1);
        }
        Self::from_letters(&letters, self.phase)
    }

    /// Restriction to the given 1-based sites, dropping the phase.
    pub fn restrict(&self, sites: &[usize]) -> Result<Self> {
        let letters: Vec<Letter> = sites.iter().map(|&s| self.letter(s)).collect();
        Self::from_letters(&letters, 0)
    }

    /// Image of computational basis state `b` as `(row, amplitude)`.
    ///
    /// Basis index bit `n - 1 - q` holds qubit `q + 1`.
    pub(crate) fn basis_action(&self, b: usize) -> (usize, Complex64) {
        let xb = self.basis_x();
        let zb = self.basis_z();
        let exponent = self.phase as u32 + (self.x & self.z).count_ones();
        let sign = if (zb & b as u64).count_ones() % 2 == 1 { 2 } else { 0 };
        ((b as u64 ^ xb) as usize, i_pow(((exponent + sign) % 4) as u8))
    }

    pub(crate) fn basis_x(&self) -> u64 {
        reverse_bits(self.x, self.n)
    }

    pub(crate) fn basis_z(&self) -> u64 {
        reverse_bits(self.z, self.n)
    }

    /// Dense `2ⁿ × 2ⁿ` matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::TooManyQubits {
                n: self.n,
                max: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let (r, v) = self.basis_action(b);
            m[(r, b)] = v;
        }
        Ok(m)
    }

    /// Every unsigned Pauli on `n` qubits, qubit 1 varying slowest in I<X<Y<Z order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliOperator> {
        assert!(n <= 16, "enumerating 4^{n} operators is not supported");
        (0..4usize.pow(n as u32)).map(move |mut idx| {
            let mut letters = vec![Letter::I; n];
            for q in (0..n).rev() {
                letters[q] = Letter::ALL[idx % 4];
                idx /= 4;
            }
            PauliOperator::from_letters(&letters, 0).expect("n within range")
        })
    }
}

fn reverse_bits(mask: u64, n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        mask.reverse_bits() >> (64 - n)
    }
}

pub(crate) fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

const PHASE_PREFIX: [&str; 4] = ["", "i", "-", "-i"];

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(PHASE_PREFIX[self.phase as usize])?;
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pauli({self})")
    }
}

impl FromStr for PauliOperator {
    type Err = Error;

    /// Accepts an optional `+`, `-`, `i`, `+i` or `-i` prefix followed by letters.
    fn from_str(text: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().collect();
        let mut pos = 0;
        let mut phase = 0u8;
        match chars.first() {
            Some('+') => pos = 1,
            Some('-') => {
                phase = 2;
                pos = 1;
            }
            _ => {}
        }
        if chars.get(pos) == Some(&'i') {
            phase += 1;
            pos += 1;
        }
        let mut letters = Vec::with_capacity(chars.len().saturating_sub(pos));
        for (offset, &c) in chars[pos..].iter().enumerate() {
            match Letter::from_char(c) {
                Some(l) => letters.push(l),
                None => {
                    return Err(Error::Parse {
                        text: text.to_string(),
                        position: pos + offset + 1,
                        found: c,
                    })
                }
            }
        }
        if letters.is_empty() {
            return Err(Error::ParseShape {
                text: text.to_string(),
                reason: "no Pauli letters".into(),
            });
        }
        if letters.len() > MAX_PAULI_QUBITS {
            return Err(Error::TooManyQubits {
                n: letters.len(),
                max: MAX_PAULI_QUBITS,
            });
        }
        Self::from_letters(&letters, phase)
    }
}

impl TryFrom<String> for PauliOperator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PauliOperator> for String {
    fn from(p: PauliOperator) -> String {
        p.to_string()
    }
}
