//! Stabilizer codes used as DCQD probes.
//!
//! Provides the `[[4,0,2]]` characterization code, the `[[4,2,2]]` ancilla
//! detection code and their concatenation into the `[[6,0,2]]` filtered probe,
//! together with syndrome extraction, located-error tables and the located
//! Hamming bound.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliOperator, MAX_DENSE_QUBITS};

/// Measured generator eigenvalues; bit `j` is 1 when generator `j` reads −1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syndrome {
    bits: u64,
    len: usize,
}

impl Syndrome {
    /// Builds a syndrome from a packed index; bit `j` belongs to generator `j + 1`.
    pub fn from_index(bits: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        Self { bits, len }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let packed = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &b)| acc | (b as u64) << j);
        Self::from_index(packed, bits.len())
    }

    pub fn zero(len: usize) -> Self {
        Self::from_index(0, len)
    }

    pub fn index(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit for 0-based generator `j`.
    pub fn bit(&self, j: usize) -> bool {
        self.bits >> j & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|j| self.bit(j)).collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.bits == 0
    }

    /// True when the first `m` bits are all zero.
    pub fn prefix_is_clear(&self, m: usize) -> bool {
        let mask = if m >= 64 { u64::MAX } else { (1u64 << m) - 1 };
        self.bits & mask == 0
    }

    pub fn xor(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Self::from_index(self.bits ^ other.bits, self.len)
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.len {
            f.write_str(if self.bit(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Syndrome({self})")
    }
}

/// A stabilizer code with a principal/ancilla partition of its qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodeDocument", into = "CodeDocument")]
pub struct StabilizerCode {
    label: String,
    n: usize,
    generators: Vec<PauliOperator>,
    principal_sites: Vec<usize>,
    ancilla_sites: Vec<usize>,
    filter_bits: usize,
    logical_x: Vec<PauliOperator>,
    logical_z: Vec<PauliOperator>,
}

/// Serialized form of a [`StabilizerCode`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodeDocument {
    pub label: String,
    pub n: usize,
    pub k: usize,
    pub generators: Vec<PauliOperator>,
    pub principal_sites: Vec<usize>,
    pub ancilla_sites: Vec<usize>,
    #[serde(default)]
    pub filter_bits: usize,
    #[serde(default)]
    pub logical_x: Vec<PauliOperator>,
    #[serde(default)]
    pub logical_z: Vec<PauliOperator>,
}

impl From<StabilizerCode> for CodeDocument {
    fn from(c: StabilizerCode) -> Self {
        CodeDocument {
            k: c.k(),
            label: c.label,
            n: c.n,
            generators: c.generators,
            principal_sites: c.principal_sites,
            ancilla_sites: c.ancilla_sites,
            filter_bits: c.filter_bits,
            logical_x: c.logical_x,
            logical_z: c.logical_z,
        }
    }
}

impl TryFrom<CodeDocument> for StabilizerCode {
    type Error = Error;

    fn try_from(doc: CodeDocument) -> Result<Self> {
        let code = StabilizerCode::new(doc.label, doc.generators, doc.principal_sites)?
            .with_filter_bits(doc.filter_bits)?
            .with_logicals(doc.logical_x, doc.logical_z)?;
        if code.n != doc.n || code.k() != doc.k || code.ancilla_sites != doc.ancilla_sites {
            return Err(Error::Construction(
                "document fields n/k/ancilla_sites disagree with the generators".into(),
            ));
        }
        Ok(code)
    }
}

/// GF(2) rank of the symplectic rows of `ops`.
fn symplectic_rank(ops: &[PauliOperator]) -> usize {
    let mut rows: Vec<u128> = ops
        .iter()
        .map(|p| p.x_mask() as u128 | (p.z_mask() as u128) << 64)
        .collect();
    let mut rank = 0;
    for bit in 0..128 {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(rank, pivot);
        for r in 0..rows.len() {
            if r != rank && rows[r] >> bit & 1 == 1 {
                rows[r] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

impl StabilizerCode {
    /// Validates and builds a code. Ancilla sites are every site not listed as principal.
    pub fn new(
        label: impl Into<String>,
        generators: Vec<PauliOperator>,
        principal_sites: Vec<usize>,
    ) -> Result<Self> {
        let label = label.into();
        let first = generators
            .first()
            .ok_or_else(|| Error::Construction(format!("{label}: no generators")))?;
        let n = first.n();
        for g in &generators {
            if g.n() != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: g.n(),
                });
            }
            if !g.is_hermitian() {
                return Err(Error::Construction(format!("{label}: generator {g} is not Hermitian")));
            }
            if g.is_identity() {
                return Err(Error::Construction(format!("{label}: generator {g} is trivial")));
            }
        }
        for (a, ga) in generators.iter().enumerate() {
            for gb in &generators[a + 1..] {
                if !ga.commutes(gb)? {
                    return Err(Error::Construction(format!(
                        "{label}: generators {ga} and {gb} anticommute"
                    )));
                }
            }
        }
        if symplectic_rank(&generators) != generators.len() {
            return Err(Error::Construction(format!("{label}: generators are dependent")));
        }
        let mut sorted = principal_sites.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != principal_sites.len() || sorted.iter().any(|&s| s == 0 || s > n) {
            return Err(Error::Construction(format!(
                "{label}: principal sites {principal_sites:?} are not distinct sites in 1..={n}"
            )));
        }
        let ancilla_sites = (1..=n).filter(|s| !sorted.contains(s)).collect();
        Ok(Self {
            label,
            n,
            generators,
            principal_sites,
            ancilla_sites,
            filter_bits: 0,
            logical_x: Vec::new(),
            logical_z: Vec::new(),
        })
    }

    /// Marks the leading `m` generators as ancilla checks used by the filter.
    pub fn with_filter_bits(mut self, m: usize) -> Result<Self> {
        if m > self.generators.len() {
            return Err(Error::Construction(format!(
                "{}: filter uses {m} bits but code has {} generators",
                self.label,
                self.generators.len()
            )));
        }
        self.filter_bits = m;
        Ok(self)
    }

    /// Attaches logical representatives and checks their algebra.
    pub fn with_logicals(mut self, xs: Vec<PauliOperator>, zs: Vec<PauliOperator>) -> Result<Self> {
        if xs.len() != zs.len() || (!xs.is_empty() && xs.len() != self.k()) {
            return Err(Error::Construction(format!(
                "{}: expected {} logical pairs, got {}/{}",
                self.label,
                self.k(),
                xs.len(),
                zs.len()
            )));
        }
        for op in xs.iter().chain(&zs) {
            for g in &self.generators {
                if !op.commutes(g)? {
                    return Err(Error::Construction(format!(
                        "{}: logical {op} anticommutes with stabilizer {g}",
                        self.label
                    )));
                }
            }
        }
        for (a, xa) in xs.iter().enumerate() {
            for (b, zb) in zs.iter().enumerate() {
                if xa.commutes(zb)? == (a == b) {
                    return Err(Error::Construction(format!(
                        "{}: logical pair ({xa}, {zb}) has the wrong commutation",
                        self.label
                    )));
                }
            }
            for xb in &xs[a + 1..] {
                if !xa.commutes(xb)? {
                    return Err(Error::Construction(format!("{}: logical X operators anticommute", self.label)));
                }
            }
        }
        for (a, za) in zs.iter().enumerate() {
            for zb in &zs[a + 1..] {
                if !za.commutes(zb)? {
                    return Err(Error::Construction(format!("{}: logical Z operators anticommute", self.label)));
                }
            }
        }
        self.logical_x = xs;
        self.logical_z = zs;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The `[[4,0,2]]` characterization code `⟨XIXI, IXIX, ZIZI, IZIZ⟩`.
    pub fn s0() -> Self {
        Self::from_strings("S0", &["XIXI", "IXIX", "ZIZI", "IZIZ"], vec![1, 2])
    }

    /// The `[[4,2,2]]` detection code `⟨XXXX, ZZZZ⟩` with logicals
    /// `X̄₁=XXII, Z̄₁=ZIZI, X̄₂=IXIX, Z̄₂=IIZZ`.
    pub fn s422() -> Self {
        let parse = |s: &str| s.parse::<PauliOperator>().expect("static operator");
        Self::from_strings("SE", &["XXXX", "ZZZZ"], vec![])
            .with_logicals(
                vec![parse("XXII"), parse("IXIX")],
                vec![parse("ZIZI"), parse("IIZZ")],
            )
            .expect("static logicals are valid")
    }

    /// The `[[6,0,2]]` filtered probe code.
    pub fn s1() -> Self {
        concatenate_ancilla(&Self::s0(), &Self::s422())
            .expect("S0 and SE concatenate")
            .with_label("S1")
    }

    fn from_strings(label: &str, gens: &[&str], principal: Vec<usize>) -> Self {
        let gens = gens
            .iter()
            .map(|s| s.parse().expect("static operator"))
            .collect();
        Self::new(label, gens, principal).expect("static code is valid")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.n - self.generators.len()
    }

    /// Number of generators `r = n − k`.
    pub fn r(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[PauliOperator] {
        &self.generators
    }

    pub fn principal_sites(&self) -> &[usize] {
        &self.principal_sites
    }

    pub fn ancilla_sites(&self) -> &[usize] {
        &self.ancilla_sites
    }

    pub fn filter_bits(&self) -> usize {
        self.filter_bits
    }

    pub fn logical_x(&self) -> &[PauliOperator] {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &[PauliOperator] {
        &self.logical_z
    }

    pub fn to_document(&self) -> CodeDocument {
        self.clone().into()
    }

    pub fn syndrome_of_error(&self, e: &PauliOperator) -> Result<Syndrome> {
        if e.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: e.n(),
            });
        }
        let bits = self
            .generators
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, g)| acc | (e.symplectic_product(g) as u64) << j);
        Ok(Syndrome::from_index(bits, self.r()))
    }

    /// Element `∏_{j ∈ subset} g_j` of the stabilizer group, product taken in generator order.
    pub fn group_element(&self, subset: u64) -> PauliOperator {
        let mut acc = PauliOperator::identity(self.n).expect("valid size");
        for (j, g) in self.generators.iter().enumerate() {
            if subset >> j & 1 == 1 {
                acc = acc.multiply(g).expect("same size");
            }
        }
        acc
    }

    /// All `2^r` stabilizer group elements indexed by generator subset.
    pub fn stabilizer_group(&self) -> Vec<PauliOperator> {
        (0..1u64 << self.r()).map(|t| self.group_element(t)).collect()
    }

    /// Whether `e` equals some stabilizer element up to a phase.
    pub fn in_stabilizer_group_up_to_phase(&self, e: &PauliOperator) -> bool {
        e.n() == self.n && self.stabilizer_group().iter().any(|s| s.equal_up_to_phase(e))
    }

    /// Located errors embedded on the full register, in table order.
    pub fn located_errors(&self) -> Vec<PauliOperator> {
        located_errors(self.principal_sites.len())
            .into_iter()
            .map(|p| p.embed(self.n, &self.principal_sites).expect("principal sites are valid"))
            .collect()
    }

    /// Weight-one errors on the ancilla ordered by site, then X<Y<Z.
    pub fn ancilla_weight_one_errors(&self) -> Vec<PauliOperator> {
        self.ancilla_sites
            .iter()
            .flat_map(|&s| {
                Letter::NON_IDENTITY
                    .iter()
                    .map(move |&l| PauliOperator::single(self.n, s, l).expect("valid site"))
            })
            .collect()
    }

    /// Table of located errors and their syndromes.
    pub fn located_error_table(&self) -> Result<Vec<LocatedRow>> {
        if self.principal_sites.is_empty() {
            return Err(Error::Unsupported(format!("{} has no principal sites", self.label)));
        }
        located_errors(self.principal_sites.len())
            .into_iter()
            .enumerate()
            .map(|(index, principal)| {
                let embedded = principal.embed(self.n, &self.principal_sites)?;
                let syndrome = self.syndrome_of_error(&embedded)?;
                Ok(LocatedRow {
                    index,
                    principal,
                    embedded,
                    syndrome,
                })
            })
            .collect()
    }

    /// Split of the detectable set into located, weight-one ancilla and composite errors.
    pub fn partition_error_set(&self) -> ErrorSetPartition {
        let located = self.located_errors();
        let ancilla_weight_one = self.ancilla_weight_one_errors();
        let composite = located
            .iter()
            .flat_map(|e| {
                ancilla_weight_one
                    .iter()
                    .map(move |a| e.multiply(a).expect("same size"))
            })
            .collect();
        ErrorSetPartition {
            located,
            ancilla_weight_one,
            composite,
        }
    }

    /// Normalized codeword of a `k = 0` code: the unique +1 eigenvector of every generator.
    ///
    /// Built as a column of `∏ (1 + g)/2`; the global phase makes the largest
    /// amplitude real and positive.
    pub fn codeword_vector(&self) -> Result<DVector<Complex64>> {
        if self.k() != 0 {
            return Err(Error::Unsupported(format!(
                "codeword of {} requires k = 0 (k = {})",
                self.label,
                self.k()
            )));
        }
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::TooManyQubits {
                n: self.n,
                max: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        // ⟨b|Π|b⟩ = |⟨b|ψ⟩|², so the diagonal of Π picks the best column
        let group = self.stabilizer_group();
        let diag = |b: usize| -> f64 {
            group
                .iter()
                .map(|s| {
                    let (row, amp) = s.basis_action(b);
                    if row == b {
                        amp.re
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                / group.len() as f64
        };
        let (best, _) = (0..dim).fold((0, f64::MIN), |(bi, bv), b| {
            let v = diag(b);
            if v > bv + 1e-12 {
                (b, v)
            } else {
                (bi, bv)
            }
        });
        let mut v = DVector::zeros(dim);
        v[best] = Complex64::new(1.0, 0.0);
        for g in &self.generators {
            let gv = apply_pauli_to_vector(g, &v);
            v = (&v + gv) * Complex64::new(0.5, 0.0);
        }
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::Construction(format!("{}: empty codespace", self.label)));
        }
        let phase = v[best] / v[best].norm();
        Ok(v.map(|a| a / (phase * norm)))
    }

    /// `C_ab = ⟨0|E_a† E_b|0⟩` over the codeword.
    pub fn qec_condition_matrix(&self, errors: &[PauliOperator]) -> Result<DMatrix<Complex64>> {
        let psi = self.codeword_vector()?;
        let images = errors
            .iter()
            .map(|e| {
                if e.n() != self.n {
                    return Err(Error::DimensionMismatch {
                        left: self.n,
                        right: e.n(),
                    });
                }
                Ok(apply_pauli_to_vector(e, &psi))
            })
            .collect::<Result<Vec<_>>>()?;
        let m = errors.len();
        Ok(DMatrix::from_fn(m, m, |a, b| images[a].dotc(&images[b])))
    }
}

/// `g|v⟩` for a dense state vector.
pub(crate) fn apply_pauli_to_vector(g: &PauliOperator, v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut out = DVector::zeros(v.len());
    for b in 0..v.len() {
        let (row, amp) = g.basis_action(b);
        out[row] += amp * v[b];
    }
    out
}

/// Unsigned Paulis on `n_p` qubits ordered by weight, then support, then letters.
///
/// For two qubits this is `II, XI, YI, ZI, IX, IY, IZ, XX, XY, …, ZZ`.
pub fn located_errors(n_p: usize) -> Vec<PauliOperator> {
    let mut out = Vec::with_capacity(4usize.pow(n_p as u32));
    for w in 0..=n_p {
        for support in combinations(n_p, w) {
            for idx in 0..3usize.pow(w as u32) {
                let mut letters = vec![Letter::I; n_p];
                let mut rem = idx;
                for &q in support.iter().rev() {
                    letters[q] = Letter::NON_IDENTITY[rem % 3];
                    rem /= 3;
                }
                out.push(PauliOperator::from_letters(&letters, 0).expect("valid size"));
            }
        }
    }
    out
}

/// Increasing `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Replaces each outer ancilla qubit by a logical qubit of `inner`.
///
/// The new register holds the outer principal qubits followed by the inner
/// physical qubits. Inner stabilizers come first in the generator list and
/// become the filter bits; outer generators follow, grouped by the first
/// principal qubit they touch (X before Z), with `X → X̄`, `Z → Z̄`,
/// `Y → i X̄ Z̄` on each ancilla position.
pub fn concatenate_ancilla(outer: &StabilizerCode, inner: &StabilizerCode) -> Result<StabilizerCode> {
    let m = outer.ancilla_sites.len();
    if m == 0 || inner.logical_x.len() != m || inner.k() != m {
        return Err(Error::Construction(format!(
            "outer code {} has {m} ancilla qubits but inner code {} encodes {} logical qubits with {} representatives",
            outer.label,
            inner.label,
            inner.k(),
            inner.logical_x.len()
        )));
    }
    let n_p = outer.principal_sites.len();
    let n = n_p + inner.n;
    let principal_sites: Vec<usize> = (1..=n_p).collect();
    let inner_sites: Vec<usize> = (n_p + 1..=n).collect();

    let mut generators = Vec::with_capacity(inner.r() + outer.r());
    for g in &inner.generators {
        generators.push(g.embed(n, &inner_sites)?);
    }
    let mut ordered: Vec<&PauliOperator> = outer.generators.iter().collect();
    ordered.sort_by_key(|g| {
        outer
            .principal_sites
            .iter()
            .find(|&&s| g.letter(s) != Letter::I)
            .map(|&s| (s, g.letter(s) as u8))
            .unwrap_or((usize::MAX, 0))
    });
    for g in ordered {
        let principal = g.restrict(&outer.principal_sites)?;
        let mut mapped = principal
            .embed(n, &principal_sites)?
            .with_phase(g.phase_exponent());
        for (k, &site) in outer.ancilla_sites.iter().enumerate() {
            let xbar = inner.logical_x[k].embed(n, &inner_sites)?;
            let zbar = inner.logical_z[k].embed(n, &inner_sites)?;
            let logical = match g.letter(site) {
                Letter::I => continue,
                Letter::X => xbar,
                Letter::Z => zbar,
                Letter::Y => {
                    let xz = xbar.multiply(&zbar)?;
                    xz.with_phase(xz.phase_exponent() + 1)
                }
            };
            mapped = mapped.multiply(&logical)?;
        }
        generators.push(mapped);
    }
    // Y → i·X̄Z̄ keeps the product Hermitian
    for g in generators.iter_mut() {
        if !g.is_hermitian() {
            return Err(Error::Construction(format!("concatenated generator {g} is not Hermitian")));
        }
    }
    StabilizerCode::new(
        format!("{}+{}", outer.label, inner.label),
        generators,
        principal_sites,
    )?
    .with_filter_bits(inner.r())
}

/// One row of the located-error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocatedRow {
    pub index: usize,
    /// Operator on the principal qubits only.
    pub principal: PauliOperator,
    /// Operator on the full register.
    pub embedded: PauliOperator,
    pub syndrome: Syndrome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSetPartition {
    pub located: Vec<PauliOperator>,
    pub ancilla_weight_one: Vec<PauliOperator>,
    pub composite: Vec<PauliOperator>,
}

/// Evaluation of the located quantum Hamming bound `Σ_j C(n_p,j)·3^j·2^k ≤ 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HammingBound {
    pub lhs: u128,
    pub rhs: u128,
    pub satisfied: bool,
    pub saturated: bool,
    /// `rhs − lhs`.
    pub margin: i128,
    /// Left side with the `3^j` letter multiplicity dropped.
    pub lhs_without_letters: u128,
}

pub fn located_hamming_bound(n_p: u32, k: u32, n: u32) -> Result<HammingBound> {
    if n == 0 || n > 120 || n_p > 60 || k > 60 {
        return Err(Error::invalid("n", n, "bound evaluated for 1 <= n <= 120, n_p, k <= 60"));
    }
    let binom = |n: u32, j: u32| -> u128 {
        (0..j).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    };
    let lhs: u128 = (0..=n_p)
        .map(|j| binom(n_p, j) * 3u128.pow(j) * (1u128 << k))
        .sum();
    let lhs_without_letters: u128 = (0..=n_p).map(|j| binom(n_p, j) * (1u128 << k)).sum();
    let rhs = 1u128 << n;
    Ok(HammingBound {
        lhs,
        rhs,
        satisfied: lhs <= rhs,
        saturated: lhs == rhs,
        margin: rhs as i128 - lhs as i128,
        lhs_without_letters,
    })
}
