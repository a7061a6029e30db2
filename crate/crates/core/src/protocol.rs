//! Probe preparation, noisy evolution, preprocessing, syndrome statistics and χ reconstruction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelKind, ChannelSpec, QuantumChannel};
use crate::codes::{located_errors, StabilizerCode, Syndrome};
use crate::error::{Error, Result};
use crate::pauli::PauliOperator;
use crate::process::ProcessMatrix;
use crate::state::{pauli_left, pauli_right, pauli_trace, DensityMatrix, Outcome};

/// Largest generator count handled by the dense syndrome tables.
pub const MAX_SYNDROME_BITS: usize = 20;

/// Shots per parallel work unit; fixed so results never depend on the thread pool.
pub(crate) const CHUNK_SHOTS: u64 = 1 << 14;

/// Operation applied between the noisy channel and syndrome extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "f_index")]
pub enum PreprocessingOp {
    Identity,
    /// `U_j = (1 + iF_j)/√2`.
    CoherenceUnitary(usize),
    /// Projective measurement of `F_j` with projectors `(1 ± F_j)/2`.
    CoherenceProjective(usize),
}

impl PreprocessingOp {
    pub fn f_index(self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::CoherenceUnitary(j) | Self::CoherenceProjective(j) => Some(j),
        }
    }

    pub fn is_projective(self) -> bool {
        matches!(self, Self::CoherenceProjective(_))
    }

    /// Identity, then every nontrivial `U_j`, then every nontrivial `P_j`.
    pub fn full_set(d2: usize) -> Vec<Self> {
        let mut ops = vec![Self::Identity];
        ops.extend((1..d2).map(Self::CoherenceUnitary));
        ops.extend((1..d2).map(Self::CoherenceProjective));
        ops
    }

    /// Random stream id of this setting.
    pub fn stream_id(self) -> u64 {
        match self {
            Self::Identity => 0,
            Self::CoherenceUnitary(j) => 1 + j as u64,
            Self::CoherenceProjective(j) => (1 << 32) + j as u64,
        }
    }

    fn check(self, d2: usize) -> Result<()> {
        match self.f_index() {
            Some(j) if j >= d2 => Err(Error::invalid("f_index", j, format!("must lie in 0..{d2}"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PreprocessingOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("identity"),
            Self::CoherenceUnitary(j) => write!(f, "U{j}"),
            Self::CoherenceProjective(j) => write!(f, "P{j}"),
        }
    }
}

/// One simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub preprocessing: PreprocessingOp,
    pub projective_outcome: Option<Outcome>,
    pub syndrome: Syndrome,
}

/// Codeword of a `k = 0` code as a density matrix.
pub fn prepare_probe(code: &StabilizerCode) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(&code.codeword_vector()?)
}

fn located_operator(code: &StabilizerCode, j: usize) -> Result<PauliOperator> {
    let n_p = code.principal_sites().len();
    let ops = located_errors(n_p);
    let f = ops
        .get(j)
        .ok_or_else(|| Error::invalid("f_index", j, format!("must lie in 0..{}", ops.len())))?;
    f.embed(code.n(), code.principal_sites())
}

/// Dense `U_j = (1 + iF_j)/√2` with `F_j` on the principal sites.
pub fn preprocessing_unitary(op: PreprocessingOp, code: &StabilizerCode) -> Result<DMatrix<Complex64>> {
    let PreprocessingOp::CoherenceUnitary(j) = op else {
        return Err(Error::invalid("preprocessing", op, "a unitary setting is required"));
    };
    let f = located_operator(code, j)?.to_matrix()?;
    let dim = f.nrows();
    Ok((DMatrix::identity(dim, dim) + f * Complex64::new(0.0, 1.0)) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
}

/// Accepts when the filter prefix of `s` is clear. Codes without filter bits accept everything.
pub fn filter_accept(code: &StabilizerCode, s: &Syndrome) -> Result<bool> {
    if s.len() != code.r() {
        return Err(Error::DimensionMismatch {
            left: code.r(),
            right: s.len(),
        });
    }
    Ok(s.prefix_is_clear(code.filter_bits()))
}

/// Reference Monte-Carlo event by explicit sequential collapse.
pub fn run_shot<R: Rng + ?Sized>(
    probe: &DensityMatrix,
    channel: &QuantumChannel,
    op: PreprocessingOp,
    code: &StabilizerCode,
    rng: &mut R,
) -> Result<ShotRecord> {
    run_shot_on_state(&probe.apply_channel(channel)?, op, code, rng)
}

/// [`run_shot`] on an already evolved state. Draws one uniform for a projective
/// setting and then one per generator, in code order.
pub fn run_shot_on_state<R: Rng + ?Sized>(
    evolved: &DensityMatrix,
    op: PreprocessingOp,
    code: &StabilizerCode,
    rng: &mut R,
) -> Result<ShotRecord> {
    if evolved.n() != code.n() {
        return Err(Error::DimensionMismatch {
            left: code.n(),
            right: evolved.n(),
        });
    }
    let mut projective_outcome = None;
    let mut state = match op {
        PreprocessingOp::Identity => evolved.clone(),
        PreprocessingOp::CoherenceUnitary(_) => evolved.apply_unitary(&preprocessing_unitary(op, code)?)?,
        PreprocessingOp::CoherenceProjective(j) => {
            let f = located_operator(code, j)?;
            let (rec, post) = evolved.measure_generator(&f, usize::MAX, rng.gen())?;
            projective_outcome = Some(rec.outcome);
            post
        }
    };
    let mut bits = Vec::with_capacity(code.r());
    for (j, g) in code.generators().iter().enumerate() {
        let (rec, post) = state.measure_generator(g, j, rng.gen())?;
        bits.push(rec.outcome == Outcome::Minus);
        state = post;
    }
    Ok(ShotRecord {
        preprocessing: op,
        projective_outcome,
        syndrome: Syndrome::from_bits(&bits),
    })
}

fn slot(outcome: Option<Outcome>) -> usize {
    match outcome {
        None | Some(Outcome::Plus) => 0,
        Some(Outcome::Minus) => 1,
    }
}

fn slot_outcome(projective: bool, slot: usize) -> Option<Outcome> {
    match (projective, slot) {
        (false, _) => None,
        (true, 0) => Some(Outcome::Plus),
        (true, _) => Some(Outcome::Minus),
    }
}

/// Joint (outcome, syndrome) statistics of one preprocessing setting.
pub trait SyndromeStatistics {
    fn setting(&self) -> PreprocessingOp;
    fn syndrome_len(&self) -> usize;
    /// Unnormalized weight of `(outcome, s)`. `None` sums over both outcomes.
    fn weight(&self, outcome: Option<Outcome>, s: u64) -> f64;

    /// Total weight over syndromes passing `code`'s filter.
    fn accepted_weight(&self, code: &StabilizerCode) -> f64 {
        (0..1u64 << self.syndrome_len())
            .filter(|&s| Syndrome::from_index(s, self.syndrome_len()).prefix_is_clear(code.filter_bits()))
            .map(|s| self.weight(None, s))
            .sum()
    }
}

/// Exact outcome probabilities of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyndromeDistribution {
    setting: PreprocessingOp,
    syndrome_len: usize,
    /// `probs[slot · 2^r + s]`.
    probs: Vec<f64>,
}

impl SyndromeDistribution {
    pub fn probability(&self, outcome: Option<Outcome>, s: u64) -> f64 {
        self.weight(outcome, s)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Non-zero cells in (outcome, syndrome) order.
    pub fn entries(&self) -> Vec<(Option<Outcome>, Syndrome, f64)> {
        let len = 1usize << self.syndrome_len;
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(k, &v)| {
                (
                    slot_outcome(self.setting.is_projective(), k / len),
                    Syndrome::from_index((k % len) as u64, self.syndrome_len),
                    v,
                )
            })
            .collect()
    }
}

impl SyndromeStatistics for SyndromeDistribution {
    fn setting(&self) -> PreprocessingOp {
        self.setting
    }

    fn syndrome_len(&self) -> usize {
        self.syndrome_len
    }

    fn weight(&self, outcome: Option<Outcome>, s: u64) -> f64 {
        let len = 1usize << self.syndrome_len;
        match (outcome, self.setting.is_projective()) {
            (None, true) => self.probs[s as usize] + self.probs[len + s as usize],
            _ => self.probs[slot(outcome) * len + s as usize],
        }
    }
}

/// Sampled counts of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistogramDocument", into = "HistogramDocument")]
pub struct SyndromeHistogram {
    setting: PreprocessingOp,
    syndrome_len: usize,
    counts: Vec<u64>,
    total_shots: u64,
    accepted_shots: u64,
}

/// Sparse serialized form of a histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDocument {
    pub setting: PreprocessingOp,
    pub syndrome_len: usize,
    pub total_shots: u64,
    pub accepted_shots: u64,
    pub entries: Vec<HistogramEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub outcome: Option<Outcome>,
    pub syndrome: String,
    pub count: u64,
}

impl SyndromeHistogram {
    fn from_counts(setting: PreprocessingOp, syndrome_len: usize, counts: Vec<u64>, filter_bits: usize) -> Self {
        let len = 1usize << syndrome_len;
        let total_shots = counts.iter().sum();
        let accepted_shots = counts
            .iter()
            .enumerate()
            .filter(|(k, _)| Syndrome::from_index((k % len) as u64, syndrome_len).prefix_is_clear(filter_bits))
            .map(|(_, c)| c)
            .sum();
        Self {
            setting,
            syndrome_len,
            counts,
            total_shots,
            accepted_shots,
        }
    }

    /// Tallies individual shot records.
    pub fn from_records(setting: PreprocessingOp, code: &StabilizerCode, records: &[ShotRecord]) -> Result<Self> {
        let r = code.r();
        let mut counts = vec![0u64; 2 << r];
        for rec in records {
            if rec.preprocessing != setting || rec.syndrome.len() != r {
                return Err(Error::invalid("record", rec.preprocessing, format!("expected setting {setting} with {r} syndrome bits")));
            }
            counts[(slot(rec.projective_outcome) << r) + rec.syndrome.index() as usize] += 1;
        }
        Ok(Self::from_counts(setting, r, counts, code.filter_bits()))
    }

    pub fn count(&self, outcome: Option<Outcome>, s: u64) -> u64 {
        let len = 1usize << self.syndrome_len;
        match (outcome, self.setting.is_projective()) {
            (None, true) => self.counts[s as usize] + self.counts[len + s as usize],
            _ => self.counts[slot(outcome) * len + s as usize],
        }
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn accepted_shots(&self) -> u64 {
        self.accepted_shots
    }

    /// Non-zero cells in (outcome, syndrome) order.
    pub fn entries(&self) -> Vec<HistogramEntry> {
        let len = 1usize << self.syndrome_len;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &count)| HistogramEntry {
                outcome: slot_outcome(self.setting.is_projective(), k / len),
                syndrome: Syndrome::from_index((k % len) as u64, self.syndrome_len).to_string(),
                count,
            })
            .collect()
    }
}

impl SyndromeStatistics for SyndromeHistogram {
    fn setting(&self) -> PreprocessingOp {
        self.setting
    }

    fn syndrome_len(&self) -> usize {
        self.syndrome_len
    }

    fn weight(&self, outcome: Option<Outcome>, s: u64) -> f64 {
        self.count(outcome, s) as f64
    }
}

impl From<SyndromeHistogram> for HistogramDocument {
    fn from(h: SyndromeHistogram) -> Self {
        Self {
            setting: h.setting,
            syndrome_len: h.syndrome_len,
            total_shots: h.total_shots,
            accepted_shots: h.accepted_shots,
            entries: h.entries(),
        }
    }
}

impl TryFrom<HistogramDocument> for SyndromeHistogram {
    type Error = Error;

    fn try_from(doc: HistogramDocument) -> Result<Self> {
        let r = doc.syndrome_len;
        if r > MAX_SYNDROME_BITS {
            return Err(Error::invalid("syndrome_len", r, format!("at most {MAX_SYNDROME_BITS}")));
        }
        let mut counts = vec![0u64; 2 << r];
        for e in &doc.entries {
            if e.syndrome.len() != r || !e.syndrome.chars().all(|c| c == '0' || c == '1') {
                return Err(Error::invalid("syndrome", &e.syndrome, format!("expected {r} binary digits")));
            }
            let bits: Vec<bool> = e.syndrome.chars().map(|c| c == '1').collect();
            counts[(slot(e.outcome) << r) + Syndrome::from_bits(&bits).index() as usize] += e.count;
        }
        let total: u64 = counts.iter().sum();
        if total != doc.total_shots {
            return Err(Error::invalid("total_shots", doc.total_shots, format!("counts sum to {total}")));
        }
        if doc.accepted_shots > total {
            return Err(Error::invalid("accepted_shots", doc.accepted_shots, "exceeds total_shots"));
        }
        Ok(Self {
            setting: doc.setting,
            syndrome_len: r,
            counts,
            total_shots: total,
            accepted_shots: doc.accepted_shots,
        })
    }
}

/// Either kind of per-setting statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingData {
    Sampled(SyndromeHistogram),
    Exact(SyndromeDistribution),
}

impl SyndromeStatistics for SettingData {
    fn setting(&self) -> PreprocessingOp {
        match self {
            Self::Sampled(h) => h.setting(),
            Self::Exact(d) => d.setting(),
        }
    }

    fn syndrome_len(&self) -> usize {
        match self {
            Self::Sampled(h) => h.syndrome_len(),
            Self::Exact(d) => d.syndrome_len(),
        }
    }

    fn weight(&self, outcome: Option<Outcome>, s: u64) -> f64 {
        match self {
            Self::Sampled(h) => h.weight(outcome, s),
            Self::Exact(d) => d.weight(outcome, s),
        }
    }
}

/// Unnormalized post-preprocessing branches: one for unitary settings, two for projective.
fn preprocess(evolved: &DensityMatrix, op: PreprocessingOp, code: &StabilizerCode) -> Result<Vec<DMatrix<Complex64>>> {
    op.check(1 << (2 * code.principal_sites().len()))?;
    let rho = evolved.matrix();
    Ok(match op {
        PreprocessingOp::Identity => vec![rho.clone()],
        PreprocessingOp::CoherenceUnitary(j) => {
            // (1 + iF)ρ(1 − iF)/2 = (ρ + FρF + i(Fρ − ρF))/2
            let f = located_operator(code, j)?;
            let f_rho = pauli_left(&f, rho);
            let rho_f = pauli_right(rho, &f);
            let f_rho_f = pauli_right(&f_rho, &f);
            vec![(rho + f_rho_f + (f_rho - rho_f) * Complex64::new(0.0, 1.0)) * Complex64::new(0.5, 0.0)]
        }
        PreprocessingOp::CoherenceProjective(j) => {
            let f = located_operator(code, j)?;
            vec![evolved.project_pauli(&f, Outcome::Plus).0, evolved.project_pauli(&f, Outcome::Minus).0]
        }
    })
}

/// `P(s) = 2^{-r} Σ_T (−1)^{|s∧T|} Tr[g_T σ]` for an unnormalized `σ`.
fn joint_syndrome_probabilities(sigma: &DMatrix<Complex64>, group: &[PauliOperator]) -> Vec<f64> {
    let mut a: Vec<f64> = group.iter().map(|g| pauli_trace(g, sigma).re).collect();
    let len = a.len();
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for k in block..block + h {
                let (u, v) = (a[k], a[k + h]);
                a[k] = u + v;
                a[k + h] = u - v;
            }
        }
        h *= 2;
    }
    a.iter().map(|v| (v / len as f64).max(0.0)).collect()
}

fn check_syndrome_size(code: &StabilizerCode) -> Result<()> {
    if code.r() > MAX_SYNDROME_BITS {
        return Err(Error::Unsupported(format!("{} generators exceed {MAX_SYNDROME_BITS}", code.r())));
    }
    Ok(())
}

/// Exact joint distribution of the projective outcome (if any) and the syndrome.
pub fn exact_distribution(evolved: &DensityMatrix, op: PreprocessingOp, code: &StabilizerCode) -> Result<SyndromeDistribution> {
    check_syndrome_size(code)?;
    let group = code.stabilizer_group();
    let mut probs = preprocess(evolved, op, code)?
        .iter()
        .flat_map(|sigma| joint_syndrome_probabilities(sigma, &group))
        .collect::<Vec<_>>();
    probs.resize(2 << code.r(), 0.0);
    Ok(SyndromeDistribution {
        setting: op,
        syndrome_len: code.r(),
        probs,
    })
}

/// Sequential-measurement sampler built from an exact distribution.
///
/// Per branch, level `d` of the tree stores the probability of every outcome
/// prefix of the first `d` generators, so each generator is drawn from its
/// conditional Born probability exactly as in [`run_shot_on_state`].
#[derive(Debug, Clone)]
pub struct SettingSampler {
    setting: PreprocessingOp,
    r: usize,
    filter_bits: usize,
    branch_plus: f64,
    trees: Vec<Vec<f64>>,
}

impl SettingSampler {
    pub fn new(dist: &SyndromeDistribution, filter_bits: usize) -> Self {
        let r = dist.syndrome_len;
        let len = 1usize << r;
        let branches = if dist.setting.is_projective() { 2 } else { 1 };
        let trees: Vec<Vec<f64>> = (0..branches)
            .map(|b| {
                let mut tree = vec![0.0; 2 * len - 1];
                tree[len - 1..].copy_from_slice(&dist.probs[b * len..(b + 1) * len]);
                for d in (0..r).rev() {
                    let (lo, hi) = ((1usize << d) - 1, (1usize << (d + 1)) - 1);
                    for prefix in 0..1usize << d {
                        tree[lo + prefix] = tree[hi + prefix] + tree[hi + prefix + (1 << d)];
                    }
                }
                tree
            })
            .collect();
        let weights: Vec<f64> = trees.iter().map(|t| t[0]).collect();
        let branch_plus = if branches == 2 { weights[0] / (weights[0] + weights[1]) } else { 1.0 };
        Self {
            setting: dist.setting,
            r,
            filter_bits,
            branch_plus,
            trees,
        }
    }

    /// Words of the random stream reserved per shot.
    pub fn stride(&self) -> u128 {
        2 * (self.r as u128 + 2)
    }

    /// One shot; returns `(slot, syndrome index)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, u64) {
        let mut b = 0;
        if self.trees.len() == 2 {
            let u: f64 = rng.gen();
            b = usize::from(u >= self.branch_plus);
        }
        let tree = &self.trees[b];
        let mut prefix = 0usize;
        for j in 0..self.r {
            let here = tree[(1usize << j) - 1 + prefix];
            let zero = tree[(1usize << (j + 1)) - 1 + prefix];
            let p_plus = if here > 0.0 { (zero / here).clamp(0.0, 1.0) } else { 1.0 };
            let u: f64 = rng.gen();
            if u >= p_plus {
                prefix |= 1 << j;
            }
        }
        (b, prefix as u64)
    }

    /// `shots` events with streams keyed by `(seed, setting, shot index)`.
    pub fn histogram(&self, shots: u64, seed: u64) -> SyndromeHistogram {
        let cells = 2usize << self.r;
        let chunks = shots.div_ceil(CHUNK_SHOTS);
        let stride = self.stride();
        let counts = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut local = vec![0u64; cells];
                let mut rng = shot_stream(seed, self.setting.stream_id());
                for shot in c * CHUNK_SHOTS..((c + 1) * CHUNK_SHOTS).min(shots) {
                    rng.set_word_pos(shot as u128 * stride);
                    let (b, s) = self.sample(&mut rng);
                    local[(b << self.r) + s as usize] += 1;
                }
                local
            })
            .reduce(
                || vec![0u64; cells],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        SyndromeHistogram::from_counts(self.setting, self.r, counts, self.filter_bits)
    }
}

/// Counter-based stream for one setting; position it with `set_word_pos`.
pub fn shot_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct LocatedIndex {
    ops: Vec<PauliOperator>,
    syndromes: Vec<u64>,
    by_op: HashMap<(u64, u64), usize>,
}

impl LocatedIndex {
    fn new(code: &StabilizerCode) -> Result<Self> {
        let table = code.located_error_table()?;
        let syndromes: Vec<u64> = table.iter().map(|row| row.syndrome.index()).collect();
        let mut seen = HashMap::new();
        for (i, s) in syndromes.iter().enumerate() {
            if let Some(prev) = seen.insert(*s, i) {
                return Err(Error::Unsupported(format!(
                    "{} assigns located errors {prev} and {i} the same syndrome",
                    code.label()
                )));
            }
        }
        let ops: Vec<PauliOperator> = table.into_iter().map(|row| row.principal).collect();
        let by_op = ops.iter().enumerate().map(|(i, f)| ((f.x_mask(), f.z_mask()), i)).collect();
        Ok(Self { ops, syndromes, by_op })
    }

    /// `(J, φ_J)` with `F_i† F_j = φ_J F_J`.
    fn product(&self, i: usize, j: usize) -> (usize, Complex64) {
        let prod = self.ops[i].dagger().multiply(&self.ops[j]).expect("same size");
        (self.by_op[&(prod.x_mask(), prod.z_mask())], prod.phase_factor())
    }

    fn setting_for_pair(&self, m: usize, n: usize) -> usize {
        let prod = self.ops[m].multiply(&self.ops[n]).expect("same size");
        self.by_op[&(prod.x_mask(), prod.z_mask())]
    }
}

fn accepted_fraction<'a, S: SyndromeStatistics>(
    stats: &'a S,
    code: &StabilizerCode,
) -> Result<impl Fn(Option<Outcome>, u64) -> f64 + 'a> {
    if stats.syndrome_len() != code.r() {
        return Err(Error::DimensionMismatch {
            left: code.r(),
            right: stats.syndrome_len(),
        });
    }
    let accepted = stats.accepted_weight(code);
    if accepted <= 0.0 {
        return Err(Error::NoAcceptedShots {
            setting: stats.setting().to_string(),
        });
    }
    Ok(move |outcome, s| stats.weight(outcome, s) / accepted)
}

/// Populations `χ_ii`: accepted frequency of each located syndrome.
pub fn estimate_diagonal<S: SyndromeStatistics>(h: &S, code: &StabilizerCode) -> Result<Vec<f64>> {
    if h.setting() != PreprocessingOp::Identity {
        return Err(Error::invalid("setting", h.setting(), "populations need the identity setting"));
    }
    let located = LocatedIndex::new(code)?;
    let frac = accepted_fraction(h, code)?;
    Ok(located.syndromes.iter().map(|&s| frac(None, s)).collect())
}

/// Unsymmetrized `χ_Ji` from the `U_j` and `P_j` settings at syndrome `i`.
fn raw_coherence<S: SyndromeStatistics>(
    located: &LocatedIndex,
    diag: &[f64],
    i: usize,
    j: usize,
    unitary: &S,
    projective: &S,
    code: &StabilizerCode,
) -> Result<(usize, Complex64)> {
    let (big_j, phi) = located.product(i, j);
    let s = located.syndromes[i];
    let fu = accepted_fraction(unitary, code)?;
    let fp = accepted_fraction(projective, code)?;
    let im = (diag[i] + diag[big_j]) / 2.0 - fu(None, s);
    let re = fp(Some(Outcome::Plus), s) - fp(Some(Outcome::Minus), s);
    Ok((big_j, phi.conj() * Complex64::new(re, im)))
}

fn require_settings<S>(data: &BTreeMap<PreprocessingOp, S>, js: impl Iterator<Item = usize>) -> Result<()> {
    let mut missing: Vec<usize> = js
        .filter(|&j| {
            !data.contains_key(&PreprocessingOp::CoherenceUnitary(j))
                || !data.contains_key(&PreprocessingOp::CoherenceProjective(j))
        })
        .collect();
    if !data.contains_key(&PreprocessingOp::Identity) {
        missing.insert(0, 0);
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::IncompleteData { missing })
    }
}

/// Full `χ` from the identity, unitary and projective settings, symmetrized to `(χ + χ†)/2`.
pub fn estimate_offdiagonal<S: SyndromeStatistics>(
    data: &BTreeMap<PreprocessingOp, S>,
    code: &StabilizerCode,
) -> Result<ProcessMatrix> {
    Ok(estimate_raw(data, code)?.hermitian_part())
}

/// Like [`estimate_offdiagonal`] without the final symmetrization.
pub fn estimate_raw<S: SyndromeStatistics>(
    data: &BTreeMap<PreprocessingOp, S>,
    code: &StabilizerCode,
) -> Result<ProcessMatrix> {
    let n_p = code.principal_sites().len();
    let d2 = 1usize << (2 * n_p);
    require_settings(data, 1..d2)?;
    let located = LocatedIndex::new(code)?;
    let diag = estimate_diagonal(&data[&PreprocessingOp::Identity], code)?;
    let mut raw = ProcessMatrix::zeros(n_p);
    for (i, &v) in diag.iter().enumerate() {
        raw.set(i, i, Complex64::new(v, 0.0));
    }
    for j in 1..d2 {
        let u = &data[&PreprocessingOp::CoherenceUnitary(j)];
        let p = &data[&PreprocessingOp::CoherenceProjective(j)];
        for i in 0..d2 {
            let (big_j, v) = raw_coherence(&located, &diag, i, j, u, p, code)?;
            raw.set(big_j, i, v);
        }
    }
    Ok(raw)
}

/// Which scenario a characterization run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Noiseless ancilla with the unconcatenated code.
    Clean,
    /// Depolarized ancilla, unconcatenated code, nothing filtered.
    S0Noisy,
    /// Depolarized ancilla, concatenated code with filtering.
    S1Noisy,
    /// Noiseless ancilla, concatenated code.
    S1Clean,
}

impl Scenario {
    pub fn code(self) -> StabilizerCode {
        match self {
            Self::Clean | Self::S0Noisy => StabilizerCode::s0(),
            Self::S1Noisy | Self::S1Clean => StabilizerCode::s1(),
        }
    }

    pub fn noisy_ancilla(self) -> bool {
        matches!(self, Self::S0Noisy | Self::S1Noisy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Sampling,
    Exact,
}

/// Everything needed for one end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationConfig {
    pub scenario: Scenario,
    pub gamma: f64,
    pub p: f64,
    pub shots_per_setting: u64,
    pub seed: u64,
    pub backend: Backend,
    /// Discard shots with a nonzero filter prefix. Has no effect on codes without filter bits.
    pub filter: bool,
    /// Overrides the scenario's noise model; applied in listed order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelSpec>>,
}

impl CharacterizationConfig {
    pub fn new(scenario: Scenario, gamma: f64, p: f64) -> Self {
        Self {
            scenario,
            gamma,
            p,
            shots_per_setting: 1_000_000,
            seed: 0,
            backend: Backend::Exact,
            filter: true,
            channels: None,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots_per_setting = shots;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_filter(mut self, filter: bool) -> Self {
        self.filter = filter;
        self
    }

    pub fn with_channels(mut self, channels: Vec<ChannelSpec>) -> Self {
        self.channels = Some(channels);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("p", self.p)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, v, "must lie in [0, 1]"));
            }
        }
        if self.backend == Backend::Sampling && self.shots_per_setting == 0 {
            return Err(Error::invalid("shots_per_setting", 0, "sampling needs at least one shot"));
        }
        Ok(())
    }

    /// Noise model: amplitude damping on principal qubit 1, then depolarizing on each ancilla qubit.
    pub fn channel_specs(&self) -> Vec<ChannelSpec> {
        if let Some(ch) = &self.channels {
            return ch.clone();
        }
        let mut specs = vec![ChannelSpec {
            kind: ChannelKind::AmplitudeDamping,
            site: 1,
            parameter: self.gamma,
        }];
        if self.scenario.noisy_ancilla() {
            specs.extend(self.scenario.code().ancilla_sites().iter().map(|&site| ChannelSpec {
                kind: ChannelKind::Depolarizing,
                site,
                parameter: self.p,
            }));
        }
        specs
    }

    /// The scenario's code, with filtering removed when disabled.
    pub fn effective_code(&self) -> Result<StabilizerCode> {
        let code = self.scenario.code();
        if self.filter {
            Ok(code)
        } else {
            code.with_filter_bits(0)
        }
    }

    /// Probe after every configured channel.
    pub fn evolved_probe(&self) -> Result<DensityMatrix> {
        let code = self.scenario.code();
        let mut rho = prepare_probe(&code)?;
        for spec in self.channel_specs() {
            rho = rho.apply_channel(&spec.build(code.n())?)?;
        }
        Ok(rho)
    }
}

/// Output of [`characterize`].
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizationResult {
    pub config: CharacterizationConfig,
    pub code: StabilizerCode,
    /// Estimator output before Hermitian symmetrization.
    pub raw_chi: ProcessMatrix,
    pub chi: ProcessMatrix,
    pub data: BTreeMap<PreprocessingOp, SettingData>,
}

impl CharacterizationResult {
    pub fn diagonal(&self) -> Vec<f64> {
        self.chi.diagonal()
    }
}

fn collect_settings(
    config: &CharacterizationConfig,
    code: &StabilizerCode,
    ops: &[PreprocessingOp],
) -> Result<BTreeMap<PreprocessingOp, SettingData>> {
    config.validate()?;
    check_syndrome_size(code)?;
    let evolved = config.evolved_probe()?;
    ops.iter()
        .map(|&op| {
            let dist = exact_distribution(&evolved, op, code)?;
            let data = match config.backend {
                Backend::Exact => SettingData::Exact(dist),
                Backend::Sampling => SettingData::Sampled(
                    SettingSampler::new(&dist, code.filter_bits()).histogram(config.shots_per_setting, config.seed),
                ),
            };
            Ok((op, data))
        })
        .collect()
}

/// End-to-end run over all `1 + 2(d² − 1)` settings.
pub fn characterize(config: &CharacterizationConfig) -> Result<CharacterizationResult> {
    let code = config.effective_code()?;
    let d2 = 1usize << (2 * code.principal_sites().len());
    let data = collect_settings(config, &code, &PreprocessingOp::full_set(d2))?;
    let raw_chi = estimate_raw(&data, &code)?;
    log::debug!("characterized {:?} with {} settings", config.scenario, data.len());
    Ok(CharacterizationResult {
        config: config.clone(),
        chi: raw_chi.hermitian_part(),
        raw_chi,
        code,
        data,
    })
}

/// Output of [`partial_characterize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEstimate {
    pub entries: BTreeMap<(usize, usize), Complex64>,
    pub settings: Vec<PreprocessingOp>,
}

/// Estimates only the requested `χ_mn`, running the identity setting plus
/// `U_j`, `P_j` for each `F_j ∝ F_n F_m`.
pub fn partial_characterize(config: &CharacterizationConfig, elements: &[(usize, usize)]) -> Result<PartialEstimate> {
    let code = config.effective_code()?;
    let d2 = 1usize << (2 * code.principal_sites().len());
    if let Some(&(m, n)) = elements.iter().find(|(m, n)| *m >= d2 || *n >= d2) {
        return Err(Error::invalid("elements", format!("({m}, {n})"), format!("indices must lie in 0..{d2}")));
    }
    let located = LocatedIndex::new(&code)?;
    let mut ops = vec![PreprocessingOp::Identity];
    for &(m, n) in elements {
        if m != n {
            let j = located.setting_for_pair(m, n);
            ops.push(PreprocessingOp::CoherenceUnitary(j));
            ops.push(PreprocessingOp::CoherenceProjective(j));
        }
    }
    ops.sort();
    ops.dedup();
    let data = collect_settings(config, &code, &ops)?;
    let diag = estimate_diagonal(&data[&PreprocessingOp::Identity], &code)?;
    let mut entries = BTreeMap::new();
    for &(m, n) in elements {
        let v = if m == n {
            Complex64::new(diag[m], 0.0)
        } else {
            let j = located.setting_for_pair(m, n);
            let u = &data[&PreprocessingOp::CoherenceUnitary(j)];
            let p = &data[&PreprocessingOp::CoherenceProjective(j)];
            let (jm, mn) = raw_coherence(&located, &diag, n, j, u, p, &code)?;
            let (jn, nm) = raw_coherence(&located, &diag, m, j, u, p, &code)?;
            debug_assert_eq!((jm, jn), (m, n));
            (mn + nm.conj()) * 0.5
        };
        entries.insert((m, n), v);
    }
    Ok(PartialEstimate { entries, settings: ops })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::theoretical_chi_ad;
    use crate::state::max_abs;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn syn(s: &str) -> Syndrome {
        Syndrome::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn probe_is_trivial_codeword() {
        let code = StabilizerCode::s1();
        let probe = prepare_probe(&code).unwrap();
        assert!((probe.purity() - 1.0).abs() < 1e-12);
        for g in code.generators() {
            assert!((probe.pauli_expectation(g).unwrap().re - 1.0).abs() < 1e-12);
        }
        let dist = exact_distribution(&probe, PreprocessingOp::Identity, &code).unwrap();
        assert!((dist.probability(None, 0) - 1.0).abs() < 1e-12);
        assert!(prepare_probe(&StabilizerCode::s422()).is_err());
    }

    #[test]
    fn unitary_examples() {
        let code = StabilizerCode::s1();
        let u0 = preprocessing_unitary(PreprocessingOp::CoherenceUnitary(0), &code).unwrap();
        let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!(max_abs(&(&u0 - DMatrix::identity(64, 64) * phase)) < 1e-12);
        let u1 = preprocessing_unitary(PreprocessingOp::CoherenceUnitary(1), &code).unwrap();
        let f1 = p("XIIIII").to_matrix().unwrap();
        assert!(max_abs(&(&u1 * &u1 - f1 * Complex64::new(0.0, 1.0))) < 1e-12);
        for j in 0..16 {
            let u = preprocessing_unitary(PreprocessingOp::CoherenceUnitary(j), &code).unwrap();
            assert!(max_abs(&(&u * u.adjoint() - DMatrix::identity(64, 64))) < 1e-12);
        }
        assert!(preprocessing_unitary(PreprocessingOp::Identity, &code).is_err());
        assert!(preprocessing_unitary(PreprocessingOp::CoherenceUnitary(16), &code).is_err());
    }

    #[test]
    fn shot_examples() {
        let code = StabilizerCode::s1();
        let probe = prepare_probe(&code).unwrap();
        let id = QuantumChannel::identity(6).unwrap();
        let x1 = QuantumChannel::pauli(&p("XIIIII")).unwrap();
        let x3 = QuantumChannel::pauli(&p("IIXIII")).unwrap();
        let mut r = rng(1);
        for _ in 0..5 {
            let rec = run_shot(&probe, &id, PreprocessingOp::Identity, &code, &mut r).unwrap();
            assert_eq!(rec.syndrome, syn("000000"));
            let rec = run_shot(&probe, &x1, PreprocessingOp::Identity, &code, &mut r).unwrap();
            assert_eq!(rec.syndrome, syn("000100"));
            assert_eq!(rec.projective_outcome, None);
            let rec = run_shot(&probe, &x3, PreprocessingOp::Identity, &code, &mut r).unwrap();
            assert!(!rec.syndrome.prefix_is_clear(2));
            assert_eq!(rec.syndrome, syn("010100"));
            let rec = run_shot(&probe, &id, PreprocessingOp::CoherenceProjective(3), &code, &mut r).unwrap();
            assert!(rec.projective_outcome.is_some());
        }
    }

    #[test]
    fn filter_examples() {
        let s1 = StabilizerCode::s1();
        assert!(filter_accept(&s1, &syn("000111")).unwrap());
        assert!(!filter_accept(&s1, &syn("010100")).unwrap());
        assert!(filter_accept(&s1, &syn("000000")).unwrap());
        let s0 = StabilizerCode::s0();
        for s in 0..16 {
            assert!(filter_accept(&s0, &Syndrome::from_index(s, 4)).unwrap());
        }
        assert!(filter_accept(&s1, &syn("0000")).is_err());
    }

    /// Dense oracle: `Tr[Π_s σ]` with `Π_s = ∏_j (1 + (−1)^{s_j} g_j)/2`.
    fn projector_probabilities(sigma: &DMatrix<Complex64>, code: &StabilizerCode) -> Vec<f64> {
        let dim = sigma.nrows();
        (0..1u64 << code.r())
            .map(|s| {
                let mut proj = DMatrix::<Complex64>::identity(dim, dim);
                for (j, g) in code.generators().iter().enumerate() {
                    let sign = if s >> j & 1 == 1 { -1.0 } else { 1.0 };
                    let gm = g.to_matrix().unwrap();
                    proj = proj * (DMatrix::identity(dim, dim) + gm * Complex64::new(sign, 0.0)) * Complex64::new(0.5, 0.0);
                }
                (proj * sigma).trace().re
            })
            .collect()
    }

    #[test]
    fn walsh_distribution_matches_dense_projectors() {
        let config = CharacterizationConfig::new(Scenario::S1Noisy, 0.4, 0.1);
        let code = config.effective_code().unwrap();
        let evolved = config.evolved_probe().unwrap();
        for op in [
            PreprocessingOp::Identity,
            PreprocessingOp::CoherenceUnitary(9),
            PreprocessingOp::CoherenceProjective(11),
        ] {
            let dist = exact_distribution(&evolved, op, &code).unwrap();
            let branches = preprocess(&evolved, op, &code).unwrap();
            for (b, sigma) in branches.iter().enumerate() {
                let oracle = projector_probabilities(sigma, &code);
                for (s, want) in oracle.iter().enumerate() {
                    let got = dist.probability(slot_outcome(op.is_projective(), b), s as u64);
                    assert!((got - want).abs() < 1e-12, "{op} slot {b} syndrome {s}: {got} vs {want}");
                }
            }
            assert!((dist.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_matches_sequential_reference_shot_by_shot() {
        let config = CharacterizationConfig::new(Scenario::S1Noisy, 0.4, 0.1);
        let code = config.effective_code().unwrap();
        let evolved = config.evolved_probe().unwrap();
        for op in [PreprocessingOp::Identity, PreprocessingOp::CoherenceProjective(5)] {
            let sampler = SettingSampler::new(&exact_distribution(&evolved, op, &code).unwrap(), 2);
            let mut agree = 0;
            for shot in 0..200u64 {
                let mut a = shot_stream(7, op.stream_id());
                a.set_word_pos(shot as u128 * sampler.stride());
                let mut b = a.clone();
                let (slot_a, s) = sampler.sample(&mut a);
                let rec = run_shot_on_state(&evolved, op, &code, &mut b).unwrap();
                if slot(rec.projective_outcome) == slot_a && rec.syndrome.index() == s {
                    agree += 1;
                }
            }
            // conditional probabilities agree to rounding, so only boundary draws may differ
            assert!(agree >= 199, "{op}: {agree}/200");
        }
    }

    #[test]
    fn sampled_frequencies_within_binomial_bounds() {
        let config = CharacterizationConfig::new(Scenario::S1Noisy, 0.4, 0.1);
        let code = config.effective_code().unwrap();
        let evolved = config.evolved_probe().unwrap();
        let shots = 100_000u64;
        for op in [PreprocessingOp::Identity, PreprocessingOp::CoherenceUnitary(2), PreprocessingOp::CoherenceProjective(7)] {
            let dist = exact_distribution(&evolved, op, &code).unwrap();
            let h = SettingSampler::new(&dist, 2).histogram(shots, 11);
            assert_eq!(h.total_shots(), shots);
            for b in 0..2 {
                for s in 0..64u64 {
                    let outcome = slot_outcome(op.is_projective(), b);
                    if !op.is_projective() && b == 1 {
                        continue;
                    }
                    let prob = dist.probability(outcome, s);
                    let sigma = (prob * (1.0 - prob) / shots as f64).sqrt();
                    let freq = h.count(outcome, s) as f64 / shots as f64;
                    assert!((freq - prob).abs() <= 4.0 * sigma + 1e-12, "{op} {b} {s}: {freq} vs {prob}");
                }
            }
        }
    }

    #[test]
    fn histogram_is_thread_count_independent() {
        let config = CharacterizationConfig::new(Scenario::S1Noisy, 0.4, 0.1);
        let code = config.effective_code().unwrap();
        let evolved = config.evolved_probe().unwrap();
        let dist = exact_distribution(&evolved, PreprocessingOp::CoherenceProjective(4), &code).unwrap();
        let sampler = SettingSampler::new(&dist, 2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sampler.histogram(50_000, 3))
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(3));
        assert_ne!(one, sampler.histogram(50_000, 4));
    }

    #[test]
    fn histogram_round_trips_through_json() {
        let code = StabilizerCode::s1();
        let recs = vec![
            ShotRecord {
                preprocessing: PreprocessingOp::CoherenceProjective(2),
                projective_outcome: Some(Outcome::Minus),
                syndrome: syn("000100"),
            },
            ShotRecord {
                preprocessing: PreprocessingOp::CoherenceProjective(2),
                projective_outcome: Some(Outcome::Plus),
                syndrome: syn("010000"),
            },
        ];
        let h = SyndromeHistogram::from_records(PreprocessingOp::CoherenceProjective(2), &code, &recs).unwrap();
        assert_eq!((h.total_shots(), h.accepted_shots()), (2, 1));
        let text = serde_json::to_string(&h).unwrap();
        assert!(text.contains("\"000100\""));
        let back: SyndromeHistogram = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h);
        let tampered = text.replace("\"total_shots\":2", "\"total_shots\":3");
        assert!(serde_json::from_str::<SyndromeHistogram>(&tampered).is_err());
    }

    #[test]
    fn exact_backend_reproduces_closed_form() {
        for scenario in [Scenario::Clean, Scenario::S1Clean] {
            for gamma in [0.1, 0.4, 0.9] {
                let result = characterize(&CharacterizationConfig::new(scenario, gamma, 0.0)).unwrap();
                let theory = theoretical_chi_ad(gamma).unwrap();
                assert!(result.chi.max_abs_diff(&theory) < 1e-10, "{scenario:?} {gamma}");
                // the raw estimator is already Hermitian for exact data
                assert!(result.raw_chi.max_abs_diff(&theory) < 1e-10);
            }
        }
    }

    #[test]
    fn coherence_sign_convention_pinned() {
        let result = characterize(&CharacterizationConfig::new(Scenario::Clean, 0.4, 0.0)).unwrap();
        let (x, y, z) = (1, 2, 3);
        assert!((result.chi.get(y, x) - Complex64::new(0.0, 0.1)).norm() < 1e-10);
        assert!((result.chi.get(x, y) - Complex64::new(0.0, -0.1)).norm() < 1e-10);
        assert!((result.chi.get(0, z).re - 0.1).abs() < 1e-10);
        let diag = result.diagonal();
        let want = [0.787_298_334_620_741_7, 0.1, 0.1, 0.012_701_665_379_258_3];
        for (got, want) in diag.iter().zip(want) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(diag[4..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn pauli_channels_give_diagonal_chi() {
        let config = CharacterizationConfig::new(Scenario::S1Clean, 0.0, 0.0).with_channels(vec![
            ChannelSpec {
                kind: ChannelKind::Depolarizing,
                site: 1,
                parameter: 0.2,
            },
            ChannelSpec {
                kind: ChannelKind::Depolarizing,
                site: 2,
                parameter: 0.3,
            },
        ]);
        let chi = characterize(&config).unwrap().chi;
        for m in 0..16 {
            for n in 0..16 {
                if m != n {
                    assert!(chi.get(m, n).norm() < 1e-12);
                }
            }
        }
        assert!((chi.get(0, 0).re - 0.8 * 0.7).abs() < 1e-12);
        assert!((chi.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_filtered_diagonal_matches_syndrome_bookkeeping() {
        let (gamma, prob) = (0.4, 0.1);
        let clean = theoretical_chi_ad(gamma).unwrap().diagonal();
        let noisy = characterize(&CharacterizationConfig::new(Scenario::S1Noisy, gamma, prob)).unwrap();
        let code = StabilizerCode::s1();
        let located: Vec<u64> = code.located_error_table().unwrap().iter().map(|r| r.syndrome.index()).collect();
        // ancilla Pauli errors shift located syndromes by XOR
        let mut weight = vec![0.0; 64];
        for e in PauliOperator::all(4) {
            let w = e.weight() as i32;
            let pe = (prob / 3.0).powi(w) * (1.0 - prob).powi(4 - w);
            let shift = code.syndrome_of_error(&e.embed(6, &[3, 4, 5, 6]).unwrap()).unwrap().index();
            for (k, &sk) in located.iter().enumerate() {
                weight[(sk ^ shift) as usize] += clean[k] * pe;
            }
        }
        let accepted: f64 = (0..64).filter(|s| s & 3 == 0).map(|s| weight[s]).sum();
        for (i, &si) in located.iter().enumerate() {
            assert!((noisy.diagonal()[i] - weight[si as usize] / accepted).abs() < 1e-12, "row {i}");
        }
        let d: f64 = noisy.diagonal().iter().sum();
        assert!((d - 1.0).abs() < 1e-12);
        // shifts stay within the surviving-noise fraction
        let survived = 1.0 - 0.9f64.powi(4) / accepted;
        for (a, b) in noisy.diagonal().iter().zip(&clean) {
            assert!((a - b).abs() <= survived);
        }
    }

    #[test]
    fn missing_settings_reported() {
        let result = characterize(&CharacterizationConfig::new(Scenario::Clean, 0.4, 0.0)).unwrap();
        let mut data = result.data.clone();
        data.remove(&PreprocessingOp::CoherenceUnitary(5));
        data.remove(&PreprocessingOp::CoherenceProjective(9));
        assert_eq!(
            estimate_offdiagonal(&data, &result.code),
            Err(Error::IncompleteData { missing: vec![5, 9] })
        );
        data.remove(&PreprocessingOp::Identity);
        assert_eq!(
            estimate_offdiagonal(&data, &result.code),
            Err(Error::IncompleteData { missing: vec![0, 5, 9] })
        );
    }

    #[test]
    fn partial_matches_full_run() {
        let config = CharacterizationConfig::new(Scenario::S1Noisy, 0.4, 0.1);
        let full = characterize(&config).unwrap().chi;
        let only_diag = partial_characterize(&config, &[(0, 0), (3, 3)]).unwrap();
        assert_eq!(only_diag.settings, vec![PreprocessingOp::Identity]);
        let (i, x, y, z) = (0, 1, 2, 3);
        let part = partial_characterize(&config, &[(i, z), (x, y), (y, x), (7, 12)]).unwrap();
        // χ_IZ and χ_XY both need F_j = Z; χ_XX,YZ needs ZY
        assert_eq!(part.settings.len(), 1 + 2 * 2);
        for (&(m, n), v) in &part.entries {
            assert!((v - full.get(m, n)).norm() < 1e-12, "({m}, {n})");
        }
        assert!(partial_characterize(&config, &[(0, 16)]).is_err());
    }

    #[test]
    fn sampling_close_to_exact() {
        let config = CharacterizationConfig::new(Scenario::Clean, 0.4, 0.0);
        let exact = characterize(&config).unwrap().chi;
        let sampled = characterize(&config.clone().with_backend(Backend::Sampling).with_shots(200_000).with_seed(5)).unwrap();
        assert!(sampled.chi.max_abs_diff(&exact) < 0.01);
        assert!(sampled.chi.hermiticity_deviation() == 0.0);
        let d: f64 = sampled.diagonal().iter().sum();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = CharacterizationConfig::new(Scenario::Clean, 1.5, 0.0);
        assert!(matches!(characterize(&bad), Err(Error::InvalidParameter { name: "gamma", .. })));
        let zero = CharacterizationConfig::new(Scenario::Clean, 0.4, 0.0).with_backend(Backend::Sampling).with_shots(0);
        assert!(matches!(characterize(&zero), Err(Error::InvalidParameter { name: "shots_per_setting", .. })));
    }

    #[test]
    fn filter_rejects_every_weight_one_ancilla_error() {
        let code = StabilizerCode::s1();
        let probe = prepare_probe(&code).unwrap();
        for e in code.ancilla_weight_one_errors() {
            let evolved = probe.conjugate_by_pauli(&e).unwrap();
            let dist = exact_distribution(&evolved, PreprocessingOp::Identity, &code).unwrap();
            assert!(dist.accepted_weight(&code) < 1e-15, "{e}");
            let h = SettingSampler::new(&dist, 2).histogram(2_000, 1);
            assert_eq!(h.accepted_shots(), 0);
        }
    }
}
