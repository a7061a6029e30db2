//! Fidelities, the ancilla failure oracle and failure-rate sweeps.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{theoretical_chi_ad, QuantumChannel};
use crate::codes::{StabilizerCode, Syndrome};
use crate::error::{Error, Result};
use crate::pauli::PauliOperator;
use crate::process::ProcessMatrix;
use crate::protocol::{exact_distribution, prepare_probe, shot_stream, PreprocessingOp, SyndromeStatistics, CHUNK_SHOTS};
use crate::state::{hermitian_eigenvalues, hermitian_function, max_abs, trace_norm, DensityMatrix};

/// Eigenvalues in `[−CLAMP_TOL, 0)` are treated as rounding noise.
pub const CLAMP_TOL: f64 = 1e-9;
/// Below this, lenient clamping logs a warning.
pub const WARN_TOL: f64 = 1e-3;

/// Real formatted with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampPolicy {
    /// Error on eigenvalues below `−CLAMP_TOL`.
    Strict,
    /// Always clamp; warn below `−WARN_TOL`.
    Lenient,
}

/// Hermitian part of `m` with negative eigenvalues zeroed and unit trace.
fn clamp_state(m: &DMatrix<Complex64>, policy: ClampPolicy) -> Result<DMatrix<Complex64>> {
    let min = hermitian_eigenvalues(m).first().copied().unwrap_or(0.0);
    match policy {
        ClampPolicy::Strict if min < -CLAMP_TOL => return Err(Error::InvalidState { min_eigenvalue: min }),
        ClampPolicy::Lenient if min < -WARN_TOL => log::warn!("clamping eigenvalue {min:.3e} for fidelity"),
        _ => {}
    }
    let clamped = hermitian_function(m, |v| v.max(0.0));
    let tr = clamped.trace().re;
    if tr <= 0.0 {
        return Err(Error::InvalidState { min_eigenvalue: min });
    }
    Ok(clamped / Complex64::new(tr, 0.0))
}

/// Square root with eigenvalues below the numerical rank cutoff set to zero.
fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let top = hermitian_eigenvalues(m).last().copied().unwrap_or(0.0);
    let cutoff = m.nrows() as f64 * f64::EPSILON * top;
    hermitian_function(m, |v| if v > cutoff { v.sqrt() } else { 0.0 })
}

/// `Tr √(√ρ σ √ρ)` after clamping both inputs under `policy`.
pub fn fidelity_of_matrices(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>, policy: ClampPolicy) -> Result<f64> {
    if rho.shape() != sigma.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch {
            left: rho.nrows(),
            right: sigma.nrows(),
        });
    }
    let rho = clamp_state(rho, policy)?;
    let sigma = clamp_state(sigma, policy)?;
    // Tr √(√ρ σ √ρ) = ‖√ρ √σ‖₁
    Ok(trace_norm(&(psd_sqrt(&rho) * psd_sqrt(&sigma))))
}

/// Uhlmann fidelity `F(ρ, σ) = Tr √(√ρ σ √ρ)`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.n() != sigma.n() {
        return Err(Error::DimensionMismatch {
            left: rho.n(),
            right: sigma.n(),
        });
    }
    fidelity_of_matrices(rho.matrix(), sigma.matrix(), ClampPolicy::Strict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMethod {
    /// Both process matrices normalized to unit trace and compared as states.
    Process,
    /// Both channels applied to `|00⟩⟨00|`, reduced to qubit 1 and compared.
    OutputState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub value: f64,
    pub method: FidelityMethod,
    pub input_state: String,
    pub channels: [String; 2],
}

/// Fidelity of two process matrices viewed as unit-trace states.
pub fn process_fidelity(chi_a: &ProcessMatrix, chi_b: &ProcessMatrix) -> Result<f64> {
    if chi_a.size() != chi_b.size() {
        return Err(Error::DimensionMismatch {
            left: chi_a.n_principal(),
            right: chi_b.n_principal(),
        });
    }
    fidelity_of_matrices(
        chi_a.hermitian_part().matrix(),
        chi_b.hermitian_part().matrix(),
        ClampPolicy::Lenient,
    )
}

/// Reduced state of qubit 1 out of a two-qubit operator.
fn keep_first_qubit(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(2, 2, |a, b| m[(2 * a, 2 * b)] + m[(2 * a + 1, 2 * b + 1)])
}

fn check_two_qubit(chi: &ProcessMatrix) -> Result<()> {
    if chi.n_principal() != 2 {
        return Err(Error::DimensionMismatch {
            left: 2,
            right: chi.n_principal(),
        });
    }
    Ok(())
}

/// Applies `chi_hat` and the closed-form damping `χ` to `|0⟩⟨0| ⊗ |0⟩⟨0|`,
/// keeps qubit 1 and compares the outputs.
pub fn channel_fidelity_vs_theory(chi_hat: &ProcessMatrix, gamma: f64) -> Result<FidelityResult> {
    check_two_qubit(chi_hat)?;
    let theory = theoretical_chi_ad(gamma)?;
    let input = DensityMatrix::basis_state(2, 0)?;
    let out_hat = keep_first_qubit(&chi_hat.apply(input.matrix())?);
    let out_theory = keep_first_qubit(&theory.apply(input.matrix())?);
    Ok(FidelityResult {
        value: fidelity_of_matrices(&out_theory, &out_hat, ClampPolicy::Lenient)?,
        method: FidelityMethod::OutputState,
        input_state: "|0><0| (x) |0><0|, qubit 1 kept".into(),
        channels: [format!("amplitude_damping(gamma={gamma})"), "reconstructed".into()],
    })
}

/// Process fidelity between `chi_hat` and the closed-form damping `χ`.
pub fn process_fidelity_vs_theory(chi_hat: &ProcessMatrix, gamma: f64) -> Result<FidelityResult> {
    check_two_qubit(chi_hat)?;
    let theory = theoretical_chi_ad(gamma)?;
    Ok(FidelityResult {
        value: process_fidelity(&theory, chi_hat)?,
        method: FidelityMethod::Process,
        input_state: "process matrix".into(),
        channels: [format!("amplitude_damping(gamma={gamma})"), "reconstructed".into()],
    })
}

/// Both fidelity figures for one reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub process: FidelityResult,
    pub output_state: FidelityResult,
}

pub fn fidelity_summary(chi_hat: &ProcessMatrix, gamma: f64) -> Result<FidelitySummary> {
    Ok(FidelitySummary {
        process: process_fidelity_vs_theory(chi_hat, gamma)?,
        output_state: channel_fidelity_vs_theory(chi_hat, gamma)?,
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that independent depolarizing noise on `n` qubits has weight `j`.
pub fn weight_probability(n: u32, p: f64, j: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", p, "must lie in [0, 1]"));
    }
    if j > n {
        return Err(Error::invalid("j", j, format!("must lie in 0..={n}")));
    }
    Ok(binomial(n, j) * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32))
}

/// `p_j = C(4, j) p^j (1 − p)^{4−j}`.
pub fn binomial_weight_probability(p: f64, j: u32) -> Result<f64> {
    weight_probability(4, p, j)
}

/// Effect of an ancilla-only Pauli error on the filtered protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Nonzero filter prefix: discarded.
    Detected,
    /// All-zero syndrome: equals a stabilizer up to phase.
    StabilizerEquivalent,
    /// Passes the filter with a nonzero syndrome, posing as a located error.
    Impostor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedError {
    /// Embedded on the full register.
    pub operator: PauliOperator,
    pub weight: usize,
    pub syndrome: Syndrome,
    pub class: ErrorClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightCounts {
    pub weight: usize,
    pub total: u64,
    pub detected: u64,
    pub stabilizer_equivalent: u64,
    pub impostor: u64,
}

/// Which errors count as failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Impostors plus non-identity stabilizer-equivalent errors.
    IncludingStabilizers,
    /// Impostors only.
    StateCorrupting,
}

/// The two printed forms of the failure polynomial, as coefficients of `p_1 .. p_4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrintedFailureFormula {
    /// `2p₂/3 + 2p₃/9 + 21p₄/81`.
    BodyText,
    /// `p₂/3 + 2p₃/9 + 21p₄/81`.
    FigureCaption,
}

impl PrintedFailureFormula {
    pub fn coefficients(self) -> [Ratio<u64>; 4] {
        let second = match self {
            Self::BodyText => Ratio::new(2, 3),
            Self::FigureCaption => Ratio::new(1, 3),
        };
        [Ratio::from_integer(0), second, Ratio::new(2, 9), Ratio::new(21, 81)]
    }
}

/// Exhaustive classification of every Pauli supported on the ancilla.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureOracle {
    pub n_ancilla: usize,
    pub errors: Vec<ClassifiedError>,
    /// Indexed by weight `0..=n_ancilla`.
    pub by_weight: Vec<WeightCounts>,
}

pub fn failure_oracle(code: &StabilizerCode) -> Result<FailureOracle> {
    let sites = code.ancilla_sites().to_vec();
    let n_a = sites.len();
    if n_a == 0 || n_a > 8 {
        return Err(Error::Unsupported(format!("{} has {n_a} ancilla qubits", code.label())));
    }
    let mut by_weight: Vec<WeightCounts> = (0..=n_a)
        .map(|weight| WeightCounts {
            weight,
            total: 0,
            detected: 0,
            stabilizer_equivalent: 0,
            impostor: 0,
        })
        .collect();
    let mut errors = Vec::with_capacity(1 << (2 * n_a));
    for local in PauliOperator::all(n_a) {
        let operator = local.embed(code.n(), &sites)?;
        let syndrome = code.syndrome_of_error(&operator)?;
        let class = if !syndrome.prefix_is_clear(code.filter_bits()) {
            ErrorClass::Detected
        } else if syndrome.is_trivial() {
            ErrorClass::StabilizerEquivalent
        } else {
            ErrorClass::Impostor
        };
        let weight = local.weight();
        let row = &mut by_weight[weight];
        row.total += 1;
        match class {
            ErrorClass::Detected => row.detected += 1,
            ErrorClass::StabilizerEquivalent => row.stabilizer_equivalent += 1,
            ErrorClass::Impostor => row.impostor += 1,
        }
        errors.push(ClassifiedError {
            operator,
            weight,
            syndrome,
            class,
        });
    }
    Ok(FailureOracle {
        n_ancilla: n_a,
        errors,
        by_weight,
    })
}

impl FailureOracle {
    /// Fraction of weight-`w` errors that count as failures; zero at weight 0.
    pub fn coefficient(&self, w: usize, accounting: Accounting) -> Ratio<u64> {
        let Some(row) = self.by_weight.get(w) else {
            return Ratio::from_integer(0);
        };
        if w == 0 || row.total == 0 {
            return Ratio::from_integer(0);
        }
        let failing = match accounting {
            Accounting::IncludingStabilizers => row.impostor + row.stabilizer_equivalent,
            Accounting::StateCorrupting => row.impostor,
        };
        Ratio::new(failing, row.total)
    }

    /// `Σ_w c_w p_w`.
    pub fn polynomial(&self, p: f64, accounting: Accounting) -> Result<f64> {
        (1..=self.n_ancilla).try_fold(0.0, |acc, w| {
            let c = self.coefficient(w, accounting);
            Ok(acc + *c.numer() as f64 / *c.denom() as f64 * weight_probability(self.n_ancilla as u32, p, w as u32)?)
        })
    }

    /// Whether the counted coefficients equal a printed formula.
    pub fn matches(&self, formula: PrintedFailureFormula, accounting: Accounting) -> bool {
        self.n_ancilla == 4
            && formula
                .coefficients()
                .iter()
                .enumerate()
                .all(|(k, c)| self.coefficient(k + 1, accounting) == *c)
    }
}

/// One point of a failure-rate sweep with a noiseless principal system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRateReport {
    pub p: f64,
    /// Frequency of the all-zero syndrome.
    pub p_identity_syndrome: f64,
    /// Frequency of the identity ancilla error; `(1 − p)^{n_a}` when exact.
    pub p_identity_operator: f64,
    pub delta_p1: f64,
    /// Frequency of accepted non-identity syndromes.
    pub p_00: f64,
    pub p_f: f64,
    pub analytic_p_f: f64,
    pub analytic_p_f_state_corrupting: f64,
    /// `None` for exact probabilities.
    pub shots: Option<u64>,
}

impl FailureRateReport {
    /// 4σ binomial half-width of `p_f` around the analytic value.
    pub fn tolerance(&self, sigmas: f64) -> f64 {
        match self.shots {
            Some(n) => sigmas * (self.analytic_p_f * (1.0 - self.analytic_p_f) / n as f64).sqrt(),
            None => 1e-12,
        }
    }
}

/// Per-point seed derived from the master seed and the point index.
pub fn point_seed(seed: u64, index: u64) -> u64 {
    shot_stream(seed, u64::MAX - index).next_u64()
}

fn depolarized_probe(code: &StabilizerCode, p: f64) -> Result<DensityMatrix> {
    let dp = QuantumChannel::depolarizing_on(p, code.ancilla_sites(), code.n())?;
    prepare_probe(code)?.apply_channel(&dp)
}

/// Per-shot Monte-Carlo tallies of ancilla Pauli trajectories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryCounts {
    pub shots: u64,
    /// Count per syndrome index.
    pub syndromes: Vec<u64>,
    /// Shots whose drawn ancilla error is the identity.
    pub identity_errors: u64,
}

/// Draws an independent depolarizing Pauli on every ancilla qubit per shot
/// and records the syndrome it produces on the codeword.
pub fn sample_trajectories(code: &StabilizerCode, p: f64, shots: u64, seed: u64) -> Result<TrajectoryCounts> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", p, "must lie in [0, 1]"));
    }
    let probe = prepare_probe(code)?;
    for g in code.generators() {
        let e = probe.expectation(&g.to_matrix()?)?;
        if (e - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("code", code.label(), format!("probe is not stabilized by {g}")));
        }
    }
    let gens: Vec<(u64, u64)> = code.generators().iter().map(|g| (g.x_mask(), g.z_mask())).collect();
    let bits: Vec<u64> = code.ancilla_sites().iter().map(|&s| 1u64 << (s - 1)).collect();
    let cells = 1usize << code.r();
    let stride = 2 * bits.len() as u128;
    let chunks = shots.div_ceil(CHUNK_SHOTS);
    let (syndromes, identity_errors) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut local = vec![0u64; cells];
            let mut identity = 0u64;
            let mut rng = shot_stream(seed, TRAJECTORY_STREAM);
            for shot in c * CHUNK_SHOTS..((c + 1) * CHUNK_SHOTS).min(shots) {
                rng.set_word_pos(shot as u128 * stride);
                let (mut x, mut z) = (0u64, 0u64);
                for &b in &bits {
                    let u: f64 = rng.gen();
                    if u < p {
                        match ((3.0 * u / p) as usize).min(2) {
                            0 => x |= b,
                            1 => {
                                x |= b;
                                z |= b
                            }
                            _ => z |= b,
                        }
                    }
                }
                if x | z == 0 {
                    identity += 1;
                }
                let s = gens
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (j, (gx, gz))| acc | ((((x & gz) ^ (z & gx)).count_ones() as usize & 1) << j));
                local[s] += 1;
            }
            (local, identity)
        })
        .reduce(
            || (vec![0u64; cells], 0),
            |(mut a, ia), (b, ib)| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                (a, ia + ib)
            },
        );
    Ok(TrajectoryCounts {
        shots,
        syndromes,
        identity_errors,
    })
}

const TRAJECTORY_STREAM: u64 = u64::MAX;

/// Failure rates with depolarizing noise on every ancilla qubit.
/// `shots = None` gives exact probabilities from the density matrix;
/// otherwise each point is a Monte-Carlo run of [`sample_trajectories`].
pub fn failure_rate_experiment(
    code: &StabilizerCode,
    p_values: &[f64],
    shots: Option<u64>,
    seed: u64,
) -> Result<Vec<FailureRateReport>> {
    if shots == Some(0) {
        return Err(Error::invalid("shots", 0, "sampling needs at least one shot"));
    }
    let oracle = failure_oracle(code)?;
    let r = code.r();
    let m = code.filter_bits();
    let accepted_nonzero = |s: u64| s != 0 && Syndrome::from_index(s, r).prefix_is_clear(m);
    p_values
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("p", p, "must lie in [0, 1]"));
            }
            let (p_identity_syndrome, p_identity_operator, p_00, delta_p1) = match shots {
                None => {
                    let dist = exact_distribution(&depolarized_probe(code, p)?, PreprocessingOp::Identity, code)?;
                    let p1 = dist.weight(None, 0);
                    let big_p1 = (1.0 - p).powi(oracle.n_ancilla as i32);
                    let p00: f64 = (1..1u64 << r).filter(|&s| accepted_nonzero(s)).map(|s| dist.weight(None, s)).sum();
                    (p1, big_p1, p00, p1 - big_p1)
                }
                Some(n) => {
                    let t = sample_trajectories(code, p, n, point_seed(seed, k as u64))?;
                    let p00: u64 = (1..1u64 << r).filter(|&s| accepted_nonzero(s)).map(|s| t.syndromes[s as usize]).sum();
                    let nf = n as f64;
                    let surplus = t.syndromes[0] - t.identity_errors;
                    (
                        t.syndromes[0] as f64 / nf,
                        t.identity_errors as f64 / nf,
                        p00 as f64 / nf,
                        surplus as f64 / nf,
                    )
                }
            };
            Ok(FailureRateReport {
                p,
                p_identity_syndrome,
                p_identity_operator,
                delta_p1,
                p_00,
                p_f: p_00 + delta_p1,
                analytic_p_f: oracle.polynomial(p, Accounting::IncludingStabilizers)?,
                analytic_p_f_state_corrupting: oracle.polynomial(p, Accounting::StateCorrupting)?,
                shots,
            })
        })
        .collect()
}

pub const FAILURE_CSV_HEADER: &str =
    "p,p_identity_syndrome,P_identity,delta_p1,p_00,p_F,analytic_p_F,analytic_p_F_state_corrupting";

impl FailureRateReport {
    pub fn csv_row(&self) -> String {
        [
            self.p,
            self.p_identity_syndrome,
            self.p_identity_operator,
            self.delta_p1,
            self.p_00,
            self.p_f,
            self.analytic_p_f,
            self.analytic_p_f_state_corrupting,
        ]
        .iter()
        .map(|v| fmt_real(*v))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("points", points.len(), "need at least two"));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| *x <= 0.0 || *y <= 0.0) {
        return Err(Error::invalid("points", format!("({x}, {y})"), "coordinates must be positive"));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Elementwise `chi_a − chi_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiDistance {
    pub labels: Vec<String>,
    pub diff: DMatrix<Complex64>,
    pub max_abs: f64,
}

pub fn chi_distance_report(chi_a: &ProcessMatrix, chi_b: &ProcessMatrix) -> Result<ChiDistance> {
    if chi_a.size() != chi_b.size() {
        return Err(Error::DimensionMismatch {
            left: chi_a.n_principal(),
            right: chi_b.n_principal(),
        });
    }
    let diff = chi_a.matrix() - chi_b.matrix();
    Ok(ChiDistance {
        labels: chi_a.labels(),
        max_abs: max_abs(&diff),
        diff,
    })
}

impl ChiDistance {
    /// Long format: one row per element.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,F_m,F_n,re,im,abs\n");
        for (m, lm) in self.labels.iter().enumerate() {
            for (n, ln) in self.labels.iter().enumerate() {
                let v = self.diff[(m, n)];
                let _ = writeln!(out, "{m},{n},{lm},{ln},{},{},{}", fmt_real(v.re), fmt_real(v.im), fmt_real(v.norm()));
            }
        }
        out
    }
}

/// Square table of one part of `χ`, labelled by located operator.
pub fn chi_csv(chi: &ProcessMatrix, part: fn(Complex64) -> f64) -> String {
    let labels = chi.labels();
    let mut out = format!("label,{}\n", labels.join(","));
    for (m, lm) in labels.iter().enumerate() {
        let row: Vec<String> = (0..labels.len()).map(|n| fmt_real(part(chi.get(m, n)))).collect();
        let _ = writeln!(out, "{lm},{}", row.join(","));
    }
    out
}
