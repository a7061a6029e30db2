//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p dcqd-cli --release --test acceptance -- --nocapture`

use std::time::{Duration, Instant};

use num_complex::Complex64;

use dcqd_cli::commands::cmd_table;
use dcqd_cli::config::{ExperimentConfig, ScenarioName};
use dcqd_core::analysis::{
    failure_oracle, failure_rate_experiment, fidelity_summary, log_log_slope, Accounting, FidelitySummary,
    PrintedFailureFormula,
};
use dcqd_core::protocol::{exact_distribution, prepare_probe, SettingSampler};
use dcqd_core::{
    characterize, theoretical_chi_ad, Backend, CharacterizationConfig, PreprocessingOp, Scenario, StabilizerCode,
};

const TABLE_ROWS: [(&str, &str); 16] = [
    ("II", "000000"),
    ("XI", "000100"),
    ("YI", "001100"),
    ("ZI", "001000"),
    ("IX", "000001"),
    ("IY", "000011"),
    ("IZ", "000010"),
    ("XX", "000101"),
    ("XY", "000111"),
    ("XZ", "000110"),
    ("YX", "001101"),
    ("YY", "001111"),
    ("YZ", "001110"),
    ("ZX", "001001"),
    ("ZY", "001011"),
    ("ZZ", "001010"),
];

const CODEWORD_KETS: [&str; 8] = [
    "000000", "001111", "010101", "011010", "100011", "101100", "110110", "111001",
];

const GAMMA: f64 = 0.4;
const P: f64 = 0.1;
const SHOTS: u64 = 1_000_000;
const SEED: u64 = 2024;

struct Report {
    lines: Vec<(u8, bool, String)>,
}

impl Report {
    fn record(&mut self, id: u8, pass: bool, detail: String) {
        println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, detail));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn criterion_1() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        scenario: ScenarioName::Table,
        output_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let (report, elapsed) = timed(|| cmd_table(&cfg));
    let rows = match report {
        Ok(r) => r.rows,
        Err(e) => return (false, e.to_string()),
    };
    let got: Vec<(String, String)> = rows.iter().map(|r| (r.principal.to_string(), r.syndrome.to_string())).collect();
    let want: Vec<(String, String)> = TABLE_ROWS.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let mismatched = got.iter().zip(&want).filter(|(g, w)| g != w).count() + got.len().abs_diff(want.len());
    (
        mismatched == 0 && elapsed < Duration::from_secs(1),
        format!("{mismatched} mismatched rows of 16, {elapsed:.2?}"),
    )
}

fn criterion_2() -> (bool, String) {
    let (psi, elapsed) = timed(|| StabilizerCode::s1().codeword_vector().unwrap());
    let amp = Complex64::new(8f64.sqrt().recip(), 0.0);
    let mut expected = vec![Complex64::new(0.0, 0.0); 64];
    for k in CODEWORD_KETS {
        expected[usize::from_str_radix(k, 2).unwrap()] = amp;
    }
    let dev = psi.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    (
        dev < 1e-10 && elapsed < Duration::from_secs(1),
        format!("max amplitude deviation {dev:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_3() -> (bool, String) {
    let (worst, elapsed) = timed(|| {
        [0.1, 0.4, 0.9]
            .iter()
            .map(|&gamma| {
                let chi = characterize(&CharacterizationConfig::new(Scenario::S1Clean, gamma, 0.0))
                    .unwrap()
                    .chi;
                chi.max_abs_diff(&theoretical_chi_ad(gamma).unwrap())
            })
            .fold(0.0, f64::max)
    });
    (
        worst < 1e-9 && elapsed < Duration::from_secs(10),
        format!("max |chi - chi_theory| {worst:.2e}, {elapsed:.2?}"),
    )
}

fn fidelities(threads: usize) -> (FidelitySummary, FidelitySummary) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let run = |scenario| {
            let cfg = CharacterizationConfig::new(scenario, GAMMA, P)
                .with_backend(Backend::Sampling)
                .with_shots(SHOTS)
                .with_seed(SEED);
            fidelity_summary(&characterize(&cfg).unwrap().chi, GAMMA).unwrap()
        };
        (run(Scenario::S1Noisy), run(Scenario::S0Noisy))
    })
}

fn criterion_4(s1: &FidelitySummary, s0: &FidelitySummary) -> (bool, String) {
    let (f1, f0) = (s1.process.value, s0.process.value);
    let pass = (f1 - 0.9884).abs() <= 0.01 && (f0 - 0.9165).abs() <= 0.015 && f1 - f0 >= 0.05;
    (
        pass,
        format!(
            "process fidelity S1 {f1:.5} (0.9884 +- 0.01), S0 {f0:.5} (0.9165 +- 0.015), gap {:.4}; \
             output-state fidelity S1 {:.5}, S0 {:.5} (informational)",
            f1 - f0,
            s1.output_state.value,
            s0.output_state.value
        ),
    )
}

fn criterion_5() -> (bool, String) {
    let code = StabilizerCode::s1();
    let reports = failure_rate_experiment(&code, &[0.02, 0.05, 0.1, 0.2, 0.3], Some(SHOTS), SEED).unwrap();
    let worst = reports
        .iter()
        .map(|r| (r.p_f - r.analytic_p_f).abs() / r.tolerance(1.0))
        .fold(0.0, f64::max);
    let oracle = failure_oracle(&code).unwrap();
    let c2 = oracle.coefficient(2, Accounting::IncludingStabilizers);
    let c3 = oracle.coefficient(3, Accounting::IncludingStabilizers);
    let caption = oracle.matches(PrintedFailureFormula::FigureCaption, Accounting::IncludingStabilizers);
    let body = oracle.matches(PrintedFailureFormula::BodyText, Accounting::IncludingStabilizers);
    let pass = worst <= 4.0 && c3 == num_rational::Ratio::new(2, 9);
    (
        pass,
        format!(
            "worst |p_F - P_F| = {worst:.2} sigma; weight-2 coefficient {c2}, weight-3 coefficient {c3}; \
             matches caption formula: {caption}, body-text formula: {body}"
        ),
    )
}

fn criterion_6() -> (bool, String) {
    let code = StabilizerCode::s1();
    let probe = prepare_probe(&code).unwrap();
    let mut accepted = 0u64;
    let errors = code.ancilla_weight_one_errors();
    for (k, e) in errors.iter().enumerate() {
        let dist = exact_distribution(&probe.conjugate_by_pauli(e).unwrap(), PreprocessingOp::Identity, &code).unwrap();
        let h = SettingSampler::new(&dist, code.filter_bits()).histogram(100_000, SEED + k as u64);
        accepted += h.accepted_shots();
    }
    (
        accepted == 0,
        format!("{accepted} of 100000 shots accepted, for each of {} weight-one errors", errors.len()),
    )
}

fn criterion_7() -> (bool, String) {
    let grid = [0.01, 0.02, 0.05, 0.1];
    let slope = |code: &StabilizerCode| {
        let reports = failure_rate_experiment(code, &grid, Some(SHOTS), SEED).unwrap();
        let pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.p, r.p_f)).collect();
        log_log_slope(&pts)
    };
    match (slope(&StabilizerCode::s1()), slope(&StabilizerCode::s0())) {
        (Ok(s1), Ok(s0)) => (
            (s1 - 2.0).abs() <= 0.2 && (s0 - 1.0).abs() <= 0.2,
            format!("slope S1 {s1:.3} (2.0 +- 0.2), S0 {s0:.3} (1.0 +- 0.2)"),
        ),
        (a, b) => (false, format!("slope fit failed: {a:?} {b:?}")),
    }
}

fn criterion_8(one: &(FidelitySummary, FidelitySummary), again: &(FidelitySummary, FidelitySummary)) -> (bool, String) {
    let bits = |f: &(FidelitySummary, FidelitySummary)| {
        [f.0.process.value, f.0.output_state.value, f.1.process.value, f.1.output_state.value].map(f64::to_bits)
    };
    (
        bits(one) == bits(again),
        format!(
            "seed {SEED}: 1 thread {:.17}/{:.17}, 4 threads {:.17}/{:.17}",
            one.0.process.value, one.1.process.value, again.0.process.value, again.1.process.value
        ),
    )
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    let (ok, d) = criterion_1();
    report.record(1, ok, d);
    let (ok, d) = criterion_2();
    report.record(2, ok, d);
    let (ok, d) = criterion_3();
    report.record(3, ok, d);
    let single = fidelities(1);
    let (ok, d) = criterion_4(&single.0, &single.1);
    report.record(4, ok, d);
    let (ok, d) = criterion_5();
    report.record(5, ok, d);
    let (ok, d) = criterion_6();
    report.record(6, ok, d);
    let (ok, d) = criterion_7();
    report.record(7, ok, d);
    let multi = fidelities(4);
    let (ok, d) = criterion_8(&single, &multi);
    report.record(8, ok, d);
    let failed: Vec<u8> = report.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
