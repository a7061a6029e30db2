//! Subcommand implementations.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use dcqd_core::analysis::{
    chi_csv, chi_distance_report, failure_oracle, failure_rate_experiment, fidelity_summary, Accounting, ErrorClass,
    FailureRateReport, FidelitySummary, PrintedFailureFormula, FAILURE_CSV_HEADER,
};
use dcqd_core::codes::LocatedRow;
use dcqd_core::protocol::{prepare_probe, exact_distribution, SettingData, SyndromeStatistics};
use dcqd_core::{characterize, theoretical_chi_ad, CharacterizationConfig, PreprocessingOp, StabilizerCode};

use crate::config::{BackendName, ConfigError, ExperimentConfig, ScenarioName};
use crate::output::{strip_comments, OutputDir};
use crate::CliError;

pub const GOLDEN_TABLE: &str = include_str!("../golden/table1.csv");

/// `index,operator,syndrome` rows of the located-error table.
pub fn table_csv(rows: &[LocatedRow]) -> String {
    let mut out = String::from("index,operator,syndrome\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.index, r.principal, r.syndrome);
    }
    out
}

/// Lines of `csv` that differ from the golden table.
pub fn golden_differences(csv: &str) -> Vec<String> {
    let got = strip_comments(csv);
    let want = strip_comments(GOLDEN_TABLE);
    let (g, w): (Vec<&str>, Vec<&str>) = (got.lines().collect(), want.lines().collect());
    let mut diffs: Vec<String> = g
        .iter()
        .zip(&w)
        .filter(|(a, b)| a != b)
        .map(|(a, b)| format!("got {a:?}, expected {b:?}"))
        .collect();
    if g.len() != w.len() {
        diffs.push(format!("got {} lines, expected {}", g.len(), w.len()));
    }
    diffs
}

pub struct TableReport {
    pub rows: Vec<LocatedRow>,
    pub differences: Vec<String>,
}

/// Located-error table of `code`, compared with the golden copy.
pub fn table_report(code: &StabilizerCode) -> Result<TableReport, CliError> {
    let rows = code.located_error_table()?;
    let differences = golden_differences(&table_csv(&rows));
    Ok(TableReport { rows, differences })
}

pub fn cmd_table(cfg: &ExperimentConfig) -> Result<TableReport, CliError> {
    let report = table_report(&StabilizerCode::s1())?;
    for r in &report.rows {
        println!("{:>2}  {}  {}", r.index, r.principal, r.syndrome);
    }
    let out = OutputDir::create(cfg)?;
    let file = out.write_csv("table1.csv", &table_csv(&report.rows))?;
    println!("wrote {}", file.display());
    if !report.differences.is_empty() {
        return Err(CliError::GoldenMismatch(report.differences.join("; ")));
    }
    println!("golden table: match");
    Ok(report)
}

fn characterization_config(cfg: &ExperimentConfig) -> Result<CharacterizationConfig, ConfigError> {
    let scenario = cfg.scenario.characterization().ok_or_else(|| ConfigError::Invalid {
        field: "scenario",
        reason: format!("`{}` is not a characterization scenario", cfg.scenario),
    })?;
    Ok(CharacterizationConfig::new(scenario, cfg.gamma, cfg.p)
        .with_backend(cfg.backend.into())
        .with_shots(cfg.shots_per_setting)
        .with_seed(cfg.seed)
        .with_filter(cfg.filter))
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizeReport {
    pub scenario: ScenarioName,
    pub gamma: f64,
    pub p: f64,
    /// Headline value: process fidelity against theory.
    pub value: f64,
    pub fidelity: FidelitySummary,
    pub chi_max_abs_diff: f64,
    pub trace: f64,
}

#[derive(Serialize)]
struct SettingDocument {
    setting: PreprocessingOp,
    total: f64,
    accepted: f64,
    entries: Vec<serde_json::Value>,
}

fn setting_document(data: &SettingData, code: &StabilizerCode) -> SettingDocument {
    let (total, entries) = match data {
        SettingData::Sampled(h) => (
            h.total_shots() as f64,
            h.entries()
                .into_iter()
                .map(|e| json!({ "outcome": e.outcome, "syndrome": e.syndrome, "count": e.count }))
                .collect(),
        ),
        SettingData::Exact(d) => (
            d.total(),
            d.entries()
                .into_iter()
                .map(|(outcome, s, v)| json!({ "outcome": outcome, "syndrome": s.to_string(), "probability": v }))
                .collect(),
        ),
    };
    SettingDocument {
        setting: data.setting(),
        total,
        accepted: data.accepted_weight(code),
        entries,
    }
}

pub fn cmd_characterize(cfg: &ExperimentConfig) -> Result<CharacterizeReport, CliError> {
    let config = characterization_config(cfg)?;
    let result = characterize(&config)?;
    let theory = theoretical_chi_ad(cfg.gamma)?;
    let fidelity = fidelity_summary(&result.chi, cfg.gamma)?;
    let distance = chi_distance_report(&result.chi, &theory)?;
    let report = CharacterizeReport {
        scenario: cfg.scenario,
        gamma: cfg.gamma,
        p: cfg.p,
        value: fidelity.process.value,
        fidelity,
        chi_max_abs_diff: distance.max_abs,
        trace: result.chi.trace(),
    };
    let out = OutputDir::create(cfg)?;
    out.write_csv("chi_real.csv", &chi_csv(&result.chi, |v: Complex64| v.re))?;
    out.write_csv("chi_imag.csv", &chi_csv(&result.chi, |v: Complex64| v.im))?;
    out.write_csv("chi_diff_vs_theory.csv", &distance.to_csv())?;
    out.write_json("fidelity.json", &report)?;
    let settings: Vec<SettingDocument> = result.data.values().map(|d| setting_document(d, &result.code)).collect();
    out.write_json(
        "histograms.json",
        &json!({ "backend": cfg.backend, "code": result.code.label(), "settings": settings }),
    )?;
    println!(
        "scenario={} backend={:?} shots_per_setting={} process_fidelity={:.6} output_state_fidelity={:.6} chi_max_abs_diff={:.3e}",
        cfg.scenario,
        cfg.backend,
        cfg.shots_per_setting,
        report.fidelity.process.value,
        report.fidelity.output_state.value,
        report.chi_max_abs_diff
    );
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub filtered: Vec<FailureRateReport>,
    pub unfiltered: Vec<FailureRateReport>,
}

fn sweep_csv(reports: &[FailureRateReport]) -> String {
    let mut out = format!("{FAILURE_CSV_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn cmd_failure_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, CliError> {
    let shots = match cfg.backend {
        BackendName::Exact => None,
        BackendName::Sampling => Some(cfg.shots_per_setting),
    };
    let s1 = StabilizerCode::s1();
    let s0 = StabilizerCode::s0();
    let report = SweepReport {
        filtered: failure_rate_experiment(&s1, &cfg.p_grid, shots, cfg.seed)?,
        unfiltered: failure_rate_experiment(&s0, &cfg.p_grid, shots, cfg.seed)?,
    };
    let oracle = failure_oracle(&s1)?;
    let coefficients: Vec<_> = (1..=oracle.n_ancilla)
        .map(|w| {
            let row = oracle.by_weight[w];
            json!({
                "weight": w,
                "total": row.total,
                "detected": row.detected,
                "stabilizer_equivalent": row.stabilizer_equivalent,
                "impostor": row.impostor,
                "coefficient": oracle.coefficient(w, Accounting::IncludingStabilizers).to_string(),
                "coefficient_state_corrupting": oracle.coefficient(w, Accounting::StateCorrupting).to_string(),
            })
        })
        .collect();
    let stabilizers: Vec<String> = oracle
        .errors
        .iter()
        .filter(|e| e.class == ErrorClass::StabilizerEquivalent && e.weight > 0)
        .map(|e| e.operator.to_string())
        .collect();
    let out = OutputDir::create(cfg)?;
    out.write_csv("failure_sweep.csv", &sweep_csv(&report.filtered))?;
    out.write_csv("failure_sweep_unfiltered.csv", &sweep_csv(&report.unfiltered))?;
    out.write_json(
        "oracle.json",
        &json!({
            "by_weight": coefficients,
            "stabilizer_equivalent": stabilizers,
            "matches_body_text_formula": oracle.matches(PrintedFailureFormula::BodyText, Accounting::IncludingStabilizers),
            "matches_caption_formula": oracle.matches(PrintedFailureFormula::FigureCaption, Accounting::IncludingStabilizers),
        }),
    )?;
    println!("{:>6}  {:>12}  {:>12}  {:>12}", "p", "p_F", "analytic", "unfiltered");
    for (f, u) in report.filtered.iter().zip(&report.unfiltered) {
        println!("{:>6}  {:>12.6e}  {:>12.6e}  {:>12.6e}", f.p, f.p_f, f.analytic_p_f, u.p_f);
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String), CliError>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Fast invariant suite.
pub fn selftest_checks(code: &StabilizerCode) -> Vec<Check> {
    vec![
        check("located table matches golden copy", || {
            let r = table_report(code)?;
            Ok((r.differences.is_empty(), r.differences.join("; ")))
        }),
        check("codeword is an 8-term equal superposition", || {
            let psi = code.codeword_vector()?;
            let amp = 8f64.sqrt().recip();
            let support: Vec<_> = psi.iter().filter(|a| a.norm() > 1e-12).collect();
            let ok = support.len() == 8 && support.iter().all(|a| (*a - Complex64::new(amp, 0.0)).norm() < 1e-10);
            Ok((ok, format!("{} nonzero amplitudes", support.len())))
        }),
        check("exact reconstruction equals closed form", || {
            let mut worst = 0.0f64;
            for gamma in [0.1, 0.4, 0.9] {
                let config = CharacterizationConfig::new(dcqd_core::Scenario::S1Clean, gamma, 0.0);
                let chi = characterize(&config)?.chi;
                worst = worst.max(chi.max_abs_diff(&theoretical_chi_ad(gamma)?));
            }
            Ok((worst < 1e-9, format!("max deviation {worst:.3e}")))
        }),
        check("failure oracle counts", || {
            let o = failure_oracle(code)?;
            let pass: Vec<(u64, u64)> = (1..=4)
                .map(|w| (o.by_weight[w].impostor + o.by_weight[w].stabilizer_equivalent, o.by_weight[w].total))
                .collect();
            Ok((pass == [(0, 12), (18, 54), (24, 108), (21, 81)], format!("{pass:?}")))
        }),
        check("weight-one ancilla errors never pass the filter", || {
            let probe = prepare_probe(code)?;
            let mut leaked = 0.0f64;
            for e in code.ancilla_weight_one_errors() {
                let d = exact_distribution(&probe.conjugate_by_pauli(&e)?, PreprocessingOp::Identity, code)?;
                leaked = leaked.max(d.accepted_weight(code));
            }
            Ok((leaked < 1e-12, format!("max accepted probability {leaked:.3e}")))
        }),
    ]
}

pub fn cmd_selftest() -> Result<Vec<Check>, CliError> {
    let checks = selftest_checks(&StabilizerCode::s1());
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::SelfTest(failed));
    }
    Ok(checks)
}
