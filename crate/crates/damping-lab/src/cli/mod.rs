//! Scenario orchestration behind the `damping-lab` binary.
//!
//! A scenario names one target pipeline and its parameters; `run` writes the
//! target's CSV curves plus a `report.json` whose checks decide the exit
//! status. A suite runs many scenarios, each in its own subdirectory, and adds
//! a `summary.json`.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{Scenario, Suite, Target};
pub use run::{run_scenario, CheckRow, RunReport, REPORT_FILE};

use crate::damping::catalog;
use crate::error::Result;
use output::Artifacts;

pub const SUMMARY_FILE: &str = "summary.json";

/// One row of a suite summary.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub target: String,
    pub passed: bool,
    /// Module error that stopped the scenario, if any.
    pub error: Option<String>,
    pub failed_checks: Vec<CheckRow>,
    pub recorded: Vec<CheckRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: Option<String>,
    pub passed: bool,
    pub scenarios: Vec<SummaryRow>,
}

impl SuiteSummary {
    /// Fixed-width table for the terminal.
    pub fn table(&self) -> String {
        let w = self.scenarios.iter().map(|r| r.scenario.len()).max().unwrap_or(8).max(8);
        let mut s = format!("{:<w$}  {:<17}  {:<6}  detail\n", "scenario", "target", "status");
        for r in &self.scenarios {
            let status = if r.passed { "pass" } else { "FAIL" };
            let detail = if let Some(e) = &r.error {
                e.clone()
            } else if !r.failed_checks.is_empty() {
                r.failed_checks.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
            } else {
                format!("{} recorded", r.recorded.len())
            };
            s.push_str(&format!("{:<w$}  {:<17}  {:<6}  {}\n", r.scenario, r.target, status, detail));
        }
        s.push_str(&format!(
            "{} of {} scenarios passed\n",
            self.scenarios.iter().filter(|r| r.passed).count(),
            self.scenarios.len()
        ));
        s
    }
}

/// Output directory of a standalone run: the override, the scenario's own
/// setting, or `out/<name>`.
pub fn output_dir(sc: &Scenario, overridden: Option<&Path>) -> PathBuf {
    overridden
        .map(Path::to_path_buf)
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&sc.name))
}

/// Runs every scenario into `dir/<name>` and writes `dir/summary.json`.
/// Module errors become failure rows rather than aborting the suite.
pub fn run_suite(suite: &Suite, dir: &Path) -> Result<SuiteSummary> {
    suite.check_names()?;
    let one = |sc: &Scenario| -> SummaryRow {
        let target = sc.target.name().to_string();
        match run_scenario(sc, &dir.join(&sc.name)) {
            Ok(rep) => SummaryRow {
                scenario: sc.name.clone(),
                target,
                passed: rep.passed,
                error: None,
                failed_checks: rep.failed_checks().cloned().collect(),
                recorded: rep.checks.iter().filter(|c| !c.asserted).cloned().collect(),
            },
            Err(e) => SummaryRow {
                scenario: sc.name.clone(),
                target,
                passed: false,
                error: Some(e.to_string()),
                failed_checks: Vec::new(),
                recorded: Vec::new(),
            },
        }
    };
    let scenarios: Vec<SummaryRow> =
        if suite.parallel { suite.scenario.par_iter().map(one).collect() } else { suite.scenario.iter().map(one).collect() };
    let summary = SuiteSummary { suite: suite.name.clone(), passed: scenarios.iter().all(|r| r.passed), scenarios };
    Artifacts::create(dir)?.json(SUMMARY_FILE, &summary)?;
    Ok(summary)
}

/// Catalog terms with their configs, as printed by `list-catalog`.
pub fn catalog_listing() -> Value {
    Value::Array(catalog().iter().map(|t| json!({ "label": t.label(), "config": t.to_config() })).collect())
}

/// Column layout of every CSV artifact, keyed by target.
pub fn csv_columns() -> Value {
    let verdict = "verdict, blowup_time, final_time, steps, max_abs_u, data_functional, l2_slope, grad_slope, ut_slope, m_ratio, energy_ratio_sup";
    json!({
        "oracle": { "oracle.csv": "xi, t, phi, dphi, phi_exact, dphi_exact, relative_error" },
        "exponents": {
            "identity.csv": "n, p, first, second, third, max_residual",
            "admissibility.csv": "n, p, theorem, admissible, reason"
        },
        "hypotheses": { "hypotheses.csv": "term, item, holds, witness_t, witness_value, certified" },
        "bfun-properties": { "bfun_properties.csv": "term, property, r_min, r_max, constant, bounded, slack, samples" },
        "zones": { "zones.csv": "term, t, xi, label, m, h" },
        "multiplier-bounds": {
            "bounds.csv": "term, bound, samples, c_prime, sup_ratio, refined_sup_ratio",
            "bound_samples.csv": "term, bound, t, s, xi, lhs, rhs, ratio (only with export_samples; rhs uses the fitted C')"
        },
        "linear-decay": { "decay_<term>_<quantity>.csv": "t, B, norm, bound_shape (B = B(t,s); bound_shape = (1+B)^expected / b(t)^l)" },
        "semilinear": {
            "ledger.csv": "t, B, l2, grad_l2, ut_l2, weighted_E, W, M",
            "verdict.csv": verdict
        },
        "dichotomy-sweep": { "sweep.csv": format!("p, p_fujita, {verdict}") },
        "picard": { "picard.csv": "iterate, x_norm, x0_norm, difference_norm, contraction_factor" },
        "gn": { "gn.csv": "variant, sigma, q, order, lhs, rhs, ratio, holds" },
        "floats": "17 significant digits, scientific notation; empty cell for absent values"
    })
}

/// JSON Schemas of scenario and suite files plus the CSV column layouts.
pub fn schema() -> Value {
    json!({
        "scenario": schemars::schema_for!(Scenario),
        "suite": schemars::schema_for!(Suite),
        "csv": csv_columns(),
    })
}
