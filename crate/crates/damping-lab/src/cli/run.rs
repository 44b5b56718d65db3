//! Target pipelines: each runs one module, writes its artifacts and returns
//! the asserted and recorded checks.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::*;
use super::output::{float, Artifacts};
use crate::analysis::{admissible, exponent_identity_check, gn_ensemble, p_fujita, theta, two_star, GnEnsembleConfig, GnVariant, Theorem};
use crate::bfun::{verify_equivalence, BProfile, EquivalenceGrid, Property};
use crate::damping::{check_hypotheses, TimeGrid, Tolerances};
use crate::error::Result;
use crate::linear::{expected_exponent, s_uniformity_scan, verify_matsumura, LinearOptions, RadialDatum};
use crate::modes::{bound_ensemble, check_bound, constant_damping_multiplier, propagate, BoundGrid, BoundId, PropagateOptions};
use crate::num::{geomspace, linspace};
use crate::phasespace::{classify, separating_time, transition_sequence};
use crate::semilinear::{cross_validate, picard_iterate};
use crate::semilinear::{run_dichotomy, DichotomyOutcome, Verdict};

/// One line of a run's verdict. Recorded rows never fail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub asserted: bool,
    pub passed: bool,
    pub value: Option<f64>,
    /// The condition, or what was recorded.
    pub detail: String,
}

impl CheckRow {
    pub fn assert(name: impl Into<String>, passed: bool, value: Option<f64>, detail: impl Into<String>) -> Self {
        CheckRow { name: name.into(), asserted: true, passed, value, detail: detail.into() }
    }

    pub fn record(name: impl Into<String>, value: f64, detail: impl Into<String>) -> Self {
        CheckRow { name: name.into(), asserted: false, passed: true, value: Some(value), detail: detail.into() }
    }
}

/// The JSON report of one scenario. Contains no timings, so equal inputs
/// give byte-identical files.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub target: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckRow>,
    pub artifacts: Vec<String>,
    pub result: Value,
}

impl RunReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckRow> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const REPORT_FILE: &str = "report.json";

/// Runs a validated scenario, writing artifacts and `report.json` into `dir`.
pub fn run_scenario(sc: &Scenario, dir: &Path) -> Result<RunReport> {
    let mut art = Artifacts::create(dir)?;
    let mut checks = Vec::new();
    let result = match &sc.target {
        Target::Oracle(p) => oracle(sc, p, &mut art, &mut checks)?,
        Target::Hypotheses(p) => hypotheses(sc, p, &mut art, &mut checks)?,
        Target::BfunProperties(p) => bfun_properties(sc, p, &mut art, &mut checks)?,
        Target::Zones(p) => zones(sc, p, &mut art, &mut checks)?,
        Target::MultiplierBounds(p) => multiplier_bounds(sc, p, &mut art, &mut checks)?,
        Target::LinearDecay(p) => linear_decay(sc, p, &mut art, &mut checks)?,
        Target::Semilinear(p) => semilinear(sc, p, &mut art, &mut checks)?,
        Target::DichotomySweep(p) => sweep(sc, p, &mut art, &mut checks)?,
        Target::Picard(p) => picard(sc, p, &mut art, &mut checks)?,
        Target::Gn(p) => gn(sc, p, &mut art, &mut checks)?,
        Target::Exponents(p) => exponents(sc, p, &mut art, &mut checks)?,
    };
    let mut report = RunReport {
        scenario: sc.name.clone(),
        target: sc.target.name().to_string(),
        seed: sc.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
        artifacts: art.written().to_vec(),
        result,
    };
    report.artifacts.push(REPORT_FILE.to_string());
    art.json(REPORT_FILE, &report)?;
    Ok(report)
}

/// The serde name of a unit variant.
fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn slug(label: &str) -> String {
    let s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    s.trim_matches('_').to_string()
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn bool_cell(b: bool) -> String {
    b.to_string()
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn oracle(sc: &Scenario, p: &OracleParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let term = sc.term_or_unit()?;
    let profile = BProfile::new(&term)?;
    let times = linspace(0.0, p.t_max, p.t_count);
    let mut rows = Vec::new();
    let mut worst = Vec::new();
    for &xi in &p.xi {
        let prop = propagate(&profile, 0.0, xi, &times, &PropagateOptions::default())?;
        let mut max_err = 0.0_f64;
        for (i, &t) in times.iter().enumerate() {
            let (f, df) = constant_damping_multiplier(term.mu, xi, t);
            let err = (prop.phi(i) - f).hypot(prop.dphi(i) - df) / f.hypot(df);
            max_err = max_err.max(err);
            rows.push(vec![float(xi), float(t), float(prop.phi(i)), float(prop.dphi(i)), float(f), float(df), float(err)]);
        }
        checks.push(CheckRow::assert(
            format!("xi={xi}/relative_error"),
            max_err <= p.tolerance,
            Some(max_err),
            format!("max relative state error <= {:e}", p.tolerance),
        ));
        worst.push(json!({ "xi": xi, "max_relative_error": max_err }));
    }
    art.csv("oracle.csv", &["xi", "t", "phi", "dphi", "phi_exact", "dphi_exact", "relative_error"], rows)?;
    Ok(json!({ "term": term.label(), "frequencies": worst }))
}

fn exponents(sc: &Scenario, p: &ExponentsParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sc.seed);
    let (mut three_way, mut tail, mut signs) = (0.0_f64, 0.0_f64, true);
    let mut rows = Vec::with_capacity(p.samples);
    for _ in 0..p.samples {
        let n = rng.gen_range(1..=p.n_max);
        let q = 1.0 + rng.gen_range(1e-3..p.p_span);
        let c = exponent_identity_check(n, q)?;
        three_way = three_way.max(c.max_residual());
        tail = tail.max(c.residuals[1]);
        signs &= c.signs_agree();
        rows.push(vec![n.to_string(), float(q), float(c.values[0]), float(c.values[1]), float(c.values[2]), float(c.max_residual())]);
    }
    art.csv("identity.csv", &["n", "p", "first", "second", "third", "max_residual"], rows)?;
    checks.push(CheckRow::assert(
        "identity/three_way",
        three_way <= p.tolerance,
        Some(three_way),
        format!("max residual among the three expressions <= {:e}", p.tolerance),
    ));
    checks.push(CheckRow::assert(
        "identity/second_third",
        tail <= p.tolerance,
        Some(tail),
        format!("max residual between the second and third expressions <= {:e}", p.tolerance),
    ));
    checks.push(CheckRow::assert("identity/signs", signs, None, "all three expressions share their sign"));

    let endpoints_exact = (3..=p.theta_n_max).all(|n| theta(n, 2.0) == 0.0 && theta(n, two_star(n)) == 1.0);
    checks.push(CheckRow::assert("theta/endpoints", endpoints_exact, None, "theta(2) = 0 and theta(2*) = 1 exactly"));

    let mut table = Vec::new();
    for n in 1..=p.table_n_max {
        for &q in &p.table_p {
            for th in [Theorem::Main, Theorem::Low] {
                let a = admissible(n, q, th);
                table.push(vec![n.to_string(), float(q), tag(&th), bool_cell(a.admissible), a.reason.unwrap_or_default()]);
            }
        }
    }
    art.csv("admissibility.csv", &["n", "p", "theorem", "admissible", "reason"], table)?;
    Ok(json!({ "samples": p.samples, "three_way_residual": three_way, "second_third_residual": tail, "signs_agree": signs }))
}

fn hypotheses(sc: &Scenario, p: &HypothesesParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    const ITEMS: [&str; 5] = ["positive", "monotone_tb_unbounded", "weight_integrable", "derivative_bounds", "inverse_not_integrable"];
    let grid = TimeGrid::log_spaced(p.t_max, p.per_decade);
    let tol = Tolerances::default();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for term in sc.terms()? {
        let rep = check_hypotheses(&term, &grid, &tol)?;
        for (item, c) in ITEMS.iter().zip(&rep.hyp_b) {
            rows.push(vec![
                term.label().to_string(),
                item.to_string(),
                bool_cell(c.holds),
                float(c.witness_t),
                float(c.witness_value),
                bool_cell(c.certified),
            ]);
        }
        checks.push(CheckRow::assert(
            format!("{}/hypotheses", term.label()),
            rep.hyp_b_all(),
            None,
            "every item of the damping hypotheses holds",
        ));
        reports.push(rep);
    }
    art.csv("hypotheses.csv", &["term", "item", "holds", "witness_t", "witness_value", "certified"], rows)?;
    Ok(to_json(&reports))
}

fn bfun_properties(sc: &Scenario, p: &BfunParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let grid = p.grid.clone().unwrap_or_else(EquivalenceGrid::default);
    let props = p.properties.clone().unwrap_or_else(|| Property::ALL.to_vec());
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for term in sc.terms()? {
        let profile = BProfile::new(&term)?;
        for &prop in &props {
            let rep = verify_equivalence(&profile, prop, &grid)?;
            let ok = rep.bounded && rep.slack.is_none_or(|s| s >= 0.0);
            checks.push(CheckRow::assert(
                format!("{}/{}", term.label(), tag(&prop)),
                ok,
                Some(rep.constant),
                "ratio bounded on the grid, one-sided slack nonnegative",
            ));
            rows.push(vec![
                term.label().to_string(),
                tag(&prop),
                float(rep.r_min),
                float(rep.r_max),
                float(rep.constant),
                bool_cell(rep.bounded),
                opt_cell(rep.slack),
                rep.samples.to_string(),
            ]);
            out.push(json!({ "term": term.label(), "report": rep }));
        }
    }
    art.csv("bfun_properties.csv", &["term", "property", "r_min", "r_max", "constant", "bounded", "slack", "samples"], rows)?;
    Ok(Value::Array(out))
}

fn zones(sc: &Scenario, p: &ZonesParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let ts = geomspace(p.t_min, p.t_max, p.t_count);
    let xis = geomspace(p.xi_min, p.xi_max, p.xi_count);
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for term in sc.terms()? {
        let mut labels = std::collections::BTreeSet::new();
        for &t in &ts {
            for &xi in &xis {
                let z = classify(&term, &p.zone, t, xi);
                labels.insert(z.label.as_str());
                rows.push(vec![
                    term.label().to_string(),
                    float(t),
                    float(xi),
                    z.label.as_str().to_string(),
                    float(z.m_val),
                    float(z.h_val),
                ]);
            }
        }
        let mut itineraries = Vec::new();
        for &xi in &p.itinerary_xi {
            let t_xi = separating_time(&term, &p.zone, xi)?;
            let seq: Vec<Value> = transition_sequence(&term, &p.zone, p.s, xi, p.t_max)
                .into_iter()
                .map(|(z, t)| json!({ "zone": z.as_str(), "t": t }))
                .collect();
            itineraries.push(json!({ "xi": xi, "separating_time": t_xi, "transitions": seq }));
        }
        checks.push(CheckRow::record(
            format!("{}/zones_present", term.label()),
            labels.len() as f64,
            format!("zones on the map: {}", labels.into_iter().collect::<Vec<_>>().join(", ")),
        ));
        out.push(json!({ "term": term.label(), "itineraries": itineraries }));
    }
    art.csv("zones.csv", &["term", "t", "xi", "label", "m", "h"], rows)?;
    Ok(json!({ "zone": p.zone, "terms": out }))
}

fn multiplier_bounds(sc: &Scenario, p: &BoundsParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let ids = p.bounds.clone().unwrap_or_else(|| BoundId::ALL.to_vec());
    let mut summary = Vec::new();
    let mut samples = Vec::new();
    let mut out = Vec::new();
    for term in sc.terms()? {
        let profile = BProfile::new(&term)?;
        let ens = bound_ensemble(&profile, &p.zone, &BoundGrid::standard(p.level))?;
        let fine = if p.refine { Some(bound_ensemble(&profile, &p.zone, &BoundGrid::standard(p.level + 1))?) } else { None };
        for &id in &ids {
            let rep = check_bound(&ens, &profile, id, &p.zone, false)?;
            let name = format!("{}/{}", term.label(), id.name());
            checks.push(CheckRow::assert(format!("{name}/sup"), rep.sup_ratio.is_finite(), Some(rep.sup_ratio), "sup ratio finite"));
            let mut fine_sup = None;
            if let Some(fine) = &fine {
                let r1 = check_bound(fine, &profile, id, &p.zone, false)?;
                let growth = if rep.sup_ratio > 0.0 { r1.sup_ratio / rep.sup_ratio - 1.0 } else { 0.0 };
                checks.push(CheckRow::assert(
                    format!("{name}/refinement"),
                    r1.sup_ratio.is_finite() && growth <= p.refine_growth,
                    Some(growth),
                    format!("sup growth under refinement at most {}", p.refine_growth),
                ));
                fine_sup = Some(r1.sup_ratio);
            }
            summary.push(vec![
                term.label().to_string(),
                id.name().to_string(),
                rep.samples.len().to_string(),
                float(rep.c_prime),
                float(rep.sup_ratio),
                opt_cell(fine_sup),
            ]);
            if p.export_samples {
                for s in &rep.samples {
                    let lhs = s.log_lhs.exp();
                    let rhs = (s.log_shape - rep.c_prime * s.x).exp();
                    samples.push(vec![
                        term.label().to_string(),
                        id.name().to_string(),
                        float(s.t),
                        float(s.s),
                        float(s.xi),
                        float(lhs),
                        float(rhs),
                        float(s.log_ratio(rep.c_prime).exp()),
                    ]);
                }
            }
            out.push(json!({
                "term": term.label(),
                "bound": id.name(),
                "samples": rep.samples.len(),
                "c_prime": rep.c_prime,
                "sup_ratio": rep.sup_ratio,
                "argsup": rep.argsup,
                "refined_sup_ratio": fine_sup,
            }));
        }
    }
    art.csv("bounds.csv", &["term", "bound", "samples", "c_prime", "sup_ratio", "refined_sup_ratio"], summary)?;
    if p.export_samples {
        art.csv("bound_samples.csv", &["term", "bound", "t", "s", "xi", "lhs", "rhs", "ratio"], samples)?;
    }
    Ok(json!({ "zone": p.zone, "level": p.level, "bounds": out }))
}

fn linear_decay(sc: &Scenario, p: &LinearParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let datum = RadialDatum::matched(p.dimension, p.m)?;
    let opts = LinearOptions::default();
    let window = (p.window[0], p.window[1]);
    let mut out = Vec::new();
    for term in sc.terms()? {
        let profile = BProfile::new(&term)?;
        let (curve, fits) = verify_matsumura(&profile, &datum, p.s, &p.derivs, window, &opts)?;
        for (d, fit) in fits.iter().enumerate() {
            let der = p.derivs[d];
            let expected = expected_exponent(datum.n, datum.m_index, der);
            checks.push(CheckRow::assert(
                format!("{}/{}/slope", term.label(), fit.quantity),
                (fit.slope - expected).abs() <= p.tolerance,
                Some(fit.slope),
                format!("|slope - ({expected})| <= {}", p.tolerance),
            ));
            let rows = (0..curve.times.len()).map(|j| {
                let shape = (1.0 + curve.b_clock[j]).powf(expected) / curve.b_values[j].powi(der.l as i32);
                vec![float(curve.times[j]), float(curve.b_clock[j]), float(curve.values[d][j]), float(shape)]
            });
            art.csv(&format!("decay_{}_{}.csv", slug(term.label()), fit.quantity), &["t", "B", "norm", "bound_shape"], rows)?;
        }
        let mut scans = Vec::new();
        if !p.uniformity_s.is_empty() {
            for &der in &p.derivs {
                let scan = s_uniformity_scan(&profile, &datum, &p.uniformity_s, der, p.uniformity_horizon, &opts)?;
                checks.push(CheckRow::assert(
                    format!("{}/{}/s_uniformity", term.label(), der.name()),
                    scan.ratio <= p.uniformity_limit,
                    Some(scan.ratio),
                    format!("fitted prefactor max/min <= {}", p.uniformity_limit),
                ));
                checks.push(CheckRow::record(
                    format!("{}/{}/s_uniformity_sup", term.label(), der.name()),
                    scan.sup_ratio,
                    "max/min of the supremum over all t > s",
                ));
                scans.push(scan);
            }
        }
        out.push(json!({ "term": term.label(), "fits": fits, "uniformity": scans }));
    }
    Ok(json!({ "datum": datum, "s": p.s, "window": p.window, "terms": out }))
}

fn ledger_csv(art: &mut Artifacts, file: &str, out: &DichotomyOutcome) -> Result<()> {
    let l = &out.ledger;
    let rows = (0..l.times.len()).map(|i| {
        vec![
            float(l.times[i]),
            float(l.big_b[i]),
            float(l.l2[i]),
            float(l.grad_l2[i]),
            float(l.ut_l2[i]),
            float(l.weighted_e[i]),
            float(l.w_vals[i]),
            float(l.m_running[i]),
        ]
    });
    art.csv(file, &["t", "B", "l2", "grad_l2", "ut_l2", "weighted_E", "W", "M"], rows)
}

fn verdict_row(out: &DichotomyOutcome) -> Vec<String> {
    let slope = |f: fn(&crate::semilinear::DecaySlopes) -> f64| opt_cell(out.slopes.as_ref().map(f));
    vec![
        tag(&out.verdict),
        opt_cell(out.blowup_time),
        float(out.final_time),
        out.steps.to_string(),
        float(out.max_abs_u),
        float(out.data_functional),
        slope(|s| s.l2),
        slope(|s| s.grad_l2),
        slope(|s| s.ut_product),
        float(out.m_ratio),
        float(out.energy_ratio_sup),
    ]
}

const VERDICT_HEADER: [&str; 11] = [
    "verdict",
    "blowup_time",
    "final_time",
    "steps",
    "max_abs_u",
    "data_functional",
    "l2_slope",
    "grad_slope",
    "ut_slope",
    "m_ratio",
    "energy_ratio_sup",
];

fn semilinear(sc: &Scenario, p: &SemilinearParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let profile = BProfile::new(&sc.term_or_unit()?)?;
    let out = run_dichotomy(&profile, &p.run)?;
    ledger_csv(art, "ledger.csv", &out)?;
    art.csv("verdict.csv", &VERDICT_HEADER, [verdict_row(&out)])?;
    if let Some(expect) = p.expect {
        checks.push(CheckRow::assert(
            "verdict",
            out.verdict == expect,
            out.blowup_time,
            format!("expected {}, got {}", tag(&expect), tag(&out.verdict)),
        ));
    } else {
        checks.push(CheckRow::record("verdict", out.blowup_time.unwrap_or(out.final_time), tag(&out.verdict)));
    }
    let defect = out.ledger.weight_defect_max();
    checks.push(CheckRow::assert("weight_defect", defect <= 0.0, Some(defect), "weight inequality residual <= 0"));
    if let Some(s) = &out.slopes {
        let expected = s.expected[0];
        checks.push(match p.slope_tolerance {
            Some(tol) => CheckRow::assert(
                "l2_slope",
                (s.l2 - expected).abs() <= tol,
                Some(s.l2),
                format!("|slope - ({expected})| <= {tol}"),
            ),
            None => CheckRow::record("l2_slope", s.l2, format!("expected {expected}")),
        });
        checks.push(match p.m_ratio_limit {
            Some(lim) => CheckRow::assert("m_ratio", out.m_ratio <= lim, Some(out.m_ratio), format!("M(T)/M(0) <= {lim}")),
            None => CheckRow::record("m_ratio", out.m_ratio, "M(T)/M(0)"),
        });
        checks.push(CheckRow::record("energy_ratio_sup", out.energy_ratio_sup, "sup E/I^2"));
    } else if p.slope_tolerance.is_some() || p.m_ratio_limit.is_some() {
        checks.push(CheckRow::assert("l2_slope", false, None, "no decay fit: the run did not decay globally"));
    }
    let mut refined = None;
    if let Some(limit) = p.refine_growth {
        let cfg = crate::semilinear::SemilinearConfig { points: 2 * p.run.points, dt: 0.5 * p.run.dt, ..p.run.clone() };
        let fine = run_dichotomy(&profile, &cfg)?;
        let growth = fine.energy_ratio_sup / out.energy_ratio_sup - 1.0;
        checks.push(CheckRow::assert(
            "energy_ratio_refinement",
            growth.is_finite() && growth <= limit,
            Some(growth),
            format!("sup E/I^2 {:e} -> {:e}; relative growth <= {limit}", out.energy_ratio_sup, fine.energy_ratio_sup),
        ));
        refined = Some(json!({ "points": cfg.points, "dt": cfg.dt, "energy_ratio_sup": fine.energy_ratio_sup }));
    }
    let mut cross = None;
    if p.cross_check {
        let c = cross_validate(&profile, &p.run)?;
        checks.push(CheckRow::assert(
            "duhamel_discrepancy",
            c.discrepancy <= p.cross_tolerance,
            Some(c.discrepancy),
            format!("stepper vs Duhamel L2 discrepancy <= {}", p.cross_tolerance),
        ));
        cross = Some(c);
    }
    Ok(json!({ "outcome": out, "cross_check": cross, "refined": refined }))
}

fn sweep(sc: &Scenario, p: &SweepParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let profile = BProfile::new(&sc.term_or_unit()?)?;
    let p_f = p_fujita(p.run.dimension as u32);
    let outcomes: Vec<DichotomyOutcome> = p
        .p_values
        .par_iter()
        .map(|&q| run_dichotomy(&profile, &crate::semilinear::SemilinearConfig { p: q, ..p.run.clone() }))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for (&q, o) in p.p_values.iter().zip(&outcomes) {
        let want = if q > p_f { Verdict::DecayedGlobally } else { Verdict::BlewUp };
        let name = format!("p={q}");
        if p.assert_fujita {
            checks.push(CheckRow::assert(
                name,
                o.verdict == want,
                o.blowup_time,
                format!("expected {}, got {}", tag(&want), tag(&o.verdict)),
            ));
        } else {
            checks.push(CheckRow::record(name, o.blowup_time.unwrap_or(o.final_time), tag(&o.verdict)));
        }
        let mut row = vec![float(q), float(p_f)];
        row.extend(verdict_row(o));
        rows.push(row);
        out.push(json!({
            "p": q,
            "verdict": o.verdict,
            "blowup_time": o.blowup_time,
            "final_time": o.final_time,
            "slopes": o.slopes,
            "m_ratio": o.m_ratio,
        }));
    }
    let mut header = vec!["p", "p_fujita"];
    header.extend(VERDICT_HEADER);
    art.csv("sweep.csv", &header, rows)?;
    Ok(json!({ "p_fujita": p_f, "runs": out }))
}

fn picard(sc: &Scenario, p: &PicardParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let profile = BProfile::new(&sc.term_or_unit()?)?;
    let rep = picard_iterate(&profile, &p.run)?;
    for (j, &f) in rep.contraction_factors.iter().enumerate() {
        checks.push(CheckRow::assert(format!("factor_{}", j + 1), f < p.max_factor, Some(f), format!("< {}", p.max_factor)));
    }
    if let Some(tail) = p.tail_factor {
        let k = rep.contraction_factors.len();
        for j in k.saturating_sub(2)..k {
            let f = rep.contraction_factors[j];
            checks.push(CheckRow::assert(format!("tail_factor_{}", j + 1), f <= tail, Some(f), format!("<= {tail}")));
        }
    }
    let rows = (0..rep.x_norms.len()).map(|j| {
        vec![
            j.to_string(),
            float(rep.x_norms[j]),
            float(rep.x0_norms[j]),
            float(rep.difference_norms[j]),
            if j == 0 { String::new() } else { float(rep.contraction_factors[j - 1]) },
        ]
    });
    art.csv("picard.csv", &["iterate", "x_norm", "x0_norm", "difference_norm", "contraction_factor"], rows)?;
    Ok(to_json(&rep))
}

fn gn(sc: &Scenario, p: &GnTargetParams, art: &mut Artifacts, checks: &mut Vec<CheckRow>) -> Result<Value> {
    let cfg = GnEnsembleConfig { seed: sc.seed, ..p.ensemble.unwrap_or_default() };
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for v in GnVariant::ALL {
        let vcfg = if v == GnVariant::Iii { GnEnsembleConfig { q: p.q_recorded, ..cfg } } else { cfg };
        let rep = gn_ensemble(v, &vcfg)?;
        if v.is_explicit() {
            checks.push(CheckRow::assert(
                format!("gn_{}", v.name()),
                rep.all_hold(),
                Some(rep.max_ratio),
                format!("holds on all {} bumps ({} failures)", rep.results.len(), rep.failures),
            ));
        } else {
            checks.push(CheckRow::record(format!("gn_{}", v.name()), rep.max_ratio, format!("empirical constant at q = {}", vcfg.q)));
        }
        if let Some(n) = rep.sigma_scaled_failures {
            checks.push(CheckRow::record(format!("gn_{}_sigma_scaled_failures", v.name()), n as f64, "failures with the sigma-scaled constant"));
        }
        for r in &rep.results {
            rows.push(vec![
                v.name().to_string(),
                float(r.params.sigma),
                float(r.params.q),
                r.params.order.to_string(),
                float(r.lhs),
                float(r.rhs),
                float(r.ratio),
                r.holds.map(bool_cell).unwrap_or_default(),
            ]);
        }
        out.push(json!({
            "variant": v.name(),
            "config": vcfg,
            "failures": rep.failures,
            "max_ratio": rep.max_ratio,
            "sigma_scaled_failures": rep.sigma_scaled_failures,
        }));
    }
    art.csv("gn.csv", &["variant", "sigma", "q", "order", "lhs", "rhs", "ratio", "holds"], rows)?;
    Ok(Value::Array(out))
}
