//! Scenario and suite files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::GnEnsembleConfig;
use crate::bfun::{EquivalenceGrid, Property};
use crate::damping::{catalog, DampingConfig, DampingKind, DampingTerm};
use crate::error::{Error, Result};
use crate::linear::{Deriv, RadialDatum};
use crate::modes::BoundId;
use crate::phasespace::ZoneConfig;
use crate::semilinear::PicardConfig;
use crate::semilinear::{SemilinearConfig, Verdict};

/// One reproducible run of a single module pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Unique within a suite; also names the output directory.
    pub name: String,
    /// Seed of every randomized ensemble in the run.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Damping term. Without it the catalog-wide targets run every catalog
    /// term and the solver targets use `b ≡ 1`.
    #[serde(default)]
    pub damping: Option<DampingConfig>,
    /// Artifact directory; relative paths resolve against the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub target: Target,
}

fn default_seed() -> u64 {
    7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Target {
    Oracle(OracleParams),
    Hypotheses(HypothesesParams),
    BfunProperties(BfunParams),
    Zones(ZonesParams),
    MultiplierBounds(BoundsParams),
    LinearDecay(LinearParams),
    Semilinear(SemilinearParams),
    DichotomySweep(SweepParams),
    Picard(PicardParams),
    Gn(GnTargetParams),
    Exponents(ExponentsParams),
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Oracle(_) => "oracle",
            Target::Hypotheses(_) => "hypotheses",
            Target::BfunProperties(_) => "bfun-properties",
            Target::Zones(_) => "zones",
            Target::MultiplierBounds(_) => "multiplier-bounds",
            Target::LinearDecay(_) => "linear-decay",
            Target::Semilinear(_) => "semilinear",
            Target::DichotomySweep(_) => "dichotomy-sweep",
            Target::Picard(_) => "picard",
            Target::Gn(_) => "gn",
            Target::Exponents(_) => "exponents",
        }
    }
}

/// Mode propagator against the closed-form multiplier; needs constant damping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub xi: Vec<f64>,
    /// Elapsed times `t − s` run over `[0, t_max]`.
    pub t_max: f64,
    pub t_count: usize,
    /// Limit on `|(ΔΦ̂, ΔΦ̂')| / |(Φ̂, Φ̂')|`.
    pub tolerance: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams { xi: vec![0.05, 0.25, 0.5, 0.7, 2.0, 10.0], t_max: 50.0, t_count: 1001, tolerance: 1e-8 }
    }
}

/// Exponent algebra: the three-way identity on random `(n, p)`, admissibility
/// ranges and the interpolation endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsParams {
    pub samples: usize,
    /// Dimensions drawn from `1..=n_max`.
    pub n_max: u32,
    /// `p − 1` drawn from `[1e-3, p_span)`.
    pub p_span: f64,
    pub tolerance: f64,
    /// Endpoints `θ(2) = 0`, `θ(2*) = 1` are checked for `n` in `3..=theta_n_max`.
    pub theta_n_max: u32,
    /// Admissibility is tabulated for `n` in `1..=table_n_max` at these `p`.
    pub table_n_max: u32,
    pub table_p: Vec<f64>,
}

impl Default for ExponentsParams {
    fn default() -> Self {
        ExponentsParams {
            samples: 1000,
            n_max: 12,
            p_span: 10.0,
            tolerance: 1e-12,
            theta_n_max: 40,
            table_n_max: 6,
            table_p: vec![1.2, 1.5, 5.0 / 3.0, 1.8, 2.0, 2.1, 2.5, 3.0, 3.5, 4.0, 5.0, 7.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesesParams {
    pub t_max: f64,
    pub per_decade: usize,
}

impl Default for HypothesesParams {
    fn default() -> Self {
        HypothesesParams { t_max: 1e6, per_decade: 60 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct BfunParams {
    /// Sampling grid; the standard `t ∈ [1, 10⁴]` grid when absent.
    pub grid: Option<EquivalenceGrid>,
    /// Subset of properties; all of them when absent.
    pub properties: Option<Vec<Property>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ZonesParams {
    pub zone: ZoneConfig,
    pub t_min: f64,
    pub t_max: f64,
    pub t_count: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_count: usize,
    /// Starting time of the recorded itineraries.
    pub s: f64,
    /// Frequencies whose zone itinerary and separating time are reported.
    pub itinerary_xi: Vec<f64>,
}

impl Default for ZonesParams {
    fn default() -> Self {
        ZonesParams {
            zone: ZoneConfig::default(),
            t_min: 1e-2,
            t_max: 1e4,
            t_count: 61,
            xi_min: 1e-2,
            xi_max: 10.0,
            xi_count: 41,
            s: 0.0,
            itinerary_xi: vec![0.05, 0.25, 0.5, 0.7, 2.0, 10.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsParams {
    pub zone: ZoneConfig,
    /// Refinement level of the standard sampling grid.
    pub level: u32,
    /// Also evaluate one level finer and assert the growth limit.
    pub refine: bool,
    /// Largest accepted `sup` growth under refinement, relative.
    pub refine_growth: f64,
    /// Subset of bounds; all ten when absent.
    pub bounds: Option<Vec<BoundId>>,
    /// Write every sample, not just the per-bound summary.
    pub export_samples: bool,
}

impl Default for BoundsParams {
    fn default() -> Self {
        BoundsParams {
            zone: ZoneConfig::default(),
            level: 0,
            refine: false,
            refine_growth: 0.1,
            bounds: None,
            export_samples: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub dimension: u32,
    /// Lebesgue index `m ∈ [1, 2]` of the datum.
    pub m: f64,
    /// Starting time.
    pub s: f64,
    /// Fit window `[t_lo, t_hi]`.
    pub window: [f64; 2],
    pub derivs: Vec<Deriv>,
    /// Accepted distance between fitted and expected exponent.
    pub tolerance: f64,
    /// Starting times of the prefactor scan; skipped when empty.
    pub uniformity_s: Vec<f64>,
    pub uniformity_horizon: f64,
    /// Largest accepted max/min prefactor ratio.
    pub uniformity_limit: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            dimension: 1,
            m: 1.0,
            s: 0.0,
            window: [1e2, 1e4],
            derivs: vec![Deriv::U, Deriv::GRAD, Deriv::UT],
            tolerance: 0.05,
            uniformity_s: Vec::new(),
            uniformity_horizon: 1e4,
            uniformity_limit: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SemilinearParams {
    pub run: SemilinearConfig,
    /// Asserted verdict; recorded only when absent.
    #[serde(default)]
    pub expect: Option<Verdict>,
    /// Also compare the stepper with the Duhamel formula.
    #[serde(default)]
    pub cross_check: bool,
    /// Largest accepted L² discrepancy of the cross-check.
    #[serde(default = "default_cross_tolerance")]
    pub cross_tolerance: f64,
    /// Asserted distance of the fitted L² slope from its expected value.
    #[serde(default)]
    pub slope_tolerance: Option<f64>,
    /// Asserted bound on `M(T)/M(0)`.
    #[serde(default)]
    pub m_ratio_limit: Option<f64>,
    /// When given, the run is repeated with twice the points and half the
    /// step, and the relative growth of `sup E/I²` is asserted below this.
    #[serde(default)]
    pub refine_growth: Option<f64>,
}

fn default_cross_tolerance() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Base run; `p` is replaced by each sweep value.
    pub run: SemilinearConfig,
    pub p_values: Vec<f64>,
    /// Assert decay above the Fujita exponent and blow-up at or below it.
    #[serde(default)]
    pub assert_fujita: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PicardParams {
    pub run: PicardConfig,
    /// Every contraction factor must stay below this.
    #[serde(default = "one")]
    pub max_factor: f64,
    /// Bound on the last two factors, when given.
    #[serde(default)]
    pub tail_factor: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GnTargetParams {
    /// Bump ensemble; its `seed` is replaced by the scenario seed.
    pub ensemble: Option<GnEnsembleConfig>,
    /// Integrability exponent at which variant (iii) is recorded.
    pub q_recorded: f64,
}

impl Default for GnTargetParams {
    fn default() -> Self {
        GnTargetParams { ensemble: None, q_recorded: 4.0 }
    }
}

/// A list of scenarios, given inline and/or by path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(default)]
    pub name: Option<String>,
    /// Run scenarios concurrently, each in its own output directory.
    #[serde(default)]
    pub parallel: bool,
    /// Scenario files, relative to the suite file.
    #[serde(default)]
    pub include: Vec<PathBuf>,
    #[serde(default)]
    pub scenario: Vec<Scenario>,
}

fn invalid(path: impl Into<String>, e: impl std::fmt::Display) -> Error {
    Error::ConfigInvalid { path: path.into(), message: e.to_string() }
}

fn path_of(p: &serde_path_to_error::Path) -> String {
    let s = p.to_string();
    if s.is_empty() {
        ".".into()
    } else {
        s
    }
}

/// Parses TOML, or JSON when `json` is set, reporting the failing field path.
pub fn parse<T: DeserializeOwned>(text: &str, json: bool) -> Result<T> {
    if json {
        let mut de = serde_json::Deserializer::from_str(text);
        let value = serde_path_to_error::deserialize(&mut de).map_err(|e| invalid(path_of(e.path()), e.inner()))?;
        de.end().map_err(|e| invalid(".", e))?;
        Ok(value)
    } else {
        let de = toml::Deserializer::parse(text).map_err(|e| invalid(".", e.message()))?;
        serde_path_to_error::deserialize(de).map_err(|e| invalid(path_of(e.path()), e.inner().message()))
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

impl Scenario {
    pub fn from_str(text: &str, json: bool) -> Result<Self> {
        let sc: Scenario = parse(text, json)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_str(&read(path)?, is_json(path))
    }

    /// Damping terms of the run, or `None` for the whole catalog.
    pub fn term(&self) -> Result<Option<DampingTerm>> {
        self.damping.as_ref().map(DampingTerm::from_config).transpose().map_err(|e| invalid("damping", e))
    }

    /// The configured term, or the catalog.
    pub fn terms(&self) -> Result<Vec<DampingTerm>> {
        Ok(self.term()?.map_or_else(catalog, |t| vec![t]))
    }

    /// The configured term, or `b ≡ 1`.
    pub fn term_or_unit(&self) -> Result<DampingTerm> {
        Ok(self.term()?.unwrap_or_else(|| DampingTerm::constant(1.0).expect("b = 1 is admissible")))
    }

    /// Checks the values that parsing alone cannot, pointing at the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(invalid("name", "must be a non-empty file name"));
        }
        self.term()?;
        let at = |field: &str| format!("target.{}.{field}", self.target.name());
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match &self.target {
            Target::Oracle(p) => {
                if self.term()?.is_some_and(|t| t.kind != DampingKind::Constant) {
                    return Err(invalid("damping", "the oracle target needs constant damping"));
                }
                if p.xi.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(invalid(at("xi"), "frequencies must be finite and non-negative"));
                }
                if !positive(p.t_max) || p.t_count < 2 || !positive(p.tolerance) {
                    return Err(invalid(at("t_max"), "need t_max > 0, t_count ≥ 2 and tolerance > 0"));
                }
            }
            Target::Exponents(p) => {
                if p.n_max == 0 || p.table_n_max == 0 || !(p.p_span > 1e-3 && p.p_span.is_finite()) {
                    return Err(invalid(at("n_max"), "need n_max ≥ 1, table_n_max ≥ 1 and p_span > 1e-3"));
                }
                if let Some(i) = p.table_p.iter().position(|&q| !(q > 1.0 && q.is_finite())) {
                    return Err(invalid(format!("{}[{i}]", at("table_p")), "exponents must exceed 1"));
                }
            }
            Target::Hypotheses(p) => {
                if !(p.t_max > 1.0) || p.per_decade == 0 {
                    return Err(invalid(at("t_max"), "need t_max > 1 and per_decade > 0"));
                }
            }
            Target::BfunProperties(p) => {
                if let Some(g) = &p.grid {
                    if g.t_values.is_empty() || !(g.alpha > 0.0 && g.alpha < 1.0) {
                        return Err(invalid(at("grid"), "need t_values and alpha in (0,1)"));
                    }
                }
            }
            Target::Zones(p) => {
                p.zone.validate().map_err(|e| invalid(at("zone"), e))?;
                if !(positive(p.t_min) && p.t_max > p.t_min && positive(p.xi_min) && p.xi_max > p.xi_min) {
                    return Err(invalid(at("t_min"), "need 0 < t_min < t_max and 0 < xi_min < xi_max"));
                }
                if p.t_count < 2 || p.xi_count < 2 {
                    return Err(invalid(at("t_count"), "need at least two points per axis"));
                }
            }
            Target::MultiplierBounds(p) => {
                p.zone.validate().map_err(|e| invalid(at("zone"), e))?;
                if p.level > 4 {
                    return Err(invalid(at("level"), "refinement level above 4 is not supported"));
                }
            }
            Target::LinearDecay(p) => {
                RadialDatum::matched(p.dimension, p.m).map_err(|e| invalid(at("m"), e))?;
                if !(p.s >= 0.0 && p.window[0] > p.s && p.window[1] > p.window[0]) {
                    return Err(invalid(at("window"), "need s ≥ 0 and s < t_lo < t_hi"));
                }
                if p.derivs.is_empty() {
                    return Err(invalid(at("derivs"), "need at least one derivative"));
                }
            }
            Target::Semilinear(p) => {
                p.run.validate().map_err(|e| invalid(at("run"), e))?;
                if p.refine_growth.is_some() {
                    let fine = SemilinearConfig { points: 2 * p.run.points, dt: 0.5 * p.run.dt, ..p.run.clone() };
                    fine.validate().map_err(|e| invalid(at("refine_growth"), format!("refined run: {e}")))?;
                }
            }
            Target::DichotomySweep(p) => {
                p.run.validate().map_err(|e| invalid(at("run"), e))?;
                if let Some(i) = p.p_values.iter().position(|&q| !(q > 1.0 && q.is_finite())) {
                    return Err(invalid(format!("{}[{i}]", at("p_values")), "exponents must exceed 1"));
                }
            }
            Target::Picard(p) => {
                p.run.validate().map_err(|e| invalid(at("run"), e))?;
            }
            Target::Gn(p) => {
                if let Some(e) = &p.ensemble {
                    if e.count == 0 || !(e.width_min > 0.0 && e.width_max >= e.width_min) {
                        return Err(invalid(at("ensemble"), "need count > 0 and 0 < width_min ≤ width_max"));
                    }
                }
                if !(p.q_recorded >= 2.0) {
                    return Err(invalid(at("q_recorded"), "need q ≥ 2"));
                }
            }
        }
        Ok(())
    }
}

impl Suite {
    /// Loads a suite file and every included scenario, then checks name uniqueness.
    pub fn load(path: &Path) -> Result<Self> {
        let mut suite: Suite = parse(&read(path)?, is_json(path))?;
        for (i, sc) in suite.scenario.iter().enumerate() {
            sc.validate().map_err(|e| match e {
                Error::ConfigInvalid { path, message } => invalid(format!("scenario[{i}].{path}"), message),
                other => other,
            })?;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for (i, inc) in suite.include.iter().enumerate() {
            let sc = Scenario::load(&base.join(inc)).map_err(|e| match e {
                Error::ConfigInvalid { path, message } => {
                    invalid(format!("include[{i}]"), format!("{}: {path}: {message}", inc.display()))
                }
                other => other,
            })?;
            suite.scenario.push(sc);
        }
        suite.include.clear();
        suite.check_names()?;
        Ok(suite)
    }

    pub fn check_names(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, sc) in self.scenario.iter().enumerate() {
            if !seen.insert(sc.name.as_str()) {
                return Err(invalid(format!("scenario[{i}].name"), format!("duplicate scenario name `{}`", sc.name)));
            }
        }
        Ok(())
    }
}
