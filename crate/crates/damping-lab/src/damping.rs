//! Damping coefficients `b(t)` and checkers for the structural hypotheses
//! the decay theory relies on.
//!
//! The catalog covers power laws `μ(1+t)^{-κ}`, their products with positive
//! or negative logarithmic powers, nested logarithms, constants, and a
//! closure-based escape hatch. Catalog derivatives up to order three are exact
//! (forward-mode jets); custom terms use a five-point finite-difference
//! stencil.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::jet::Jet;
use crate::num::quad;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DampingKind {
    PowerLaw,
    LogModified,
    LogDivided,
    IteratedLog,
    Constant,
    Custom,
}

/// A damping coefficient. Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct DampingTerm {
    pub kind: DampingKind,
    pub mu: f64,
    pub kappa: f64,
    pub gamma_powers: Vec<f64>,
    pub c_shifts: Vec<f64>,
    pub derivative_order: u8,
    /// Relative step of the finite-difference stencil used by custom terms:
    /// the absolute step at time `t` is `fd_step * (1 + t)`.
    pub fd_step: f64,
    custom: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    label: String,
}

impl fmt::Debug for DampingTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DampingTerm")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .field("mu", &self.mu)
            .field("kappa", &self.kappa)
            .field("gamma_powers", &self.gamma_powers)
            .field("c_shifts", &self.c_shifts)
            .finish()
    }
}

/// Serializable description of a catalog term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    pub kind: DampingKind,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub cs: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

/// Smallest admissible log shift for a term with exponent `kappa` and total
/// log power `gamma`, with a 1% margin.
pub fn default_log_shift(kappa: f64, gamma: f64) -> f64 {
    let base = if kappa == 0.0 {
        gamma.exp()
    } else {
        (gamma / kappa.abs()).exp().max((gamma / (1.0 + kappa)).exp())
    };
    base.max(1.0) * 1.01
}

fn check_common(mu: f64, kappa: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if !(kappa > -1.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa must lie in (-1, 1], got {kappa}")));
    }
    Ok(())
}

impl DampingTerm {
    fn base(kind: DampingKind, mu: f64, kappa: f64, gammas: Vec<f64>, cs: Vec<f64>, label: String) -> Self {
        DampingTerm {
            kind,
            mu,
            kappa,
            gamma_powers: gammas,
            c_shifts: cs,
            derivative_order: 3,
            fd_step: 2e-3,
            custom: None,
            label,
        }
    }

    /// `μ(1+t)^{-κ}`.
    pub fn power_law(mu: f64, kappa: f64) -> Result<Self> {
        check_common(mu, kappa)?;
        Ok(Self::base(DampingKind::PowerLaw, mu, kappa, vec![], vec![], format!("power_law(mu={mu}, kappa={kappa})")))
    }

    /// `b ≡ μ`.
    pub fn constant(mu: f64) -> Result<Self> {
        check_common(mu, 0.0)?;
        Ok(Self::base(DampingKind::Constant, mu, 0.0, vec![], vec![], format!("constant(mu={mu})")))
    }

    /// `μ(1+t)^{-κ}(log(c+t))^γ`; `c = None` picks [`default_log_shift`].
    pub fn log_modified(mu: f64, kappa: f64, gamma: f64, c: Option<f64>) -> Result<Self> {
        Self::log_kind(DampingKind::LogModified, mu, kappa, gamma, c)
    }

    /// `μ(1+t)^{-κ}(log(c+t))^{-γ}`; `c = None` picks [`default_log_shift`].
    pub fn log_divided(mu: f64, kappa: f64, gamma: f64, c: Option<f64>) -> Result<Self> {
        Self::log_kind(DampingKind::LogDivided, mu, kappa, gamma, c)
    }

    fn log_kind(kind: DampingKind, mu: f64, kappa: f64, gamma: f64, c: Option<f64>) -> Result<Self> {
        check_common(mu, kappa)?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        let c = c.unwrap_or_else(|| default_log_shift(kappa, gamma));
        if !(c > 1.0) {
            return Err(Error::InvalidParameter(format!("log shift must exceed 1, got {c}")));
        }
        let name = if kind == DampingKind::LogModified { "log_modified" } else { "log_divided" };
        Ok(Self::base(
            kind,
            mu,
            kappa,
            vec![gamma],
            vec![c],
            format!("{name}(mu={mu}, kappa={kappa}, gamma={gamma}, c={c:.6})"),
        ))
    }

    /// `μ(1+t)^{-κ} (log(c₁ + (log(c₂ + … )^{γ₂}))^{γ₁}`, outermost first.
    pub fn iterated_log(mu: f64, kappa: f64, gammas: Vec<f64>, cs: Option<Vec<f64>>) -> Result<Self> {
        check_common(mu, kappa)?;
        if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidParameter("iterated_log needs at least one positive gamma".into()));
        }
        let cs = match cs {
            Some(cs) => cs,
            None => {
                let c = default_log_shift(kappa, gammas.iter().sum());
                vec![c; gammas.len()]
            }
        };
        if cs.len() != gammas.len() || cs.iter().any(|c| !(*c > 1.0)) {
            return Err(Error::InvalidParameter("iterated_log needs one shift > 1 per gamma".into()));
        }
        let label = format!("iterated_log(mu={mu}, kappa={kappa}, gammas={gammas:?})");
        Ok(Self::base(DampingKind::IteratedLog, mu, kappa, gammas, cs, label))
    }

    /// Arbitrary positive coefficient; derivatives by finite differences.
    ///
    /// `f` must be defined and smooth on `[0, ∞)`.
    pub fn custom(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let mut term = Self::base(DampingKind::Custom, 1.0, 0.0, vec![], vec![], format!("custom({name})"));
        term.custom = Some(Arc::new(f));
        term
    }

    pub fn from_config(cfg: &DampingConfig) -> Result<Self> {
        let g0 = cfg.gammas.first().copied();
        let c0 = cfg.cs.first().copied();
        let need_gamma = || {
            g0.ok_or_else(|| Error::ConfigInvalid { path: "damping.gammas".into(), message: "one gamma required".into() })
        };
        match cfg.kind {
            DampingKind::PowerLaw => Self::power_law(cfg.mu, cfg.kappa),
            DampingKind::Constant => Self::constant(cfg.mu),
            DampingKind::LogModified => Self::log_modified(cfg.mu, cfg.kappa, need_gamma()?, c0),
            DampingKind::LogDivided => Self::log_divided(cfg.mu, cfg.kappa, need_gamma()?, c0),
            DampingKind::IteratedLog => Self::iterated_log(
                cfg.mu,
                cfg.kappa,
                cfg.gammas.clone(),
                if cfg.cs.is_empty() { None } else { Some(cfg.cs.clone()) },
            ),
            DampingKind::Custom => Err(Error::ConfigInvalid {
                path: "damping.kind".into(),
                message: "custom terms are only constructible from code".into(),
            }),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_custom(&self) -> bool {
        self.kind == DampingKind::Custom
    }

    /// The power part `(1+t)^{-κ}` times the log factor, as a jet.
    fn jet(&self, t: f64) -> Jet {
        let x = Jet::var(t);
        let power = (x + 1.0).powf(-self.kappa).scale(self.mu);
        match self.kind {
            DampingKind::Constant => Jet::constant(self.mu),
            DampingKind::PowerLaw => power,
            DampingKind::LogModified => power * (x + self.c_shifts[0]).ln().powf(self.gamma_powers[0]),
            DampingKind::LogDivided => power * (x + self.c_shifts[0]).ln().powf(-self.gamma_powers[0]),
            DampingKind::IteratedLog => {
                let mut inner = x;
                for (g, c) in self.gamma_powers.iter().zip(&self.c_shifts).rev() {
                    inner = (inner + *c).ln().powf(*g);
                }
                power * inner
            }
            DampingKind::Custom => unreachable!("custom terms are not jet-evaluable"),
        }
    }

    fn custom_derivs(&self, t: f64) -> [f64; 4] {
        let f = self.custom.as_ref().expect("custom closure");
        let h = self.fd_step * (1.0 + t);
        // Five-point stencil centred at t when possible, shifted right near 0.
        let start = (t - 2.0 * h).max(0.0);
        let offs: [f64; 5] = std::array::from_fn(|j| (start + j as f64 * h - t) / h);
        let vals: [f64; 5] = std::array::from_fn(|j| f(start + j as f64 * h));
        let mut out = [f(t), 0.0, 0.0, 0.0];
        for k in 1..=3 {
            let w = fd_weights(&offs, k);
            out[k] = w.iter().zip(&vals).map(|(a, b)| a * b).sum::<f64>() / h.powi(k as i32);
        }
        out
    }

    /// `[b, b', b'', b''']` at `t`.
    pub fn derivs(&self, t: f64) -> Result<[f64; 4]> {
        let d = if self.is_custom() { self.custom_derivs(t) } else { self.jet(t).d };
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(Error::NonFiniteValue { t })
        }
    }

    /// `b^{(order)}(t)`.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("t must be non-negative, got {t}")));
        }
        if order > self.derivative_order as usize {
            return Err(Error::InvalidParameter(format!("derivative order {order} not available")));
        }
        Ok(self.derivs(t)?[order])
    }

    /// `b(t)` without error plumbing, for hot loops on validated terms.
    #[inline]
    pub fn b(&self, t: f64) -> f64 {
        match self.kind {
            DampingKind::Constant => self.mu,
            DampingKind::PowerLaw => self.mu * (1.0 + t).powf(-self.kappa),
            DampingKind::Custom => (self.custom.as_ref().expect("custom closure"))(t),
            _ => self.jet(t).d[0],
        }
    }

    /// `(b(t), b'(t))`.
    #[inline]
    pub fn b_and_db(&self, t: f64) -> (f64, f64) {
        match self.kind {
            DampingKind::Constant => (self.mu, 0.0),
            DampingKind::PowerLaw => {
                let v = self.mu * (1.0 + t).powf(-self.kappa);
                (v, -self.kappa * v / (1.0 + t))
            }
            DampingKind::Custom => {
                let d = self.custom_derivs(t);
                (d[0], d[1])
            }
            _ => {
                let d = self.jet(t).d;
                (d[0], d[1])
            }
        }
    }

    /// Shape function `η = b/2`.
    #[inline]
    pub fn eta(&self, t: f64) -> f64 {
        0.5 * self.b(t)
    }

    pub fn to_config(&self) -> Option<DampingConfig> {
        if self.is_custom() {
            return None;
        }
        Some(DampingConfig {
            kind: self.kind,
            mu: self.mu,
            kappa: self.kappa,
            gammas: self.gamma_powers.clone(),
            cs: self.c_shifts.clone(),
        })
    }
}

/// Weights `w` with `f^{(k)}(0) ≈ Σ w_j f(x_j) / h^k` for unit-spaced offsets `x_j`.
fn fd_weights(x: &[f64; 5], k: usize) -> [f64; 5] {
    // Solve Σ_j w_j x_j^i = i! δ_{ik} for i = 0..4 (Vandermonde system).
    let mut a = [[0.0; 6]; 5];
    for (i, row) in a.iter_mut().enumerate() {
        for j in 0..5 {
            row[j] = x[j].powi(i as i32);
        }
        row[5] = if i == k { (1..=k).product::<usize>() as f64 } else { 0.0 };
    }
    for c in 0..5 {
        let p = (c..5).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).expect("rows");
        a.swap(c, p);
        for r in 0..5 {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..6 {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    std::array::from_fn(|j| a[j][5] / a[j][j])
}

// ---------------------------------------------------------------------------
// Hypothesis checks

/// Evaluation grid for the hypothesis checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub points: Vec<f64>,
}

impl TimeGrid {
    /// `0` followed by `per_decade` log-spaced points per decade from `10^-3`
    /// to `t_max`.
    pub fn log_spaced(t_max: f64, per_decade: usize) -> Self {
        let decades = (t_max / 1e-3).log10();
        let n = (decades * per_decade as f64).ceil() as usize + 1;
        let mut points = vec![0.0];
        points.extend(crate::num::geomspace(1e-3, t_max, n.max(2)));
        TimeGrid { points }
    }

    pub fn t_max(&self) -> f64 {
        *self.points.last().expect("non-empty grid")
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::log_spaced(1e6, 60)
    }
}

/// Numeric slack used by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|b'|(1+t)/b` below this counts as zero when testing monotonicity.
    pub flat: f64,
    /// Relative tolerance of the tail quadratures.
    pub quad: f64,
    /// Custom terms: a ratio sup is "bounded" if the last decade's sup is at
    /// most this factor times the previous decade's.
    pub growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { flat: 1e-12, quad: 1e-10, growth: 1.1 }
    }
}

/// Outcome of one hypothesis item with its extremal witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub holds: bool,
    /// Grid point where the checked ratio is extremal (worst case).
    pub witness_t: f64,
    pub witness_value: f64,
    /// `false` when the verdict rests on grid evidence only (custom terms).
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FurtherCheck {
    pub holds: bool,
    /// Fitted slope bound `m = max(0, sup t b'/b)`.
    pub m: f64,
    pub witness_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupCheck {
    pub holds: bool,
    /// `sup |b'|/b²` on the grid.
    pub c_bound: f64,
    /// Infimum of `b'/b²` over the last decade of the grid.
    pub liminf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub term: String,
    /// Items (i)–(v): positivity, monotonicity with `tb → ∞`, integrability of
    /// `((1+t)²b)^{-1}`, the derivative bounds for k = 1..3, non-integrability
    /// of `1/b`.
    pub hyp_b: [Check; 5],
    /// `sup_k (1+t)^k |b^{(k)}|/b` for k = 1, 2, 3.
    pub oscillation_constants: [f64; 3],
    pub hyp_further: FurtherCheck,
    /// Lower-oscillation constant `M = max(0, sup -(1+t) b'/b)`.
    pub lower_oscillation: f64,
    pub hyp_blowup: BlowupCheck,
    pub hyp_shape: Option<ShapeCheck>,
    pub grid_points: usize,
    pub t_max: f64,
    pub tolerances: Tolerances,
}

impl HypothesisReport {
    pub fn hyp_b_all(&self) -> bool {
        self.hyp_b.iter().all(|c| c.holds)
    }
}

/// Verdict on the closeness `|b/η − 2| ≲ 1/(1+t)` and `tη' ≤ mη`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeCheck {
    pub holds: bool,
    /// `sup (1+t)|b/η − 2|`.
    pub closeness: f64,
    /// `sup tη'/η`.
    pub m: f64,
}

/// Tail exponents: the integrand of each tail integral behaves like
/// `t^{p} (log t)^{q}` for catalog kinds; `None` for custom terms.
fn log_power(term: &DampingTerm) -> f64 {
    match term.kind {
        DampingKind::LogModified => term.gamma_powers[0],
        DampingKind::LogDivided => -term.gamma_powers[0],
        // Nested logs grow slower than any power of log t; only the sign matters.
        DampingKind::IteratedLog => 0.0,
        _ => 0.0,
    }
}

/// Whether `∫^∞ t^p (log t)^q dt` converges.
fn tail_converges(p: f64, q: f64, nested: bool) -> bool {
    if p < -1.0 {
        true
    } else if p > -1.0 {
        false
    } else if nested {
        // (log log t)^{±γ}/t is never integrable.
        false
    } else {
        q < -1.0
    }
}

/// Partial integrals of `g` over `[0, T]` on doubling intervals; returns
/// the value at `t_max` and the last two increments.
fn partial_integrals<G: Fn(f64) -> f64>(g: G, t_max: f64, tol: f64) -> Result<(f64, f64, f64)> {
    let mut edges = vec![0.0, 1.0];
    while *edges.last().unwrap() < t_max {
        let next = (edges.last().unwrap() * 2.0).min(t_max);
        edges.push(next);
    }
    let mut total = 0.0;
    let mut incs = Vec::new();
    for w in edges.windows(2) {
        let r = quad::integrate(&g, w[0], w[1], 1e-300, tol, 400)?;
        total += r.value;
        incs.push(r.value);
    }
    let n = incs.len();
    Ok((total, incs[n.saturating_sub(2)], incs[n - 1]))
}

/// Checks Hypotheses 1–2 and the blow-up hypothesis on `grid`.
pub fn check_hypotheses(term: &DampingTerm, grid: &TimeGrid, tol: &Tolerances) -> Result<HypothesisReport> {
    let t_max = grid.t_max();
    if t_max < 1e3 || grid.points.len() < 10 {
        return Err(Error::GridTooShort(format!("T_max = {t_max} (need ≥ 1e3 and ≥ 10 points)")));
    }
    let certified = !term.is_custom();
    let nested = term.kind == DampingKind::IteratedLog;
    let mut derivs = Vec::with_capacity(grid.points.len());
    for &t in &grid.points {
        derivs.push(term.derivs(t)?);
    }

    // (i) positivity
    let (i_min, b_min) = derivs
        .iter()
        .enumerate()
        .map(|(i, d)| (i, d[0]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid");
    let positive = Check { holds: b_min > 0.0, witness_t: grid.points[i_min], witness_value: b_min, certified };
    if !positive.holds {
        return Err(Error::HypothesisNotSatisfied(format!("b ≤ 0 at t = {}", grid.points[i_min])));
    }

    // (ii) monotone and t b(t) → ∞
    let slopes: Vec<f64> = grid.points.iter().zip(&derivs).map(|(t, d)| (1.0 + t) * d[1] / d[0]).collect();
    let up = slopes.iter().all(|s| *s >= -tol.flat);
    let down = slopes.iter().all(|s| *s <= tol.flat);
    let tb_grows = if certified {
        term.kappa < 1.0 || (term.kind == DampingKind::LogModified)
    } else {
        let n = grid.points.len();
        let tb: Vec<f64> = grid.points.iter().zip(&derivs).map(|(t, d)| t * d[0]).collect();
        let decade_start = grid.points.partition_point(|t| *t < t_max / 10.0);
        tb[decade_start..].windows(2).all(|w| w[1] > w[0]) && tb[n - 1] > 2.0 * tb[decade_start]
    };
    let (i_sl, worst_sl) = if up {
        argmin(&slopes)
    } else {
        argmax(&slopes)
    };
    let monotone = Check {
        holds: (up || down) && tb_grows,
        witness_t: grid.points[i_sl],
        witness_value: worst_sl,
        certified,
    };

    // (iii) ((1+t)² b)^{-1} ∈ L¹ and (v) 1/b ∉ L¹
    let g3 = |t: f64| 1.0 / ((1.0 + t).powi(2) * term.b(t));
    let (int3, prev3, last3) = partial_integrals(g3, t_max, tol.quad)?;
    let g5 = |t: f64| 1.0 / term.b(t);
    let (int5, prev5, last5) = partial_integrals(g5, t_max, tol.quad)?;
    let (l1_weighted, not_l1) = if certified {
        let q = log_power(term);
        (tail_converges(term.kappa - 2.0, -q, nested), !tail_converges(term.kappa, -q, nested))
    } else {
        // Converging: increments shrink at least geometrically. Diverging:
        // increments do not shrink.
        let conv3 = last3 < 0.75 * prev3;
        let div3 = last3 >= prev3;
        let conv5 = last5 < 0.75 * prev5;
        let div5 = last5 >= 0.5 * prev5;
        if !(conv3 || div3) || !(conv5 || div5) {
            return Err(Error::GridTooShort("tail integrals neither converge nor diverge".into()));
        }
        (conv3, div5)
    };
    let item3 = Check { holds: l1_weighted, witness_t: t_max, witness_value: int3, certified };
    let item5 = Check { holds: not_l1, witness_t: t_max, witness_value: int5, certified };

    // (iv) oscillation bounds
    let mut osc = [0.0; 3];
    let mut osc_at = [0.0; 3];
    let mut grows = false;
    let decade = grid.points.partition_point(|t| *t < t_max / 10.0);
    let prev_decade = grid.points.partition_point(|t| *t < t_max / 100.0);
    for k in 1..=3 {
        let r: Vec<f64> = grid
            .points
            .iter()
            .zip(&derivs)
            .map(|(t, d)| (1.0 + t).powi(k as i32) * d[k].abs() / d[0])
            .collect();
        let (i, v) = argmax(&r);
        osc[k - 1] = v;
        osc_at[k - 1] = grid.points[i];
        if !certified {
            let last = r[decade..].iter().cloned().fold(0.0, f64::max);
            let before = r[prev_decade..decade].iter().cloned().fold(0.0, f64::max);
            grows |= last > tol.growth * before.max(1e-12);
        }
    }
    let (kmax, vmax) = argmax(&osc);
    let item4 = Check {
        holds: osc.iter().all(|v| v.is_finite()) && !grows,
        witness_t: osc_at[kmax],
        witness_value: vmax,
        certified,
    };

    // Hypothesis 2: t b' ≤ m b with m ∈ [0, 1)
    let tb: Vec<f64> = grid.points.iter().zip(&derivs).map(|(t, d)| t * d[1] / d[0]).collect();
    let (i_m, sup_m) = argmax(&tb);
    let m = sup_m.max(0.0);
    let further = FurtherCheck { holds: m < 1.0, m, witness_t: grid.points[i_m] };
    let lower = slopes.iter().map(|s| -s).fold(0.0, f64::max);

    // Blow-up hypothesis: |b'| ≤ C b², liminf b'/b² > -1
    let ratio: Vec<f64> = derivs.iter().map(|d| d[1] / (d[0] * d[0])).collect();
    let c_bound = ratio.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let liminf = ratio[decade..].iter().cloned().fold(f64::INFINITY, f64::min);
    let blowup = BlowupCheck { holds: c_bound.is_finite() && liminf > -1.0, c_bound, liminf };

    Ok(HypothesisReport {
        term: term.label().to_string(),
        hyp_b: [positive, monotone, item3, item4, item5],
        oscillation_constants: osc,
        hyp_further: further,
        lower_oscillation: lower,
        hyp_blowup: blowup,
        hyp_shape: None,
        grid_points: grid.points.len(),
        t_max,
        tolerances: *tol,
    })
}

/// Closeness check for a user-supplied shape function `eta(t) = (η, η')`.
pub fn check_shape<E: Fn(f64) -> (f64, f64)>(term: &DampingTerm, grid: &TimeGrid, eta: E, tol: &Tolerances) -> ShapeCheck {
    let t_max = grid.t_max();
    let decade = grid.points.partition_point(|t| *t < t_max / 10.0);
    let prev = grid.points.partition_point(|t| *t < t_max / 100.0);
    let close: Vec<f64> = grid
        .points
        .iter()
        .map(|&t| {
            let (e, _) = eta(t);
            (1.0 + t) * (term.b(t) / e - 2.0).abs()
        })
        .collect();
    let m = grid
        .points
        .iter()
        .map(|&t| {
            let (e, de) = eta(t);
            t * de / e
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let last = close[decade..].iter().cloned().fold(0.0, f64::max);
    let before = close[prev..decade].iter().cloned().fold(0.0, f64::max);
    let closeness = close.iter().cloned().fold(0.0, f64::max);
    ShapeCheck { holds: last <= tol.growth * before.max(1e-12) && m < 1.0, closeness, m: m.max(0.0) }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty")
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter().cloned().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty")
}

/// The shipped catalog with declared-admissible parameters.
pub fn catalog() -> Vec<DampingTerm> {
    vec![
        DampingTerm::constant(1.0).expect("valid"),
        DampingTerm::power_law(1.0, 1.0 / 3.0).expect("valid"),
        DampingTerm::power_law(1.0, -0.5).expect("valid"),
        DampingTerm::log_modified(1.0, 1.0 / 3.0, 1.0, None).expect("valid"),
        DampingTerm::log_modified(1.0, 1.0, 2.0, None).expect("valid"),
        DampingTerm::log_divided(1.0, 1.0 / 3.0, 1.0, None).expect("valid"),
        DampingTerm::iterated_log(1.0, 1.0 / 3.0, vec![1.0, 1.0], None).expect("valid"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let c = DampingTerm::power_law(1.0, 0.0).unwrap();
        assert_eq!(c.eval(7.0, 0).unwrap(), 1.0);
        let p = DampingTerm::power_law(2.0, 0.5).unwrap();
        assert!((p.eval(3.0, 0).unwrap() - 1.0).abs() < 1e-15);
        let q = DampingTerm::power_law(1.0, 1.0 / 3.0).unwrap();
        assert!((q.eval(0.0, 1).unwrap() + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fd_weights_reproduce_polynomials() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fd_weights(&x, 1);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn custom_matches_catalog() {
        let exact = DampingTerm::power_law(1.5, 0.25).unwrap();
        let custom = DampingTerm::custom("p", |t| 1.5 * (1.0 + t).powf(-0.25));
        for t in [0.0, 0.01, 1.0, 50.0] {
            let a = exact.derivs(t).unwrap();
            let b = custom.derivs(t).unwrap();
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() <= 1e-4 * a[k].abs().max(1e-3), "t={t} k={k}");
            }
        }
    }

    #[test]
    fn default_shift_matches_lower_bounds() {
        assert!((default_log_shift(0.0, 1.0) - 1.0_f64.exp() * 1.01).abs() < 1e-12);
        let c = default_log_shift(-0.5, 1.0);
        assert!((c - 2.0_f64.exp() * 1.01).abs() < 1e-12);
    }
}
