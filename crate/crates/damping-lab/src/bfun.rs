//! The `B(t,s)` calculus.
//!
//! `B(t,s) = ∫_s^t 1/b` is the natural clock of effective damping, `log λ(t) =
//! ½∫_0^t b` the log of the damping exponential, and `β = exp(-∫_0^t b)`
//! controls the sign condition for blow-up. λ is kept in log space only:
//! it grows like `exp(c t^{1-κ})` and overflows long before the interesting
//! times.

use std::sync::OnceLock;

use serde::Serialize;

use crate::damping::{check_hypotheses, DampingKind, DampingTerm, HypothesisReport, TimeGrid, Tolerances};
use crate::error::{Error, Result};
use crate::num::quad;

/// Closed-form antiderivatives available for the profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClosedForm {
    Constant,
    PowerLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Integrand {
    InvB,
    B,
}

/// Cached evaluator for `B`, `log λ`, `‖β‖₁` of one damping term.
///
/// Without a closed form, cumulative integrals are tabulated eagerly on knots
/// with `(1+t_{k+1})/(1+t_k) = 1.05` up to `cache_t_max`; queries add one
/// short adaptive integral from the nearest knot.
#[derive(Debug)]
pub struct BProfile {
    term: DampingTerm,
    closed_form: Option<ClosedForm>,
    knots: Vec<f64>,
    cum_inv_b: Vec<f64>,
    cum_b: Vec<f64>,
    pub quadrature_tol: f64,
    hypotheses: OnceLock<std::result::Result<HypothesisReport, Error>>,
    beta: OnceLock<std::result::Result<f64, Error>>,
}

impl Clone for BProfile {
    fn clone(&self) -> Self {
        BProfile {
            term: self.term.clone(),
            closed_form: self.closed_form,
            knots: self.knots.clone(),
            cum_inv_b: self.cum_inv_b.clone(),
            cum_b: self.cum_b.clone(),
            quadrature_tol: self.quadrature_tol,
            hypotheses: OnceLock::new(),
            beta: OnceLock::new(),
        }
    }
}

const KNOT_RATIO: f64 = 1.05;
const CACHE_T_MAX: f64 = 1e6;

impl BProfile {
    /// Uses closed forms where the catalog provides them.
    pub fn new(term: &DampingTerm) -> Result<Self> {
        let closed = match term.kind {
            DampingKind::Constant => Some(ClosedForm::Constant),
            DampingKind::PowerLaw => Some(ClosedForm::PowerLaw),
            _ => None,
        };
        Self::build(term, closed, 1e-13)
    }

    /// Forces the quadrature path even when a closed form exists.
    pub fn quadrature_only(term: &DampingTerm, tol: f64) -> Result<Self> {
        Self::build(term, None, tol)
    }

    fn build(term: &DampingTerm, closed_form: Option<ClosedForm>, tol: f64) -> Result<Self> {
        let mut profile = BProfile {
            term: term.clone(),
            closed_form,
            knots: vec![],
            cum_inv_b: vec![],
            cum_b: vec![],
            quadrature_tol: tol,
            hypotheses: OnceLock::new(),
            beta: OnceLock::new(),
        };
        if closed_form.is_none() {
            let mut knots = vec![0.0];
            while *knots.last().unwrap() < CACHE_T_MAX {
                let k = knots.len() as f64;
                knots.push(KNOT_RATIO.powf(k) - 1.0);
            }
            let mut inv = vec![0.0];
            let mut fwd = vec![0.0];
            for w in knots.windows(2) {
                inv.push(inv.last().unwrap() + profile.raw_integral(Integrand::InvB, w[0], w[1])?);
                fwd.push(fwd.last().unwrap() + profile.raw_integral(Integrand::B, w[0], w[1])?);
            }
            profile.knots = knots;
            profile.cum_inv_b = inv;
            profile.cum_b = fwd;
        }
        Ok(profile)
    }

    pub fn term(&self) -> &DampingTerm {
        &self.term
    }

    pub fn closed_form(&self) -> Option<ClosedForm> {
        self.closed_form
    }

    fn raw_integral(&self, which: Integrand, a: f64, b: f64) -> Result<f64> {
        let term = &self.term;
        let r = match which {
            Integrand::InvB => quad::integrate(|t| 1.0 / term.b(t), a, b, 1e-300, self.quadrature_tol, 2000)?,
            Integrand::B => quad::integrate(|t| term.b(t), a, b, 1e-300, self.quadrature_tol, 2000)?,
        };
        Ok(r.value)
    }

    /// `∫_0^t` of the integrand, numerically.
    fn cumulative(&self, which: Integrand, t: f64) -> Result<f64> {
        let cum = match which {
            Integrand::InvB => &self.cum_inv_b,
            Integrand::B => &self.cum_b,
        };
        let last = self.knots.len() - 1;
        if t >= self.knots[last] {
            // Geometric subdivision of the uncached tail.
            let mut acc = cum[last];
            let mut a = self.knots[last];
            while a < t {
                let b = (2.0 * a).min(t);
                acc += self.raw_integral(which, a, b)?;
                a = b;
            }
            return Ok(acc);
        }
        let k = self.knots.partition_point(|x| *x <= t) - 1;
        Ok(cum[k] + self.raw_integral(which, self.knots[k], t)?)
    }

    /// `∫_s^t` of the integrand, avoiding cancellation for short intervals.
    fn definite(&self, which: Integrand, t: f64, s: f64) -> Result<f64> {
        if t == s {
            return Ok(0.0);
        }
        if t - s < 0.05 * (1.0 + s) {
            return self.raw_integral(which, s, t);
        }
        Ok(self.cumulative(which, t)? - self.cumulative(which, s)?)
    }

    /// `B(t,s) = ∫_s^t 1/b(τ) dτ` for `0 ≤ s ≤ t`.
    pub fn big_b(&self, t: f64, s: f64) -> Result<f64> {
        if s > t {
            return Err(Error::OrderViolation { t, s });
        }
        if s < 0.0 {
            return Err(Error::InvalidParameter(format!("s must be non-negative, got {s}")));
        }
        let (mu, k) = (self.term.mu, self.term.kappa);
        match self.closed_form {
            Some(ClosedForm::Constant) => Ok((t - s) / mu),
            Some(ClosedForm::PowerLaw) => Ok(power_primitive(1.0 + k, t, s) / mu),
            None => self.definite(Integrand::InvB, t, s),
        }
    }

    /// `B(t,0)`.
    pub fn big_b0(&self, t: f64) -> Result<f64> {
        self.big_b(t, 0.0)
    }

    /// `log λ(t) - log λ(s) = ½∫_s^t b`.
    pub fn log_lambda_ratio(&self, t: f64, s: f64) -> Result<f64> {
        if s > t {
            return Ok(-self.log_lambda_ratio(s, t)?);
        }
        let (mu, k) = (self.term.mu, self.term.kappa);
        let full = match self.closed_form {
            Some(ClosedForm::Constant) => mu * (t - s),
            Some(ClosedForm::PowerLaw) => mu * power_primitive(1.0 - k, t, s),
            None => self.definite(Integrand::B, t, s)?,
        };
        Ok(0.5 * full)
    }

    /// `log λ(t) = ½∫_0^t b`.
    pub fn log_lambda(&self, t: f64) -> Result<f64> {
        self.log_lambda_ratio(t, 0.0)
    }

    /// `β(t) = exp(-∫_0^t b) = λ(t)^{-2}`.
    pub fn beta(&self, t: f64) -> Result<f64> {
        Ok((-2.0 * self.log_lambda(t)?).exp())
    }

    /// `‖β‖_{L¹(0,∞)}` by doubling intervals with a geometric tail estimate.
    pub fn beta_l1(&self) -> Result<f64> {
        self.beta
            .get_or_init(|| {
                if self.closed_form == Some(ClosedForm::Constant) {
                    return Ok(1.0 / self.term.mu);
                }
                let mut total = 0.0;
                let mut prev_inc = f64::INFINITY;
                let (mut a, mut b) = (0.0, 1.0);
                let mut evals_err = None;
                while b < 1e15 {
                    let r = quad::integrate(
                        |t| self.beta(t).unwrap_or_else(|e| {
                            evals_err.get_or_insert(e);
                            0.0
                        }),
                        a,
                        b,
                        1e-300,
                        1e-12,
                        2000,
                    )?;
                    if let Some(e) = evals_err.take() {
                        return Err(e);
                    }
                    let inc = r.value;
                    total += inc;
                    let ratio = inc / prev_inc;
                    if inc == 0.0 || (prev_inc.is_finite() && ratio < 0.9 && inc * ratio / (1.0 - ratio) < 1e-12 * total) {
                        return Ok(total);
                    }
                    prev_inc = inc;
                    a = b;
                    b *= 2.0;
                }
                Err(Error::BetaNotIntegrable { partial: total, t: a })
            })
            .clone()
    }

    /// `b̂₁ = 1/‖β‖₁`.
    pub fn b_hat_1(&self) -> Result<f64> {
        Ok(1.0 / self.beta_l1()?)
    }

    /// Hypothesis report on the default grid, computed once.
    pub fn hypotheses(&self) -> Result<&HypothesisReport> {
        self.hypotheses
            .get_or_init(|| check_hypotheses(&self.term, &TimeGrid::default(), &Tolerances::default()))
            .as_ref()
            .map_err(|e| e.clone())
    }
}

/// `∫_s^t (1+τ)^{p-1} dτ`, stable for `t ≈ s` and `p → 0`.
fn power_primitive(p: f64, t: f64, s: f64) -> f64 {
    let l = ((t - s) / (1.0 + s)).ln_1p();
    if p == 0.0 {
        return l;
    }
    (1.0 + s).powf(p) * (p * l).exp_m1() / p
}

// ---------------------------------------------------------------------------
// Data functional for the blow-up theorem

/// Which arrangement of `u₀`, `u₁` enters the sign condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalVariant {
    /// `∫ u₀ + b̂₁ u₁`.
    #[default]
    Standard,
    /// `∫ u₁ + b̂₁ u₀`, the ordering used for the special power-law class.
    Swapped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DataFunctional {
    pub b_hat_1: f64,
    pub functional: f64,
    pub positive: bool,
    pub variant: FunctionalVariant,
}

/// Evaluates the blow-up sign functional from the data integrals.
pub fn blowup_data_functional(
    profile: &BProfile,
    u0_integral: f64,
    u1_integral: f64,
    variant: FunctionalVariant,
) -> Result<DataFunctional> {
    let b_hat_1 = profile.b_hat_1()?;
    let functional = match variant {
        FunctionalVariant::Standard => u0_integral + b_hat_1 * u1_integral,
        FunctionalVariant::Swapped => u1_integral + b_hat_1 * u0_integral,
    };
    Ok(DataFunctional { b_hat_1, functional, positive: functional > 0.0, variant })
}

// ---------------------------------------------------------------------------
// Asymptotic equivalences

/// The ten structural properties of `B` implied by the hypotheses on `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// `B(t,s) ≈ t/b(t) − s/b(s)`.
    PrimitiveShape,
    /// `b(αt) ≥ α^m b(t)` (one-sided).
    ScaleLower,
    /// `b(αt) ≤ α^{−M} b(t)` (one-sided).
    ScaleUpper,
    /// `b(s) ≈ b(t)` for `s ∈ [αt, t]`.
    Comparable,
    /// `C B(t,0) ≤ B(t,αt) ≤ B(t,0)` (one-sided upper).
    TailShare,
    /// `C B(t,0) ≤ B(αt,0) ≤ B(t,0)` (one-sided upper).
    HeadShare,
    /// `B(s,0) ≈ B(t,0)` for `s ∈ [t/2, t]`.
    HeadLarge,
    /// `B(t,s) ≈ B(t,0)` for `s ∈ [0, t/2]`.
    SpanSmall,
    /// `B(t,s) ≈ (t−s)/b(t) ≈ (t−s)/b(s)` for `s ∈ [t/2, t)`.
    SpanLarge,
    /// `b(t)(1+B(t,0)) ≈ 1+b(t)B(t,0) ≈ 1+t`.
    ClockProduct,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::PrimitiveShape,
        Property::ScaleLower,
        Property::ScaleUpper,
        Property::Comparable,
        Property::TailShare,
        Property::HeadShare,
        Property::HeadLarge,
        Property::SpanSmall,
        Property::SpanLarge,
        Property::ClockProduct,
    ];

    pub fn is_one_sided(self) -> bool {
        matches!(self, Property::ScaleLower | Property::ScaleUpper | Property::TailShare | Property::HeadShare)
    }

    fn needs_slope_bound(self) -> bool {
        self != Property::ScaleUpper
    }
}

/// `(t, s)` sampling for [`verify_equivalence`].
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize, schemars::JsonSchema)]
pub struct EquivalenceGrid {
    pub t_values: Vec<f64>,
    /// Fractions `s/t` sampled inside each property's `s`-range.
    pub s_fractions: Vec<f64>,
    /// The fixed `α ∈ (0,1)` of the scale properties.
    pub alpha: f64,
}

impl Default for EquivalenceGrid {
    fn default() -> Self {
        EquivalenceGrid {
            t_values: crate::num::geomspace(1.0, 1e4, 41),
            s_fractions: crate::num::linspace(0.0, 1.0, 21),
            alpha: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub property: Property,
    pub r_min: f64,
    pub r_max: f64,
    /// `r_max / r_min`, the empirical equivalence constant.
    pub constant: f64,
    pub bounded: bool,
    /// One-sided properties: the worst slack (`≥ 0` means the inequality holds).
    pub slack: Option<f64>,
    pub samples: usize,
}

/// Empirical ratio ranges for one property over the grid.
pub fn verify_equivalence(profile: &BProfile, property: Property, grid: &EquivalenceGrid) -> Result<EquivalenceReport> {
    let hyp = profile.hypotheses()?;
    if !hyp.hyp_b_all() {
        return Err(Error::HypothesisNotSatisfied(format!("{} fails the basic hypotheses", hyp.term)));
    }
    if property.needs_slope_bound() && !hyp.hyp_further.holds {
        return Err(Error::HypothesisNotSatisfied(format!("{} fails t b' ≤ m b with m < 1", hyp.term)));
    }
    let term = profile.term();
    let alpha = grid.alpha;
    let m = hyp.hyp_further.m;
    let big_m = hyp.lower_oscillation;
    let mut ratios = Vec::new();
    let mut slack = f64::INFINITY;
    let frac_in = |lo: f64, hi: f64| grid.s_fractions.iter().copied().filter(move |f| *f >= lo && *f <= hi);
    for &t in &grid.t_values {
        let bt = term.b(t);
        match property {
            Property::PrimitiveShape => {
                for f in frac_in(0.0, 0.999) {
                    let s = f * t;
                    let shape = t / bt - s / term.b(s);
                    ratios.push(profile.big_b(t, s)? / shape);
                }
            }
            Property::ScaleLower => {
                let r = term.b(alpha * t) / (alpha.powf(m) * bt);
                slack = slack.min(r - 1.0);
                ratios.push(r);
            }
            Property::ScaleUpper => {
                let r = term.b(alpha * t) * alpha.powf(big_m) / bt;
                slack = slack.min(1.0 - r);
                ratios.push(r);
            }
            Property::Comparable => {
                for f in frac_in(alpha, 1.0) {
                    ratios.push(term.b(f * t) / bt);
                }
            }
            Property::TailShare => {
                let r = profile.big_b(t, alpha * t)? / profile.big_b0(t)?;
                slack = slack.min(1.0 - r);
                ratios.push(r);
            }
            Property::HeadShare => {
                let r = profile.big_b0(alpha * t)? / profile.big_b0(t)?;
                slack = slack.min(1.0 - r);
                ratios.push(r);
            }
            Property::HeadLarge => {
                let b0 = profile.big_b0(t)?;
                for f in frac_in(0.5, 1.0) {
                    ratios.push(profile.big_b0(f * t)? / b0);
                }
            }
            Property::SpanSmall => {
                let b0 = profile.big_b0(t)?;
                for f in frac_in(0.0, 0.5) {
                    ratios.push(profile.big_b(t, f * t)? / b0);
                }
            }
            Property::SpanLarge => {
                for f in frac_in(0.5, 0.999) {
                    let s = f * t;
                    let bts = profile.big_b(t, s)?;
                    ratios.push(bts * bt / (t - s));
                    ratios.push(bts * term.b(s) / (t - s));
                }
            }
            Property::ClockProduct => {
                let b0 = profile.big_b0(t)?;
                ratios.push(bt * (1.0 + b0) / (1.0 + t));
                ratios.push((1.0 + bt * b0) / (1.0 + t));
            }
        }
    }
    let r_min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let finite = r_min > 0.0 && r_max.is_finite();
    // Roundoff allowance for one-sided inequalities that are tight (α^m with m fitted on a grid).
    let slack_ok = !property.is_one_sided() || slack >= -1e-9;
    Ok(EquivalenceReport {
        property,
        r_min,
        r_max,
        constant: r_max / r_min,
        bounded: finite && slack_ok,
        slack: property.is_one_sided().then_some(slack),
        samples: ratios.len(),
    })
}
