//! Zones of the extended phase space `(t, |ξ|)`.
//!
//! With `η = b/2` and `⟨ξ⟩_η = √||ξ|² − η²|`, the ratio `⟨ξ⟩_η/η` decides
//! whether a Fourier mode oscillates (hyperbolic), is transitional
//! (pseudo-differential), sits near the double root (reduced), or is
//! overdamped (elliptic).

use serde::{Deserialize, Serialize};

use crate::damping::DampingTerm;
use crate::error::{Error, Result};

/// Zone thresholds. Defaults `ε = 0.1`, `N = 4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    pub eps: f64,
    #[serde(rename = "N")]
    pub n: f64,
    /// `C` in `δ = Cε`, the loss exponent of the reduced-zone estimate.
    pub delta_c: f64,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        ZoneConfig { eps: 0.1, n: 4.0, delta_c: 1.0 }
    }
}

impl ZoneConfig {
    pub fn new(eps: f64, n: f64) -> Result<Self> {
        let cfg = ZoneConfig { eps, n, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if !(self.n > self.eps) {
            return Err(Error::InvalidParameter(format!("N must exceed eps, got {}", self.n)));
        }
        if !(self.delta() < 0.5 && self.delta_c > 0.0) {
            return Err(Error::InvalidParameter(format!("delta = C*eps must lie in (0, 1/2), got {}", self.delta())));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.delta_c * self.eps
    }

    /// `√(1 − ε²)`, the factor on the elliptic/reduced separating curve.
    pub fn sep_factor(&self) -> f64 {
        (1.0 - self.eps * self.eps).sqrt()
    }
}

/// Cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, cubic smoothstep in between.
pub fn chi(zeta: f64) -> f64 {
    let x = (2.0 * (zeta - 0.5)).clamp(0.0, 1.0);
    1.0 - x * x * (3.0 - 2.0 * x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneLabel {
    Hyperbolic,
    PseudoDiff,
    Reduced,
    Elliptic,
}

impl ZoneLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ZoneLabel::Hyperbolic => "hyperbolic",
            ZoneLabel::PseudoDiff => "pseudo_diff",
            ZoneLabel::Reduced => "reduced",
            ZoneLabel::Elliptic => "elliptic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZonePoint {
    pub t: f64,
    pub xi_norm: f64,
    pub eta: f64,
    /// `m = |ξ|² − (b²/4 + b'/2)`.
    pub m_val: f64,
    pub h_val: f64,
    pub label: ZoneLabel,
}

/// `m(t,ξ) = |ξ|² − (b²/4 + b'/2)`.
pub fn m_symbol(b: f64, db: f64, xi: f64) -> f64 {
    xi * xi - (0.25 * b * b + 0.5 * db)
}

/// Label from `|ξ|` and `η` alone. Ties go to the later zone in the order
/// reduced < elliptic < pseudo-differential < hyperbolic.
pub fn label_of(cfg: &ZoneConfig, eta: f64, xi: f64) -> ZoneLabel {
    let bracket = (xi * xi - eta * eta).abs().sqrt();
    let ratio = bracket / eta;
    if xi >= eta && ratio >= cfg.n {
        ZoneLabel::Hyperbolic
    } else if xi >= eta && ratio >= cfg.eps {
        ZoneLabel::PseudoDiff
    } else if xi <= eta && ratio >= cfg.eps {
        ZoneLabel::Elliptic
    } else {
        ZoneLabel::Reduced
    }
}

/// `h = χ(⟨ξ⟩/(εη)) εη + (1 − χ) √|m|`.
pub fn h_symbol(cfg: &ZoneConfig, eta: f64, m: f64, xi: f64) -> f64 {
    let bracket = (xi * xi - eta * eta).abs().sqrt();
    let c = chi(bracket / (cfg.eps * eta));
    c * cfg.eps * eta + (1.0 - c) * m.abs().sqrt()
}

pub fn classify(term: &DampingTerm, cfg: &ZoneConfig, t: f64, xi_norm: f64) -> ZonePoint {
    let (b, db) = term.b_and_db(t);
    let eta = 0.5 * b;
    let m_val = m_symbol(b, db, xi_norm);
    ZonePoint {
        t,
        xi_norm,
        eta,
        m_val,
        h_val: h_symbol(cfg, eta, m_val, xi_norm),
        label: label_of(cfg, eta, xi_norm),
    }
}

/// Solves `η(t)√(1−ε²) = |ξ|` on `[0, ∞)`; `None` when `|ξ|` is outside the
/// range of `η√(1−ε²)`.
pub fn separating_time(term: &DampingTerm, cfg: &ZoneConfig, xi_norm: f64) -> Result<Option<f64>> {
    if !(xi_norm > 0.0) {
        return Err(Error::InvalidParameter("separating time needs |xi| > 0".into()));
    }
    let k = cfg.sep_factor();
    let g = |t: f64| term.eta(t) * k - xi_norm;
    let mut a = 0.0;
    let mut ga = g(a);
    if ga == 0.0 {
        return Ok(Some(0.0));
    }
    let mut b = 1.0;
    let mut trend = 0.0_f64;
    while b <= 1e15 {
        let gb = g(b);
        let step = gb - ga;
        if trend * step < 0.0 {
            return Err(Error::NonMonotoneEta { a, b });
        }
        if step != 0.0 {
            trend = step;
        }
        if gb == 0.0 {
            return Ok(Some(b));
        }
        if (ga > 0.0) != (gb > 0.0) {
            let root = crate::num::bisect(g, a, b, 1e-13);
            return Ok(Some(root));
        }
        a = b;
        ga = gb;
        b *= 2.0;
    }
    Ok(None)
}

/// First time `t ≥ s` on the elliptic/reduced separating curve, `∞` if none.
pub fn separating_time_after(term: &DampingTerm, cfg: &ZoneConfig, s: f64, xi_norm: f64) -> Result<f64> {
    Ok(match separating_time(term, cfg, xi_norm)? {
        Some(t) if t >= s => t,
        _ => f64::INFINITY,
    })
}

/// `Θ(t,s) = max{η(s), η(t)} √(1−ε²)`.
pub fn theta(term: &DampingTerm, cfg: &ZoneConfig, t: f64, s: f64) -> f64 {
    term.eta(s).max(term.eta(t)) * cfg.sep_factor()
}

/// Ordered zone itinerary of the ray `{(t, |ξ|) : t ∈ [s, t_max]}`.
pub fn transition_sequence(
    term: &DampingTerm,
    cfg: &ZoneConfig,
    s: f64,
    xi_norm: f64,
    t_max: f64,
) -> Vec<(ZoneLabel, f64)> {
    let label = |t: f64| label_of(cfg, term.eta(t), xi_norm);
    let mut out = vec![(label(s), s)];
    if t_max <= s {
        return out;
    }
    let mut samples = vec![s];
    let span = t_max - s;
    samples.extend(crate::num::geomspace(span * 1e-9, span, 4000).into_iter().map(|d| s + d));
    for w in samples.windows(2) {
        refine(&label, w[0], label(w[0]), w[1], label(w[1]), &mut out, 0);
    }
    out
}

fn refine<L: Fn(f64) -> ZoneLabel>(
    label: &L,
    a: f64,
    la: ZoneLabel,
    b: f64,
    lb: ZoneLabel,
    out: &mut Vec<(ZoneLabel, f64)>,
    depth: usize,
) {
    if la == lb {
        return;
    }
    if depth > 60 || b - a <= 1e-12 * (1.0 + b) {
        if out.last().map(|x| x.0) != Some(lb) {
            out.push((lb, b));
        }
        return;
    }
    let m = 0.5 * (a + b);
    let lm = label(m);
    refine(label, a, la, m, lm, out, depth + 1);
    refine(label, m, lm, b, lb, out, depth + 1);
}
