//! Exponent arithmetic and weighted Gagliardo–Nirenberg checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semilinear::{grid_l2, BoxGrid, Spectral};

pub use crate::num::{fit_line, fit_loglog, LineFit};

/// `1 + 2/n`.
pub fn p_fujita(n: u32) -> f64 {
    1.0 + 2.0 / n as f64
}

/// `n/(n−2)` for `n ≥ 3`, `∞` otherwise.
pub fn p_gn(n: u32) -> f64 {
    if n >= 3 {
        n as f64 / (n as f64 - 2.0)
    } else {
        f64::INFINITY
    }
}

/// `2* = 2n/(n−2)` for `n ≥ 3`, `∞` otherwise.
pub fn two_star(n: u32) -> f64 {
    2.0 * p_gn(n)
}

/// `θ(q) = n/2 − n/q`. The endpoints `q = 2` and `q = 2*` return 0 and 1
/// exactly.
pub fn theta(n: u32, q: f64) -> f64 {
    if q == 2.0 {
        0.0
    } else if n >= 3 && q == two_star(n) {
        1.0
    } else {
        n as f64 / 2.0 - n as f64 / q
    }
}

/// Whether `q` lies in the Gagliardo–Nirenberg range: `2 ≤ q < ∞`, and
/// `q ≤ 2*` when `n ≥ 3`.
pub fn q_in_gn_range(n: u32, q: f64) -> bool {
    q >= 2.0 && q.is_finite() && q <= two_star(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Weighted-energy data, `p > p_Fuj(n)` and `p ≤ p_GN(n)` for `n ≥ 3`.
    Main,
    /// `L¹ ∩ H¹` data, `n ≤ 4`.
    Low,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// The violated clause when not admissible.
    pub reason: Option<String>,
}

impl Admissibility {
    fn ok() -> Self {
        Admissibility { admissible: true, reason: None }
    }

    fn fail(reason: String) -> Self {
        Admissibility { admissible: false, reason: Some(reason) }
    }
}

pub fn admissible(n: u32, p: f64, theorem: Theorem) -> Admissibility {
    if n == 0 {
        return Admissibility::fail("dimension must be at least 1".into());
    }
    let fuj = p_fujita(n);
    match theorem {
        Theorem::Main => {
            if !(p > fuj) {
                Admissibility::fail(format!("p = {p} must exceed p_Fuj({n}) = {fuj}"))
            } else if n >= 3 && p > p_gn(n) {
                Admissibility::fail(format!("p = {p} must not exceed p_GN({n}) = {}", p_gn(n)))
            } else {
                Admissibility::ok()
            }
        }
        Theorem::Low => match n {
            1 | 2 if p > fuj => Admissibility::ok(),
            1 | 2 => Admissibility::fail(format!("p = {p} must exceed p_Fuj({n}) = {fuj}")),
            3 if (2.0..=3.0).contains(&p) => Admissibility::ok(),
            3 => Admissibility::fail(format!("n = 3 requires 2 <= p <= 3, got {p}")),
            4 if p == 2.0 => Admissibility::ok(),
            4 => Admissibility::fail(format!("n = 4 requires p = 2, got {p}")),
            _ => Admissibility::fail(format!("n = {n} exceeds 4")),
        },
    }
}

/// Critical exponents and interpolation weights for one `(n, p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentTable {
    pub n: u32,
    pub p: f64,
    pub p_fuj: f64,
    pub p_gn: f64,
    pub two_star: f64,
    pub theta_p: f64,
    pub theta_2p: f64,
    pub theta_p_plus_1: f64,
    pub main: Admissibility,
    pub low: Admissibility,
    /// Whether `p + 1` and `2p` lie in the Gagliardo–Nirenberg range.
    pub gn_range: bool,
}

impl ExponentTable {
    pub fn new(n: u32, p: f64) -> Self {
        ExponentTable {
            n,
            p,
            p_fuj: p_fujita(n),
            p_gn: p_gn(n),
            two_star: two_star(n),
            theta_p: theta(n, p),
            theta_2p: theta(n, 2.0 * p),
            theta_p_plus_1: theta(n, p + 1.0),
            main: admissible(n, p, Theorem::Main),
            low: admissible(n, p, Theorem::Low),
            gn_range: q_in_gn_range(n, p + 1.0) && q_in_gn_range(n, 2.0 * p),
        }
    }
}

/// The three equal expressions of the decay-exponent bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub n: u32,
    pub p: f64,
    /// `(1−θ(p+1))/2 − (1−2/(p+1))(n/4+1/2)`,
    /// `(n/4+1)/p + (1−θ(2p))/2 − (n/4+1/2)`, `(1−(p−1)n/2)/p`.
    pub values: [f64; 3],
    /// `|v₀−v₁|`, `|v₁−v₂|`, `|v₀−v₂|`.
    pub residuals: [f64; 3],
    /// Sign of the common value: `−1` iff `p > p_Fuj(n)`.
    pub sign: i8,
}

impl IdentityCheck {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Whether all three expressions have the sign of the last one. The
    /// first expression equals `(n+1)/(p+1) − n/2`, which matches the other
    /// two only at `p = p_Fuj(n)` but changes sign there as well.
    pub fn signs_agree(&self) -> bool {
        let s = |v: f64| if v.abs() < 1e-12 { 0 } else if v < 0.0 { -1 } else { 1 };
        self.values.iter().all(|&v| s(v) == s(self.values[2]))
    }
}

pub fn exponent_identity_check(n: u32, p: f64) -> Result<IdentityCheck> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    let nf = n as f64;
    let v0 = (1.0 - theta(n, p + 1.0)) / 2.0 - (1.0 - 2.0 / (p + 1.0)) * (nf / 4.0 + 0.5);
    let v1 = (nf / 4.0 + 1.0) / p + (1.0 - theta(n, 2.0 * p)) / 2.0 - (nf / 4.0 + 0.5);
    let v2 = (1.0 - (p - 1.0) * nf / 2.0) / p;
    let sign = if v2 < 0.0 {
        -1
    } else if v2 > 0.0 {
        1
    } else {
        0
    };
    Ok(IdentityCheck {
        n,
        p,
        values: [v0, v1, v2],
        residuals: [(v0 - v1).abs(), (v1 - v2).abs(), (v0 - v2).abs()],
        sign,
    })
}

/// Exponents of `1+B` in the two quantities that must stay bounded,
/// at slack `ε`; both are `≤ 0` for small `ε` iff `p > p_Fuj(n)`.
pub fn boundedness_exponents(n: u32, p: f64, eps: f64) -> [f64; 2] {
    let nf = n as f64;
    let w1 = (1.0 - theta(n, p + 1.0)) / 2.0 - (1.0 - 2.0 / (p + 1.0) - eps) * (nf / 4.0 + 0.5) + eps;
    let w2 = (nf / 4.0 + 1.0 + eps) / p + (1.0 - theta(n, 2.0 * p)) / 2.0 - (1.0 - eps) * (nf / 4.0 + 0.5);
    [w1, w2]
}

// ---------------------------------------------------------------------------
// Weighted Gagliardo–Nirenberg inequalities

/// A weight `ψ` sampled on a grid, with its Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiSnapshot {
    pub values: Vec<f64>,
    pub laplacian: Vec<f64>,
}

impl PsiSnapshot {
    /// `ψ = α|x|²/(1+B)`, `Δψ = 2nα/(1+B)`.
    pub fn quadratic(grid: &BoxGrid, alpha: f64, big_b: f64) -> Self {
        let c = 1.0 + big_b;
        PsiSnapshot {
            values: grid.radius_sq().into_iter().map(|r2| alpha * r2 / c).collect(),
            laplacian: vec![2.0 * grid.dimension as f64 * alpha / c; grid.len()],
        }
    }

    pub fn laplacian_inf(&self) -> f64 {
        self.laplacian.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum GnVariant {
    /// `‖e^{σψ}∇^j v‖ ≤ ‖∇^j v‖^{1−σ} ‖e^{ψ}∇^j v‖^σ`, `ψ ≥ 0`.
    I,
    /// `‖∇(e^{σψ}v)‖ ≤ ‖e^{σψ}∇v‖`, `Δψ ≥ 0`.
    Ii,
    /// `‖e^{σψ}v‖_q ≲ ‖e^{σψ}v‖^{1−θ(q)} ‖e^{σψ}∇v‖^{θ(q)}`, constant recorded only.
    Iii,
    /// `‖e^{σψ}v‖_q ≤ C(t)^{−(1−θ(q))/2} ‖e^{σψ}∇v‖`, `C(t) = inf Δψ > 0`.
    Iv,
}

impl GnVariant {
    pub const ALL: [GnVariant; 4] = [GnVariant::I, GnVariant::Ii, GnVariant::Iii, GnVariant::Iv];

    pub fn name(self) -> &'static str {
        match self {
            GnVariant::I => "i",
            GnVariant::Ii => "ii",
            GnVariant::Iii => "iii",
            GnVariant::Iv => "iv",
        }
    }

    /// Whether the inequality comes with an explicit constant.
    pub fn is_explicit(self) -> bool {
        self != GnVariant::Iii
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnParams {
    pub sigma: f64,
    pub q: f64,
    /// Derivative order `j ∈ {0, 1}` for variant (i).
    pub order: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GnResult {
    pub variant: GnVariant,
    pub params: GnParams,
    pub lhs: f64,
    /// Right-hand side; for (iii) without the unknown constant.
    pub rhs: f64,
    /// `lhs/rhs`; the empirical constant for (iii).
    pub ratio: f64,
    /// `None` for (iii).
    pub holds: Option<bool>,
    /// For (iv): the right-hand side with `σC(t)` in place of `C(t)`.
    pub sigma_scaled_rhs: Option<f64>,
}

pub const GN_SLACK: f64 = 1e-8;

fn lq_norm(grid: &BoxGrid, v: &[f64], q: f64) -> f64 {
    (v.iter().map(|x| x.abs().powf(q)).sum::<f64>() * grid.cell_volume()).powf(1.0 / q)
}

fn vector_l2(grid: &BoxGrid, comps: &[Vec<f64>]) -> f64 {
    let s: f64 = comps.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>()).sum();
    (s * grid.cell_volume()).sqrt()
}

fn weighted(comps: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    comps.iter().map(|c| c.iter().zip(w).map(|(a, b)| a * b).collect()).collect()
}

/// Evaluates one variant by grid quadrature with spectral derivatives.
pub fn gn_check(
    grid: &BoxGrid,
    v: &[f64],
    psi: &PsiSnapshot,
    params: GnParams,
    variant: GnVariant,
) -> Result<GnResult> {
    let GnParams { sigma, q, order } = params;
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::InvalidParameter(format!("sigma must lie in [0,1], got {sigma}")));
    }
    let n = grid.dimension as u32;
    if !q_in_gn_range(n, q) {
        return Err(Error::InvalidParameter(format!("q = {q} is outside the Gagliardo-Nirenberg range for n = {n}")));
    }
    if order > 1 {
        return Err(Error::InvalidParameter(format!("derivative order must be 0 or 1, got {order}")));
    }
    let psi_min = psi.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let lap_inf = psi.laplacian_inf();
    match variant {
        GnVariant::I if psi_min < 0.0 => {
            return Err(Error::HypothesisViolated(format!("psi >= 0 fails (min {psi_min:e})")))
        }
        GnVariant::Ii | GnVariant::Iii if lap_inf < 0.0 => {
            return Err(Error::HypothesisViolated(format!("laplacian psi >= 0 fails (inf {lap_inf:e})")))
        }
        GnVariant::Iv if psi_min < 0.0 || !(lap_inf > 0.0) => {
            return Err(Error::HypothesisViolated(format!(
                "needs psi >= 0 and inf laplacian psi > 0 (min psi {psi_min:e}, inf {lap_inf:e})"
            )))
        }
        _ => {}
    }
    let spectral = Spectral::new(*grid);
    let grad_v = spectral.gradient(&spectral.forward_real(v));
    let e_sigma: Vec<f64> = psi.values.iter().map(|p| (sigma * p).exp()).collect();
    let e_one: Vec<f64> = psi.values.iter().map(|p| p.exp()).collect();
    let w: Vec<f64> = v.iter().zip(&e_sigma).map(|(a, b)| a * b).collect();
    let sigma_grad = vector_l2(grid, &weighted(&grad_v, &e_sigma));

    let (lhs, rhs, sigma_scaled_rhs) = match variant {
        GnVariant::I => {
            let comps: Vec<Vec<f64>> = if order == 0 { vec![v.to_vec()] } else { grad_v.clone() };
            let lhs = vector_l2(grid, &weighted(&comps, &e_sigma));
            let plain = vector_l2(grid, &comps);
            let full = vector_l2(grid, &weighted(&comps, &e_one));
            (lhs, plain.powf(1.0 - sigma) * full.powf(sigma), None)
        }
        GnVariant::Ii => {
            let grad_w = spectral.gradient(&spectral.forward_real(&w));
            (vector_l2(grid, &grad_w), sigma_grad, None)
        }
        GnVariant::Iii => {
            let th = theta(n, q);
            (lq_norm(grid, &w, q), grid_l2(grid, &w).powf(1.0 - th) * sigma_grad.powf(th), None)
        }
        GnVariant::Iv => {
            let expo = -(1.0 - theta(n, q)) / 2.0;
            let rhs = lap_inf.powf(expo) * sigma_grad;
            let scaled = if sigma > 0.0 { (sigma * lap_inf).powf(expo) * sigma_grad } else { f64::INFINITY };
            (lq_norm(grid, &w, q), rhs, Some(scaled))
        }
    };
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    let holds = variant.is_explicit().then(|| lhs <= rhs * (1.0 + GN_SLACK));
    Ok(GnResult { variant, params, lhs, rhs, ratio, holds, sigma_scaled_rhs })
}

/// Ensemble configuration for randomized bump tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GnEnsembleConfig {
    pub count: usize,
    pub seed: u64,
    pub alpha: f64,
    /// `B(t,0)` at which the weight is frozen.
    pub big_b: f64,
    pub half_width: f64,
    pub points: usize,
    pub center_range: f64,
    pub width_min: f64,
    pub width_max: f64,
    /// Integrability exponent for (iii) and (iv).
    pub q: f64,
}

impl Default for GnEnsembleConfig {
    fn default() -> Self {
        GnEnsembleConfig {
            count: 100,
            seed: 7,
            alpha: 0.125,
            big_b: 1.0,
            half_width: 12.0,
            points: 2048,
            center_range: 3.0,
            width_min: 0.5,
            width_max: 4.0,
            q: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GnEnsembleReport {
    pub variant: GnVariant,
    pub config: GnEnsembleConfig,
    pub results: Vec<GnResult>,
    pub failures: usize,
    pub max_ratio: f64,
    /// (iv) only: failures against the `σC(t)` constant.
    pub sigma_scaled_failures: Option<usize>,
}

impl GnEnsembleReport {
    pub fn all_hold(&self) -> bool {
        self.failures == 0
    }
}

/// Tests one variant on `count` seeded random one-dimensional bumps
/// `A exp(1 − 1/(1 − ((x−c)/w)²))` with random `σ ∈ [0,1]`.
pub fn gn_ensemble(variant: GnVariant, cfg: &GnEnsembleConfig) -> Result<GnEnsembleReport> {
    let grid = BoxGrid::new(1, cfg.half_width, cfg.points)?;
    let psi = PsiSnapshot::quadratic(&grid, cfg.alpha, cfg.big_b);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (variant as u64).wrapping_mul(0x9E37_79B9));
    let mut results = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let c = rng.gen_range(-cfg.center_range..=cfg.center_range);
        let w = rng.gen_range(cfg.width_min..=cfg.width_max);
        let a = rng.gen_range(0.1..=2.0);
        let sigma: f64 = rng.gen_range(0.0..=1.0);
        if (c.abs() + w) >= cfg.half_width {
            return Err(Error::InvalidParameter("bump support leaves the box".into()));
        }
        let v: Vec<f64> = (0..grid.len())
            .map(|j| {
                let z = (grid.coord(j) - c) / w;
                if z.abs() < 1.0 {
                    a * (1.0 - 1.0 / (1.0 - z * z)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let params = GnParams { sigma, q: cfg.q, order: i % 2 };
        results.push(gn_check(&grid, &v, &psi, params, variant)?);
    }
    let failures = results.iter().filter(|r| r.holds == Some(false)).count();
    let max_ratio = results.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let sigma_scaled_failures = (variant == GnVariant::Iv).then(|| {
        results.iter().filter(|r| r.sigma_scaled_rhs.is_some_and(|s| r.lhs > s * (1.0 + GN_SLACK))).count()
    });
    Ok(GnEnsembleReport { variant, config: *cfg, results, failures, max_ratio, sigma_scaled_failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_exponents() {
        assert_eq!(p_gn(3), 3.0);
        assert_eq!(p_gn(4), 2.0);
        assert_eq!(p_fujita(2), 2.0);
        assert!(p_gn(2).is_infinite());
        for n in 3..40 {
            assert_eq!(theta(n, two_star(n)), 1.0);
        }
    }

    #[test]
    fn identity_examples() {
        let c = exponent_identity_check(1, 4.0).unwrap();
        assert!((c.values[2] + 0.125).abs() < 1e-15);
        assert!(c.residuals[1] < 1e-15);
        // The L^{p+1} expression is (n+1)/(p+1) - n/2 = -1/10, not -1/8.
        assert!((c.values[0] + 0.1).abs() < 1e-15);
        assert!(c.signs_agree());
        let crit = exponent_identity_check(2, 2.0).unwrap();
        assert_eq!(crit.values[2], 0.0);
        assert!(crit.max_residual() < 1e-15);
    }
}
