//! L² decay of the linear problem with data `(0, g)` prescribed at time `s`.
//!
//! Norms are assembled by Plancherel from the mode propagators:
//!
//! `‖∂_t^l |∇|^k v(t)‖² = (2π)^{-n} |S^{n-1}| ∫ ρ^{2k} |∂_t^l Φ̂(t,s,ρ)|² |ĝ(ρ)|² ρ^{n-1} dρ`.
//!
//! Data are radial with `ĝ(ρ) = ρ^{-a} e^{-ρ²}`. The exponent `a` sets the
//! low-frequency singularity and hence the best `L^m` space containing `g`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::bfun::BProfile;
use crate::error::{Error, Result};
use crate::modes::{propagate, PropagateOptions};
use crate::num::quad::{integrate, integrate_vec};
use crate::num::special::hyp1f1_neg;
use crate::num::{fit_line, LineFit};

/// Margin below the critical singularity `n(1 − 1/m)` used by [`RadialDatum::matched`].
pub const SINGULARITY_MARGIN: f64 = 0.04;

/// `|S^{n-1}|`.
pub fn sphere_area(n: u32) -> f64 {
    let h = 0.5 * n as f64;
    2.0 * PI.powf(h) / gamma(h)
}

/// Radial datum `ĝ(ρ) = ρ^{-a} e^{-ρ²}` in dimension `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialDatum {
    pub n: u32,
    pub m_index: f64,
    pub a: f64,
    /// `‖g‖_{L^m}`.
    pub lm_norm: f64,
    /// `‖g‖_{L^2}`.
    pub l2_norm: f64,
}

impl RadialDatum {
    pub fn new(n: u32, m_index: f64, a: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidParameter(format!("dimension must be 1, 2 or 3, got {n}")));
        }
        if !(1.0..=2.0).contains(&m_index) {
            return Err(Error::InvalidParameter(format!("m must lie in [1,2], got {m_index}")));
        }
        let nf = n as f64;
        if !(a >= 0.0) || (a > 0.0 && a >= nf * (1.0 - 1.0 / m_index)) {
            return Err(Error::InvalidParameter(format!(
                "a = {a} puts g outside L^{m_index} (need 0 or below {})",
                nf * (1.0 - 1.0 / m_index)
            )));
        }
        let mut d = RadialDatum { n, m_index, a, lm_norm: 0.0, l2_norm: 0.0 };
        d.l2_norm = d.hk_norm(0);
        d.lm_norm = d.physical_lm_norm(m_index)?;
        Ok(d)
    }

    /// The roughest datum of this family in `L^m`: `a = max(0, n(1−1/m) − margin)`.
    pub fn matched(n: u32, m_index: f64) -> Result<Self> {
        let a = (n as f64 * (1.0 - 1.0 / m_index) - SINGULARITY_MARGIN).max(0.0);
        Self::new(n, m_index, a)
    }

    pub fn fourier_profile(&self, rho: f64) -> f64 {
        rho.powf(-self.a) * (-rho * rho).exp()
    }

    /// `g(r)`, the inverse transform of the profile.
    pub fn physical_profile(&self, r: f64) -> f64 {
        let nf = self.n as f64;
        let ap = 0.5 * (nf - self.a);
        let k = (2.0 * PI).powf(-nf) * PI.powf(0.5 * nf) * (ln_gamma(ap) - ln_gamma(0.5 * nf)).exp();
        let z = 0.25 * r * r;
        if self.a == 0.0 {
            k * (-z).exp()
        } else {
            k * hyp1f1_neg(ap, 0.5 * nf, z)
        }
    }

    /// `‖g‖_{H^k}` by Plancherel, in closed form.
    pub fn hk_norm(&self, k: u32) -> f64 {
        let nf = self.n as f64;
        let c = nf - 2.0 * self.a;
        // ∫ ρ^{c+2j-1} e^{-2ρ²} dρ = Γ((c+2j)/2) / (2·2^{(c+2j)/2})
        let mut sum = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            let e = 0.5 * (c + 2.0 * j as f64);
            sum += binom * gamma(e) / (2.0 * 2f64.powf(e));
            binom *= (k - j) as f64 / (j + 1) as f64;
        }
        ((2.0 * PI).powf(-nf) * sphere_area(self.n) * sum).sqrt()
    }

    /// `‖g‖_{L^m ∩ H^k} = ‖g‖_{L^m} + ‖g‖_{H^k}`.
    pub fn lm_hk_norm(&self, k: u32) -> f64 {
        self.lm_norm + self.hk_norm(k)
    }

    /// `‖g‖_{L^q}` by radial quadrature of the physical profile up to
    /// `z = r²/4 = 400` plus the algebraic tail from the asymptotic expansion.
    pub fn physical_lm_norm(&self, q: f64) -> Result<f64> {
        let nf = self.n as f64;
        let r_cut = 40.0;
        let core = integrate(
            |r| self.physical_profile(r).abs().powf(q) * r.powf(nf - 1.0),
            0.0,
            r_cut,
            0.0,
            1e-12,
            2000,
        )?
        .value;
        let tail = if self.a == 0.0 {
            0.0
        } else {
            // g ≈ A r^{-2a'} (1 + c1/z + c2/z²), z = r²/4.
            let ap = 0.5 * (nf - self.a);
            let bp = 0.5 * nf;
            let k = (2.0 * PI).powf(-nf) * PI.powf(0.5 * nf) * (ln_gamma(ap) - ln_gamma(bp)).exp();
            let amp = k * (ln_gamma(bp) - ln_gamma(bp - ap)).exp() * 4f64.powf(ap);
            let c1 = ap * (1.0 + ap - bp);
            let c2 = c1 * (ap + 1.0) * (2.0 + ap - bp) / 2.0;
            // |g|^q ≈ amp^q r^{-2a'q} (1 + d1 4/r² + d2 16/r⁴)
            let d1 = q * c1;
            let d2 = q * c2 + 0.5 * q * (q - 1.0) * c1 * c1;
            let p = 2.0 * ap * q - nf;
            if !(p > 0.0) {
                return Err(Error::InvalidParameter(format!("g is not in L^{q}")));
            }
            let piece = |e: f64| r_cut.powf(-e) / e;
            amp.powf(q) * (piece(p) + 4.0 * d1 * piece(p + 2.0) + 16.0 * d2 * piece(p + 4.0))
        };
        Ok((sphere_area(self.n) * (core + tail)).powf(1.0 / q))
    }
}

/// `∂_t^l |∇|^k` applied to the solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Deriv {
    pub alpha: u32,
    pub l: u32,
}

impl Deriv {
    pub const U: Deriv = Deriv { alpha: 0, l: 0 };
    pub const GRAD: Deriv = Deriv { alpha: 1, l: 0 };
    pub const UT: Deriv = Deriv { alpha: 0, l: 1 };

    pub fn name(&self) -> String {
        match (self.alpha, self.l) {
            (0, 0) => "u".into(),
            (1, 0) => "grad_u".into(),
            (0, 1) => "u_t".into(),
            (a, l) => format!("d{a}x_d{l}t_u"),
        }
    }

    /// Sobolev order `[|α| + l − 1]^+` of the data norm in the general estimate.
    pub fn data_order(&self) -> u32 {
        (self.alpha + self.l).saturating_sub(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct LinearOptions {
    /// Relative quadrature tolerance per output.
    pub rel_tol: f64,
    /// Frequencies above this carry less than `e^{-2ρ²}` of the datum and are dropped.
    pub rho_max: f64,
    /// Modes whose amplitude falls below `e^{log_floor}` are treated as zero.
    pub log_floor: f64,
    pub max_panels: usize,
    /// Per-step tolerance of the mode integrator. Global amplitude errors
    /// stay near this value, well inside the quadrature tolerance.
    pub integrator_tol: f64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { rel_tol: 1e-7, rho_max: 6.0, log_floor: -100.0, max_panels: 4000, integrator_tol: 1e-8 }
    }
}

/// Norm time series for several derivatives of one solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayCurve {
    pub s: f64,
    pub times: Vec<f64>,
    /// `B(t, s)` at each time.
    pub b_clock: Vec<f64>,
    /// `b(t)` at each time.
    pub b_values: Vec<f64>,
    pub derivs: Vec<Deriv>,
    /// `values[d][j]` is the norm of derivative `d` at `times[j]`.
    pub values: Vec<Vec<f64>>,
    pub quad_evals: usize,
}

/// Norms of `∂_t^l |∇|^k v` at every time, one quadrature for all of them.
pub fn decay_curve(
    profile: &BProfile,
    datum: &RadialDatum,
    s: f64,
    times: &[f64],
    derivs: &[Deriv],
    opts: &LinearOptions,
) -> Result<DecayCurve> {
    if times.is_empty() || times[0] < s || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must be strictly ascending and start at or after s".into()));
    }
    let nf = datum.n as f64;
    let nt = times.len();
    let dim = nt * derivs.len();
    // ρ = u^{1/q} absorbs the ρ^{n-1-2a} singularity when q = n − 2a < 1.
    let q = (nf - 2.0 * datum.a).min(1.0);
    let u_max = opts.rho_max.powf(q);
    let prop_opts = PropagateOptions { tol: opts.integrator_tol, log_floor: Some(opts.log_floor), ..Default::default() };
    let f = |u: f64| -> Vec<f64> {
        let rho = u.powf(1.0 / q);
        let mut out = vec![0.0; dim];
        let Ok(prop) = propagate(profile, s, rho, times, &prop_opts) else {
            return vec![f64::NAN; dim];
        };
        let log_w = -q.ln() + (1.0 / q - 1.0) * u.ln() + (nf - 1.0 - 2.0 * datum.a) * rho.ln() - 2.0 * rho * rho;
        for (d, der) in derivs.iter().enumerate() {
            for j in 0..nt {
                let col = &prop.phi[j];
                let lv = if der.l == 0 { col.log_abs_value() } else { col.log_abs_derivative() };
                out[d * nt + j] = (log_w + 2.0 * lv + 2.0 * der.alpha as f64 * rho.ln()).exp();
            }
        }
        out
    };
    let term = profile.term();
    let k = crate::phasespace::ZoneConfig::default().sep_factor();
    let mut breaks: Vec<f64> = std::iter::once(s)
        .chain(times.iter().copied())
        .map(|t| (term.eta(t) * k).powf(q))
        .filter(|u| *u > 0.0 && *u < u_max)
        .collect();
    breaks.extend([0.5, 1.0, 2.0, 3.0].iter().map(|r: &f64| r.powf(q)));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let abs_tol = vec![1e-300; dim];
    let res = integrate_vec(f, 0.0, u_max, &breaks, dim, &abs_tol, opts.rel_tol, opts.max_panels)
        .map_err(|e| Error::QuadratureDivergence(e.to_string()))?;
    if res.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::QuadratureDivergence("non-finite integrand (propagation failed)".into()));
    }
    let c = (2.0 * PI).powf(-nf) * sphere_area(datum.n);
    let values = (0..derivs.len())
        .map(|d| (0..nt).map(|j| (c * res.values[d * nt + j]).sqrt()).collect())
        .collect();
    let b_clock = times.iter().map(|&t| profile.big_b(t, s)).collect::<Result<Vec<_>>>()?;
    Ok(DecayCurve {
        s,
        times: times.to_vec(),
        b_clock,
        b_values: times.iter().map(|&t| term.b(t)).collect(),
        derivs: derivs.to_vec(),
        values,
        quad_evals: res.evals,
    })
}

/// `‖∂_t^l |∇|^α v(t)‖_{L²}` at a single time.
pub fn l2_norm_of_solution(
    profile: &BProfile,
    datum: &RadialDatum,
    s: f64,
    t: f64,
    deriv: Deriv,
    opts: &LinearOptions,
) -> Result<f64> {
    Ok(decay_curve(profile, datum, s, &[t], &[deriv], opts)?.values[0][0])
}

/// Decay exponent in the `1 + B(t,s)` clock: `−n/2(1/m − 1/2) − |α|/2 − l`,
/// after the factor `b(t)^{-l}` has been divided out.
pub fn expected_exponent(n: u32, m_index: f64, deriv: Deriv) -> f64 {
    -(n as f64) / 2.0 * (1.0 / m_index - 0.5) - 0.5 * deriv.alpha as f64 - deriv.l as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    /// `log(norm)` against `log(1 + B(t,s))`.
    BClock,
    /// `log(b(t)^l · norm)` against `log(1 + B(t,s))`.
    ProductForm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub quantity: String,
    pub deriv: Deriv,
    pub abscissa: Abscissa,
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub expected: f64,
    /// `sup_t norm · b(s) · b(t)^l (1+B)^{-expected} / ‖g‖_{L^m∩H^k}` over the curve.
    pub prefactor: f64,
}

/// Largest residual accepted before a window counts as pre-asymptotic.
pub const MAX_FIT_RESIDUAL: f64 = 0.05;

/// Fits one derivative of a decay curve over `window`.
pub fn fit_rate(curve: &DecayCurve, datum: &RadialDatum, profile: &BProfile, d: usize, window: (f64, f64)) -> Result<RateFit> {
    let der = curve.derivs[d];
    let abscissa = if der.l > 0 { Abscissa::ProductForm } else { Abscissa::BClock };
    let scaled = |j: usize| curve.values[d][j] * curve.b_values[j].powi(der.l as i32);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in 0..curve.times.len() {
        let t = curve.times[j];
        if t >= window.0 * (1.0 - 1e-12) && t <= window.1 * (1.0 + 1e-12) {
            xs.push(curve.b_clock[j].ln_1p());
            ys.push(scaled(j).ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(format!("fit window {window:?} holds fewer than three samples")));
    }
    let LineFit { slope, intercept, residual } = fit_line(&xs, &ys);
    let expected = expected_exponent(datum.n, datum.m_index, der);
    let bs = profile.term().b(curve.s);
    let gnorm = datum.lm_hk_norm(der.data_order());
    let prefactor = (0..curve.times.len())
        .filter(|&j| curve.times[j] > curve.s)
        .map(|j| scaled(j) * bs * (1.0 + curve.b_clock[j]).powf(-expected) / gnorm)
        .fold(0.0, f64::max);
    if residual > MAX_FIT_RESIDUAL {
        return Err(Error::WindowTooEarly { residual });
    }
    Ok(RateFit { quantity: der.name(), deriv: der, abscissa, window, slope, intercept, residual, expected, prefactor })
}

/// Sample times: `s` plus log-spaced offsets up to the end of `window`, with
/// `per_decade` points per decade and the window itself sampled at the same density.
pub fn standard_times(s: f64, window: (f64, f64), per_decade: usize) -> Vec<f64> {
    let lo = 1e-2_f64;
    let decades = (window.1 - s).max(lo * 10.0).log10() - lo.log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    let mut ts = vec![s];
    ts.extend(crate::num::geomspace(lo, window.1 - s, count).into_iter().map(|d| s + d));
    ts.extend(crate::num::geomspace(window.0, window.1, per_decade * 2 + 1));
    ts.retain(|&t| t >= s);
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + x.abs()));
    ts
}

/// Decay curve on [`standard_times`] plus a rate fit for each derivative.
pub fn verify_matsumura(
    profile: &BProfile,
    datum: &RadialDatum,
    s: f64,
    derivs: &[Deriv],
    window: (f64, f64),
    opts: &LinearOptions,
) -> Result<(DecayCurve, Vec<RateFit>)> {
    let times = standard_times(s, window, 10);
    let curve = decay_curve(profile, datum, s, &times, derivs, opts)?;
    let fits = (0..derivs.len()).map(|d| fit_rate(&curve, datum, profile, d, window)).collect::<Result<Vec<_>>>()?;
    Ok((curve, fits))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub deriv: Deriv,
    pub s_values: Vec<f64>,
    /// Fitted prefactor per `s`: geometric mean of the scaled norm over the
    /// last two decades `t − s ∈ [horizon/100, horizon]`.
    pub prefactors: Vec<f64>,
    /// `max / min` of the fitted prefactors.
    pub ratio: f64,
    /// Supremum of the scaled norm over all of `t − s ∈ (0, horizon]`.
    pub sup_prefactors: Vec<f64>,
    /// `max / min` of the suprema. For `u_t` with increasing `b` this grows
    /// like `b(s)^2`: at `t = s` the norm is `‖g‖_{L^2}` while the shape is `b(s)^{-2}`.
    pub sup_ratio: f64,
}

fn spread(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Prefactors of the same datum started at each `s`, over `t − s ∈ (0, horizon]`.
pub fn s_uniformity_scan(
    profile: &BProfile,
    datum: &RadialDatum,
    s_values: &[f64],
    deriv: Deriv,
    horizon: f64,
    opts: &LinearOptions,
) -> Result<UniformityReport> {
    let (mut prefactors, mut sup_prefactors) = (Vec::with_capacity(s_values.len()), Vec::with_capacity(s_values.len()));
    let expected = expected_exponent(datum.n, datum.m_index, deriv);
    let gnorm = datum.lm_hk_norm(deriv.data_order());
    for &s in s_values {
        let offsets = crate::num::geomspace(1e-2, horizon, 61);
        let mut times = vec![s];
        times.extend(offsets.iter().map(|d| s + d));
        let curve = decay_curve(profile, datum, s, &times, &[deriv], opts)?;
        let bs = profile.term().b(s);
        let scaled: Vec<f64> = (1..times.len())
            .map(|j| curve.values[0][j] * curve.b_values[j].powi(deriv.l as i32) * bs * (1.0 + curve.b_clock[j]).powf(-expected) / gnorm)
            .collect();
        sup_prefactors.push(scaled.iter().copied().fold(0.0, f64::max));
        let tail: Vec<f64> =
            offsets.iter().zip(&scaled).filter(|(d, _)| **d >= horizon * (1e-2 - 1e-12)).map(|(_, v)| v.ln()).collect();
        prefactors.push((tail.iter().sum::<f64>() / tail.len() as f64).exp());
    }
    Ok(UniformityReport {
        deriv,
        s_values: s_values.to_vec(),
        ratio: spread(&prefactors),
        sup_ratio: spread(&sup_prefactors),
        prefactors,
        sup_prefactors,
    })
}
