//! Weighted energies and the decay functionals tracked along a run.
//!
//! The weight is `ψ(t,x) = α|x|²/(1+B(t,0))`. Weighted integrals are taken
//! over the exact support ball `|x| ≤ K + t` only, and grid values whose
//! unweighted density is below `noise_floor` times the current maximum are
//! dropped: `e^{2ψ}` reaches `e^{2αt}` near the light cone, which would
//! otherwise amplify FFT roundoff into the result.

use serde::{Deserialize, Serialize};

use super::spectral::BoxGrid;
use crate::bfun::BProfile;
use crate::error::Result;
use crate::num::fit_line;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub alpha: f64,
    /// Relative threshold below which grid values are treated as roundoff.
    pub noise_floor: f64,
}

/// `ψ = α|x|²/(1+B)`.
pub fn psi(alpha: f64, r2: f64, big_b: f64) -> f64 {
    alpha * r2 / (1.0 + big_b)
}

/// `ψ_t = −α|x|²/((1+B)² b)`, using `∂_t B(t,0) = 1/b`.
pub fn psi_t(alpha: f64, r2: f64, big_b: f64, b: f64) -> f64 {
    -alpha * r2 / ((1.0 + big_b).powi(2) * b)
}

/// `|∇ψ|² = 4α²|x|²/(1+B)²`.
pub fn grad_psi_sq(alpha: f64, r2: f64, big_b: f64) -> f64 {
    4.0 * alpha * alpha * r2 / (1.0 + big_b).powi(2)
}

/// `Δψ = 2nα/(1+B)`, constant in `x`.
pub fn laplacian_psi(alpha: f64, n: usize, big_b: f64) -> f64 {
    2.0 * n as f64 * alpha / (1.0 + big_b)
}

/// `b ψ_t + |∇ψ|²` with the factor `b` cancelled symbolically:
/// `−α(1−4α)|x|²/(1+B)²`. Exactly zero at `α = 1/4`.
pub fn weight_defect(alpha: f64, r2: f64, big_b: f64) -> f64 {
    -alpha * (1.0 - 4.0 * alpha) * r2 / (1.0 + big_b).powi(2)
}

/// Pointwise weight conditions at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightCheck {
    pub t: f64,
    /// Max over the grid of `b ψ_t + |∇ψ|²`; must be `≤ 0`.
    pub defect_max: f64,
    pub psi_min: f64,
    pub psi_t_max: f64,
    pub laplacian_psi: f64,
}

impl WeightCheck {
    pub fn holds(&self) -> bool {
        self.defect_max <= 0.0 && self.psi_min >= 0.0 && self.psi_t_max <= 0.0 && self.laplacian_psi > 0.0
    }
}

pub fn check_weight(grid: &BoxGrid, r2: &[f64], alpha: f64, t: f64, big_b: f64, b: f64) -> WeightCheck {
    let mut out = WeightCheck {
        t,
        defect_max: f64::NEG_INFINITY,
        psi_min: f64::INFINITY,
        psi_t_max: f64::NEG_INFINITY,
        laplacian_psi: laplacian_psi(alpha, grid.dimension, big_b),
    };
    for &r in r2 {
        out.defect_max = out.defect_max.max(weight_defect(alpha, r, big_b));
        out.psi_min = out.psi_min.min(psi(alpha, r, big_b));
        out.psi_t_max = out.psi_t_max.max(psi_t(alpha, r, big_b, b));
    }
    out
}

/// Physical-space state at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
}

impl Snapshot {
    fn grad_sq(&self, i: usize) -> f64 {
        self.grad.iter().map(|g| g[i] * g[i]).sum()
    }
}

/// `I_α = (∫ e^{2α|x|²}(u₀² + |∇u₀|² + u₁²))^{1/2}` over the data support.
pub fn initial_weighted_norm(grid: &BoxGrid, r2: &[f64], alpha: f64, support_radius: f64, data: &Snapshot) -> f64 {
    let reach = (support_radius + grid.spacing()).powi(2);
    let s: f64 = (0..grid.len())
        .filter(|&i| r2[i] <= reach)
        .map(|i| (2.0 * alpha * r2[i]).exp() * (data.u[i] * data.u[i] + data.grad_sq(i) + data.ut[i] * data.ut[i]))
        .sum();
    (s * grid.cell_volume()).sqrt()
}

/// Time series of norms and weighted functionals along one run.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyLedger {
    pub dimension: usize,
    pub alpha: f64,
    pub noise_floor: f64,
    pub support_radius: f64,
    pub i_alpha: f64,
    pub times: Vec<f64>,
    pub big_b: Vec<f64>,
    pub b_values: Vec<f64>,
    pub l2: Vec<f64>,
    pub grad_l2: Vec<f64>,
    pub ut_l2: Vec<f64>,
    /// `E(t) = ½∫e^{2ψ}(u_t² + |∇u|²)`.
    pub weighted_e: Vec<f64>,
    /// `‖e^{ψ}u‖`, whose growth is at most linear in `t`.
    pub weighted_l2: Vec<f64>,
    pub w_vals: Vec<f64>,
    pub m_running: Vec<f64>,
    /// `(1+B)^{n/4}‖u‖`, `(1+B)^{n/4+1/2}‖∇u‖`, `(1+B)^{n/4} b(1+B)‖u_t‖`.
    pub x_components: Vec<[f64; 3]>,
    pub weight_checks: Vec<WeightCheck>,
}

impl EnergyLedger {
    pub fn new(grid: &BoxGrid, params: WeightParams, support_radius: f64, i_alpha: f64) -> Self {
        EnergyLedger {
            dimension: grid.dimension,
            alpha: params.alpha,
            noise_floor: params.noise_floor,
            support_radius,
            i_alpha,
            times: vec![],
            big_b: vec![],
            b_values: vec![],
            l2: vec![],
            grad_l2: vec![],
            ut_l2: vec![],
            weighted_e: vec![],
            weighted_l2: vec![],
            w_vals: vec![],
            m_running: vec![],
            x_components: vec![],
            weight_checks: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends every tracked quantity for `snap`.
    pub fn track(&mut self, grid: &BoxGrid, r2: &[f64], profile: &BProfile, snap: &Snapshot) -> Result<()> {
        let t = snap.t;
        let big_b = profile.big_b(t, 0.0)?;
        let b = profile.term().b(t);
        let dv = grid.cell_volume();
        let n4 = grid.dimension as f64 / 4.0;

        let mut u2 = 0.0;
        let mut g2 = 0.0;
        let mut ut2 = 0.0;
        let mut max_dens: f64 = 0.0;
        let mut max_u: f64 = 0.0;
        for i in 0..grid.len() {
            let gi = snap.grad_sq(i);
            u2 += snap.u[i] * snap.u[i];
            g2 += gi;
            ut2 += snap.ut[i] * snap.ut[i];
            max_dens = max_dens.max(gi + snap.ut[i] * snap.ut[i]);
            max_u = max_u.max(snap.u[i].abs());
        }
        let (l2, grad_l2, ut_l2) = ((u2 * dv).sqrt(), (g2 * dv).sqrt(), (ut2 * dv).sqrt());

        let reach = (self.support_radius + t + grid.spacing()).powi(2);
        let dens_floor = self.noise_floor * self.noise_floor * max_dens;
        let u_floor = self.noise_floor * max_u;
        let mut we = 0.0;
        let mut wu = 0.0;
        for i in 0..grid.len() {
            if r2[i] > reach {
                continue;
            }
            let w = 2.0 * psi(self.alpha, r2[i], big_b);
            let dens = snap.grad_sq(i) + snap.ut[i] * snap.ut[i];
            if dens > dens_floor {
                we += (w + dens.ln()).exp();
            }
            if snap.u[i].abs() > u_floor {
                wu += (w + 2.0 * snap.u[i].abs().ln()).exp();
            }
        }
        let weighted_e = 0.5 * we * dv;
        let weighted_l2 = (wu * dv).sqrt();

        let c = 1.0 + big_b;
        let w_val = (2.0 * weighted_e).sqrt()
            + c.powf(n4 + 0.5) * grad_l2
            + b * c.powf(n4 + 1.0) * ut_l2
            + c.powf(n4) * l2;
        let m = self.m_running.last().map_or(w_val, |&m| m.max(w_val));

        self.times.push(t);
        self.big_b.push(big_b);
        self.b_values.push(b);
        self.l2.push(l2);
        self.grad_l2.push(grad_l2);
        self.ut_l2.push(ut_l2);
        self.weighted_e.push(weighted_e);
        self.weighted_l2.push(weighted_l2);
        self.w_vals.push(w_val);
        self.m_running.push(m);
        self.x_components.push([c.powf(n4) * l2, c.powf(n4 + 0.5) * grad_l2, c.powf(n4) * b * c * ut_l2]);
        self.weight_checks.push(check_weight(grid, r2, self.alpha, t, big_b, b));
        Ok(())
    }

    /// `‖u‖_{X(t_i)}`: running supremum of the summed components.
    pub fn x_norm(&self, i: usize) -> f64 {
        self.x_components[..=i].iter().map(|c| c[0] + c[1] + c[2]).fold(0.0, f64::max)
    }

    /// `‖u‖_{X₀(t_i)}`, without the `u_t` term.
    pub fn x0_norm(&self, i: usize) -> f64 {
        self.x_components[..=i].iter().map(|c| c[0] + c[1]).fold(0.0, f64::max)
    }

    /// `sup_t E(t) / I_α²`.
    pub fn energy_ratio_sup(&self) -> f64 {
        let sup = self.weighted_e.iter().cloned().fold(0.0, f64::max);
        if sup == 0.0 {
            0.0
        } else {
            sup / (self.i_alpha * self.i_alpha)
        }
    }

    /// `M(T)/M(0)`.
    pub fn m_ratio(&self) -> f64 {
        match (self.m_running.first(), self.m_running.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => f64::NAN,
        }
    }

    /// Slopes over records with `t ∈ [t_lo, t_hi]` against `log(1+B)`:
    /// `‖u‖`, `‖∇u‖` and `b‖u_t‖`.
    pub fn decay_slopes(&self, t_lo: f64, t_hi: f64) -> Option<DecaySlopes> {
        let idx: Vec<usize> =
            (0..self.len()).filter(|&i| self.times[i] >= t_lo && self.times[i] <= t_hi && self.l2[i] > 0.0).collect();
        if idx.len() < 3 {
            return None;
        }
        let x: Vec<f64> = idx.iter().map(|&i| (1.0 + self.big_b[i]).ln()).collect();
        let fit = |f: &dyn Fn(usize) -> f64| fit_line(&x, &idx.iter().map(|&i| f(i).ln()).collect::<Vec<_>>()).slope;
        let n4 = self.dimension as f64 / 4.0;
        Some(DecaySlopes {
            l2: fit(&|i| self.l2[i]),
            grad_l2: fit(&|i| self.grad_l2[i]),
            ut_product: fit(&|i| self.ut_l2[i] * self.b_values[i]),
            expected: [-n4, -n4 - 0.5, -n4 - 1.0],
        })
    }

    /// Largest `b ψ_t + |∇ψ|²` seen over the run.
    pub fn weight_defect_max(&self) -> f64 {
        self.weight_checks.iter().map(|w| w.defect_max).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// B-clock slopes; `ut_product` is the slope of `b(t)‖u_t‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecaySlopes {
    pub l2: f64,
    pub grad_l2: f64,
    pub ut_product: f64,
    pub expected: [f64; 3],
}
