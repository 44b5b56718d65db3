//! Spectral solver for `u_tt − Δu + b(t)u_t = f(u)` on a periodic box.
//!
//! Data are supported in `B_K(0)` and the box half-width satisfies
//! `K + T < L`, so by finite propagation speed the periodic solution equals
//! the whole-space one up to time `T`.
//!
//! One step is Strang splitting: an exact linear half-step per Fourier mode
//! (with `b` frozen at the substep midpoint), a full kick `u_t += dt f(u)`,
//! and a second linear half-step. The state is kept in Fourier space, so a
//! step costs two FFTs.

mod duhamel;
mod energy;
mod spectral;

pub use duhamel::{
    composite_weights, cross_validate, duhamel_apply, picard_iterate, CrossCheck, DuhamelSnapshot, PicardConfig,
    PicardReport, SourceHistory,
};
pub use energy::{
    check_weight, grad_psi_sq, initial_weighted_norm, laplacian_psi, psi, psi_t, weight_defect, DecaySlopes,
    EnergyLedger, Snapshot, WeightCheck, WeightParams,
};
pub use spectral::{grid_l2, BoxGrid, Spectral};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bfun::{blowup_data_functional, BProfile, FunctionalVariant};
use crate::error::{Error, Result};
use crate::modes::constant_damping_multiplier;

/// The source term `f(u)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// `|u|^p`.
    #[default]
    AbsPower,
    /// `|u|^{p−1}u`.
    SignedPower,
}

impl SourceKind {
    pub fn eval(self, u: f64, p: f64) -> f64 {
        match self {
            SourceKind::AbsPower => u.abs().powf(p),
            SourceKind::SignedPower => u.abs().powf(p - 1.0) * u,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// `exp(1 − 1/(1 − (r/K)²))`, smooth with compact support.
    GaussianBump,
    /// `cos²(πr/2K)`, C¹ at the edge of the support.
    CosineBump,
}

/// Radial data `u₀ = A φ(|x|)`, `u₁ = A_v φ(|x|)` with `supp φ = B_K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub shape: BumpShape,
    pub amplitude: f64,
    pub radius: f64,
    #[serde(default)]
    pub velocity_amplitude: f64,
}

impl DataSpec {
    pub fn bump(&self, r: f64) -> f64 {
        let z = r / self.radius;
        if z >= 1.0 {
            return 0.0;
        }
        match self.shape {
            BumpShape::GaussianBump => (1.0 - 1.0 / (1.0 - z * z)).exp(),
            BumpShape::CosineBump => (0.5 * std::f64::consts::PI * z).cos().powi(2),
        }
    }

    /// Samples `(u₀, u₁)` on the grid.
    pub fn sample(&self, grid: &BoxGrid) -> (Vec<f64>, Vec<f64>) {
        let phi: Vec<f64> = grid.radius_sq().into_iter().map(|r2| self.bump(r2.sqrt())).collect();
        let u0 = phi.iter().map(|v| self.amplitude * v).collect();
        let u1 = phi.iter().map(|v| self.velocity_amplitude * v).collect();
        (u0, u1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("data radius must be positive, got {}", self.radius)));
        }
        if !(self.amplitude.is_finite() && self.velocity_amplitude.is_finite()) {
            return Err(Error::InvalidParameter("data amplitudes must be finite".into()));
        }
        Ok(())
    }
}

/// Physical state on the box.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: BoxGrid,
    /// `K` with `supp(u₀, u₁) ⊂ B_K`.
    pub support_radius: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub t: f64,
}

impl Field {
    pub fn zero(grid: BoxGrid, support_radius: f64) -> Self {
        Field { grid, support_radius, u: vec![0.0; grid.len()], ut: vec![0.0; grid.len()], t: 0.0 }
    }

    pub fn from_data(grid: BoxGrid, data: &DataSpec) -> Result<Self> {
        data.validate()?;
        let (u, ut) = data.sample(&grid);
        Ok(Field { grid, support_radius: data.radius, u, ut, t: 0.0 })
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.ut).all(|v| v.is_finite())
    }
}

pub const DEFAULT_CFL: f64 = 0.5;

/// `[Ê₀, Φ̂, Ê₀', Φ̂']` for constant damping `mu` over time `tau`.
///
/// `Ê₀ = Φ̂' + μΦ̂` and `Ê₀' = −|ξ|²Φ̂` hold for constant coefficients.
pub fn frozen_propagator(mu: f64, k2: f64, tau: f64) -> [f64; 4] {
    let (f, df) = constant_damping_multiplier(mu, k2.sqrt(), tau);
    [df + mu * f, f, -k2 * f, df]
}

/// Time stepper holding the Fourier-space state.
pub struct Solver<'a> {
    spectral: Spectral,
    profile: &'a BProfile,
    source: SourceKind,
    p: f64,
    c_cfl: f64,
    support_radius: f64,
    shell_index: Vec<u32>,
    shell_k2: Vec<f64>,
    u_hat: Vec<Complex64>,
    v_hat: Vec<Complex64>,
    t: f64,
}

impl<'a> Solver<'a> {
    pub fn new(field: &Field, profile: &'a BProfile, p: f64, source: SourceKind) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        let spectral = Spectral::new(field.grid);
        let (shell_index, shell_k2) = field.grid.shells();
        Ok(Solver {
            u_hat: spectral.forward_real(&field.u),
            v_hat: spectral.forward_real(&field.ut),
            spectral,
            profile,
            source,
            p,
            c_cfl: DEFAULT_CFL,
            support_radius: field.support_radius,
            shell_index,
            shell_k2,
            t: field.t,
        })
    }

    pub fn with_cfl(mut self, c_cfl: f64) -> Self {
        self.c_cfl = c_cfl;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &BoxGrid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn u_hat(&self) -> &[Complex64] {
        &self.u_hat
    }

    pub fn v_hat(&self) -> &[Complex64] {
        &self.v_hat
    }

    fn linear_half(&mut self, t0: f64, tau: f64) {
        let mu = self.profile.term().b(t0 + 0.5 * tau);
        let coeffs: Vec<[f64; 4]> = self.shell_k2.iter().map(|&k2| frozen_propagator(mu, k2, tau)).collect();
        for ((u, v), &s) in self.u_hat.iter_mut().zip(self.v_hat.iter_mut()).zip(&self.shell_index) {
            let c = coeffs[s as usize];
            let (u0, v0) = (*u, *v);
            *u = u0 * c[0] + v0 * c[1];
            *v = u0 * c[2] + v0 * c[3];
        }
    }

    /// Source spectrum `f̂(u(t))` together with `max|u|`.
    pub fn source_spectrum(&self) -> (Vec<Complex64>, f64) {
        let u = self.spectral.inverse_real(&self.u_hat);
        let max_abs = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let f: Vec<f64> = u.iter().map(|&v| self.source.eval(v, self.p)).collect();
        (self.spectral.forward_real(&f), max_abs)
    }

    /// Advances by `dt`; returns `max|u|` at the substep midpoint.
    pub fn step(&mut self, dt: f64) -> Result<f64> {
        let limit = self.c_cfl * self.grid().spacing();
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        let reach = self.support_radius + self.t + dt;
        if reach >= self.grid().half_width {
            return Err(Error::BoxBudgetExceeded { reach, half_width: self.grid().half_width });
        }
        self.linear_half(self.t, 0.5 * dt);
        let (f_hat, max_abs) = self.source_spectrum();
        for (v, f) in self.v_hat.iter_mut().zip(&f_hat) {
            *v += f * dt;
        }
        self.linear_half(self.t + 0.5 * dt, 0.5 * dt);
        self.t += dt;
        Ok(max_abs)
    }

    pub fn field(&self) -> Field {
        Field {
            grid: *self.grid(),
            support_radius: self.support_radius,
            u: self.spectral.inverse_real(&self.u_hat),
            ut: self.spectral.inverse_real(&self.v_hat),
            t: self.t,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.t,
            u: self.spectral.inverse_real(&self.u_hat),
            ut: self.spectral.inverse_real(&self.v_hat),
            grad: self.spectral.gradient(&self.u_hat),
        }
    }
}

/// One step of size `dt` from `field`.
pub fn step(field: &Field, profile: &BProfile, p: f64, source: SourceKind, dt: f64) -> Result<Field> {
    let mut solver = Solver::new(field, profile, p, source)?;
    solver.step(dt)?;
    Ok(solver.field())
}

/// Appends the tracked norms of `snap` to `ledger`.
pub fn track_energy(ledger: &mut EnergyLedger, grid: &BoxGrid, profile: &BProfile, snap: &Snapshot) -> Result<()> {
    ledger.track(grid, &grid.radius_sq(), profile, snap)
}

fn default_alpha() -> f64 {
    0.125
}
fn default_cfl() -> f64 {
    DEFAULT_CFL
}
fn default_ledger_points() -> usize {
    400
}
fn default_blowup_threshold() -> f64 {
    1e6
}
fn default_noise_floor() -> f64 {
    1e-10
}

/// A semilinear desk run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SemilinearConfig {
    pub dimension: usize,
    pub half_width: f64,
    pub points: usize,
    pub p: f64,
    #[serde(default)]
    pub f_sign: SourceKind,
    pub data: DataSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_cfl")]
    pub c_cfl: f64,
    #[serde(default = "default_ledger_points")]
    pub ledger_points: usize,
    #[serde(default = "default_blowup_threshold")]
    pub blowup_threshold: f64,
    #[serde(default = "default_noise_floor")]
    pub noise_floor: f64,
}

impl SemilinearConfig {
    pub fn grid(&self) -> Result<BoxGrid> {
        BoxGrid::new(self.dimension, self.half_width, self.points)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.data.validate()?;
        if !(self.p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.25) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1/4], got {}", self.alpha)));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidParameter(format!("t_final must be positive, got {}", self.t_final)));
        }
        let reach = self.data.radius + self.t_final;
        if reach >= self.half_width {
            return Err(Error::BoxBudgetExceeded { reach, half_width: self.half_width });
        }
        let limit = self.c_cfl * grid.spacing();
        if !(self.dt > 0.0) || self.dt > limit {
            return Err(Error::CflViolation { dt: self.dt, limit });
        }
        if self.ledger_points < 10 {
            return Err(Error::InvalidParameter("ledger_points must be at least 10".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    DecayedGlobally,
    BlewUp,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct DichotomyOutcome {
    pub verdict: Verdict,
    pub blowup_time: Option<f64>,
    pub final_time: f64,
    pub steps: usize,
    pub max_abs_u: f64,
    /// `∫u₀ + b̂₁∫u₁`.
    pub data_functional: f64,
    /// Fitted slopes over `t ∈ [T/10, T]`; absent after blow-up.
    pub slopes: Option<DecaySlopes>,
    pub slope_tolerance: f64,
    pub m_ratio: f64,
    pub energy_ratio_sup: f64,
    pub ledger: EnergyLedger,
}

pub const SLOPE_TOLERANCE: f64 = 0.1;
pub const M_GROWTH_LIMIT: f64 = 10.0;

/// Runs to `t_final` or first escape and classifies the outcome.
pub fn run_dichotomy(profile: &BProfile, cfg: &SemilinearConfig) -> Result<DichotomyOutcome> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let field = Field::from_data(grid, &cfg.data)?;
    let r2 = grid.radius_sq();
    let spectral = Spectral::new(grid);

    let dv = grid.cell_volume();
    let (int_u0, int_u1) = (field.u.iter().sum::<f64>() * dv, field.ut.iter().sum::<f64>() * dv);
    let data_functional = blowup_data_functional(profile, int_u0, int_u1, FunctionalVariant::Standard)?.functional;

    let data_snap = Snapshot {
        t: 0.0,
        u: field.u.clone(),
        ut: field.ut.clone(),
        grad: spectral.gradient(&spectral.forward_real(&field.u)),
    };
    let params = WeightParams { alpha: cfg.alpha, noise_floor: cfg.noise_floor };
    let i_alpha = initial_weighted_norm(&grid, &r2, cfg.alpha, cfg.data.radius, &data_snap);
    let mut ledger = EnergyLedger::new(&grid, params, cfg.data.radius, i_alpha);

    let mut solver = Solver::new(&field, profile, cfg.p, cfg.f_sign)?.with_cfl(cfg.c_cfl);
    ledger.track(&grid, &r2, profile, &solver.snapshot())?;

    let t_end = cfg.t_final;
    let record_dt = t_end / cfg.ledger_points as f64;
    let mut next_record = record_dt;
    let mut max_abs = field.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut steps = 0;
    let mut blowup_time = None;
    let mut underflow = false;

    while solver.t() < t_end * (1.0 - 1e-12) {
        let mut h = cfg.dt.min(t_end - solver.t());
        if max_abs > 0.0 {
            // Resolve the nonlinear time scale of u'' = f(u) near escape.
            h = h.min(0.25 / (cfg.p * max_abs.powf(cfg.p - 1.0)).sqrt());
        }
        if h < 1e-12 * (1.0 + solver.t()) {
            underflow = true;
            break;
        }
        let m = solver.step(h)?;
        steps += 1;
        if !m.is_finite() || m > cfg.blowup_threshold {
            blowup_time = Some(solver.t());
            max_abs = m;
            break;
        }
        max_abs = m;
        if solver.t() >= next_record * (1.0 - 1e-12) {
            ledger.track(&grid, &r2, profile, &solver.snapshot())?;
            while next_record <= solver.t() * (1.0 + 1e-12) {
                next_record += record_dt;
            }
        }
    }
    if underflow {
        let n = ledger.len();
        let increasing = n >= 2 && ledger.l2[n - 1] > ledger.l2[n - 2];
        if increasing {
            blowup_time = Some(solver.t());
        }
    }

    let finished = blowup_time.is_none() && !underflow;
    let slopes = if finished { ledger.decay_slopes(0.1 * t_end, t_end) } else { None };
    let m_ratio = ledger.m_ratio();
    let expected = -(grid.dimension as f64) / 4.0;
    let verdict = if blowup_time.is_some() {
        Verdict::BlewUp
    } else if let Some(s) = slopes.filter(|_| finished) {
        if (s.l2 - expected).abs() <= SLOPE_TOLERANCE && m_ratio <= M_GROWTH_LIMIT {
            Verdict::DecayedGlobally
        } else {
            Verdict::Inconclusive
        }
    } else {
        Verdict::Inconclusive
    };
    Ok(DichotomyOutcome {
        verdict,
        blowup_time,
        final_time: solver.t(),
        steps,
        max_abs_u: max_abs,
        data_functional,
        slopes,
        slope_tolerance: SLOPE_TOLERANCE,
        m_ratio,
        energy_ratio_sup: ledger.energy_ratio_sup(),
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::DampingTerm;

    #[test]
    fn propagator_identities() {
        // Zero frequency, constant damping: v' = e^{-μτ}, v = (1-e^{-μτ})/μ.
        let c = frozen_propagator(2.0, 0.0, 0.3);
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((c[1] - (1.0 - (-0.6f64).exp()) / 2.0).abs() < 1e-15);
        assert!((c[3] - (-0.6f64).exp()).abs() < 1e-15);
        // Wronskian e^{-μτ}.
        let c = frozen_propagator(1.0, 4.0, 0.7);
        assert!((c[0] * c[3] - c[1] * c[2] - (-0.7f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn zero_data_stays_zero() {
        let profile = BProfile::new(&DampingTerm::constant(1.0).unwrap()).unwrap();
        let grid = BoxGrid::new(1, 16.0, 64).unwrap();
        let mut field = Field::zero(grid, 1.0);
        for _ in 0..10 {
            field = step(&field, &profile, 3.0, SourceKind::AbsPower, 0.1).unwrap();
        }
        assert!(field.u.iter().chain(&field.ut).all(|&v| v == 0.0));
    }
}
