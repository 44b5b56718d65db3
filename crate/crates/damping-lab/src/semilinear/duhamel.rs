//! Duhamel representation `u = E₀∗u₀ + E₁∗u₁ + ∫₀ᵗ E₁(t,s)∗f(u(s)) ds`
//! evaluated mode by mode, and Picard iteration of the map `N`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectral::{BoxGrid, Spectral};
use super::{frozen_propagator, DataSpec, Field, SemilinearConfig, Solver, SourceKind};
use crate::bfun::BProfile;
use crate::damping::DampingKind;
use crate::error::{Error, Result};
use crate::modes::{propagate, PropagateOptions};

/// Requested accuracy of the quadrature in `s`, relative to `‖u^{nl}‖`.
pub const DUHAMEL_TOL: f64 = 1e-6;

/// Multipliers `[Ê₀, Φ̂, Ê₀', Φ̂']`: closed form for constant damping,
/// the mode propagator otherwise.
enum Kernel<'a> {
    Constant(f64),
    Variable(&'a BProfile),
}

impl<'a> Kernel<'a> {
    fn of(profile: &'a BProfile) -> Self {
        let term = profile.term();
        if term.kind == DampingKind::Constant {
            Kernel::Constant(term.b(0.0))
        } else {
            Kernel::Variable(profile)
        }
    }

    fn columns(&self, k2: f64, s: f64, times: &[f64]) -> Result<Vec<[f64; 4]>> {
        match *self {
            Kernel::Constant(mu) => Ok(times.iter().map(|&t| frozen_propagator(mu, k2, t - s)).collect()),
            Kernel::Variable(profile) => {
                let prop = propagate(profile, s, k2.sqrt(), times, &PropagateOptions::default())?;
                Ok((0..times.len())
                    .map(|i| [prop.e0[i].value(), prop.phi(i), prop.e0[i].derivative(), prop.dphi(i)])
                    .collect())
            }
        }
    }
}

/// `f̂(u(s_j))` on a uniform time grid starting at 0.
#[derive(Clone, Debug)]
pub struct SourceHistory {
    pub grid: BoxGrid,
    pub times: Vec<f64>,
    pub spectra: Vec<Vec<Complex64>>,
}

impl SourceHistory {
    pub fn new(grid: BoxGrid) -> Self {
        SourceHistory { grid, times: vec![], spectra: vec![] }
    }

    pub fn push(&mut self, t: f64, spectrum: Vec<Complex64>) {
        self.times.push(t);
        self.spectra.push(spectrum);
    }

    fn spacing(&self) -> Result<f64> {
        let gap = |detail: String| Error::HistoryGap { t: self.times.last().copied().unwrap_or(0.0), detail };
        if self.times.first() != Some(&0.0) {
            return Err(gap("history must start at s = 0".into()));
        }
        if self.times.len() < 2 {
            return Ok(0.0);
        }
        let h = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
                return Err(gap(format!("non-uniform spacing near s = {}", w[0])));
            }
        }
        Ok(h)
    }
}

/// Weights of the composite rule on `k` uniform intervals of width `h`:
/// Simpson for even `k`, Simpson plus a closing 3/8 panel for odd `k ≥ 3`,
/// trapezoid for `k = 1`.
pub fn composite_weights(k: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; k + 1];
    match k {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let simpson_end = if k % 2 == 0 { k } else { k - 3 };
            for i in (0..simpson_end).step_by(2) {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
            }
            if k % 2 == 1 {
                let j = k - 3;
                for (o, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                    w[j + o] += 3.0 * h / 8.0 * c;
                }
            }
        }
    }
    w
}

#[derive(Clone, Debug)]
pub struct DuhamelSnapshot {
    pub t: f64,
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    /// Estimated L² error of `u^{nl}` from the quadrature in `s`.
    pub quadrature_error: f64,
}

/// `(u^{nl}(t), u_t^{nl}(t))` from the recorded source history.
pub fn duhamel_apply(profile: &BProfile, history: &SourceHistory, t: f64) -> Result<DuhamelSnapshot> {
    let h = history.spacing()?;
    let grid = history.grid;
    let spectral = Spectral::new(grid);
    let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
    let kk = history
        .times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t))
        .ok_or_else(|| Error::HistoryGap { t, detail: "t is not a node of the source history".into() })?;
    if kk == 0 {
        return Ok(DuhamelSnapshot {
            t,
            u_hat: zero.clone(),
            v_hat: zero,
            u: vec![0.0; grid.len()],
            ut: vec![0.0; grid.len()],
            quadrature_error: 0.0,
        });
    }
    let t_node = history.times[kk];
    let fine = composite_weights(kk, h);
    // Coarse rule on every other node for the error estimate; trapezoid
    // when the node count does not allow it.
    let coarse: Vec<f64> = if kk % 2 == 0 {
        let c = composite_weights(kk / 2, 2.0 * h);
        (0..=kk).map(|j| if j % 2 == 0 { c[j / 2] } else { 0.0 }).collect()
    } else {
        let mut c = vec![h; kk + 1];
        c[0] = 0.5 * h;
        c[kk] = 0.5 * h;
        c
    };
    let richardson = if kk % 2 == 0 && kk >= 4 { 15.0 } else { 1.0 };

    let kernel = Kernel::of(profile);
    let (shell_index, shell_k2) = grid.shells();
    let mut u_hat = zero.clone();
    let mut v_hat = zero.clone();
    let mut u_coarse = zero;
    for j in 0..=kk {
        let s = history.times[j];
        let cols: Vec<[f64; 4]> =
            shell_k2.iter().map(|&k2| kernel.columns(k2, s, &[t_node]).map(|c| c[0])).collect::<Result<_>>()?;
        let f = &history.spectra[j];
        for idx in 0..grid.len() {
            let c = cols[shell_index[idx] as usize];
            u_hat[idx] += f[idx] * (fine[j] * c[1]);
            v_hat[idx] += f[idx] * (fine[j] * c[3]);
            u_coarse[idx] += f[idx] * (coarse[j] * c[1]);
        }
    }
    let diff: Vec<Complex64> = u_hat.iter().zip(&u_coarse).map(|(a, b)| a - b).collect();
    let quadrature_error = spectral.l2_from_hat(&diff) / richardson;
    let size = spectral.l2_from_hat(&u_hat);
    if quadrature_error > DUHAMEL_TOL * size + 1e-14 {
        return Err(Error::HistoryGap {
            t,
            detail: format!("quadrature error {quadrature_error:.3e} against |u_nl| = {size:.3e}"),
        });
    }
    Ok(DuhamelSnapshot {
        t,
        u: spectral.inverse_real(&u_hat),
        ut: spectral.inverse_real(&v_hat),
        u_hat,
        v_hat,
        quadrature_error,
    })
}

/// `(û^{lin}, v̂^{lin})` at each of `times`, from data spectra at `s = 0`.
fn linear_trajectory(
    kernel: &Kernel,
    grid: &BoxGrid,
    u0_hat: &[Complex64],
    u1_hat: &[Complex64],
    times: &[f64],
) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>> {
    let (shell_index, shell_k2) = grid.shells();
    let cols: Vec<Vec<[f64; 4]>> = shell_k2.iter().map(|&k2| kernel.columns(k2, 0.0, times)).collect::<Result<_>>()?;
    Ok((0..times.len())
        .map(|k| {
            let mut u = Vec::with_capacity(grid.len());
            let mut v = Vec::with_capacity(grid.len());
            for idx in 0..grid.len() {
                let c = cols[shell_index[idx] as usize][k];
                u.push(u0_hat[idx] * c[0] + u1_hat[idx] * c[1]);
                v.push(u0_hat[idx] * c[2] + u1_hat[idx] * c[3]);
            }
            (u, v)
        })
        .collect())
}

/// Duhamel integrals `∫₀^{t_k} E₁(t_k,s) f̂(s) ds` at every node `t_k`.
fn duhamel_trajectory(
    kernel: &Kernel,
    grid: &BoxGrid,
    times: &[f64],
    sources: &[Vec<Complex64>],
) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>> {
    let m = times.len() - 1;
    let h = if m > 0 { times[1] - times[0] } else { 0.0 };
    let (shell_index, shell_k2) = grid.shells();
    let weights: Vec<Vec<f64>> = (0..=m).map(|k| composite_weights(k, h)).collect();
    let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut out: Vec<(Vec<Complex64>, Vec<Complex64>)> = vec![(zero.clone(), zero); m + 1];
    // For constant damping the columns depend on t − s only.
    let lag_table: Option<Vec<Vec<[f64; 4]>>> = match kernel {
        Kernel::Constant(_) => Some(
            shell_k2
                .iter()
                .map(|&k2| kernel.columns(k2, 0.0, &times[..]))
                .collect::<Result<_>>()?,
        ),
        Kernel::Variable(_) => None,
    };
    for j in 0..m {
        let cols: Vec<Vec<[f64; 4]>> = match &lag_table {
            Some(table) => table.iter().map(|c| c[..=m - j].to_vec()).collect(),
            None => shell_k2.iter().map(|&k2| kernel.columns(k2, times[j], &times[j..])).collect::<Result<_>>()?,
        };
        let f = &sources[j];
        for k in (j + 1)..=m {
            let w = weights[k][j];
            let (u, v) = &mut out[k];
            for idx in 0..grid.len() {
                let c = cols[shell_index[idx] as usize][k - j];
                let wf = f[idx] * w;
                u[idx] += wf * c[1];
                v[idx] += wf * c[3];
            }
        }
    }
    // The endpoint node s = t_k adds Φ̂ = 0 to u and Φ̂' = 1 to u_t.
    for k in 1..=m {
        let w = weights[k][k];
        let (_, v) = &mut out[k];
        for idx in 0..grid.len() {
            v[idx] += sources[k][idx] * w;
        }
    }
    Ok(out)
}

fn source_spectra(
    spectral: &Spectral,
    traj: &[(Vec<Complex64>, Vec<Complex64>)],
    source: SourceKind,
    p: f64,
) -> Vec<Vec<Complex64>> {
    traj.iter()
        .map(|(u_hat, _)| {
            let f: Vec<f64> = spectral.inverse_real(u_hat).into_iter().map(|v| source.eval(v, p)).collect();
            spectral.forward_real(&f)
        })
        .collect()
}

/// `‖·‖_{X(t)}` and `‖·‖_{X₀(t)}` of a trajectory, with the product form
/// `b(τ)(1+B(τ,0))` in place of `1+τ`.
fn x_norms(
    spectral: &Spectral,
    profile: &BProfile,
    times: &[f64],
    traj: &[(Vec<Complex64>, Vec<Complex64>)],
) -> Result<(f64, f64)> {
    let n4 = spectral.grid().dimension as f64 / 4.0;
    let mut x: f64 = 0.0;
    let mut x0: f64 = 0.0;
    for (k, (u, v)) in traj.iter().enumerate() {
        let c = 1.0 + profile.big_b(times[k], 0.0)?;
        let b = profile.term().b(times[k]);
        let a = c.powf(n4) * spectral.l2_from_hat(u) + c.powf(n4 + 0.5) * spectral.grad_l2_from_hat(u);
        x0 = x0.max(a);
        x = x.max(a + c.powf(n4) * b * c * spectral.l2_from_hat(v));
    }
    Ok((x, x0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub dimension: usize,
    pub half_width: f64,
    pub points: usize,
    pub p: f64,
    #[serde(default)]
    pub f_sign: SourceKind,
    pub data: DataSpec,
    pub t_final: f64,
    pub time_steps: usize,
    pub iterations: usize,
    /// Rescale the data so the first iterate has this X-norm.
    #[serde(default)]
    pub eps_target: Option<f64>,
}

impl PicardConfig {
    /// Checks the parameters and returns the grid.
    pub fn validate(&self) -> Result<BoxGrid> {
        let grid = BoxGrid::new(self.dimension, self.half_width, self.points)?;
        self.data.validate()?;
        if !(self.p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {}", self.p)));
        }
        if self.time_steps < 2 || self.iterations == 0 || !(self.t_final > 0.0) {
            return Err(Error::InvalidParameter("picard needs t_final > 0, time_steps >= 2, iterations >= 1".into()));
        }
        if self.eps_target.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParameter("eps_target must be positive".into()));
        }
        let reach = self.data.radius + self.t_final;
        if reach >= self.half_width {
            return Err(Error::BoxBudgetExceeded { reach, half_width: self.half_width });
        }
        Ok(grid)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub amplitude: f64,
    pub velocity_amplitude: f64,
    pub x_norms: Vec<f64>,
    pub x0_norms: Vec<f64>,
    /// `‖u_j − u_{j−1}‖_X` with `u_{−1} = 0`.
    pub difference_norms: Vec<f64>,
    /// Successive ratios of `difference_norms`.
    pub contraction_factors: Vec<f64>,
}

pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Iterates `u_{−1} = 0`, `u_j = N(u_{j−1})` on `[0, t_final]`.
pub fn picard_iterate(profile: &BProfile, cfg: &PicardConfig) -> Result<PicardReport> {
    let grid = cfg.validate()?;
    let spectral = Spectral::new(grid);
    let kernel = Kernel::of(profile);
    let times: Vec<f64> =
        (0..=cfg.time_steps).map(|k| cfg.t_final * k as f64 / cfg.time_steps as f64).collect();

    let field = Field::from_data(grid, &cfg.data)?;
    let u0_hat = spectral.forward_real(&field.u);
    let u1_hat = spectral.forward_real(&field.ut);
    let mut lin = linear_trajectory(&kernel, &grid, &u0_hat, &u1_hat, &times)?;
    let mut scale = 1.0;
    if let Some(eps) = cfg.eps_target {
        let (x, _) = x_norms(&spectral, profile, &times, &lin)?;
        if x > 0.0 {
            scale = eps / x;
            for (u, v) in lin.iter_mut() {
                u.iter_mut().chain(v.iter_mut()).for_each(|z| *z *= scale);
            }
        }
    }

    let mut report = PicardReport {
        amplitude: cfg.data.amplitude * scale,
        velocity_amplitude: cfg.data.velocity_amplitude * scale,
        x_norms: vec![],
        x0_norms: vec![],
        difference_norms: vec![],
        contraction_factors: vec![],
    };
    let mut prev: Option<Vec<(Vec<Complex64>, Vec<Complex64>)>> = None;
    for j in 0..cfg.iterations {
        let current = match &prev {
            None => lin.clone(),
            Some(p) => {
                let sources = source_spectra(&spectral, p, cfg.f_sign, cfg.p);
                let nl = duhamel_trajectory(&kernel, &grid, &times, &sources)?;
                lin.iter()
                    .zip(nl)
                    .map(|((lu, lv), (nu, nv))| {
                        (
                            lu.iter().zip(&nu).map(|(a, b)| a + b).collect(),
                            lv.iter().zip(&nv).map(|(a, b)| a + b).collect(),
                        )
                    })
                    .collect()
            }
        };
        let (x, x0) = x_norms(&spectral, profile, &times, &current)?;
        if !x.is_finite() || (j > 0 && x > DIVERGENCE_FACTOR * report.x_norms[0]) {
            return Err(Error::IterationDiverged { iterate: j, norm: x });
        }
        let diff_norm = match &prev {
            None => x,
            Some(p) => {
                let d: Vec<(Vec<Complex64>, Vec<Complex64>)> = current
                    .iter()
                    .zip(p)
                    .map(|((cu, cv), (pu, pv))| {
                        (
                            cu.iter().zip(pu).map(|(a, b)| a - b).collect(),
                            cv.iter().zip(pv).map(|(a, b)| a - b).collect(),
                        )
                    })
                    .collect();
                x_norms(&spectral, profile, &times, &d)?.0
            }
        };
        if let Some(&last) = report.difference_norms.last() {
            report.contraction_factors.push(if last > 0.0 { diff_norm / last } else { 0.0 });
        }
        report.x_norms.push(x);
        report.x0_norms.push(x0);
        report.difference_norms.push(diff_norm);
        prev = Some(current);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub t: f64,
    pub steps: usize,
    /// `‖u_step − (u^{lin} + u^{nl})‖_{L²}`.
    pub discrepancy: f64,
    pub solution_l2: f64,
    pub nonlinear_l2: f64,
    pub quadrature_error: f64,
}

/// Runs the stepper to `t_final`, recording the source at every step, and
/// compares with the Duhamel representation at `t_final`.
pub fn cross_validate(profile: &BProfile, cfg: &SemilinearConfig) -> Result<CrossCheck> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let field = Field::from_data(grid, &cfg.data)?;
    let mut steps = (cfg.t_final / cfg.dt).ceil() as usize;
    steps += steps % 2;
    let h = cfg.t_final / steps as f64;
    let mut solver = Solver::new(&field, profile, cfg.p, cfg.f_sign)?.with_cfl(cfg.c_cfl);
    let mut history = SourceHistory::new(grid);
    history.push(0.0, solver.source_spectrum().0);
    for k in 1..=steps {
        solver.step(h)?;
        history.push(k as f64 * h, solver.source_spectrum().0);
    }
    let spectral = solver.spectral().clone();
    let kernel = Kernel::of(profile);
    let u0_hat = spectral.forward_real(&field.u);
    let u1_hat = spectral.forward_real(&field.ut);
    let t_end = history.times[steps];
    let lin = linear_trajectory(&kernel, &grid, &u0_hat, &u1_hat, &[t_end])?;
    let nl = duhamel_apply(profile, &history, t_end)?;
    let diff: Vec<Complex64> =
        solver.u_hat().iter().zip(&lin[0].0).zip(&nl.u_hat).map(|((s, l), n)| s - l - n).collect();
    Ok(CrossCheck {
        t: t_end,
        steps,
        discrepancy: spectral.l2_from_hat(&diff),
        solution_l2: spectral.l2_from_hat(solver.u_hat()),
        nonlinear_l2: spectral.l2_from_hat(&nl.u_hat),
        quadrature_error: nl.quadrature_error,
    })
}
