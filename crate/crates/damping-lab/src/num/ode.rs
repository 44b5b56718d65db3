//! Dormand–Prince 5(4) embedded Runge–Kutta integrator for small systems.

/// Failure of an adaptive integrator.
#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("too many steps ({steps}) before t = {t}")]
    TooManySteps { t: f64, steps: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-14, h_init: 1e-3, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` and returns the state at each entry of
/// `t_out` (ascending, all `>= t0`), together with the largest accepted
/// scaled local error estimate.
pub fn dopri5<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_out: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<[f64; N]>, f64), OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(t_out.len());
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h_init;
    let mut steps = 0usize;
    let mut worst = 0.0_f64;
    let mut k = [[0.0; N]; 7];
    for &target in t_out {
        while t < target {
            if steps >= opts.max_steps {
                return Err(OdeError::TooManySteps { t, steps });
            }
            let last = t + h >= target;
            let hh = if last { target - t } else { h.min(opts.h_max) };
            k[0] = f(t, &y);
            for s in 1..7 {
                let mut ys = y;
                for i in 0..N {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    ys[i] += hh * acc;
                }
                k[s] = f(t + C[s] * hh, &ys);
            }
            let mut y5 = y;
            let mut err = 0.0_f64;
            for i in 0..N {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                y5[i] += hh * d5;
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((hh * (d5 - d4) / sc).abs());
            }
            steps += 1;
            if err <= 1.0 {
                t = if last { target } else { t + hh };
                y = y5;
                worst = worst.max(err);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (hh * fac).min(opts.h_max);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t, h });
            }
        }
        out.push(y);
    }
    Ok((out, worst * opts.rtol))
}
