//! Adaptive Gauss–Kronrod (7/15) quadrature, scalar and vector-valued.
//!
//! The vector variant integrates many components sharing one set of nodes and
//! refines in batches, so an expensive integrand (one mode ODE per node) can
//! be evaluated in parallel.

use rayon::prelude::*;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {value:e} with error {error:e} after {intervals} subintervals")]
    NotConverged { value: f64, error: f64, intervals: usize },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// The 15 Kronrod abscissae mapped onto `[a, b]`.
pub fn gk15_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for j in 0..7 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x[14] = c;
    x
}

/// Kronrod estimate and Gauss–Kronrod error from values at [`gk15_nodes`].
fn gk15_combine(fx: &[f64; 15], h: f64) -> (f64, f64) {
    let mut k = WGK[7] * fx[14];
    let mut g = WG[3] * fx[14];
    for j in 0..7 {
        let pair = fx[2 * j] + fx[2 * j + 1];
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// One 15-point Gauss–Kronrod panel on `[a, b]`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let x = gk15_nodes(a, b);
    let fx = x.map(|xi| f(xi));
    gk15_combine(&fx, 0.5 * (b - a))
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol*|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult, QuadError> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    if !v.is_finite() {
        return Err(QuadError::NonFinite { x: 0.5 * (a + b) });
    }
    intervals.push((a, b, v, e));
    let mut evals = 15;
    loop {
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        let error: f64 = intervals.iter().map(|iv| iv.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, evals });
        }
        if intervals.len() >= max_intervals {
            return Err(QuadError::NotConverged { value, error, intervals: intervals.len() });
        }
        let (k, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(QuadError::NotConverged { value, error, intervals: intervals.len() });
        }
        for (l, r) in [(lo, mid), (mid, hi)] {
            let (v, e) = gk15(&mut f, l, r);
            if !v.is_finite() {
                return Err(QuadError::NonFinite { x: 0.5 * (l + r) });
            }
            intervals.push((l, r, v, e));
        }
        evals += 30;
    }
}

/// Result of [`integrate_vec`]: one value and error per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VecQuadResult {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub evals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
}

fn vec_panel<F>(f: &F, a: f64, b: f64, dim: usize) -> Result<Panel, QuadError>
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    let x = gk15_nodes(a, b);
    let fx: Vec<Vec<f64>> = x.par_iter().map(|&xi| f(xi)).collect();
    panel_from_values(&fx, a, b, dim)
}

fn panel_from_values(fx: &[Vec<f64>], a: f64, b: f64, dim: usize) -> Result<Panel, QuadError> {
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    let mut col = [0.0; 15];
    for i in 0..dim {
        for (j, row) in fx.iter().enumerate() {
            col[j] = row[i];
        }
        let (v, e) = gk15_combine(&col, 0.5 * (b - a));
        if !v.is_finite() {
            return Err(QuadError::NonFinite { x: 0.5 * (a + b) });
        }
        values[i] = v;
        errors[i] = e;
    }
    Ok(Panel { a, b, values, errors })
}

/// Adaptive quadrature of a vector-valued integrand over `[a, b]` with
/// initial breakpoints `breaks` (sorted, strictly inside `(a, b)`).
///
/// Component `i` converges when its error is below
/// `max(abs_tol[i], rel_tol*|I_i|)`. Each refinement round bisects every
/// panel whose scaled error is within a factor of two of the worst one and
/// evaluates all new nodes in parallel.
pub fn integrate_vec<F>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    dim: usize,
    abs_tol: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> Result<VecQuadResult, QuadError>
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.dedup();
    let mut panels: Vec<Panel> = edges
        .windows(2)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|w| vec_panel(&f, w[0], w[1], dim))
        .collect::<Result<_, _>>()?;
    let mut evals = 15 * panels.len();
    loop {
        let mut values = vec![0.0; dim];
        let mut errors = vec![0.0; dim];
        for p in &panels {
            for i in 0..dim {
                values[i] += p.values[i];
                errors[i] += p.errors[i];
            }
        }
        let tol: Vec<f64> = (0..dim).map(|i| abs_tol[i].max(rel_tol * values[i].abs())).collect();
        if (0..dim).all(|i| errors[i] <= tol[i]) {
            return Ok(VecQuadResult { values, errors, evals });
        }
        if panels.len() >= max_panels {
            let (i, _) = (0..dim)
                .map(|i| (i, errors[i] / tol[i]))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("dim > 0");
            return Err(QuadError::NotConverged {
                value: values[i],
                error: errors[i],
                intervals: panels.len(),
            });
        }
        let score = |p: &Panel| (0..dim).map(|i| p.errors[i] / tol[i]).fold(0.0, f64::max);
        let worst = panels.iter().map(score).fold(0.0, f64::max);
        let (split, keep): (Vec<Panel>, Vec<Panel>) =
            panels.into_iter().partition(|p| score(p) >= 0.5 * worst);
        let halves: Vec<(f64, f64)> = split
            .iter()
            .flat_map(|p| {
                let m = 0.5 * (p.a + p.b);
                [(p.a, m), (m, p.b)]
            })
            .collect();
        let fresh: Vec<Panel> = halves
            .par_iter()
            .map(|&(l, r)| vec_panel(&f, l, r, dim))
            .collect::<Result<_, _>>()?;
        evals += 15 * fresh.len();
        panels = keep;
        panels.extend(fresh);
    }
}
