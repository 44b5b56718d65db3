//! Confluent hypergeometric function for the radial data profiles.

use statrs::function::gamma::ln_gamma;

/// `1F1(a; b; -z)` for `z >= 0` and `0 < a < b`.
///
/// Small `z` uses Kummer's transformation `e^{-z} 1F1(b-a; b; z)`, whose
/// series has positive terms. Large `z` uses the algebraic asymptotic series;
/// the neglected exponentially small part is below `e^{-z}`.
pub fn hyp1f1_neg(a: f64, b: f64, z: f64) -> f64 {
    assert!(z >= 0.0 && a > 0.0 && b > a);
    if z < 60.0 {
        let c = b - a;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= (c + k) / (b + k) * z / (k + 1.0);
            sum += term;
            k += 1.0;
            if term < 1e-17 * sum && k > z {
                break;
            }
        }
        (-z).exp() * sum
    } else {
        hyp1f1_neg_asymptotic(a, b, z, 40)
    }
}

/// Leading algebraic asymptotics `Γ(b)/Γ(b-a) z^{-a} Σ (a)_k (1+a-b)_k / k! z^{-k}`,
/// truncated at the smallest term or after `terms` terms.
pub fn hyp1f1_neg_asymptotic(a: f64, b: f64, z: f64, terms: usize) -> f64 {
    let pref = (ln_gamma(b) - ln_gamma(b - a) - a * z.ln()).exp();
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..terms {
        let kf = k as f64;
        let next = term * (a + kf) * (1.0 + a - b + kf) / ((kf + 1.0) * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    pref * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_exponential_when_a_equals_b_limit() {
        // 1F1(a; a+1; -z) has the closed form a z^{-a} γ(a, z); for a = 1, (1 - e^{-z})/z.
        for z in [0.1, 1.0, 5.0, 30.0, 59.0, 61.0, 200.0] {
            let exact = (1.0 - (-z as f64).exp()) / z;
            let v = hyp1f1_neg(1.0, 2.0, z);
            assert!((v - exact).abs() / exact < 1e-12, "z={z}: {v} vs {exact}");
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        let (a, b) = (0.37, 0.5);
        let s = {
            let c = b - a;
            let z: f64 = 60.0;
            let mut term = 1.0;
            let mut sum = 1.0;
            let mut k = 0.0;
            while k < 400.0 {
                term *= (c + k) / (b + k) * z / (k + 1.0);
                sum += term;
                k += 1.0;
            }
            (-z).exp() * sum
        };
        let asy = hyp1f1_neg_asymptotic(a, b, 60.0, 40);
        assert!((s - asy).abs() / s < 1e-12);
    }
}
