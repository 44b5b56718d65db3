//! Truncated Taylor jets carrying a value and its first three derivatives.
//!
//! Catalog damping terms are compositions of `exp`, `ln`, powers and
//! products, so forward-mode propagation gives exact derivatives up to
//! order three without symbolic work.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value and derivatives `[f, f', f'', f''']` of a function of one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub d: [f64; 4],
}

impl Jet {
    pub fn constant(c: f64) -> Self {
        Jet { d: [c, 0.0, 0.0, 0.0] }
    }

    /// The independent variable evaluated at `t`.
    pub fn var(t: f64) -> Self {
        Jet { d: [t, 1.0, 0.0, 0.0] }
    }

    pub fn value(&self) -> f64 {
        self.d[0]
    }

    /// Outer function `f` with derivatives `f0..f3` at `self.value()`.
    fn compose(&self, f: [f64; 4]) -> Self {
        let [_, g1, g2, g3] = self.d;
        Jet {
            d: [
                f[0],
                f[1] * g1,
                f[2] * g1 * g1 + f[1] * g2,
                f[3] * g1 * g1 * g1 + 3.0 * f[2] * g1 * g2 + f[1] * g3,
            ],
        }
    }

    pub fn exp(self) -> Self {
        let e = self.d[0].exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(self) -> Self {
        let x = self.d[0];
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    pub fn powf(self, a: f64) -> Self {
        let x = self.d[0];
        let p0 = x.powf(a);
        self.compose([
            p0,
            a * p0 / x,
            a * (a - 1.0) * p0 / (x * x),
            a * (a - 1.0) * (a - 2.0) * p0 / (x * x * x),
        ])
    }

    pub fn scale(self, c: f64) -> Self {
        Jet { d: self.d.map(|v| v * c) }
    }

    pub fn is_finite(&self) -> bool {
        self.d.iter().all(|v| v.is_finite())
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2], self.d[3] + o.d[3]] }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.d[0] += c;
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let [u0, u1, u2, u3] = self.d;
        let [v0, v1, v2, v3] = o.d;
        Jet {
            d: [
                u0 * v0,
                u1 * v0 + u0 * v1,
                u2 * v0 + 2.0 * u1 * v1 + u0 * v2,
                u3 * v0 + 3.0 * u2 * v1 + 3.0 * u1 * v2 + u0 * v3,
            ],
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.powf(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_of_shifted_variable() {
        // (1+t)^{-1/3} at t = 1
        let j = (Jet::var(1.0) + 1.0).powf(-1.0 / 3.0);
        let x: f64 = 2.0;
        let a = -1.0 / 3.0;
        assert!((j.d[0] - x.powf(a)).abs() < 1e-15);
        assert!((j.d[1] - a * x.powf(a - 1.0)).abs() < 1e-15);
        assert!((j.d[2] - a * (a - 1.0) * x.powf(a - 2.0)).abs() < 1e-15);
        assert!((j.d[3] - a * (a - 1.0) * (a - 2.0) * x.powf(a - 3.0)).abs() < 1e-15);
    }

    #[test]
    fn product_and_chain_rule_agree_with_closed_form() {
        // t * exp(t^2) at t = 0.7
        let t = 0.7_f64;
        let v = Jet::var(t);
        let j = v * (v * v).exp();
        let e = (t * t).exp();
        let d1 = e * (1.0 + 2.0 * t * t);
        let d2 = e * (6.0 * t + 4.0 * t * t * t);
        let d3 = e * (6.0 + 24.0 * t * t + 8.0 * t.powi(4));
        assert!((j.d[1] - d1).abs() < 1e-12);
        assert!((j.d[2] - d2).abs() < 1e-12);
        assert!((j.d[3] - d3).abs() < 1e-12);
    }

    #[test]
    fn log_derivatives() {
        let t = 3.0_f64;
        let j = (Jet::var(t) + 2.0).ln();
        assert!((j.d[1] - 1.0 / 5.0).abs() < 1e-15);
        assert!((j.d[2] + 1.0 / 25.0).abs() < 1e-15);
        assert!((j.d[3] - 2.0 / 125.0).abs() < 1e-15);
    }
}
