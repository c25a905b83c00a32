//! Double-double arithmetic (about 106 bits of mantissa), enough to act as
//! an extended-precision reference for f64 loss computations.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd {
        hi: p,
        lo: a.mul_add(b, -p),
    }
}

pub const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_3e-17,
};

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let p = two_prod(self.hi, b);
        quick_two_sum(p.hi, p.lo + self.lo * b)
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let x = Dd::from(self.hi.sqrt());
        // One Newton step doubles the f64 precision.
        x + (self - x * x) / (x + x)
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut acc = Dd::ONE;
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    /// `self^gamma` for gamma a non-negative multiple of 1/2.
    pub fn pow_half(self, gamma: f64) -> Dd {
        let twice = (2.0 * gamma) as u32;
        assert_eq!(twice as f64, 2.0 * gamma, "gamma must be a multiple of 1/2");
        let whole = self.powi(twice / 2);
        if twice % 2 == 1 {
            whole * self.sqrt()
        } else {
            whole
        }
    }

    pub fn exp(self) -> Dd {
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        // exp(r) = exp(r / 32)^32, Taylor series on the small argument.
        let s = r.mul_f64(1.0 / 32.0);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..=30 {
            term = term * s / Dd::from(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..5 {
            sum = sum * sum;
        }
        sum.mul_f64(2f64.powi(k as i32))
    }

    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0);
        // Two Newton steps on exp(y) = x from the f64 logarithm.
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let s = two_sum(self.hi, b.hi);
        let t = two_sum(self.lo, b.lo);
        let s = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(s.hi, s.lo + t.lo)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = two_prod(self.hi, b.hi);
        quick_two_sum(p.hi, p.lo + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        quick_two_sum(q1, q2) + Dd::from(q3)
    }
}

/// Brute-force batch AHFE in double-double: the double sum over samples and
/// classes, each term written out, with raw weights 1/sqrt(N_k + eps).
pub fn ahfe_batch_dd(probs: &[Vec<f64>], labels: &[usize], counts: &[usize], gamma: f64, lambda: f64, eps: f64) -> Dd {
    let alpha: Vec<Dd> = counts
        .iter()
        .map(|&n| Dd::ONE / (Dd::from(n as f64) + Dd::from(eps)).sqrt())
        .collect();
    let mut sum = Dd::ZERO;
    for (p, &label) in probs.iter().zip(labels) {
        for (k, &pk) in p.iter().enumerate() {
            let pk = Dd::from(pk);
            let log_p = pk.ln();
            let y = if k == label { Dd::ONE } else { Dd::ZERO };
            let focal = (Dd::ONE - pk).pow_half(gamma) * y * log_p;
            let entropy = Dd::from(lambda) * pk * log_p;
            sum = sum + alpha[k] * (focal + entropy);
        }
    }
    -(sum / Dd::from(probs.len() as f64))
}
