//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`
//! carrying about 32 significant digits.
//!
//! Finite-difference checks of long rollouts drown in the rounding noise of
//! plain `f64` (the difference of two returns near 1 loses ten digits to a
//! step of 1e-6). Running the same kernels through [`DdEval`] pushes that
//! noise below 1e-25.

use super::arith::Arith;
use crate::scheme::ActionPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

#[allow(clippy::should_implement_trait)]
impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn norm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::norm(s, e + f)
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, b: Dd) -> Dd {
        self.add(b.neg())
    }

    pub fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        Dd::norm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        Dd::norm(p, e + self.lo * b)
    }

    pub fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self.sub(b.mul_f64(q1));
        let q2 = r.hi / b.hi;
        let r = r.sub(b.mul_f64(q2));
        let q3 = r.hi / b.hi;
        Dd::norm(q1, q2).add(Dd::new(q3))
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 { Dd::ZERO } else { Dd::new(f64::NAN) };
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let ax2 = Dd::new(ax).mul(Dd::new(ax));
        Dd::new(ax).add(Dd::new(self.sub(ax2).hi * (x * 0.5)))
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        // x = k ln 2 + r, |r| <= ln2 / 2; exp(r) from the series of exp(r / 1024) - 1
        let k = (self.hi / LN2.hi).round();
        let r = self.sub(LN2.mul_f64(k)).mul_f64(1.0 / 1024.0);
        let mut term = r;
        let mut s = r;
        for n in 2..=12 {
            term = term.mul(r).div(Dd::new(n as f64));
            s = s.add(term);
        }
        for _ in 0..10 {
            s = s.mul_f64(2.0).add(s.mul(s));
        }
        let e = s.add(Dd::ONE);
        let scale = 2f64.powi(k as i32);
        Dd { hi: e.hi * scale, lo: e.lo * scale }
    }

    fn ge(self, b: Dd) -> bool {
        self.hi > b.hi || (self.hi == b.hi && self.lo >= b.lo)
    }
}

/// Arithmetic context on [`Dd`] values.
#[derive(Debug, Default, Clone, Copy)]
pub struct DdEval;

impl Arith for DdEval {
    type V = Dd;

    fn lit(&mut self, x: f64) -> Dd {
        Dd::new(x)
    }
    fn val(&self, v: Dd) -> f64 {
        v.to_f64()
    }
    fn add(&mut self, a: Dd, b: Dd) -> Dd {
        a.add(b)
    }
    fn sub(&mut self, a: Dd, b: Dd) -> Dd {
        a.sub(b)
    }
    fn mul(&mut self, a: Dd, b: Dd) -> Dd {
        a.mul(b)
    }
    fn div(&mut self, a: Dd, b: Dd) -> Dd {
        a.div(b)
    }
    fn neg(&mut self, a: Dd) -> Dd {
        a.neg()
    }
    fn abs(&mut self, a: Dd) -> Dd {
        a.abs()
    }
    fn max(&mut self, a: Dd, b: Dd) -> Dd {
        if a.ge(b) {
            a
        } else {
            b
        }
    }
    fn min(&mut self, a: Dd, b: Dd) -> Dd {
        if b.ge(a) {
            a
        } else {
            b
        }
    }
    fn square(&mut self, a: Dd) -> Dd {
        a.mul(a)
    }
    fn sqrt(&mut self, a: Dd) -> Dd {
        a.sqrt()
    }
    fn exp(&mut self, a: Dd) -> Dd {
        a.exp()
    }
    fn recip(&mut self, a: Dd) -> Dd {
        Dd::ONE.div(a)
    }
    fn relu(&mut self, a: Dd) -> Dd {
        if a.hi > 0.0 {
            a
        } else {
            Dd::ZERO
        }
    }
    fn weights(&mut self, policy: &dyn ActionPolicy, stencil: [Dd; 3]) -> [Dd; 2] {
        policy.weights_dd(stencil)
    }
}
