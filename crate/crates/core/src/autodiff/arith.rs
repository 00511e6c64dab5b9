//! Arithmetic contexts.
//!
//! Numerical kernels are written once against [`Arith`] and run either on
//! plain `f64` values ([`Eval`]) or on a [`Tape`], where every operation is
//! recorded. Both contexts perform the same IEEE operations in the same order,
//! so values are bit-identical between inference and training.

use super::tape::{NodeId, Tape};
use crate::scheme::ActionPolicy;

pub trait Arith {
    type V: Copy;

    fn lit(&mut self, x: f64) -> Self::V;
    fn val(&self, v: Self::V) -> f64;

    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn div(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn neg(&mut self, a: Self::V) -> Self::V;
    fn abs(&mut self, a: Self::V) -> Self::V;
    fn max(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn min(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn square(&mut self, a: Self::V) -> Self::V;
    fn sqrt(&mut self, a: Self::V) -> Self::V;
    fn exp(&mut self, a: Self::V) -> Self::V;
    fn recip(&mut self, a: Self::V) -> Self::V;
    fn relu(&mut self, a: Self::V) -> Self::V;

    /// Convex weights chosen by `policy` for one upwind-ordered stencil.
    fn weights(&mut self, policy: &dyn ActionPolicy, stencil: [Self::V; 3]) -> [Self::V; 2];
}

/// Plain `f64` evaluation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

impl Arith for Eval {
    type V = f64;

    #[inline(always)]
    fn lit(&mut self, x: f64) -> f64 {
        x
    }
    #[inline(always)]
    fn val(&self, v: f64) -> f64 {
        v
    }
    #[inline(always)]
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline(always)]
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    #[inline(always)]
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    #[inline(always)]
    fn div(&mut self, a: f64, b: f64) -> f64 {
        a / b
    }
    #[inline(always)]
    fn neg(&mut self, a: f64) -> f64 {
        -a
    }
    #[inline(always)]
    fn abs(&mut self, a: f64) -> f64 {
        a.abs()
    }
    // Same tie and NaN behaviour as the tape: `a >= b` picks `a`.
    #[inline(always)]
    fn max(&mut self, a: f64, b: f64) -> f64 {
        if a >= b {
            a
        } else {
            b
        }
    }
    #[inline(always)]
    fn min(&mut self, a: f64, b: f64) -> f64 {
        if a <= b {
            a
        } else {
            b
        }
    }
    #[inline(always)]
    fn square(&mut self, a: f64) -> f64 {
        a * a
    }
    #[inline(always)]
    fn sqrt(&mut self, a: f64) -> f64 {
        a.sqrt()
    }
    #[inline(always)]
    fn exp(&mut self, a: f64) -> f64 {
        a.exp()
    }
    #[inline(always)]
    fn recip(&mut self, a: f64) -> f64 {
        1.0 / a
    }
    #[inline(always)]
    fn relu(&mut self, a: f64) -> f64 {
        if a > 0.0 {
            a
        } else {
            0.0
        }
    }
    #[inline]
    fn weights(&mut self, policy: &dyn ActionPolicy, stencil: [f64; 3]) -> [f64; 2] {
        policy.weights(stencil)
    }
}

impl Arith for Tape {
    type V = NodeId;

    fn lit(&mut self, x: f64) -> NodeId {
        self.constant(x)
    }
    fn val(&self, v: NodeId) -> f64 {
        self.value(v)
    }
    fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        Tape::add(self, a, b)
    }
    fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        Tape::sub(self, a, b)
    }
    fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        Tape::mul(self, a, b)
    }
    fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        Tape::div(self, a, b)
    }
    fn neg(&mut self, a: NodeId) -> NodeId {
        Tape::neg(self, a)
    }
    fn abs(&mut self, a: NodeId) -> NodeId {
        Tape::abs(self, a)
    }
    fn max(&mut self, a: NodeId, b: NodeId) -> NodeId {
        Tape::max(self, a, b)
    }
    fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        Tape::min(self, a, b)
    }
    fn square(&mut self, a: NodeId) -> NodeId {
        Tape::square(self, a)
    }
    fn sqrt(&mut self, a: NodeId) -> NodeId {
        Tape::sqrt(self, a)
    }
    fn exp(&mut self, a: NodeId) -> NodeId {
        Tape::exp(self, a)
    }
    fn recip(&mut self, a: NodeId) -> NodeId {
        self.reciprocal(a)
    }
    fn relu(&mut self, a: NodeId) -> NodeId {
        Tape::relu(self, a)
    }
    fn weights(&mut self, policy: &dyn ActionPolicy, stencil: [NodeId; 3]) -> [NodeId; 2] {
        policy.weights_taped(self, stencil)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly<A: Arith>(c: &mut A, x: A::V) -> A::V {
        let h = c.lit(0.5);
        let sq = c.square(x);
        let e = c.exp(x);
        let r = c.recip(e);
        let s = c.add(sq, r);
        let m = c.max(s, h);
        let q = c.sqrt(m);
        c.mul(q, h)
    }

    #[test]
    fn eval_and_tape_agree_bitwise() {
        for &x in &[-1.3, 0.0, 0.7, 2.5] {
            let plain = poly(&mut Eval, x);
            let mut t = Tape::new();
            let xv = t.leaf(x);
            let out = poly(&mut t, xv);
            assert_eq!(plain.to_bits(), t.value(out).to_bits());
        }
    }
}
