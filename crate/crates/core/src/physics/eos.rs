//! Gamma-law gas: conversions, fluxes and wave speeds.

use crate::autodiff::Arith;
use crate::error::{Error, Result};

/// Primitive Euler state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl Primitive {
    pub const fn new(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, u, p }
    }

    pub fn is_admissible(&self) -> bool {
        self.rho > 0.0 && self.p > 0.0 && self.u.is_finite()
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }

    /// `(rho, rho u, rho E)` with `E = e + u^2/2`, `p = rho e (gamma - 1)`.
    pub fn to_conserved(&self, gamma: f64) -> [f64; 3] {
        let e = self.p / (self.rho * (gamma - 1.0));
        [self.rho, self.rho * self.u, self.rho * (e + 0.5 * self.u * self.u)]
    }

    pub fn from_conserved(q: [f64; 3], gamma: f64) -> Self {
        let rho = q[0];
        let u = q[1] / rho;
        let p = (gamma - 1.0) * (q[2] - 0.5 * q[1] * u);
        Self { rho, u, p }
    }
}

pub fn pressure(q: [f64; 3], gamma: f64) -> f64 {
    Primitive::from_conserved(q, gamma).p
}

/// Euler flux `(rho u, rho u^2 + p, u (rho E + p))` of a conserved triple.
pub fn euler_flux(q: [f64; 3], gamma: f64) -> Result<[f64; 3]> {
    if !(q[0] > 0.0) {
        return Err(Error::Inadmissible(format!("density {} is not positive", q[0])));
    }
    let mut c = crate::autodiff::Eval;
    let (f, _) = euler_flux_cell(&mut c, q[0], q[1], q[2], gamma - 1.0, 0.5);
    Ok(f)
}

pub fn burgers_flux(u: f64) -> f64 {
    0.5 * u * u
}

/// Flux and pressure of one cell, shared by every arithmetic context.
#[inline]
pub(crate) fn euler_flux_cell<A: Arith>(
    c: &mut A,
    rho: A::V,
    m: A::V,
    e: A::V,
    gm1: A::V,
    half: A::V,
) -> ([A::V; 3], A::V) {
    let u = c.div(m, rho);
    let mu = c.mul(m, u);
    let ke = c.mul(half, mu);
    let eint = c.sub(e, ke);
    let p = c.mul(gm1, eint);
    let f1 = c.add(mu, p);
    let ep = c.add(e, p);
    let f2 = c.mul(u, ep);
    ([m, f1, f2], p)
}

/// `|u| + sqrt(gamma p / rho)`.
#[inline]
pub(crate) fn euler_speed_cell<A: Arith>(c: &mut A, rho: A::V, m: A::V, p: A::V, gamma: A::V) -> A::V {
    let u = c.div(m, rho);
    let au = c.abs(u);
    let gp = c.mul(gamma, p);
    let c2 = c.div(gp, rho);
    let cs = c.sqrt(c2);
    c.add(au, cs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_of_sod_states() {
        let l = Primitive::new(1.0, 0.0, 1.0).to_conserved(1.4);
        assert_eq!(&l[..2], &[1.0, 0.0]);
        assert!((l[2] - 2.5).abs() < 1e-15);
        let f = euler_flux(l, 1.4).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 1.0).abs() < 1e-15);
        assert_eq!(f[2], 0.0);
        let r = Primitive::new(0.125, 0.0, 0.1).to_conserved(1.4);
        assert!((r[2] - 0.25).abs() < 1e-15);
        let f = euler_flux(r, 1.4).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 0.1).abs() < 1e-15);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn resting_gas_flux_is_pressure_only() {
        for &(rho, p) in &[(0.3, 2.0), (5.0, 0.01), (1.0, 1.0)] {
            let q = Primitive::new(rho, 0.0, p).to_conserved(1.4);
            let f = euler_flux(q, 1.4).unwrap();
            assert_eq!(f[0], 0.0);
            assert!((f[1] - p).abs() < 1e-14 * p);
            assert_eq!(f[2], 0.0);
        }
    }

    #[test]
    fn flux_scales_with_density_and_pressure() {
        let (rho, u, p) = (0.7, -0.4, 1.3);
        let base = euler_flux(Primitive::new(rho, u, p).to_conserved(1.4), 1.4).unwrap();
        let lam = 3.5;
        let scaled = euler_flux(Primitive::new(lam * rho, u, lam * p).to_conserved(1.4), 1.4).unwrap();
        for k in 0..3 {
            assert!((scaled[k] - lam * base[k]).abs() < 1e-12 * (1.0 + base[k].abs()));
        }
    }

    #[test]
    fn nonpositive_density_rejected() {
        assert!(euler_flux([0.0, 0.0, 1.0], 1.4).is_err());
    }

    #[test]
    fn burgers_flux_values() {
        assert_eq!(burgers_flux(0.0), 0.0);
        assert_eq!(burgers_flux(2.0), 2.0);
        assert_eq!(burgers_flux(-1.0), 0.5);
    }

    #[test]
    fn primitive_roundtrip() {
        for &(rho, u, p) in &[(1.0, 0.0, 1.0), (0.445, 0.698, 3.528), (3.857, 0.92, 10.333), (0.01, -3.0, 1e-3)] {
            let w = Primitive::new(rho, u, p);
            let back = Primitive::from_conserved(w.to_conserved(1.4), 1.4);
            assert!((back.rho - rho).abs() <= 1e-12 * rho);
            assert!((back.u - u).abs() <= 1e-12 * u.abs().max(1.0));
            assert!((back.p - p).abs() <= 1e-12 * p, "{back:?}");
        }
    }
}
