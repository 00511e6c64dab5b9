//! Exact solution of the Euler Riemann problem for a gamma-law gas.
//!
//! Star pressure from a Newton iteration on the pressure function, started
//! from the two-rarefaction estimate, then self-similar sampling across the
//! left wave, the contact and the right wave.

use super::eos::Primitive;
use crate::error::{Error, Result};

/// Relative tolerance on successive star-pressure iterates.
pub const PRESSURE_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;

/// Two constant states separated by a diaphragm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannIC {
    pub left: Primitive,
    pub right: Primitive,
    pub diaphragm: f64,
}

impl RiemannIC {
    pub fn validate(&self) -> Result<()> {
        if !self.left.is_admissible() || !self.right.is_admissible() {
            return Err(Error::Inadmissible(format!(
                "Riemann states must have rho, p > 0: {:?} / {:?}",
                self.left, self.right
            )));
        }
        Ok(())
    }
}

/// Kind of a nonlinear wave with its bounding speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wave {
    Shock { speed: f64 },
    Rarefaction { head: f64, tail: f64 },
}

/// Solved star region of a Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub gamma: f64,
    pub left: Primitive,
    pub right: Primitive,
    pub p_star: f64,
    pub u_star: f64,
    pub rho_star_left: f64,
    pub rho_star_right: f64,
    pub left_wave: Wave,
    pub right_wave: Wave,
    pub iterations: usize,
}

/// Pressure function `f_K(p)` and its derivative for one side.
fn side_function(p: f64, s: &Primitive, gamma: f64) -> (f64, f64) {
    let c = s.sound_speed(gamma);
    if p > s.p {
        let a = 2.0 / ((gamma + 1.0) * s.rho);
        let b = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let q = (a / (p + b)).sqrt();
        let f = (p - s.p) * q;
        (f, q * (1.0 - 0.5 * (p - s.p) / (b + p)))
    } else {
        let z = (gamma - 1.0) / (2.0 * gamma);
        let ratio = p / s.p;
        let f = 2.0 * c / (gamma - 1.0) * (ratio.powf(z) - 1.0);
        (f, 1.0 / (s.rho * c) * ratio.powf(-(gamma + 1.0) / (2.0 * gamma)))
    }
}

/// The full pressure function `f_L(p) + f_R(p) + (u_R - u_L)`.
pub fn pressure_function(p: f64, left: &Primitive, right: &Primitive, gamma: f64) -> f64 {
    side_function(p, left, gamma).0 + side_function(p, right, gamma).0 + (right.u - left.u)
}

pub fn solve(ic: &RiemannIC, gamma: f64) -> Result<RiemannSolution> {
    ic.validate()?;
    if !(gamma > 1.0) {
        return Err(Error::Riemann(format!("gamma must exceed 1, got {gamma}")));
    }
    let (l, r) = (ic.left, ic.right);
    let (cl, cr) = (l.sound_speed(gamma), r.sound_speed(gamma));
    let du = r.u - l.u;
    if 2.0 / (gamma - 1.0) * (cl + cr) <= du {
        return Err(Error::Riemann("initial data generate a vacuum".into()));
    }

    let z = (gamma - 1.0) / (2.0 * gamma);
    let guess = ((cl + cr - 0.5 * (gamma - 1.0) * du) / (cl / l.p.powf(z) + cr / r.p.powf(z))).powf(1.0 / z);
    let mut p = guess.max(1e-14);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (fl, dfl) = side_function(p, &l, gamma);
        let (fr, dfr) = side_function(p, &r, gamma);
        let mut next = p - (fl + fr + du) / (dfl + dfr);
        if next <= 0.0 {
            next = 0.5 * p;
        }
        let change = 2.0 * (next - p).abs() / (next + p);
        p = next;
        if change < PRESSURE_TOL {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::Riemann(format!(
                "star pressure did not converge in {MAX_ITERATIONS} iterations (last change {change:e})"
            )));
        }
    }
    let (fl, _) = side_function(p, &l, gamma);
    let (fr, _) = side_function(p, &r, gamma);
    let u_star = 0.5 * (l.u + r.u) + 0.5 * (fr - fl);

    let g1 = (gamma - 1.0) / (gamma + 1.0);
    let (rho_star_left, left_wave) = if p > l.p {
        let ratio = p / l.p;
        let rho = l.rho * (ratio + g1) / (g1 * ratio + 1.0);
        let speed = l.u - cl * ((gamma + 1.0) / (2.0 * gamma) * ratio + (gamma - 1.0) / (2.0 * gamma)).sqrt();
        (rho, Wave::Shock { speed })
    } else {
        let rho = l.rho * (p / l.p).powf(1.0 / gamma);
        let c_star = cl * (p / l.p).powf(z);
        (rho, Wave::Rarefaction { head: l.u - cl, tail: u_star - c_star })
    };
    let (rho_star_right, right_wave) = if p > r.p {
        let ratio = p / r.p;
        let rho = r.rho * (ratio + g1) / (g1 * ratio + 1.0);
        let speed = r.u + cr * ((gamma + 1.0) / (2.0 * gamma) * ratio + (gamma - 1.0) / (2.0 * gamma)).sqrt();
        (rho, Wave::Shock { speed })
    } else {
        let rho = r.rho * (p / r.p).powf(1.0 / gamma);
        let c_star = cr * (p / r.p).powf(z);
        (rho, Wave::Rarefaction { head: r.u + cr, tail: u_star + c_star })
    };

    Ok(RiemannSolution {
        gamma,
        left: l,
        right: r,
        p_star: p,
        u_star,
        rho_star_left,
        rho_star_right,
        left_wave,
        right_wave,
        iterations,
    })
}

impl RiemannSolution {
    /// Primitive state at similarity coordinate `xi = (x - x_d) / t`.
    pub fn sample(&self, xi: f64) -> Primitive {
        let g = self.gamma;
        let (l, r) = (self.left, self.right);
        if xi <= self.u_star {
            match self.left_wave {
                Wave::Shock { speed } => {
                    if xi <= speed {
                        l
                    } else {
                        Primitive::new(self.rho_star_left, self.u_star, self.p_star)
                    }
                }
                Wave::Rarefaction { head, tail } => {
                    if xi <= head {
                        l
                    } else if xi >= tail {
                        Primitive::new(self.rho_star_left, self.u_star, self.p_star)
                    } else {
                        let cl = l.sound_speed(g);
                        let k = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * cl) * (l.u - xi);
                        let rho = l.rho * k.powf(2.0 / (g - 1.0));
                        let u = 2.0 / (g + 1.0) * (cl + 0.5 * (g - 1.0) * l.u + xi);
                        let p = l.p * k.powf(2.0 * g / (g - 1.0));
                        Primitive::new(rho, u, p)
                    }
                }
            }
        } else {
            match self.right_wave {
                Wave::Shock { speed } => {
                    if xi >= speed {
                        r
                    } else {
                        Primitive::new(self.rho_star_right, self.u_star, self.p_star)
                    }
                }
                Wave::Rarefaction { head, tail } => {
                    if xi >= head {
                        r
                    } else if xi <= tail {
                        Primitive::new(self.rho_star_right, self.u_star, self.p_star)
                    } else {
                        let cr = r.sound_speed(g);
                        let k = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * cr) * (r.u - xi);
                        let rho = r.rho * k.powf(2.0 / (g - 1.0));
                        let u = 2.0 / (g + 1.0) * (-cr + 0.5 * (g - 1.0) * r.u + xi);
                        let p = r.p * k.powf(2.0 * g / (g - 1.0));
                        Primitive::new(rho, u, p)
                    }
                }
            }
        }
    }

    /// Largest `|u| + c` anywhere in the self-similar solution.
    pub fn max_wave_speed(&self) -> f64 {
        let g = self.gamma;
        let speed = |w: Primitive| w.u.abs() + w.sound_speed(g);
        let mut m = speed(self.left)
            .max(speed(self.right))
            .max(speed(Primitive::new(self.rho_star_left, self.u_star, self.p_star)))
            .max(speed(Primitive::new(self.rho_star_right, self.u_star, self.p_star)));
        for wave in [self.left_wave, self.right_wave] {
            if let Wave::Rarefaction { head, tail } = wave {
                for k in 0..=64 {
                    let xi = head + (tail - head) * k as f64 / 64.0;
                    m = m.max(speed(self.sample(xi)));
                }
            }
        }
        m
    }
}

/// Primitive state of the exact solution at similarity coordinate `xi`.
pub fn exact_riemann_euler(ic: &RiemannIC, gamma: f64, xi: f64) -> Result<Primitive> {
    Ok(solve(ic, gamma)?.sample(xi))
}
