//! Two-stencil WENO reconstruction (third order in smooth regions),
//! Lax-Friedrichs flux splitting and the reference solver.

mod kernel;
mod solver;

pub use kernel::{extend, AlphaMode, Boundary, GHOST};
pub(crate) use kernel::{
    from_rows, max_speed, reconstruct_row, split_row, stencils, step_1d, to_rows, update_rows,
};
pub use solver::{
    policy_step, solve_with_policy, weno_solve, weno_step, weno_trajectory, SolverConfig, TimeScheme,
};

use crate::autodiff::{Arith, Dd, DdEval, NodeId, Tape};
use crate::error::{Error, Result};
use crate::scheme::ActionPolicy;

/// Tolerance on `w0 + w1 = 1` accepted by [`reconstruct_interface`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Coefficients of the two-stencil scheme, kept as data so tests can perturb them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WenoCoefficients {
    /// Optimal (linear) weights.
    pub d: [f64; 2],
    /// Candidate 0 on `(s0, s1)`.
    pub c0: [f64; 2],
    /// Candidate 1 on `(s1, s2)`.
    pub c1: [f64; 2],
    /// Regulariser in `d_k / (eps + beta_k)^2`.
    pub eps: f64,
}

impl Default for WenoCoefficients {
    fn default() -> Self {
        Self { d: [1.0 / 3.0, 2.0 / 3.0], c0: [-0.5, 1.5], c1: [0.5, 0.5], eps: 1e-6 }
    }
}

impl WenoCoefficients {
    pub fn with_eps(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::config(format!("weno.eps must be positive, got {eps}")));
        }
        Ok(Self { eps, ..Self::default() })
    }
}

/// Lax-Friedrichs split `f± = (f ± alpha u) / 2`, elementwise.
pub fn lf_split(f: &[f64], u: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(f.len(), u.len());
    let plus = f.iter().zip(u).map(|(&f, &u)| 0.5 * (f + alpha * u)).collect();
    let minus = f.iter().zip(u).map(|(&f, &u)| 0.5 * (f - alpha * u)).collect();
    (plus, minus)
}

pub(crate) fn smoothness_generic<A: Arith>(c: &mut A, s: [A::V; 3]) -> [A::V; 2] {
    let d0 = c.sub(s[1], s[0]);
    let d1 = c.sub(s[2], s[1]);
    [c.square(d0), c.square(d1)]
}

pub(crate) fn weno_weights_generic<A: Arith>(c: &mut A, k: &WenoCoefficients, s: [A::V; 3]) -> [A::V; 2] {
    let [b0, b1] = smoothness_generic(c, s);
    let eps = c.lit(k.eps);
    let d0 = c.lit(k.d[0]);
    let d1 = c.lit(k.d[1]);
    let e0 = c.add(eps, b0);
    let e1 = c.add(eps, b1);
    let q0 = c.square(e0);
    let q1 = c.square(e1);
    let a0 = c.div(d0, q0);
    let a1 = c.div(d1, q1);
    let sum = c.add(a0, a1);
    [c.div(a0, sum), c.div(a1, sum)]
}

pub(crate) fn candidates_generic<A: Arith>(c: &mut A, k: &WenoCoefficients, s: [A::V; 3]) -> [A::V; 2] {
    let k00 = c.lit(k.c0[0]);
    let k01 = c.lit(k.c0[1]);
    let k10 = c.lit(k.c1[0]);
    let k11 = c.lit(k.c1[1]);
    let a = c.mul(k00, s[0]);
    let b = c.mul(k01, s[1]);
    let f0 = c.add(a, b);
    let a = c.mul(k10, s[1]);
    let b = c.mul(k11, s[2]);
    let f1 = c.add(a, b);
    [f0, f1]
}

/// `beta_0 = (s1 - s0)^2`, `beta_1 = (s2 - s1)^2`.
pub fn smoothness_indicators(s: [f64; 3]) -> [f64; 2] {
    smoothness_generic(&mut crate::autodiff::Eval, s)
}

/// Classical nonlinear weights for one upwind-ordered stencil.
pub fn weno_weights(s: [f64; 3], coeffs: &WenoCoefficients) -> [f64; 2] {
    weno_weights_generic(&mut crate::autodiff::Eval, coeffs, s)
}

/// The two candidate reconstructions at the downwind face of `s1`.
pub fn candidate_fluxes(s: [f64; 3], coeffs: &WenoCoefficients) -> [f64; 2] {
    candidates_generic(&mut crate::autodiff::Eval, coeffs, s)
}

fn check_simplex(w: [f64; 2]) -> Result<()> {
    if !(w[0] >= 0.0 && w[1] >= 0.0 && (w[0] + w[1] - 1.0).abs() <= SIMPLEX_TOL) {
        return Err(Error::Simplex(format!("({}, {})", w[0], w[1])));
    }
    Ok(())
}

/// Numerical flux at one interface from the split-flux stencils and the weights
/// chosen for each. Stencils are upwind-ordered: the minus stencil is mirrored.
pub fn reconstruct_interface(
    plus: [f64; 3],
    minus: [f64; 3],
    w_plus: [f64; 2],
    w_minus: [f64; 2],
    coeffs: &WenoCoefficients,
) -> Result<f64> {
    check_simplex(w_plus)?;
    check_simplex(w_minus)?;
    let cp = candidate_fluxes(plus, coeffs);
    let cm = candidate_fluxes(minus, coeffs);
    Ok((w_plus[0] * cp[0] + w_plus[1] * cp[1]) + (w_minus[0] * cm[0] + w_minus[1] * cm[1]))
}

/// Classical WENO weights as a policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WenoOracle {
    pub coeffs: WenoCoefficients,
}

impl WenoOracle {
    pub fn new(coeffs: WenoCoefficients) -> Self {
        Self { coeffs }
    }
}

impl ActionPolicy for WenoOracle {
    fn name(&self) -> &str {
        "weno"
    }

    fn weights(&self, stencil: [f64; 3]) -> [f64; 2] {
        weno_weights(stencil, &self.coeffs)
    }

    fn weights_taped(&self, tape: &mut Tape, stencil: [NodeId; 3]) -> [NodeId; 2] {
        weno_weights_generic(tape, &self.coeffs, stencil)
    }

    fn weights_dd(&self, stencil: [Dd; 3]) -> [Dd; 2] {
        weno_weights_generic(&mut DdEval, &self.coeffs, stencil)
    }
}
