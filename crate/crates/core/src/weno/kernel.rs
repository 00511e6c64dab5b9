//! One conservative step, generic over the arithmetic context so the same code
//! drives plain rollouts and taped training episodes.

use super::{candidates_generic, WenoCoefficients};
use crate::autodiff::Arith;
use crate::physics::{ConservedState1D, Direction, EquationSpec};
use crate::scheme::ActionPolicy;

/// Ghost cells per side.
pub const GHOST: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Zero-gradient: ghosts copy the edge cell.
    Outflow,
    Periodic,
}

impl Boundary {
    pub fn parse(s: &str) -> crate::error::Result<Self> {
        match s {
            "outflow" => Ok(Self::Outflow),
            "periodic" => Ok(Self::Periodic),
            other => Err(crate::error::Error::config(format!("unknown boundary `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Outflow => "outflow",
            Self::Periodic => "periodic",
        }
    }
}

/// Characteristic speed bound used in the flux splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// `max |u| + c` over the current state, recomputed every step and
    /// differentiated like any other quantity.
    PerStep,
    /// As `PerStep`, but recorded as a constant so no gradient flows through it.
    PerStepDetached,
    /// A fixed value, which keeps the scheme's dependence cone local.
    Frozen(f64),
}

impl AlphaMode {
    /// `per-step`, `per-step-detached` or `frozen:<value>`.
    pub fn parse(s: &str) -> crate::error::Result<Self> {
        match s {
            "per-step" => Ok(Self::PerStep),
            "per-step-detached" => Ok(Self::PerStepDetached),
            _ => match s.strip_prefix("frozen:").map(str::parse::<f64>) {
                Some(Ok(a)) if a > 0.0 && a.is_finite() => Ok(Self::Frozen(a)),
                _ => Err(crate::error::Error::config(format!("unknown alpha mode `{s}`"))),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::PerStep => "per-step".into(),
            Self::PerStepDetached => "per-step-detached".into(),
            Self::Frozen(a) => format!("frozen:{a}"),
        }
    }
}

/// Pad a row with [`GHOST`] cells on each side.
pub fn extend<V: Copy>(row: &[V], bc: Boundary) -> Vec<V> {
    let n = row.len();
    assert!(n >= GHOST, "row shorter than the ghost layer");
    let mut out = Vec::with_capacity(n + 2 * GHOST);
    match bc {
        Boundary::Outflow => out.extend([row[0], row[0]]),
        Boundary::Periodic => out.extend([row[n - 2], row[n - 1]]),
    }
    out.extend_from_slice(row);
    match bc {
        Boundary::Outflow => out.extend([row[n - 1], row[n - 1]]),
        Boundary::Periodic => out.extend([row[0], row[1]]),
    }
    out
}

pub(crate) fn max_speed<A: Arith>(c: &mut A, speeds: &[A::V]) -> A::V {
    let mut acc = speeds[0];
    for &s in &speeds[1..] {
        acc = c.max(acc, s);
    }
    acc
}

/// Split fluxes of every field, already padded with ghosts.
pub(crate) fn split_row<A: Arith>(
    c: &mut A,
    u: &[Vec<A::V>],
    f: &[Vec<A::V>],
    alpha: A::V,
    bc: Boundary,
) -> (Vec<Vec<A::V>>, Vec<Vec<A::V>>) {
    let half = c.lit(0.5);
    let mut plus = Vec::with_capacity(u.len());
    let mut minus = Vec::with_capacity(u.len());
    for (uk, fk) in u.iter().zip(f) {
        let mut p = Vec::with_capacity(uk.len());
        let mut m = Vec::with_capacity(uk.len());
        for (&uj, &fj) in uk.iter().zip(fk) {
            let au = c.mul(alpha, uj);
            let s = c.add(fj, au);
            p.push(c.mul(half, s));
            let d = c.sub(fj, au);
            m.push(c.mul(half, d));
        }
        plus.push(extend(&p, bc));
        minus.push(extend(&m, bc));
    }
    (plus, minus)
}

/// Upwind-ordered stencils of interface `i` (between cells `i-1` and `i`) in
/// padded rows: the plus stencil reads cells `i-2, i-1, i`, the minus stencil
/// the mirrored `i+1, i, i-1`.
#[inline]
pub(crate) fn stencils<V: Copy>(plus: &[V], minus: &[V], i: usize) -> [[V; 3]; 2] {
    [[plus[i], plus[i + 1], plus[i + 2]], [minus[i + 3], minus[i + 2], minus[i + 1]]]
}

/// Interface fluxes of one row and the weights that produced them.
pub(crate) struct RowRecon<V> {
    /// `flux[k][i]` for field `k`, interface `i` in `0..=n`.
    pub flux: Vec<Vec<V>>,
    /// Weights at `(k * (n + 1) + i) * 2 + sign`, sign 0 = plus, 1 = minus.
    pub actions: Vec<[V; 2]>,
}

pub(crate) fn reconstruct_row<A: Arith>(
    c: &mut A,
    coeffs: &WenoCoefficients,
    plus: &[Vec<A::V>],
    minus: &[Vec<A::V>],
    policy: &dyn ActionPolicy,
) -> RowRecon<A::V> {
    let n = plus[0].len() - 2 * GHOST;
    let mut flux = Vec::with_capacity(plus.len());
    let mut actions = Vec::with_capacity(plus.len() * (n + 1) * 2);
    for (p, m) in plus.iter().zip(minus) {
        let mut fk = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let mut side = [p[0]; 2];
            for (sign, st) in stencils(p, m, i).into_iter().enumerate() {
                let w = c.weights(policy, st);
                let cand = candidates_generic(c, coeffs, st);
                let a = c.mul(w[0], cand[0]);
                let b = c.mul(w[1], cand[1]);
                side[sign] = c.add(a, b);
                actions.push(w);
            }
            fk.push(c.add(side[0], side[1]));
        }
        flux.push(fk);
    }
    RowRecon { flux, actions }
}

/// `u_j - dt/dx (F_{j+1} - F_j)` for every field.
pub(crate) fn update_rows<A: Arith>(c: &mut A, q: &[Vec<A::V>], flux: &[Vec<A::V>], dt_dx: f64) -> Vec<Vec<A::V>> {
    let r = c.lit(dt_dx);
    q.iter()
        .zip(flux)
        .map(|(uk, fk)| {
            uk.iter()
                .enumerate()
                .map(|(j, &u)| {
                    let d = c.sub(fk[j + 1], fk[j]);
                    let s = c.mul(r, d);
                    c.sub(u, s)
                })
                .collect()
        })
        .collect()
}

/// Result of [`step_1d`]: the agent-driven update and, optionally, the update
/// a reference policy would have made from the same state.
pub(crate) struct StepRecord<V> {
    pub next: Vec<Vec<V>>,
    pub agent: RowRecon<V>,
    pub reference: Option<(Vec<Vec<V>>, RowRecon<V>)>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn step_1d<A: Arith>(
    c: &mut A,
    spec: &EquationSpec,
    coeffs: &WenoCoefficients,
    q: &[Vec<A::V>],
    bc: Boundary,
    alpha: AlphaMode,
    dt_dx: f64,
    policy: &dyn ActionPolicy,
    reference: Option<&dyn ActionPolicy>,
) -> StepRecord<A::V> {
    let (f, speeds) = spec.flux_and_speed(c, q, Direction::X);
    let alpha = match alpha {
        AlphaMode::PerStep => max_speed(c, &speeds),
        AlphaMode::PerStepDetached => {
            let a = max_speed(c, &speeds);
            let v = c.val(a);
            c.lit(v)
        }
        AlphaMode::Frozen(a) => c.lit(a),
    };
    let (plus, minus) = split_row(c, q, &f, alpha, bc);
    let agent = reconstruct_row(c, coeffs, &plus, &minus, policy);
    let next = update_rows(c, q, &agent.flux, dt_dx);
    let reference = reference.map(|p| {
        let r = reconstruct_row(c, coeffs, &plus, &minus, p);
        (update_rows(c, q, &r.flux, dt_dx), r)
    });
    StepRecord { next, agent, reference }
}

pub(crate) fn to_rows(s: &ConservedState1D) -> Vec<Vec<f64>> {
    (0..s.nfields).map(|k| s.field(k).to_vec()).collect()
}

pub(crate) fn from_rows(rows: Vec<Vec<f64>>, like: &ConservedState1D) -> ConservedState1D {
    ConservedState1D { nfields: like.nfields, grid: like.grid, q: rows.concat() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outflow_copies_edges() {
        assert_eq!(extend(&[1, 2, 3, 4, 5], Boundary::Outflow), vec![1, 1, 1, 2, 3, 4, 5, 5, 5]);
    }

    #[test]
    fn periodic_wraps() {
        assert_eq!(extend(&[1, 2, 3, 4, 5], Boundary::Periodic), vec![4, 5, 1, 2, 3, 4, 5, 1, 2]);
    }

    #[test]
    fn stencil_indexing() {
        let p: Vec<usize> = (0..9).collect();
        // interface 0 sits between ghost -1 (padded 1) and cell 0 (padded 2)
        assert_eq!(stencils(&p, &p, 0), [[0, 1, 2], [3, 2, 1]]);
        assert_eq!(stencils(&p, &p, 5), [[5, 6, 7], [8, 7, 6]]);
    }

    #[test]
    fn boundary_names() {
        assert_eq!(Boundary::parse("periodic").unwrap(), Boundary::Periodic);
        assert!(Boundary::parse("reflect").is_err());
    }

    #[test]
    fn alpha_names_round_trip() {
        for m in [AlphaMode::PerStep, AlphaMode::PerStepDetached, AlphaMode::Frozen(2.5)] {
            assert_eq!(AlphaMode::parse(&m.name()).unwrap(), m);
        }
        assert!(AlphaMode::parse("frozen:-1").is_err());
        assert!(AlphaMode::parse("max").is_err());
    }
}
