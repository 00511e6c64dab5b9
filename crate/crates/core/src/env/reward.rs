//! Reward formulations. Every model scores the agents' state against a
//! reference with the same interface rule: interface `i` (between cells `i-1`
//! and `i`) earns minus the mean absolute error of its two cells, where ghost
//! cells count as error-free. Summing over interfaces then gives exactly minus
//! the total absolute error, each cell counted once.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::EpisodeConfig;
use crate::autodiff::{Arith, Eval};
use crate::error::{Error, Result};
use crate::physics::ConservedState1D;
use crate::weno::{weno_step, SolverConfig};

/// Rewards of one step: per field and interface (`k * (n + 1) + i`) and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardStep {
    pub interface: Vec<f64>,
    pub total: f64,
}

/// Per-step rewards of one episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardTrace {
    pub steps: Vec<RewardStep>,
}

impl RewardTrace {
    pub fn totals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.total).collect()
    }

    /// Undiscounted sum of the system rewards.
    pub fn total(&self) -> f64 {
        self.steps.iter().map(|s| s.total).sum()
    }
}

/// Interface rewards of `next` against `reference`, both field-major rows.
/// Returns the per-interface values and their sequential sum.
pub(crate) fn interface_rewards<A: Arith>(
    c: &mut A,
    next: &[Vec<A::V>],
    reference: &[Vec<A::V>],
) -> (Vec<A::V>, A::V) {
    let half = c.lit(-0.5);
    let n = next[0].len();
    let mut out = Vec::with_capacity(next.len() * (n + 1));
    for (u, r) in next.iter().zip(reference) {
        let e: Vec<A::V> = u
            .iter()
            .zip(r)
            .map(|(&a, &b)| {
                let d = c.sub(a, b);
                c.abs(d)
            })
            .collect();
        out.push(c.mul(half, e[0]));
        for i in 1..n {
            let s = c.add(e[i - 1], e[i]);
            out.push(c.mul(half, s));
        }
        out.push(c.mul(half, e[n - 1]));
    }
    let mut total = out[0];
    for &r in &out[1..] {
        total = c.add(total, r);
    }
    (out, total)
}

fn rows(s: &ConservedState1D) -> Vec<Vec<f64>> {
    (0..s.nfields).map(|k| s.field(k).to_vec()).collect()
}

/// Rewards of `next` against an arbitrary reference state on the same grid.
pub fn reward_against(next: &ConservedState1D, reference: &ConservedState1D) -> Result<RewardStep> {
    if next.grid != reference.grid || next.nfields != reference.nfields {
        return Err(Error::config("reward reference lives on a different grid"));
    }
    let (interface, total) = interface_rewards(&mut Eval, &rows(next), &rows(reference));
    Ok(RewardStep { interface, total })
}

/// Markovian reward: compare with one classical WENO step from `prev`.
pub fn reward_rl_weno(
    prev: &ConservedState1D,
    next: &ConservedState1D,
    spec: &crate::physics::EquationSpec,
    solver: &SolverConfig,
) -> Result<RewardStep> {
    let reference = weno_step(prev, spec, solver)?;
    reward_against(next, &reference)
}

/// Behaviour-cloning reward at step `t` (1-based) against a precomputed
/// trajectory whose entry 0 is the episode's start state.
pub fn reward_bc(next: &ConservedState1D, trajectory: &[ConservedState1D], t: usize) -> Result<RewardStep> {
    let reference = trajectory
        .get(t)
        .ok_or(Error::ReferenceTooShort { needed: t + 1, available: trajectory.len() })?;
    reward_against(next, reference)
}

/// Where a model's per-step reference comes from.
pub enum Reference {
    /// One classical WENO step from the agents' previous state.
    OneStepWeno,
    /// Fixed states for steps `1..=steps`, field-major.
    Fixed(Vec<Vec<f64>>),
}

/// Data a reward model may draw its reference from.
pub struct ReferenceContext<'a> {
    pub cfg: &'a EpisodeConfig,
    /// Classical WENO states from the episode start, at least `steps + 1` long.
    pub weno: &'a [ConservedState1D],
}

pub trait RewardModel: Send + Sync {
    fn name(&self) -> &str;
    fn reference(&self, ctx: &ReferenceContext<'_>) -> Result<Reference>;
}

/// Compare with WENO applied to the agents' own previous state.
pub struct RlWeno;

/// Compare with a WENO trajectory computed from the episode start.
pub struct BcWeno;

/// Compare with the exact solution.
pub struct BcAnalytical;

impl RewardModel for RlWeno {
    fn name(&self) -> &str {
        "rl-weno"
    }

    fn reference(&self, _: &ReferenceContext<'_>) -> Result<Reference> {
        Ok(Reference::OneStepWeno)
    }
}

impl RewardModel for BcWeno {
    fn name(&self) -> &str {
        "bc-weno"
    }

    fn reference(&self, ctx: &ReferenceContext<'_>) -> Result<Reference> {
        let steps = ctx.cfg.steps;
        if ctx.weno.len() < steps + 1 {
            return Err(Error::ReferenceTooShort { needed: steps + 1, available: ctx.weno.len() });
        }
        Ok(Reference::Fixed(ctx.weno[1..=steps].iter().map(|s| s.q.clone()).collect()))
    }
}

impl RewardModel for BcAnalytical {
    fn name(&self) -> &str {
        "bc-analytical"
    }

    fn reference(&self, ctx: &ReferenceContext<'_>) -> Result<Reference> {
        let cfg = ctx.cfg;
        let grid = cfg.grid()?;
        (1..=cfg.steps)
            .map(|t| {
                let time = (cfg.start_step + t) as f64 * cfg.dt;
                cfg.ic
                    .exact_profile(grid, cfg.spec.gamma, time)?
                    .map(|s| s.q)
                    .ok_or_else(|| Error::config(format!("`{}` has no analytical solution", cfg.ic.name())))
            })
            .collect::<Result<Vec<_>>>()
            .map(Reference::Fixed)
    }
}

/// Reward models by name.
pub struct RewardRegistry {
    models: BTreeMap<String, Arc<dyn RewardModel>>,
}

impl Default for RewardRegistry {
    fn default() -> Self {
        let mut r = Self { models: BTreeMap::new() };
        r.register(Arc::new(RlWeno));
        r.register(Arc::new(BcWeno));
        r.register(Arc::new(BcAnalytical));
        r
    }
}

impl RewardRegistry {
    pub fn register(&mut self, model: Arc<dyn RewardModel>) {
        self.models.insert(model.name().to_string(), model);
    }

    pub fn names(&self) -> Vec<&str> {
        self.models.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn RewardModel>> {
        self.models.get(name).cloned().ok_or_else(|| {
            Error::config(format!("unknown reward `{name}` (known: {})", self.names().join(", ")))
        })
    }
}
