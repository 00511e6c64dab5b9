//! Episode rollouts, plain and taped.

use super::reward::{interface_rewards, Reference, ReferenceContext, RewardModel, RewardStep, RewardTrace};
use super::{rows_of, EpisodeConfig};
use crate::autodiff::{Arith, Eval, NodeId, Tape};
use crate::error::{Error, Result};
use crate::physics::ConservedState1D;
use crate::scheme::ActionPolicy;
use crate::weno::{self, step_1d, weno_trajectory, WenoOracle};

/// Return reported for an episode that left the admissible set.
pub const DIVERGED_RETURN: f64 = -1e3;

/// A configured episode with its start state and reward reference resolved.
pub struct EpisodeSetup {
    pub cfg: EpisodeConfig,
    pub start: ConservedState1D,
    pub reference: Reference,
}

impl EpisodeSetup {
    /// Resolve the start state and reference, running classical WENO from the
    /// initial condition as far as needed.
    pub fn prepare(cfg: EpisodeConfig, model: &dyn RewardModel) -> Result<Self> {
        cfg.validate()?;
        let ic = cfg.ic.sample(cfg.grid()?, cfg.spec.gamma)?;
        let traj = weno_trajectory(&ic, &cfg.spec, &cfg.solver(), cfg.start_step + cfg.steps)?;
        Self::from_trajectory(cfg, model, &traj)
    }

    /// Like [`EpisodeSetup::prepare`] but slicing a classical WENO trajectory
    /// from the initial condition computed once by the caller.
    pub fn from_trajectory(cfg: EpisodeConfig, model: &dyn RewardModel, weno: &[ConservedState1D]) -> Result<Self> {
        cfg.validate()?;
        let needed = cfg.start_step + cfg.steps + 1;
        if weno.len() < needed {
            return Err(Error::ReferenceTooShort { needed, available: weno.len() });
        }
        let start = weno[cfg.start_step].clone();
        cfg.check_cfl(&start)?;
        let reference = model.reference(&ReferenceContext { cfg: &cfg, weno: &weno[cfg.start_step..needed] })?;
        Ok(Self { cfg, start, reference })
    }
}

/// A plain rollout.
#[derive(Debug, Clone)]
pub struct Episode {
    /// Start state followed by the state after every completed step.
    pub states: Vec<ConservedState1D>,
    pub trace: RewardTrace,
    /// Undiscounted return, or [`DIVERGED_RETURN`] when the episode diverged.
    pub ret: f64,
    /// Step (1-based) that produced an inadmissible state.
    pub diverged_at: Option<usize>,
}

impl Episode {
    /// Return of the completed steps, ignoring divergence.
    pub fn partial_return(&self) -> f64 {
        self.trace.total()
    }
}

/// Generic single step: returns the next rows and the step's rewards.
fn env_step<A: Arith>(
    c: &mut A,
    setup: &EpisodeSetup,
    policy: &dyn ActionPolicy,
    oracle: &WenoOracle,
    q: &[Vec<A::V>],
    t: usize,
    rec: &mut Option<&mut Vec<Vec<[A::V; 2]>>>,
) -> (Vec<Vec<A::V>>, Vec<A::V>, A::V) {
    let cfg = &setup.cfg;
    let dt_dx = cfg.dt / setup.start.dx();
    let one_step = matches!(setup.reference, Reference::OneStepWeno);
    let step = step_1d(
        c,
        &cfg.spec,
        &cfg.coeffs,
        q,
        cfg.boundary,
        cfg.alpha,
        dt_dx,
        policy,
        one_step.then_some(oracle as &dyn ActionPolicy),
    );
    let reference = match &setup.reference {
        Reference::OneStepWeno => step.reference.expect("reference requested").0,
        Reference::Fixed(states) => {
            let n = setup.start.n();
            states[t - 1].chunks_exact(n).map(|row| row.iter().map(|&v| c.lit(v)).collect()).collect()
        }
    };
    let (per_interface, total) = interface_rewards(c, &step.next, &reference);
    if let Some(r) = rec.as_mut() {
        r.push(step.agent.actions);
    }
    (step.next, per_interface, total)
}

/// Roll `policy` out for the configured number of steps without recording.
pub fn run_episode(policy: &dyn ActionPolicy, setup: &EpisodeSetup) -> Episode {
    let oracle = WenoOracle::new(setup.cfg.coeffs);
    let mut states = vec![setup.start.clone()];
    let mut trace = RewardTrace::default();
    let mut q = rows_of(&setup.start);
    for t in 1..=setup.cfg.steps {
        let (next, interface, total) = env_step(&mut Eval, setup, policy, &oracle, &q, t, &mut None);
        let state = weno::from_rows(next.clone(), &setup.start);
        if state.first_inadmissible(&setup.cfg.spec).is_some() || !total.is_finite() {
            return Episode { states, trace, ret: DIVERGED_RETURN, diverged_at: Some(t) };
        }
        trace.steps.push(RewardStep { interface, total });
        states.push(state);
        q = next;
    }
    let ret = trace.total();
    Episode { states, trace, ret, diverged_at: None }
}

/// Partial return of an episode evaluated in the arithmetic of `c`, with no
/// admissibility checks. Rewards are summed in step order like
/// [`record_rollout`].
pub fn rollout_return<A: Arith>(c: &mut A, policy: &dyn ActionPolicy, setup: &EpisodeSetup) -> A::V {
    let oracle = WenoOracle::new(setup.cfg.coeffs);
    let mut q: Vec<Vec<A::V>> = rows_of(&setup.start).iter().map(|r| r.iter().map(|&v| c.lit(v)).collect()).collect();
    let mut total = None;
    for t in 1..=setup.cfg.steps {
        let (next, _, r) = env_step(c, setup, policy, &oracle, &q, t, &mut None);
        total = Some(match total {
            None => r,
            Some(acc) => c.add(acc, r),
        });
        q = next;
    }
    total.unwrap_or_else(|| c.lit(0.0))
}

/// A stretch of an episode recorded on a tape.
pub struct TapedRollout {
    pub tape: Tape,
    /// Leaves holding the segment's start state, `[field][cell]`.
    pub start: Vec<Vec<NodeId>>,
    /// State after each recorded step.
    pub states: Vec<Vec<Vec<NodeId>>>,
    /// Agent weights of each step, indexed like the action tensor.
    pub actions: Vec<Vec<[NodeId; 2]>>,
    /// System reward of each step.
    pub rewards: Vec<NodeId>,
    /// Sum of `rewards`.
    pub total: NodeId,
}

/// Record steps `first + 1 ..= first + count` of an episode starting from `state`.
pub fn record_rollout(
    policy: &dyn ActionPolicy,
    setup: &EpisodeSetup,
    state: &ConservedState1D,
    first: usize,
    count: usize,
) -> Result<TapedRollout> {
    if count == 0 || first + count > setup.cfg.steps {
        return Err(Error::config(format!(
            "cannot record steps {}..={} of a {}-step episode",
            first + 1,
            first + count,
            setup.cfg.steps
        )));
    }
    let oracle = WenoOracle::new(setup.cfg.coeffs);
    let mut tape = Tape::new();
    let start: Vec<Vec<NodeId>> = rows_of(state).iter().map(|r| r.iter().map(|&v| tape.leaf(v)).collect()).collect();
    let mut q = start.clone();
    let mut states = Vec::with_capacity(count);
    let mut actions = Vec::with_capacity(count);
    let mut rewards = Vec::with_capacity(count);
    for t in first + 1..=first + count {
        let (next, _, total) = env_step(&mut tape, setup, policy, &oracle, &q, t, &mut Some(&mut actions));
        states.push(next.clone());
        rewards.push(total);
        q = next;
    }
    tape.check()?;
    let mut total = rewards[0];
    for &r in &rewards[1..] {
        total = tape.add(total, r);
    }
    Ok(TapedRollout { tape, start, states, actions, rewards, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::KvConfig;
    use crate::env::RewardRegistry;
    use crate::policy::{InputScaling, NeuralPolicy, PolicyParams};

    fn setup(reward: &str, n: usize, steps: usize) -> EpisodeSetup {
        let mut cfg = EpisodeConfig::from_config(&KvConfig::defaults(), "sod", n, 1e-4, steps).unwrap();
        cfg.reward = reward.into();
        let model = RewardRegistry::default().get(reward).unwrap();
        EpisodeSetup::prepare(cfg, model.as_ref()).unwrap()
    }

    #[test]
    fn weno_policy_earns_exactly_zero_under_rl_weno() {
        let s = setup("rl-weno", 64, 100);
        let ep = run_episode(&WenoOracle::default(), &s);
        assert_eq!(ep.ret, 0.0);
        assert!(ep.trace.steps.iter().all(|st| st.interface.iter().all(|&r| r == 0.0)));
        assert_eq!(ep.states.len(), 101);
    }

    #[test]
    fn random_network_loses_reward() {
        let s = setup("rl-weno", 64, 100);
        let ep = run_episode(&NeuralPolicy::new(PolicyParams::init(0), InputScaling::Smoothness), &s);
        assert!(ep.ret < 0.0, "{}", ep.ret);
    }

    #[test]
    fn bc_weno_and_rl_weno_agree_on_the_first_step() {
        let policy = NeuralPolicy::new(PolicyParams::init(2), InputScaling::Smoothness);
        let a = run_episode(&policy, &setup("rl-weno", 32, 3));
        let b = run_episode(&policy, &setup("bc-weno", 32, 3));
        assert_eq!(a.trace.steps[0], b.trace.steps[0]);
        assert_ne!(a.trace.steps[2], b.trace.steps[2]);
    }

    #[test]
    fn bc_analytical_penalises_even_weno() {
        let ep = run_episode(&WenoOracle::default(), &setup("bc-analytical", 32, 5));
        assert!(ep.ret < 0.0);
        assert!(ep.trace.steps.iter().all(|s| s.total <= 0.0));
    }

    #[test]
    fn taped_rollout_matches_plain_values() {
        let s = setup("rl-weno", 32, 6);
        let policy = NeuralPolicy::new(PolicyParams::init(4), InputScaling::Smoothness);
        let plain = run_episode(&policy, &s);
        let taped = record_rollout(&policy, &s, &s.start, 0, 6).unwrap();
        assert_eq!(taped.tape.value(taped.total).to_bits(), plain.ret.to_bits());
        let last = &taped.states[5];
        for (k, row) in last.iter().enumerate() {
            for (j, &id) in row.iter().enumerate() {
                assert_eq!(taped.tape.value(id).to_bits(), plain.states[6].field(k)[j].to_bits());
            }
        }
        // a later segment restarts from a stored state
        let tail = record_rollout(&policy, &s, &plain.states[3], 3, 3).unwrap();
        let head: f64 = plain.trace.totals()[..3].iter().sum();
        assert!((head + tail.tape.value(tail.total) - plain.ret).abs() <= 1e-15 * plain.ret.abs());
        assert!(record_rollout(&policy, &s, &s.start, 4, 3).is_err());
    }

    #[test]
    fn divergence_is_flagged() {
        let s = setup("rl-weno", 32, 200);
        // far outside the simplex: strongly anti-diffusive
        let ep = run_episode(&crate::scheme::FixedWeights([40.0, -39.0]), &s);
        let t = ep.diverged_at.expect("should diverge");
        assert_eq!(ep.ret, DIVERGED_RETURN);
        assert_eq!(ep.states.len(), t);
        assert_eq!(ep.trace.steps.len(), t - 1);
        assert!(ep.partial_return() > DIVERGED_RETURN);
    }
}
