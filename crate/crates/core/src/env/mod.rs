//! The interface-agent environment: one agent per field, interface and split
//! sign observes a three-point stencil and chooses two reconstruction weights;
//! the solver's conservative update is the transition.

mod euler2d;
mod reward;
mod rollout;

pub use euler2d::{kelvin_helmholtz, solve_2d, step_2d, y_uniform, Grid2D, Solve2dConfig, State2D};
pub use reward::{
    reward_against, reward_bc, reward_rl_weno, BcAnalytical, BcWeno, Reference, ReferenceContext, RewardModel,
    RewardRegistry, RewardStep, RewardTrace, RlWeno,
};
pub use rollout::{record_rollout, rollout_return, run_episode, Episode, EpisodeSetup, TapedRollout, DIVERGED_RETURN};

use crate::autodiff::Eval;
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::physics::{max_wave_speed, ConservedState1D, Direction, EquationSpec, Grid1D, InitialCondition};
use crate::scheme::ActionPolicy;
use crate::weno::{
    self, reconstruct_interface, split_row, stencils, update_rows, AlphaMode, Boundary, SolverConfig,
    TimeScheme, WenoCoefficients,
};

/// Everything that defines one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub spec: EquationSpec,
    pub ic: InitialCondition,
    pub n: usize,
    pub x0: f64,
    pub x1: f64,
    pub dt: f64,
    pub steps: usize,
    pub boundary: Boundary,
    pub alpha: AlphaMode,
    pub coeffs: WenoCoefficients,
    /// Reward model name, resolved through [`RewardRegistry`].
    pub reward: String,
    /// The episode starts from the classical WENO solution after this many
    /// steps of size `dt` (0 = the initial condition itself).
    pub start_step: usize,
}

impl EpisodeConfig {
    /// Built-in initial condition `ic` with gamma, domain and `weno.eps` from `cfg`.
    pub fn from_config(cfg: &KvConfig, ic: &str, n: usize, dt: f64, steps: usize) -> Result<Self> {
        let ic = InitialCondition::builtin(ic, cfg)?;
        let gamma = cfg.get_or("gamma", 1.4)?;
        let spec = EquationSpec { kind: ic.equation(), gamma };
        Ok(Self {
            spec,
            ic,
            n,
            x0: cfg.get_or("domain.x0", 0.0)?,
            x1: cfg.get_or("domain.x1", 1.0)?,
            dt,
            steps,
            boundary: Boundary::Outflow,
            alpha: AlphaMode::PerStep,
            coeffs: WenoCoefficients::with_eps(cfg.get_or("weno.eps", 1e-6)?)?,
            reward: "rl-weno".into(),
            start_step: 0,
        })
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.n, self.x0, self.x1)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            boundary: self.boundary,
            time: TimeScheme::ForwardEuler,
            alpha: self.alpha,
            coeffs: self.coeffs,
        }
    }

    /// Checks that do not need the start state; see also [`EpisodeConfig::check_cfl`].
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("an episode needs at least one step"));
        }
        self.spec.validate()?;
        self.grid()?;
        self.solver().validate()
    }

    /// `dt * alpha / dx <= 1` on `state`.
    pub fn check_cfl(&self, state: &ConservedState1D) -> Result<f64> {
        let alpha = match self.alpha {
            AlphaMode::Frozen(a) => a,
            _ => max_wave_speed(state, &self.spec)?,
        };
        let cfl = self.dt * alpha / state.dx();
        if cfl > 1.0 {
            return Err(Error::config(format!("CFL number {cfl:.3} exceeds 1 (dt={}, dx={})", self.dt, state.dx())));
        }
        Ok(cfl)
    }
}

/// Observations of every agent: `values[((k * (n + 1) + i) * 2 + sign) * 3 + p]`
/// for field `k`, interface `i`, sign (0 plus, 1 minus) and stencil point `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTensor {
    pub nfields: usize,
    pub interfaces: usize,
    pub values: Vec<f64>,
    /// Splitting speed used to build the observation.
    pub alpha: f64,
}

impl ObservationTensor {
    pub fn shape(&self) -> [usize; 4] {
        [self.nfields, self.interfaces, 2, 3]
    }

    pub fn stencil(&self, k: usize, i: usize, sign: usize) -> [f64; 3] {
        let o = ((k * self.interfaces + i) * 2 + sign) * 3;
        [self.values[o], self.values[o + 1], self.values[o + 2]]
    }

    /// Recover interior cell values from the observations alone:
    /// `u_j = (f+_j - f-_j) / alpha`, read from the centre points of the
    /// stencils of the two interfaces bracketing cell `j`.
    pub fn reconstruct_state(&self) -> Result<Vec<f64>> {
        if !(self.alpha > 0.0) {
            return Err(Error::config("state is not observable with alpha = 0"));
        }
        let n = self.interfaces - 1;
        let mut q = Vec::with_capacity(self.nfields * n);
        for k in 0..self.nfields {
            for j in 0..n {
                let fp = self.stencil(k, j + 1, 0)[1];
                let fm = self.stencil(k, j, 1)[1];
                q.push((fp - fm) / self.alpha);
            }
        }
        Ok(q)
    }
}

/// Weights for every agent, laid out like [`ObservationTensor`] with two entries per stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTensor {
    pub nfields: usize,
    pub interfaces: usize,
    pub values: Vec<f64>,
}

impl ActionTensor {
    pub fn shape(&self) -> [usize; 4] {
        [self.nfields, self.interfaces, 2, 2]
    }

    pub fn weights(&self, k: usize, i: usize, sign: usize) -> [f64; 2] {
        let o = ((k * self.interfaces + i) * 2 + sign) * 2;
        [self.values[o], self.values[o + 1]]
    }

    /// Ask `policy` for the weights of every agent in `obs`.
    pub fn from_policy(obs: &ObservationTensor, policy: &dyn ActionPolicy) -> Self {
        let values = obs.values.chunks_exact(3).flat_map(|s| policy.weights([s[0], s[1], s[2]])).collect();
        Self { nfields: obs.nfields, interfaces: obs.interfaces, values }
    }
}

pub(crate) fn rows_of(s: &ConservedState1D) -> Vec<Vec<f64>> {
    weno::to_rows(s)
}

/// Stencils of every agent for `state`, using the splitting speed of `cfg`.
pub fn observe(state: &ConservedState1D, cfg: &EpisodeConfig) -> Result<ObservationTensor> {
    state.check_admissible(&cfg.spec)?;
    let c = &mut Eval;
    let q = rows_of(state);
    let (f, speeds) = cfg.spec.flux_and_speed(c, &q, Direction::X);
    let alpha = match cfg.alpha {
        AlphaMode::Frozen(a) => a,
        _ => weno::max_speed(c, &speeds),
    };
    let (plus, minus) = split_row(c, &q, &f, alpha, cfg.boundary);
    let n = state.n();
    let mut values = Vec::with_capacity(state.nfields * (n + 1) * 6);
    for (p, m) in plus.iter().zip(&minus) {
        for i in 0..=n {
            for st in stencils(p, m, i) {
                values.extend(st);
            }
        }
    }
    Ok(ObservationTensor { nfields: state.nfields, interfaces: n + 1, values, alpha })
}

/// Interface fluxes `flux[k][i]` from observed stencils and chosen weights.
pub fn apply_actions(
    obs: &ObservationTensor,
    actions: &ActionTensor,
    coeffs: &WenoCoefficients,
) -> Result<Vec<Vec<f64>>> {
    if obs.shape()[..2] != actions.shape()[..2] {
        return Err(Error::config("observation and action tensors disagree in shape"));
    }
    (0..obs.nfields)
        .map(|k| {
            (0..obs.interfaces)
                .map(|i| {
                    reconstruct_interface(
                        obs.stencil(k, i, 0),
                        obs.stencil(k, i, 1),
                        actions.weights(k, i, 0),
                        actions.weights(k, i, 1),
                        coeffs,
                    )
                })
                .collect()
        })
        .collect()
}

/// Conservative update `u_j - dt/dx (F_{j+1} - F_j)`.
pub fn transition(
    state: &ConservedState1D,
    fluxes: &[Vec<f64>],
    dt: f64,
    spec: &EquationSpec,
) -> Result<ConservedState1D> {
    let n = state.n();
    if fluxes.len() != state.nfields || fluxes.iter().any(|f| f.len() != n + 1) {
        return Err(Error::config("flux array does not match the state"));
    }
    let next = update_rows(&mut Eval, &rows_of(state), fluxes, dt / state.dx());
    let next = weno::from_rows(next, state);
    if let Some(j) = next.first_inadmissible(spec) {
        return Err(Error::BlowUp { step: 0, reason: format!("cell {j} inadmissible: {:?}", next.cell(j)) });
    }
    Ok(next)
}
