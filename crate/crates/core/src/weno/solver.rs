use super::kernel::{from_rows, step_1d, to_rows};
use super::{AlphaMode, Boundary, WenoCoefficients, WenoOracle};
use crate::autodiff::Eval;
use crate::error::{Error, Result};
use crate::physics::{ConservedState1D, EquationSpec};
use crate::scheme::ActionPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    ForwardEuler,
    /// Three-stage strong-stability-preserving Runge-Kutta.
    SspRk3,
}

impl TimeScheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euler" | "forward-euler" | "fe" => Ok(Self::ForwardEuler),
            "rk3" | "ssp-rk3" => Ok(Self::SspRk3),
            other => Err(Error::config(format!("unknown time scheme `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ForwardEuler => "euler",
            Self::SspRk3 => "rk3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub boundary: Boundary,
    pub time: TimeScheme,
    pub alpha: AlphaMode,
    pub coeffs: WenoCoefficients,
}

impl SolverConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            boundary: Boundary::Outflow,
            time: TimeScheme::ForwardEuler,
            alpha: AlphaMode::PerStep,
            coeffs: WenoCoefficients::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if let AlphaMode::Frozen(a) = self.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::config(format!("frozen alpha must be non-negative, got {a}")));
            }
        }
        Ok(())
    }

    /// Whole number of steps reaching `t_final`.
    pub fn steps_for(&self, t_final: f64) -> Result<usize> {
        let steps = (t_final / self.dt).round();
        if !(steps >= 0.0) || ((steps * self.dt) - t_final).abs() > 1e-9 * t_final.max(1.0) {
            return Err(Error::config(format!("t_final {t_final} is not a multiple of dt {}", self.dt)));
        }
        Ok(steps as usize)
    }
}

fn euler_stage(
    rows: &[Vec<f64>],
    spec: &EquationSpec,
    cfg: &SolverConfig,
    dt_dx: f64,
    policy: &dyn ActionPolicy,
) -> Vec<Vec<f64>> {
    step_1d(&mut Eval, spec, &cfg.coeffs, rows, cfg.boundary, cfg.alpha, dt_dx, policy, None).next
}

fn blend(a: f64, x: &[Vec<f64>], b: f64, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().zip(y).map(|(xr, yr)| xr.iter().zip(yr).map(|(&u, &v)| a * u + b * v).collect()).collect()
}

/// One step of the conservative scheme with weights from `policy`.
pub fn policy_step(
    state: &ConservedState1D,
    spec: &EquationSpec,
    cfg: &SolverConfig,
    policy: &dyn ActionPolicy,
) -> Result<ConservedState1D> {
    let dt_dx = cfg.dt / state.dx();
    let rows = to_rows(state);
    let next = match cfg.time {
        TimeScheme::ForwardEuler => euler_stage(&rows, spec, cfg, dt_dx, policy),
        TimeScheme::SspRk3 => {
            let u1 = euler_stage(&rows, spec, cfg, dt_dx, policy);
            let u1s = euler_stage(&u1, spec, cfg, dt_dx, policy);
            let u2 = blend(0.75, &rows, 0.25, &u1s);
            let u2s = euler_stage(&u2, spec, cfg, dt_dx, policy);
            blend(1.0 / 3.0, &rows, 2.0 / 3.0, &u2s)
        }
    };
    let next = from_rows(next, state);
    if let Some(j) = next.first_inadmissible(spec) {
        return Err(Error::BlowUp { step: 0, reason: format!("cell {j} inadmissible: {:?}", next.cell(j)) });
    }
    Ok(next)
}

/// One classical WENO step.
pub fn weno_step(state: &ConservedState1D, spec: &EquationSpec, cfg: &SolverConfig) -> Result<ConservedState1D> {
    policy_step(state, spec, cfg, &WenoOracle::new(cfg.coeffs))
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::BlowUp { reason, .. } => Error::BlowUp { step, reason },
        other => other,
    }
}

/// Advance `steps` steps with weights from `policy`.
pub fn solve_with_policy(
    state: &ConservedState1D,
    spec: &EquationSpec,
    cfg: &SolverConfig,
    policy: &dyn ActionPolicy,
    steps: usize,
) -> Result<ConservedState1D> {
    cfg.validate()?;
    let mut s = state.clone();
    for step in 0..steps {
        s = policy_step(&s, spec, cfg, policy).map_err(|e| at_step(e, step + 1))?;
    }
    Ok(s)
}

/// Classical WENO solution at `t_final`.
pub fn weno_solve(
    state: &ConservedState1D,
    spec: &EquationSpec,
    cfg: &SolverConfig,
    t_final: f64,
) -> Result<ConservedState1D> {
    let steps = cfg.steps_for(t_final)?;
    solve_with_policy(state, spec, cfg, &WenoOracle::new(cfg.coeffs), steps)
}

/// Classical WENO states `0..=steps`, starting with `state` itself.
pub fn weno_trajectory(
    state: &ConservedState1D,
    spec: &EquationSpec,
    cfg: &SolverConfig,
    steps: usize,
) -> Result<Vec<ConservedState1D>> {
    cfg.validate()?;
    let oracle = WenoOracle::new(cfg.coeffs);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for step in 0..steps {
        let next = policy_step(&out[step], spec, cfg, &oracle).map_err(|e| at_step(e, step + 1))?;
        out.push(next);
    }
    Ok(out)
}
