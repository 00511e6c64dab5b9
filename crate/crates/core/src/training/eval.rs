//! Side-by-side runs of a policy, classical WENO and the exact solution.

use std::fmt::Write as _;

use crate::config::KvConfig;
use crate::env::{
    apply_actions, kelvin_helmholtz, observe, solve_2d, transition, ActionTensor, EpisodeConfig, Grid2D,
    Solve2dConfig, State2D,
};
use crate::error::{Error, Result};
use crate::physics::ConservedState1D;
use crate::scheme::ActionPolicy;
use crate::weno::{weno_step, Boundary, WenoCoefficients, WenoOracle};

/// `sqrt(sum_j (a_j - b_j)^2 dx) * calibration` over field 0 (density for Euler).
pub fn field0_l2(a: &ConservedState1D, b: &ConservedState1D, calibration: f64) -> f64 {
    let s: f64 = a.field(0).iter().zip(b.field(0)).map(|(x, y)| (x - y) * (x - y)).sum();
    (s * a.dx()).sqrt() * calibration
}

/// What to evaluate: an initial condition on `n` cells, run to `t_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub ic: String,
    pub n: usize,
    pub dt: f64,
    /// Defaults to the initial condition's `t_final` from the config.
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ic: String,
    pub equation: String,
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub calibration: f64,
    pub l2_agent_weno: f64,
    pub l2_agent_exact: Option<f64>,
    pub l2_weno_exact: Option<f64>,
    /// Largest weight difference between the agent and WENO over every
    /// interface agent and step, measured on the agent's own states.
    pub max_action_deviation: f64,
    pub agent: ConservedState1D,
    pub weno: ConservedState1D,
    pub exact: Option<ConservedState1D>,
}

impl EvalReport {
    /// Agent-vs-WENO error relative to WENO-vs-exact.
    pub fn relative_agreement(&self) -> Option<f64> {
        self.l2_weno_exact.map(|w| self.l2_agent_weno / w)
    }

    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:e}"));
        let mut s = String::new();
        let p = format!("{}.n{}", self.ic, self.n);
        writeln!(s, "{p}.equation = {}", self.equation).unwrap();
        writeln!(s, "{p}.dt = {}", self.dt).unwrap();
        writeln!(s, "{p}.steps = {}", self.steps).unwrap();
        writeln!(s, "{p}.t_final = {}", self.t_final).unwrap();
        writeln!(s, "{p}.l2_agent_weno = {:e}", self.l2_agent_weno).unwrap();
        writeln!(s, "{p}.l2_agent_exact = {}", opt(self.l2_agent_exact)).unwrap();
        writeln!(s, "{p}.l2_weno_exact = {}", opt(self.l2_weno_exact)).unwrap();
        writeln!(s, "{p}.relative_agreement = {}", opt(self.relative_agreement())).unwrap();
        writeln!(s, "{p}.max_action_deviation = {:e}", self.max_action_deviation).unwrap();
        s
    }
}

/// Lines describing the error metric, for the head of a report.
pub fn metric_description(calibration: f64) -> String {
    format!(
        "metric = sqrt(sum_j (rho_j - rho_ref(x_j))^2 dx) * calibration, field 0, forward Euler\n\
         calibration = {calibration}\n"
    )
}

/// Roll `policy` and classical WENO out side by side from the same initial condition.
pub fn evaluate(policy: &dyn ActionPolicy, kv: &KvConfig, case: &EvalCase) -> Result<EvalReport> {
    let t_final = match case.t_final {
        Some(t) => t,
        None => kv.require(&format!("ic.{}.t_final", case.ic))?,
    };
    let mut cfg = EpisodeConfig::from_config(kv, &case.ic, case.n, case.dt, 1)?;
    let solver = cfg.solver();
    let steps = solver.steps_for(t_final)?;
    cfg.steps = steps.max(1);
    cfg.validate()?;
    let calibration = kv.get_or("eval.l2_calibration", 1.0)?;
    let grid = cfg.grid()?;
    let start = cfg.ic.sample(grid, cfg.spec.gamma)?;
    cfg.check_cfl(&start)?;
    let oracle = WenoOracle::new(cfg.coeffs);

    let mut agent = start.clone();
    let mut weno = start;
    let mut dev = 0.0f64;
    for step in 1..=steps {
        let obs = observe(&agent, &cfg)?;
        let act = ActionTensor::from_policy(&obs, policy);
        let reference = ActionTensor::from_policy(&obs, &oracle);
        for (a, b) in act.values.iter().zip(&reference.values) {
            dev = dev.max((a - b).abs());
        }
        let fluxes = apply_actions(&obs, &act, &cfg.coeffs)?;
        agent = transition(&agent, &fluxes, cfg.dt, &cfg.spec).map_err(|e| at(e, step))?;
        weno = weno_step(&weno, &cfg.spec, &solver).map_err(|e| at(e, step))?;
    }
    let exact = cfg.ic.exact_profile(grid, cfg.spec.gamma, steps as f64 * cfg.dt)?;
    Ok(EvalReport {
        ic: case.ic.clone(),
        equation: cfg.spec.kind.name().to_string(),
        n: case.n,
        dt: case.dt,
        steps,
        t_final,
        calibration,
        l2_agent_weno: field0_l2(&agent, &weno, calibration),
        l2_agent_exact: exact.as_ref().map(|e| field0_l2(&agent, e, calibration)),
        l2_weno_exact: exact.as_ref().map(|e| field0_l2(&weno, e, calibration)),
        max_action_deviation: dev,
        agent,
        weno,
        exact,
    })
}

fn at(e: Error, step: usize) -> Error {
    match e {
        Error::BlowUp { reason, .. } => Error::BlowUp { step, reason },
        other => other,
    }
}

/// Agent and WENO errors against the exact solution, one row per `n` and two
/// columns per initial condition.
pub fn error_table(reports: &[EvalReport]) -> String {
    let mut ics: Vec<&str> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for r in reports {
        if !ics.contains(&r.ic.as_str()) {
            ics.push(&r.ic);
        }
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
    }
    ns.sort_unstable();
    let mut s = String::from("n");
    for ic in &ics {
        write!(s, ",{ic}_agent,{ic}_weno").unwrap();
    }
    s.push('\n');
    for n in ns {
        write!(s, "{n}").unwrap();
        for ic in &ics {
            match reports.iter().find(|r| r.n == n && r.ic == *ic) {
                Some(r) => {
                    let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
                    write!(s, ",{},{}", f(r.l2_agent_exact), f(r.l2_weno_exact)).unwrap();
                }
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    s
}

/// Outcome of a 2D Kelvin-Helmholtz run.
#[derive(Debug, Clone, PartialEq)]
pub struct KhReport {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub steps: usize,
    pub completed: usize,
    /// Smallest density and pressure seen over all completed steps.
    pub min_density: f64,
    pub min_pressure: f64,
    pub failure: Option<String>,
    pub last: State2D,
}

impl KhReport {
    pub fn stable(&self) -> bool {
        self.failure.is_none() && self.completed == self.steps && self.min_density > 0.0 && self.min_pressure > 0.0
    }

    pub fn render(&self, label: &str) -> String {
        let mut s = String::new();
        writeln!(s, "{label}.grid = {}x{}", self.nx, self.ny).unwrap();
        writeln!(s, "{label}.dt = {}", self.dt).unwrap();
        writeln!(s, "{label}.steps = {}", self.steps).unwrap();
        writeln!(s, "{label}.completed = {}", self.completed).unwrap();
        writeln!(s, "{label}.min_density = {:e}", self.min_density).unwrap();
        writeln!(s, "{label}.min_pressure = {:e}", self.min_pressure).unwrap();
        writeln!(s, "{label}.stable = {}", self.stable()).unwrap();
        if let Some(f) = &self.failure {
            writeln!(s, "{label}.failure = {f}").unwrap();
        }
        s
    }
}

/// Periodic Kelvin-Helmholtz run on an `n x n` grid. Blow-ups are reported,
/// not returned as errors.
pub fn evaluate_kh(policy: &dyn ActionPolicy, n: usize, dt: f64, t_final: f64, gamma: f64) -> Result<KhReport> {
    let initial = kelvin_helmholtz(n, n, gamma)?;
    let steps = crate::weno::SolverConfig::new(dt).steps_for(t_final)?;
    let cfg = Solve2dConfig {
        gamma,
        dt,
        steps,
        boundary_x: Boundary::Periodic,
        boundary_y: Boundary::Periodic,
        coeffs: WenoCoefficients::default(),
    };
    let (mut rho, mut p) = initial.min_density_pressure(gamma).unwrap_or((f64::NAN, f64::NAN));
    let mut completed = 0;
    let mut last = initial.clone();
    let outcome = solve_2d(&initial, &cfg, policy, |k, s| {
        if let Some((r, q)) = s.min_density_pressure(gamma) {
            rho = rho.min(r);
            p = p.min(q);
        }
        completed = k;
        if k == steps {
            last = s.clone();
        }
    });
    let failure = match outcome {
        Ok(_) => None,
        Err(e @ Error::BlowUp { .. }) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let Grid2D { nx, ny, .. } = initial.grid;
    Ok(KhReport { nx, ny, dt, steps, completed, min_density: rho, min_pressure: p, failure, last })
}
