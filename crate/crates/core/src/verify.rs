//! Self-checks of the solver, environment and trainer, each reporting how
//! close it came to its tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::GRAD_CHECK_EPS;
use crate::config::KvConfig;
use crate::env::{record_rollout, run_episode, EpisodeConfig, EpisodeSetup, RewardRegistry};
use crate::error::Result;
use crate::physics::{ConservedState1D, EquationSpec, Grid1D, Primitive};
use crate::policy::{InputScaling, NeuralPolicy, PolicyParams};
use crate::scheme::ActionPolicy;
use crate::training::{bptts_gradient, finite_difference, GradientOptions};
use crate::weno::{candidate_fluxes, solve_with_policy, AlphaMode, Boundary, SolverConfig, WenoCoefficients, WenoOracle};

/// Names accepted by [`run_checks`], in run order.
pub const CHECK_NAMES: &[&str] =
    &["linear", "simplex", "conservation", "fixed-point", "locality", "oracle-return", "grad"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.3e} (tolerance {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.detail
        )
    }
}

/// Both candidate reconstructions are exact on linear data.
pub fn check_linear(coeffs: &WenoCoefficients) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        // point values a + b x at x = 0, 1, 2; the face sits at x = 1.5
        let c = candidate_fluxes([a, a + b, a + 2.0 * b], coeffs);
        let exact = a + 1.5 * b;
        worst = worst.max((c[0] - exact).abs()).max((c[1] - exact).abs());
    }
    CheckResult::new("linear", worst, 1e-12, "max candidate error on 1000 linear stencils".into())
}

/// Classical and network weights are convex on random stencils.
pub fn check_simplex(samples: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = NeuralPolicy::new(PolicyParams::init(3), InputScaling::Smoothness);
    let weno = WenoOracle::default();
    let mut worst = 0.0f64;
    let mut outside = 0usize;
    for _ in 0..samples {
        let scale = 10f64.powf(rng.gen_range(-6.0..3.0));
        let s = [rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale];
        for w in [net.weights(s), weno.weights(s)] {
            worst = worst.max((w[0] + w[1] - 1.0).abs());
            if !(0.0..=1.0).contains(&w[0]) || !(0.0..=1.0).contains(&w[1]) {
                outside += 1;
            }
        }
    }
    let mut r = CheckResult::new("simplex", worst, 1e-12, format!("|w0 + w1 - 1| over {samples} stencils"));
    if outside > 0 {
        r.passed = false;
        r.detail.push_str(&format!(", {outside} weights outside [0, 1]"));
    }
    r
}

/// Smooth periodic Euler state on `n` cells.
pub fn periodic_wave(n: usize, gamma: f64) -> Result<ConservedState1D> {
    let grid = Grid1D::new(n, 0.0, 1.0)?;
    let mut q = vec![0.0; 3 * n];
    for j in 0..n {
        let x = grid.center(j);
        let w = Primitive::new(1.0 + 0.2 * (2.0 * std::f64::consts::PI * x).sin(), 0.5, 1.0).to_conserved(gamma);
        for k in 0..3 {
            q[k * n + j] = w[k];
        }
    }
    ConservedState1D::new(3, grid, q)
}

/// Totals of every field survive `steps` periodic steps.
pub fn check_conservation(steps: usize) -> Result<CheckResult> {
    let spec = EquationSpec::euler(1.4);
    let s0 = periodic_wave(64, 1.4)?;
    let cfg = SolverConfig { boundary: Boundary::Periodic, ..SolverConfig::new(1e-3) };
    let before = s0.totals();
    let mut worst = 0.0f64;
    let policies: [&dyn ActionPolicy; 2] = [&WenoOracle::default(), &NeuralPolicy::new(PolicyParams::init(5), InputScaling::Smoothness)];
    for p in policies {
        let out = solve_with_policy(&s0, &spec, &cfg, p, steps)?;
        for (a, b) in before.iter().zip(out.totals()) {
            worst = worst.max((b - a).abs() / a.abs());
        }
    }
    Ok(CheckResult::new(
        "conservation",
        worst,
        1e-10,
        format!("relative drift of field totals after {steps} periodic steps"),
    ))
}

/// A constant state is left exactly unchanged.
pub fn check_fixed_point() -> Result<CheckResult> {
    let spec = EquationSpec::euler(1.4);
    let grid = Grid1D::new(32, 0.0, 1.0)?;
    let w = Primitive::new(0.7, -0.3, 2.0).to_conserved(1.4);
    let q: Vec<f64> = w.iter().flat_map(|&v| std::iter::repeat_n(v, 32)).collect();
    let s0 = ConservedState1D::new(3, grid, q)?;
    let mut worst = 0.0f64;
    let policies: [&dyn ActionPolicy; 2] = [&WenoOracle::default(), &NeuralPolicy::new(PolicyParams::init(6), InputScaling::Smoothness)];
    for p in policies {
        for bc in [Boundary::Outflow, Boundary::Periodic] {
            let cfg = SolverConfig { boundary: bc, ..SolverConfig::new(1e-3) };
            let out = solve_with_policy(&s0, &spec, &cfg, p, 50)?;
            for (a, b) in s0.q.iter().zip(&out.q) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(CheckResult::new("fixed-point", worst, 0.0, "max change of a constant state over 50 steps".into()))
}

/// With a frozen splitting speed, the state after `k` steps depends only on
/// cells within `2k` of the seeded cell. Returns the largest adjoint found
/// outside the cone.
pub fn check_locality(max_k: usize) -> Result<CheckResult> {
    let kv = KvConfig::defaults();
    let mut worst = 0.0f64;
    let mut inside_hits = true;
    for k in 1..=max_k {
        let mut cfg = EpisodeConfig::from_config(&kv, "sod", 32, 1e-3, k)?;
        cfg.alpha = AlphaMode::Frozen(3.0);
        let model = RewardRegistry::default().get("rl-weno")?;
        let setup = EpisodeSetup::prepare(cfg, model.as_ref())?;
        let policy = NeuralPolicy::new(PolicyParams::init(8), InputScaling::Smoothness);
        let rec = record_rollout(&policy, &setup, &setup.start, 0, k)?;
        let j = 16;
        for field in 0..3 {
            let g = rec.tape.backward(rec.states[k - 1][field][j])?;
            for (f, row) in rec.start.iter().enumerate() {
                for (m, &leaf) in row.iter().enumerate() {
                    let a = g.get(leaf).abs();
                    if m.abs_diff(j) > 2 * k {
                        worst = worst.max(a);
                    } else if m == j && f == field && a == 0.0 {
                        inside_hits = false;
                    }
                }
            }
        }
    }
    let mut r = CheckResult::new(
        "locality",
        worst,
        0.0,
        format!("largest adjoint outside the light cone, k <= {max_k}"),
    );
    r.passed &= inside_hits;
    Ok(r)
}

/// Classical WENO earns exactly zero under the one-step reward.
pub fn check_oracle_return() -> Result<CheckResult> {
    let kv = KvConfig::defaults();
    let mut worst = 0.0f64;
    for ic in ["sod", "lax"] {
        let cfg = EpisodeConfig::from_config(&kv, ic, 64, 1e-4, 100)?;
        let model = RewardRegistry::default().get("rl-weno")?;
        let setup = EpisodeSetup::prepare(cfg, model.as_ref())?;
        worst = worst.max(run_episode(&WenoOracle::default(), &setup).ret.abs());
    }
    Ok(CheckResult::new("oracle-return", worst, 0.0, "|return| of classical WENO under rl-weno".into()))
}

/// Taped gradient against central differences on random coordinates.
pub fn check_gradient(coords: usize, seed: u64) -> Result<CheckResult> {
    let kv = KvConfig::defaults();
    let cfg = EpisodeConfig::from_config(&kv, "sod", 32, 1e-3, 20)?;
    let model = RewardRegistry::default().get("rl-weno")?;
    let setup = EpisodeSetup::prepare(cfg, model.as_ref())?;
    let params = PolicyParams::init(seed);
    let g = bptts_gradient(&params, InputScaling::Smoothness, &setup, &GradientOptions { clip: None, segment: 0 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let i = rng.gen_range(0..params.len());
        let fd = finite_difference(&params, InputScaling::Smoothness, &setup, i, 1e-6);
        let rel = (g.grad[i] - fd).abs() / (fd.abs() + GRAD_CHECK_EPS);
        worst = worst.max(rel);
    }
    Ok(CheckResult::new(
        "grad",
        worst,
        1e-4,
        format!("max relative error vs double-double central differences (h=1e-6), {coords} coordinates, Sod N=32, 20 steps"),
    ))
}

/// Run the named checks (all of them when `only` is empty).
pub fn run_checks(only: &[String]) -> Result<Vec<CheckResult>> {
    for name in only {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(crate::error::Error::Config(format!(
                "unknown check `{name}` (known: {})",
                CHECK_NAMES.join(", ")
            )));
        }
    }
    let wanted = |n: &str| only.is_empty() || only.iter().any(|o| o == n);
    let mut out = Vec::new();
    for &name in CHECK_NAMES.iter().filter(|n| wanted(n)) {
        out.push(match name {
            "linear" => check_linear(&WenoCoefficients::default()),
            "simplex" => check_simplex(100_000),
            "conservation" => check_conservation(500)?,
            "fixed-point" => check_fixed_point()?,
            "locality" => check_locality(3)?,
            "oracle-return" => check_oracle_return()?,
            "grad" => check_gradient(10, 0)?,
            _ => unreachable!(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_error_in_a_candidate_is_caught() {
        assert!(check_linear(&WenoCoefficients::default()).passed);
        let broken = WenoCoefficients { c0: [0.5, 1.5], ..WenoCoefficients::default() };
        let r = check_linear(&broken);
        assert!(!r.passed);
        assert!(r.line().starts_with("FAIL linear"));
    }

    #[test]
    fn cheap_checks_pass() {
        assert!(check_simplex(2000).passed);
        assert!(check_fixed_point().unwrap().passed);
        let l = check_locality(2).unwrap();
        assert!(l.passed, "{}", l.line());
        assert!(check_conservation(20).unwrap().passed);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(run_checks(&["speed".to_string()]).is_err());
        let only = run_checks(&["linear".to_string()]).unwrap();
        assert_eq!(only.len(), 1);
    }
}
