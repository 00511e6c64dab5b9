//! Named initial conditions. Built-in states live in the shipped defaults
//! file under `ic.<name>.*`.

use super::{burgers_exact, riemann, ConservedState1D, EquationKind, Grid1D, Primitive, RiemannIC};
use crate::config::KvConfig;
use crate::error::{Error, Result};

/// Names accepted by [`InitialCondition::builtin`].
pub const IC_NAMES: &[&str] = &["sod", "sod2", "lax", "sonic-rarefaction", "burgers-rarefaction"];

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Euler { name: String, riemann: RiemannIC },
    Burgers { name: String, left: f64, right: f64, diaphragm: f64 },
    /// User-supplied field-major arrays, passed through unchanged.
    Custom { name: String, nfields: usize, q: Vec<f64> },
}

fn triple(cfg: &KvConfig, key: &str) -> Result<Primitive> {
    let v = cfg.get_list(key)?.ok_or_else(|| Error::config(format!("missing key `{key}`")))?;
    match v.as_slice() {
        &[rho, u, p] => Ok(Primitive::new(rho, u, p)),
        _ => Err(Error::config(format!("`{key}` needs three values (rho, u, p)"))),
    }
}

impl InitialCondition {
    pub fn builtin(name: &str, cfg: &KvConfig) -> Result<Self> {
        let eq_key = format!("ic.{name}.equation");
        let eq = cfg
            .get_str(&eq_key)
            .ok_or_else(|| Error::config(format!("unknown initial condition `{name}`")))?;
        let diaphragm = cfg.require::<f64>(&format!("ic.{name}.diaphragm"))?;
        match EquationKind::parse(eq)? {
            EquationKind::Euler1d => {
                let riemann = RiemannIC {
                    left: triple(cfg, &format!("ic.{name}.left"))?,
                    right: triple(cfg, &format!("ic.{name}.right"))?,
                    diaphragm,
                };
                riemann.validate()?;
                Ok(Self::Euler { name: name.to_string(), riemann })
            }
            EquationKind::Burgers1d => Ok(Self::Burgers {
                name: name.to_string(),
                left: cfg.require(&format!("ic.{name}.left"))?,
                right: cfg.require(&format!("ic.{name}.right"))?,
                diaphragm,
            }),
            EquationKind::Euler2d => Err(Error::config(format!("`{name}` is a 2D initial condition"))),
        }
    }

    pub fn custom(nfields: usize, q: Vec<f64>) -> Self {
        Self::Custom { name: "custom".into(), nfields, q }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Euler { name, .. } | Self::Burgers { name, .. } | Self::Custom { name, .. } => name,
        }
    }

    pub fn equation(&self) -> EquationKind {
        match self {
            Self::Euler { .. } => EquationKind::Euler1d,
            Self::Burgers { .. } => EquationKind::Burgers1d,
            Self::Custom { nfields: 1, .. } => EquationKind::Burgers1d,
            Self::Custom { .. } => EquationKind::Euler1d,
        }
    }

    /// Point values at the cell centres.
    pub fn sample(&self, grid: Grid1D, gamma: f64) -> Result<ConservedState1D> {
        let n = grid.n;
        match self {
            Self::Euler { riemann, .. } => {
                let mut q = vec![0.0; 3 * n];
                let l = riemann.left.to_conserved(gamma);
                let r = riemann.right.to_conserved(gamma);
                for j in 0..n {
                    let w = if grid.center(j) < riemann.diaphragm { l } else { r };
                    for k in 0..3 {
                        q[k * n + j] = w[k];
                    }
                }
                ConservedState1D::new(3, grid, q)
            }
            Self::Burgers { left, right, diaphragm, .. } => {
                let q = (0..n).map(|j| if grid.center(j) < *diaphragm { *left } else { *right }).collect();
                ConservedState1D::new(1, grid, q)
            }
            Self::Custom { nfields, q, .. } => ConservedState1D::new(*nfields, grid, q.clone()),
        }
    }

    /// Exact conserved solution sampled at the cell centres at time `t`;
    /// `None` when no analytical solution is known.
    pub fn exact_profile(&self, grid: Grid1D, gamma: f64, t: f64) -> Result<Option<ConservedState1D>> {
        let n = grid.n;
        match self {
            Self::Euler { riemann, .. } => {
                if t <= 0.0 {
                    return self.sample(grid, gamma).map(Some);
                }
                let sol = riemann::solve(riemann, gamma)?;
                let mut q = vec![0.0; 3 * n];
                for j in 0..n {
                    let w = sol.sample((grid.center(j) - riemann.diaphragm) / t).to_conserved(gamma);
                    for k in 0..3 {
                        q[k * n + j] = w[k];
                    }
                }
                ConservedState1D::new(3, grid, q).map(Some)
            }
            Self::Burgers { left, right, diaphragm, .. } => {
                let q = (0..n).map(|j| burgers_exact(*left, *right, *diaphragm, grid.center(j), t)).collect();
                ConservedState1D::new(1, grid, q).map(Some)
            }
            Self::Custom { .. } => Ok(None),
        }
    }

    /// Upper bound on `|u| + c` over the whole exact evolution.
    pub fn max_exact_wave_speed(&self, gamma: f64) -> Result<Option<f64>> {
        match self {
            Self::Euler { riemann, .. } => Ok(Some(riemann::solve(riemann, gamma)?.max_wave_speed())),
            Self::Burgers { left, right, .. } => Ok(Some(left.abs().max(right.abs()))),
            Self::Custom { .. } => Ok(None),
        }
    }
}

/// Sample a named built-in initial condition on `grid`.
pub fn initial_condition(name: &str, grid: Grid1D, cfg: &KvConfig) -> Result<ConservedState1D> {
    let gamma = cfg.get_or("gamma", 1.4)?;
    InitialCondition::builtin(name, cfg)?.sample(grid, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sod_on_four_cells() {
        let cfg = KvConfig::defaults();
        let grid = Grid1D { n: 4, x0: 0.0, x1: 1.0 };
        let s = InitialCondition::builtin("sod", &cfg).unwrap().sample(grid, 1.4).unwrap();
        let l = Primitive::new(1.0, 0.0, 1.0).to_conserved(1.4);
        let r = Primitive::new(0.125, 0.0, 0.1).to_conserved(1.4);
        assert_eq!(s.cell(0), l.to_vec());
        assert_eq!(s.cell(1), l.to_vec());
        assert_eq!(s.cell(2), r.to_vec());
        assert_eq!(s.cell(3), r.to_vec());
    }

    #[test]
    fn burgers_rarefaction_opens_a_fan() {
        let cfg = KvConfig::defaults();
        let ic = InitialCondition::builtin("burgers-rarefaction", &cfg).unwrap();
        let InitialCondition::Burgers { left, right, .. } = ic else { panic!() };
        assert!(left < right);
    }

    #[test]
    fn every_builtin_resolves_and_has_an_exact_solution() {
        let cfg = KvConfig::defaults();
        let grid = Grid1D::new(64, 0.0, 1.0).unwrap();
        for name in IC_NAMES {
            let ic = InitialCondition::builtin(name, &cfg).unwrap();
            let exact = ic.exact_profile(grid, 1.4, 0.1).unwrap().unwrap();
            assert_eq!(exact.n(), 64);
        }
        assert!(matches!(initial_condition("nope", grid, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn custom_passes_through() {
        let grid = Grid1D::new(5, 0.0, 1.0).unwrap();
        let q = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let s = InitialCondition::custom(1, q.clone()).sample(grid, 1.4).unwrap();
        assert_eq!(s.q, q);
    }
}
