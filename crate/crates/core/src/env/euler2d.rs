//! 2D Euler by dimension: x-sweeps per row and y-sweeps per column feed one
//! unsplit conservative update, with the same 1D policy at every stencil.

use crate::autodiff::Eval;
use crate::error::{Error, Result};
use crate::physics::{ConservedState1D, Direction, EquationSpec};
use crate::scheme::ActionPolicy;
use crate::weno::{max_speed, reconstruct_row, split_row, Boundary, WenoCoefficients};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Grid2D {
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        if nx < 5 || ny < 5 {
            return Err(Error::config(format!("2D grid needs at least 5x5 cells, got {nx}x{ny}")));
        }
        Ok(Self { nx, ny, x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 })
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + (i as f64 + 0.5) * self.dx(), self.y0 + (j as f64 + 0.5) * self.dy())
    }
}

/// `(rho, rho u, rho v, rho E)`, field-major with rows of constant y:
/// `q[k * nx * ny + j * nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct State2D {
    pub grid: Grid2D,
    pub q: Vec<f64>,
}

impl State2D {
    pub fn cells(&self) -> usize {
        self.grid.nx * self.grid.ny
    }

    pub fn field(&self, k: usize) -> &[f64] {
        &self.q[k * self.cells()..(k + 1) * self.cells()]
    }

    pub fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.q[k * self.cells() + j * self.grid.nx + i]
    }

    /// Row `j` of field `k` as a 1D array.
    pub fn row(&self, k: usize, j: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.field(k)[j * nx..(j + 1) * nx]
    }

    pub fn pressure(&self, i: usize, j: usize, gamma: f64) -> f64 {
        let rho = self.at(0, i, j);
        let ke = 0.5 * (self.at(1, i, j).powi(2) + self.at(2, i, j).powi(2)) / rho;
        (gamma - 1.0) * (self.at(3, i, j) - ke)
    }

    /// Smallest density and pressure, or `None` if any value is not finite.
    pub fn min_density_pressure(&self, gamma: f64) -> Option<(f64, f64)> {
        if self.q.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut lo = (f64::INFINITY, f64::INFINITY);
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                lo.0 = lo.0.min(self.at(0, i, j));
                lo.1 = lo.1.min(self.pressure(i, j, gamma));
            }
        }
        Some(lo)
    }
}

/// Kelvin-Helmholtz shear layer on the unit square: a dense band moving left
/// inside `|y - 1/2| < 1/4`, the lighter gas moving right, and a small
/// sinusoidal transverse velocity to seed the roll-up.
pub fn kelvin_helmholtz(nx: usize, ny: usize, gamma: f64) -> Result<State2D> {
    let grid = Grid2D::unit(nx, ny)?;
    let m = nx * ny;
    let mut q = vec![0.0; 4 * m];
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = grid.center(i, j);
            let inside = (y - 0.5).abs() < 0.25;
            let rho = if inside { 2.0 } else { 1.0 };
            let u = if inside { -0.5 } else { 0.5 };
            let v = 0.01 * (4.0 * std::f64::consts::PI * x).sin();
            let p = 2.5;
            let c = j * nx + i;
            q[c] = rho;
            q[m + c] = rho * u;
            q[2 * m + c] = rho * v;
            q[3 * m + c] = p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v);
        }
    }
    Ok(State2D { grid, q })
}

/// Embed a 1D Euler state as `ny` identical rows with zero y-momentum.
pub fn y_uniform(s: &ConservedState1D, ny: usize) -> Result<State2D> {
    if s.nfields != 3 {
        return Err(Error::config("y_uniform needs a 1D Euler state"));
    }
    let g = s.grid;
    let grid = Grid2D { nx: g.n, ny, x0: g.x0, x1: g.x1, y0: 0.0, y1: 1.0 };
    let m = g.n * ny;
    let mut q = vec![0.0; 4 * m];
    for (k2, k1) in [(0, Some(0)), (1, Some(1)), (2, None), (3, Some(2))] {
        if let Some(k1) = k1 {
            for j in 0..ny {
                q[k2 * m + j * g.n..k2 * m + (j + 1) * g.n].copy_from_slice(s.field(k1));
            }
        }
    }
    Ok(State2D { grid, q })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solve2dConfig {
    pub gamma: f64,
    pub dt: f64,
    pub steps: usize,
    pub boundary_x: Boundary,
    pub boundary_y: Boundary,
    pub coeffs: WenoCoefficients,
}

/// Directional sweep: interface fluxes `[line][field][interface]` for every line.
fn sweep(
    lines: &[Vec<Vec<f64>>],
    spec: &EquationSpec,
    dir: Direction,
    bc: Boundary,
    coeffs: &WenoCoefficients,
    policy: &dyn ActionPolicy,
) -> Vec<Vec<Vec<f64>>> {
    let c = &mut Eval;
    let fs: Vec<(Vec<Vec<f64>>, Vec<f64>)> = lines.iter().map(|l| spec.flux_and_speed(c, l, dir)).collect();
    let speeds: Vec<f64> = fs.iter().map(|(_, s)| max_speed(c, s)).collect();
    let alpha = max_speed(c, &speeds);
    lines
        .iter()
        .zip(&fs)
        .map(|(l, (f, _))| {
            let (p, m) = split_row(c, l, f, alpha, bc);
            reconstruct_row(c, coeffs, &p, &m, policy).flux
        })
        .collect()
}

/// One forward-Euler step of the unsplit scheme.
pub fn step_2d(s: &State2D, cfg: &Solve2dConfig, policy: &dyn ActionPolicy) -> State2D {
    let (nx, ny) = (s.grid.nx, s.grid.ny);
    let spec = EquationSpec::euler2d(cfg.gamma);
    let rows: Vec<Vec<Vec<f64>>> = (0..ny).map(|j| (0..4).map(|k| s.row(k, j).to_vec()).collect()).collect();
    let cols: Vec<Vec<Vec<f64>>> =
        (0..nx).map(|i| (0..4).map(|k| (0..ny).map(|j| s.at(k, i, j)).collect()).collect()).collect();
    let fx = sweep(&rows, &spec, Direction::X, cfg.boundary_x, &cfg.coeffs, policy);
    let gy = sweep(&cols, &spec, Direction::Y, cfg.boundary_y, &cfg.coeffs, policy);
    let rx = cfg.dt / s.grid.dx();
    let ry = cfg.dt / s.grid.dy();
    let m = nx * ny;
    let mut q = s.q.clone();
    for k in 0..4 {
        for j in 0..ny {
            for i in 0..nx {
                let c = k * m + j * nx + i;
                let u = q[c] - rx * (fx[j][k][i + 1] - fx[j][k][i]);
                q[c] = u - ry * (gy[i][k][j + 1] - gy[i][k][j]);
            }
        }
    }
    State2D { grid: s.grid, q }
}

/// Advance `cfg.steps` steps; `observe` sees the state after every step.
/// Fails on the first non-finite value or non-positive density or pressure.
pub fn solve_2d<F>(initial: &State2D, cfg: &Solve2dConfig, policy: &dyn ActionPolicy, mut observe: F) -> Result<State2D>
where
    F: FnMut(usize, &State2D),
{
    if !(cfg.dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {}", cfg.dt)));
    }
    let mut s = initial.clone();
    for step in 1..=cfg.steps {
        s = step_2d(&s, cfg, policy);
        match s.min_density_pressure(cfg.gamma) {
            Some((rho, p)) if rho > 0.0 && p > 0.0 => {}
            Some((rho, p)) => {
                return Err(Error::BlowUp { step, reason: format!("min density {rho}, min pressure {p}") });
            }
            None => return Err(Error::BlowUp { step, reason: "non-finite value".into() }),
        }
        observe(step, &s);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weno::WenoOracle;

    #[test]
    fn uniform_state_is_unchanged() {
        let mut s = kelvin_helmholtz(8, 8, 1.4).unwrap();
        for k in 0..4 {
            let v = s.q[k * 64];
            s.q[k * 64..(k + 1) * 64].fill(v);
        }
        let cfg = Solve2dConfig {
            gamma: 1.4,
            dt: 1e-3,
            steps: 3,
            boundary_x: Boundary::Periodic,
            boundary_y: Boundary::Periodic,
            coeffs: WenoCoefficients::default(),
        };
        let out = solve_2d(&s, &cfg, &WenoOracle::default(), |_, _| {}).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn kelvin_helmholtz_layout() {
        let s = kelvin_helmholtz(16, 16, 1.4).unwrap();
        assert_eq!(s.at(0, 3, 8), 2.0);
        assert_eq!(s.at(0, 3, 0), 1.0);
        assert_eq!(s.at(1, 3, 8), -1.0);
        assert!((s.pressure(5, 5, 1.4) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn blow_up_is_reported() {
        let mut s = kelvin_helmholtz(8, 8, 1.4).unwrap();
        s.q[0] = -1.0;
        let cfg = Solve2dConfig {
            gamma: 1.4,
            dt: 1e-3,
            steps: 1,
            boundary_x: Boundary::Periodic,
            boundary_y: Boundary::Periodic,
            coeffs: WenoCoefficients::default(),
        };
        assert!(matches!(solve_2d(&s, &cfg, &WenoOracle::default(), |_, _| {}), Err(Error::BlowUp { .. })));
    }
}
