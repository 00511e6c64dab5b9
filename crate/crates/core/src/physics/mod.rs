//! Equations, states, initial conditions and exact reference solutions.

mod burgers;
pub mod eos;
mod ic;
pub mod riemann;

pub use burgers::burgers_exact;
pub use eos::{burgers_flux, euler_flux, Primitive};
pub use ic::{initial_condition, InitialCondition, IC_NAMES};
pub use riemann::{exact_riemann_euler, RiemannIC, RiemannSolution};

use crate::autodiff::Arith;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationKind {
    Euler1d,
    Burgers1d,
    Euler2d,
}

impl EquationKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euler" | "euler1d" => Ok(Self::Euler1d),
            "burgers" | "burgers1d" => Ok(Self::Burgers1d),
            "euler2d" => Ok(Self::Euler2d),
            other => Err(Error::config(format!("unknown equation `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Euler1d => "euler",
            Self::Burgers1d => "burgers",
            Self::Euler2d => "euler2d",
        }
    }
}

/// Sweep direction for the 2D Euler equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationSpec {
    pub kind: EquationKind,
    /// Ratio of specific heats; ignored for Burgers.
    pub gamma: f64,
}

impl EquationSpec {
    pub fn euler(gamma: f64) -> Self {
        Self { kind: EquationKind::Euler1d, gamma }
    }

    pub fn burgers() -> Self {
        Self { kind: EquationKind::Burgers1d, gamma: 1.4 }
    }

    pub fn euler2d(gamma: f64) -> Self {
        Self { kind: EquationKind::Euler2d, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != EquationKind::Burgers1d && !(self.gamma > 1.0) {
            return Err(Error::config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn nfields(&self) -> usize {
        match self.kind {
            EquationKind::Euler1d => 3,
            EquationKind::Burgers1d => 1,
            EquationKind::Euler2d => 4,
        }
    }

    pub fn field_names(&self) -> &'static [&'static str] {
        match self.kind {
            EquationKind::Euler1d => &["rho", "rho_u", "rho_E"],
            EquationKind::Burgers1d => &["u"],
            EquationKind::Euler2d => &["rho", "rho_u", "rho_v", "rho_E"],
        }
    }

    /// Physical fluxes and per-cell wave speeds of a field-major row.
    ///
    /// `q[k][i]` is field `k` at cell `i`. For 2D Euler the row is swept in
    /// direction `dir`; the y-flux is the x-flux with the momenta swapped.
    pub(crate) fn flux_and_speed<A: Arith>(
        &self,
        c: &mut A,
        q: &[Vec<A::V>],
        dir: Direction,
    ) -> (Vec<Vec<A::V>>, Vec<A::V>) {
        let m = q[0].len();
        let half = c.lit(0.5);
        match self.kind {
            EquationKind::Burgers1d => {
                let mut f = Vec::with_capacity(m);
                let mut s = Vec::with_capacity(m);
                for &u in &q[0] {
                    let sq = c.square(u);
                    f.push(c.mul(half, sq));
                    s.push(c.abs(u));
                }
                (vec![f], s)
            }
            EquationKind::Euler1d => {
                let gm1 = c.lit(self.gamma - 1.0);
                let gam = c.lit(self.gamma);
                let mut f: Vec<Vec<A::V>> = (0..3).map(|_| Vec::with_capacity(m)).collect();
                let mut s = Vec::with_capacity(m);
                for i in 0..m {
                    let (fl, p) = eos::euler_flux_cell(c, q[0][i], q[1][i], q[2][i], gm1, half);
                    for k in 0..3 {
                        f[k].push(fl[k]);
                    }
                    s.push(eos::euler_speed_cell(c, q[0][i], q[1][i], p, gam));
                }
                (f, s)
            }
            EquationKind::Euler2d => {
                let gm1 = c.lit(self.gamma - 1.0);
                let gam = c.lit(self.gamma);
                let (normal, trans) = match dir {
                    Direction::X => (1, 2),
                    Direction::Y => (2, 1),
                };
                let mut f: Vec<Vec<A::V>> = (0..4).map(|_| Vec::with_capacity(m)).collect();
                let mut s = Vec::with_capacity(m);
                for i in 0..m {
                    let rho = q[0][i];
                    let mn = q[normal][i];
                    let mt = q[trans][i];
                    let e = q[3][i];
                    let un = c.div(mn, rho);
                    let ut = c.div(mt, rho);
                    let mun = c.mul(mn, un);
                    let mut_ = c.mul(mt, ut);
                    let ke2 = c.add(mun, mut_);
                    let ke = c.mul(half, ke2);
                    let eint = c.sub(e, ke);
                    let p = c.mul(gm1, eint);
                    let fn_ = c.add(mun, p);
                    let ft = c.mul(mn, ut);
                    let ep = c.add(e, p);
                    let fe = c.mul(un, ep);
                    f[0].push(mn);
                    f[normal].push(fn_);
                    f[trans].push(ft);
                    f[3].push(fe);
                    let au = c.abs(un);
                    let gp = c.mul(gam, p);
                    let c2 = c.div(gp, rho);
                    let cs = c.sqrt(c2);
                    s.push(c.add(au, cs));
                }
                (f, s)
            }
        }
    }

    /// Whether one cell (conserved values, one per field) is physically admissible.
    pub fn cell_admissible(&self, cell: &[f64]) -> bool {
        if cell.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.kind {
            EquationKind::Burgers1d => true,
            EquationKind::Euler1d => {
                cell[0] > 0.0 && eos::pressure([cell[0], cell[1], cell[2]], self.gamma) > 0.0
            }
            EquationKind::Euler2d => {
                let rho = cell[0];
                let ke = 0.5 * (cell[1] * cell[1] + cell[2] * cell[2]) / rho;
                rho > 0.0 && (self.gamma - 1.0) * (cell[3] - ke) > 0.0
            }
        }
    }
}

/// Uniform 1D grid over `[x0, x1]` with cell-centred points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub x0: f64,
    pub x1: f64,
}

impl Grid1D {
    /// Fewest cells holding one full three-point stencil.
    pub const MIN_CELLS: usize = 5;

    pub fn new(n: usize, x0: f64, x1: f64) -> Result<Self> {
        if n < Self::MIN_CELLS {
            return Err(Error::config(format!("need at least {} cells, got {n}", Self::MIN_CELLS)));
        }
        if !(x1 > x0) {
            return Err(Error::config(format!("empty domain [{x0}, {x1}]")));
        }
        Ok(Self { n, x0, x1 })
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / self.n as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x0 + (j as f64 + 0.5) * self.dx()
    }
}

/// Conserved state on a 1D grid, field-major: `q[k * n + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedState1D {
    pub nfields: usize,
    pub grid: Grid1D,
    pub q: Vec<f64>,
}

impl ConservedState1D {
    pub fn new(nfields: usize, grid: Grid1D, q: Vec<f64>) -> Result<Self> {
        if q.len() != nfields * grid.n {
            return Err(Error::config(format!(
                "state has {} values, expected {} fields x {} cells",
                q.len(),
                nfields,
                grid.n
            )));
        }
        Ok(Self { nfields, grid, q })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn field(&self, k: usize) -> &[f64] {
        &self.q[k * self.grid.n..(k + 1) * self.grid.n]
    }

    pub fn cell(&self, j: usize) -> Vec<f64> {
        (0..self.nfields).map(|k| self.q[k * self.grid.n + j]).collect()
    }

    /// Sum of each field over the cells.
    pub fn totals(&self) -> Vec<f64> {
        (0..self.nfields).map(|k| self.field(k).iter().sum()).collect()
    }

    /// First inadmissible cell, if any.
    pub fn first_inadmissible(&self, spec: &EquationSpec) -> Option<usize> {
        (0..self.n()).find(|&j| !spec.cell_admissible(&self.cell(j)))
    }

    pub fn check_admissible(&self, spec: &EquationSpec) -> Result<()> {
        match self.first_inadmissible(spec) {
            Some(j) => Err(Error::Inadmissible(format!("cell {j}: {:?}", self.cell(j)))),
            None => Ok(()),
        }
    }
}

/// Largest characteristic speed over the state: `max |u| + c` (Euler) or `max |u|` (Burgers).
pub fn max_wave_speed(state: &ConservedState1D, spec: &EquationSpec) -> Result<f64> {
    state.check_admissible(spec)?;
    let rows: Vec<Vec<f64>> = (0..state.nfields).map(|k| state.field(k).to_vec()).collect();
    let (_, speeds) = spec.flux_and_speed(&mut crate::autodiff::Eval, &rows, Direction::X);
    Ok(speeds.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_state(cells: &[Primitive]) -> ConservedState1D {
        let n = cells.len().max(5);
        let grid = Grid1D::new(n, 0.0, 1.0).unwrap();
        let mut q = vec![0.0; 3 * n];
        for j in 0..n {
            let w = cells[j.min(cells.len() - 1)].to_conserved(1.4);
            for k in 0..3 {
                q[k * n + j] = w[k];
            }
        }
        ConservedState1D::new(3, grid, q).unwrap()
    }

    #[test]
    fn sod_left_sound_speed() {
        let s = euler_state(&[Primitive::new(1.0, 0.0, 1.0)]);
        let a = max_wave_speed(&s, &EquationSpec::euler(1.4)).unwrap();
        assert!((a - 1.4f64.sqrt()).abs() < 1e-15);
        assert!((a - 1.18322).abs() < 1e-5);
    }

    #[test]
    fn mixed_sod_states_take_the_max() {
        let s = euler_state(&[Primitive::new(1.0, 0.0, 1.0), Primitive::new(0.125, 0.0, 0.1)]);
        let a = max_wave_speed(&s, &EquationSpec::euler(1.4)).unwrap();
        let right = (1.4f64 * 0.1 / 0.125).sqrt();
        assert!(right < a);
        assert!((a - 1.18322).abs() < 1e-5);
    }

    #[test]
    fn uniform_burgers_speed() {
        let grid = Grid1D::new(8, 0.0, 1.0).unwrap();
        let s = ConservedState1D::new(1, grid, vec![0.5; 8]).unwrap();
        assert_eq!(max_wave_speed(&s, &EquationSpec::burgers()).unwrap(), 0.5);
    }

    #[test]
    fn inadmissible_state_is_an_error() {
        let mut s = euler_state(&[Primitive::new(1.0, 0.0, 1.0)]);
        s.q[2] = -1.0;
        assert!(max_wave_speed(&s, &EquationSpec::euler(1.4)).is_err());
    }

    #[test]
    fn grid_requires_a_full_stencil() {
        assert!(Grid1D::new(4, 0.0, 1.0).is_err());
        assert!(Grid1D::new(5, 1.0, 1.0).is_err());
    }

    #[test]
    fn y_flux_swaps_momenta() {
        let q: Vec<Vec<f64>> = vec![vec![1.2], vec![0.3], vec![-0.7], vec![3.0]];
        let spec = EquationSpec::euler2d(1.4);
        let (fx, _) = spec.flux_and_speed(&mut crate::autodiff::Eval, &q, Direction::X);
        let swapped: Vec<Vec<f64>> = vec![q[0].clone(), q[2].clone(), q[1].clone(), q[3].clone()];
        let (gy, _) = spec.flux_and_speed(&mut crate::autodiff::Eval, &swapped, Direction::Y);
        assert_eq!(fx[0], gy[0]);
        assert_eq!(fx[1], gy[2]);
        assert_eq!(fx[2], gy[1]);
        assert_eq!(fx[3], gy[3]);
    }
}
