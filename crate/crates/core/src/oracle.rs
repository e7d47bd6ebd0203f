//! Brute-force references for tiny problems.
//!
//! The Lagrangians here are written out by hand rather than taken from
//! [`crate::model`], so agreement with the semigroup is a genuine check.

use crate::grid::{GridFunction, PeriodicGrid};
use crate::model::ContactModel;
use crate::semigroup::{Backend, EvolveSettings};

pub const MAX_NODES: usize = 16;
pub const MAX_STEPS: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("initial data lives on a different grid")]
    GridMismatch,
    #[error("no closed form for model {0:?}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TinyModel {
    Pendulum,
    LinearDiscount,
    FreeDiscount { lambda: f64, amp: f64 },
    NoSolution,
}

impl TinyModel {
    fn lagrangian(&self, dim: usize, y: [f64; 2], v: [f64; 2], u: f64) -> f64 {
        let kinetic = 0.5 * (0..dim).map(|i| v[i] * v[i]).sum::<f64>();
        match *self {
            TinyModel::Pendulum => kinetic + 1.0 - y[0].cos() - u,
            TinyModel::LinearDiscount => kinetic - u,
            TinyModel::FreeDiscount { lambda, amp } => {
                kinetic - amp * (0..dim).map(|i| y[i].cos()).sum::<f64>() - lambda * u
            }
            TinyModel::NoSolution => kinetic + 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TinyProblem {
    pub model: TinyModel,
    pub dim: usize,
    pub n: usize,
    pub steps: usize,
    pub delta: f64,
    /// Predecessors further than this are excluded, as in the grid search.
    pub radius: f64,
}

impl TinyProblem {
    pub fn new(
        model: TinyModel,
        dim: usize,
        n: usize,
        steps: usize,
        delta: f64,
        radius: f64,
    ) -> Result<Self, OracleError> {
        if model == TinyModel::Pendulum && dim != 1 {
            return Err(OracleError::Unsupported("the pendulum is one-dimensional".into()));
        }
        if n > MAX_NODES || steps > MAX_STEPS {
            return Err(OracleError::TooLarge(format!("n = {n}, steps = {steps}")));
        }
        let paths = ((n.pow(dim as u32)) as f64).powi(steps as i32);
        if paths > 2f64.powi(32) {
            return Err(OracleError::TooLarge(format!("{paths} paths")));
        }
        // a radius reaching the antipode would alias node offsets
        if !(radius >= 0.0 && radius < std::f64::consts::PI) {
            return Err(OracleError::TooLarge(format!("radius {radius}")));
        }
        Ok(Self {
            model,
            dim,
            n,
            steps,
            delta,
            radius,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        PeriodicGrid::new(self.dim, self.n).expect("validated size")
    }

    pub fn contact_model(&self) -> ContactModel {
        match self.model {
            TinyModel::Pendulum => ContactModel::pendulum(),
            TinyModel::LinearDiscount => ContactModel::linear_discount(self.dim),
            TinyModel::FreeDiscount { lambda, amp } => {
                ContactModel::free_discount(self.dim, lambda, amp)
            }
            TinyModel::NoSolution => ContactModel::no_solution(self.dim),
        }
    }

    /// Node-only variational settings matching this problem.
    pub fn settings(&self) -> EvolveSettings {
        EvolveSettings {
            backend: Backend::Variational,
            delta: self.delta,
            search_radius: self.radius,
            viscosity: None,
            picard_iters: 1,
            refine: false,
        }
    }
}

/// Signed minimal lattice offset from `from` to `to` on a cycle of length `n`.
fn offset(from: usize, to: usize, n: usize) -> i64 {
    let n = n as i64;
    let d = (to as i64 - from as i64).rem_euclid(n);
    if d > n / 2 {
        d - n
    } else {
        d
    }
}

/// Exact minimum over all node paths of the value-coupled discrete action.
///
/// Along a path `y_0, ..., y_k = x` the value is carried forward as
/// `u_{j+1} = u_j + delta L(y_j, (y_{j+1} - y_j) / delta, u_j)` from `u_0 = phi(y_0)`.
pub fn brute_force_evolve(
    problem: &TinyProblem,
    phi: &GridFunction,
) -> Result<GridFunction, OracleError> {
    let grid = problem.grid();
    if phi.grid != grid {
        return Err(OracleError::GridMismatch);
    }
    let n = problem.n;
    let h = grid.spacing;
    let nodes: Vec<[usize; 2]> = (0..grid.len()).map(|k| grid.coords(k)).collect();
    // predecessor lists with the integer offsets y - x
    let preds: Vec<Vec<(usize, [i64; 2])>> = nodes
        .iter()
        .map(|x| {
            nodes
                .iter()
                .enumerate()
                .filter_map(|(k, y)| {
                    let mut off = [0i64; 2];
                    let mut dist2 = 0.0;
                    for i in 0..problem.dim {
                        off[i] = offset(x[i], y[i], n);
                        dist2 += (off[i] as f64 * h).powi(2);
                    }
                    (dist2.sqrt() <= problem.radius).then_some((k, off))
                })
                .collect()
        })
        .collect();

    let mut path = vec![0usize; problem.steps + 1];
    let mut offs = vec![[0i64; 2]; problem.steps + 1];
    let mut values = Vec::with_capacity(grid.len());
    for target in 0..grid.len() {
        path[problem.steps] = target;
        let mut best = f64::INFINITY;
        search(problem, phi, &nodes, &preds, &mut path, &mut offs, problem.steps, &mut best);
        values.push(best);
    }
    Ok(GridFunction::new(grid, values).expect("sizes match"))
}

#[allow(clippy::too_many_arguments)]
fn search(
    problem: &TinyProblem,
    phi: &GridFunction,
    nodes: &[[usize; 2]],
    preds: &[Vec<(usize, [i64; 2])>],
    path: &mut [usize],
    offs: &mut [[i64; 2]],
    level: usize,
    best: &mut f64,
) {
    if level == 0 {
        let h = phi.grid.spacing;
        let d = problem.delta;
        let mut u = phi.values[path[0]];
        for j in 0..problem.steps {
            let node = nodes[path[j]];
            let y = [node[0] as f64 * h, node[1] as f64 * h];
            // offs[j + 1] holds y_j - y_{j+1}
            let back = offs[j + 1];
            let v = [-(back[0] as f64 * h) / d, -(back[1] as f64 * h) / d];
            u += d * problem.model.lagrangian(problem.dim, y, v, u);
        }
        *best = best.min(u);
        return;
    }
    for &(k, off) in &preds[path[level]] {
        path[level - 1] = k;
        offs[level] = off;
        search(problem, phi, nodes, preds, path, offs, level - 1, best);
    }
}

/// `c e^{-t}`, the exact evolution of a constant under `H = |p|^2/2 + u`.
pub fn scalar_reference(model: &ContactModel, c: f64, t: f64) -> Result<f64, OracleError> {
    if model.name != "linear_discount" {
        return Err(OracleError::Unsupported(model.name.clone()));
    }
    Ok(c * (-t).exp())
}
