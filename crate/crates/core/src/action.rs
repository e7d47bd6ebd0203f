//! Implicit action functions from a point source, stored layer by layer with
//! the displacement to the optimal predecessor for backtracking.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::grid::{GridFunction, PeriodicGrid};
use crate::model::{torus_delta, ContactModel, ModelError, Vec2};
use crate::semigroup::{
    variational_step_with_argmin, Backend, Direction, EvolveSettings, SemigroupError,
};

/// Default source stride for [`semigroup_from_action`].
pub const DEFAULT_STRIDE: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum ActionError {
    #[error("horizon {t_end} is not a whole number (>= 2) of steps of {delta}")]
    BadHorizon { t_end: f64, delta: f64 },
    #[error("split time {0} outside the table")]
    BadSplit(f64),
    #[error("stride {stride} x spacing exceeds the reach v_max t = {reach}")]
    StrideTooCoarse { stride: usize, reach: f64 },
    #[error("action tables need the variational backend")]
    NeedsVariational,
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug)]
pub struct ActionTable {
    pub source_x: Vec2,
    pub source_u: f64,
    pub direction: Direction,
    pub delta: f64,
    /// `layers[k]` holds `h(., (k + 1) delta)`.
    pub layers: Vec<GridFunction>,
    /// `moves[k][node]` is `y - x` for the optimal predecessor `y` in layer `k - 1`;
    /// empty for the first layer, whose predecessor is the source.
    pub moves: Vec<Vec<Vec2>>,
}

impl ActionTable {
    pub fn grid(&self) -> PeriodicGrid {
        self.layers[0].grid
    }

    pub fn steps(&self) -> usize {
        self.layers.len()
    }

    pub fn t_end(&self) -> f64 {
        self.delta * self.steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.delta * (k + 1) as f64
    }

    /// Layer index for time `t`, if `t` is on the table's time grid.
    pub fn layer_index(&self, t: f64) -> Option<usize> {
        let k = (t / self.delta).round();
        if k < 1.0 || k as usize > self.steps() || (k * self.delta - t).abs() > 1e-9 * t.max(1.0) {
            return None;
        }
        Some(k as usize - 1)
    }

    pub fn layer(&self, t: f64) -> Option<&GridFunction> {
        self.layer_index(t).map(|k| &self.layers[k])
    }

    /// `(t, x[, y], h)` rows for every `every`-th layer.
    pub fn write_csv<W: Write>(&self, every: usize, mut w: W) -> io::Result<()> {
        let grid = self.grid();
        if grid.dim == 1 {
            writeln!(w, "t,x,h")?;
        } else {
            writeln!(w, "t,x,y,h")?;
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if (k + 1) % every.max(1) != 0 && k + 1 != self.steps() {
                continue;
            }
            let t = self.time(k);
            for (node, v) in layer.values.iter().enumerate() {
                let x = grid.node(node);
                if grid.dim == 1 {
                    writeln!(w, "{t},{},{v}", x[0])?;
                } else {
                    writeln!(w, "{t},{},{},{v}", x[0], x[1])?;
                }
            }
        }
        Ok(())
    }

    /// Little-endian `u32` triples `(layer, node, predecessor node)`, the
    /// predecessor rounded to the nearest node.
    pub fn write_argmin<W: Write>(&self, mut w: W) -> io::Result<()> {
        let grid = self.grid();
        for (k, moves) in self.moves.iter().enumerate().skip(1) {
            for (node, s) in moves.iter().enumerate() {
                let x = grid.node(node);
                let pred = grid.nearest(&[x[0] + s[0], x[1] + s[1]]);
                for v in [k as u32, node as u32, pred as u32] {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

/// Torus-minimal displacement `x - x0` on the used axes.
fn displacement(dim: usize, x: &Vec2, x0: &Vec2) -> Vec2 {
    let mut d = [0.0; 2];
    for i in 0..dim {
        d[i] = torus_delta(x[i], x0[i]);
    }
    d
}

/// Straight-segment first layer with `u` frozen at `u0`.
pub fn point_source_layer(
    model: &ContactModel,
    grid: PeriodicGrid,
    x0: &Vec2,
    u0: f64,
    delta: f64,
    direction: Direction,
) -> Result<GridFunction, ModelError> {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.node(k);
            let d = displacement(grid.dim, &x, x0);
            match direction {
                Direction::Backward => {
                    let v = [d[0] / delta, d[1] / delta];
                    Ok(u0 + delta * model.lagrangian(x0, &v, u0)?)
                }
                Direction::Forward => {
                    let v = [-d[0] / delta, -d[1] / delta];
                    Ok(u0 - delta * model.lagrangian(&x, &v, u0)?)
                }
            }
        })
        .collect::<Result<Vec<f64>, ModelError>>()?;
    Ok(GridFunction::new(grid, values).expect("sizes match"))
}

fn horizon_steps(t_end: f64, delta: f64) -> Result<usize, ActionError> {
    let steps = (t_end / delta).round();
    if steps < 2.0 || (steps * delta - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(ActionError::BadHorizon { t_end, delta });
    }
    Ok(steps as usize)
}

fn check_backend(settings: &EvolveSettings) -> Result<(), ActionError> {
    if settings.backend != Backend::Variational {
        return Err(ActionError::NeedsVariational);
    }
    Ok(())
}

pub fn implicit_action(
    model: &ContactModel,
    grid: PeriodicGrid,
    x0: Vec2,
    u0: f64,
    t_end: f64,
    settings: &EvolveSettings,
    direction: Direction,
) -> Result<ActionTable, ActionError> {
    check_backend(settings)?;
    settings.validate(model)?;
    let steps = horizon_steps(t_end, settings.delta)?;
    let first = point_source_layer(model, grid, &x0, u0, settings.delta, direction)?;
    let mut layers = Vec::with_capacity(steps);
    let mut moves = Vec::with_capacity(steps);
    layers.push(first);
    moves.push(Vec::new());
    for _ in 1..steps {
        let (next, mv) =
            variational_step_with_argmin(model, layers.last().unwrap(), settings, direction)?;
        layers.push(next);
        moves.push(mv);
    }
    Ok(ActionTable {
        source_x: x0,
        source_u: u0,
        direction,
        delta: settings.delta,
        layers,
        moves,
    })
}

/// Last layer of a backward table without storing the intermediate ones.
fn final_layer(
    model: &ContactModel,
    grid: PeriodicGrid,
    x0: &Vec2,
    u0: f64,
    steps: usize,
    settings: &EvolveSettings,
) -> Result<GridFunction, ActionError> {
    let mut w = point_source_layer(model, grid, x0, u0, settings.delta, Direction::Backward)?;
    for _ in 1..steps {
        w = variational_step_with_argmin(model, &w, settings, Direction::Backward)?.0;
    }
    Ok(w)
}

fn strided_sources(grid: PeriodicGrid, stride: usize) -> Vec<usize> {
    (0..grid.len())
        .filter(|&k| grid.coords(k).iter().take(grid.dim).all(|c| c % stride == 0))
        .collect()
}

/// Nodewise minimum over sources `z` of `h_{z, w(z)}(., steps delta)`.
fn min_over_sources(
    model: &ContactModel,
    w: &GridFunction,
    steps: usize,
    settings: &EvolveSettings,
    stride: usize,
) -> Result<GridFunction, ActionError> {
    let grid = w.grid;
    let best = strided_sources(grid, stride)
        .into_par_iter()
        .map(|z| final_layer(model, grid, &grid.node(z), w.values[z], steps, settings))
        .try_reduce_with(|a, b| Ok(a.pointwise_min(&b).expect("same grid")))
        .expect("at least one source")?;
    Ok(best)
}

/// `T_t^- phi` rebuilt as the infimum of implicit actions over sources.
pub fn semigroup_from_action(
    model: &ContactModel,
    phi: &GridFunction,
    t: f64,
    settings: &EvolveSettings,
    stride: usize,
) -> Result<GridFunction, ActionError> {
    check_backend(settings)?;
    settings.validate(model)?;
    let steps = horizon_steps(t, settings.delta)?;
    let reach = model.v_max * t;
    if stride == 0 || stride as f64 * phi.grid.spacing > reach {
        return Err(ActionError::StrideTooCoarse { stride, reach });
    }
    min_over_sources(model, phi, steps, settings, stride)
}

/// `sup_x |h(x, t_end) - min_z h_{z, h(z, t_split)}(x, t_end - t_split)|`.
pub fn check_markov(
    model: &ContactModel,
    table: &ActionTable,
    t_split: f64,
    settings: &EvolveSettings,
    stride: usize,
) -> Result<f64, ActionError> {
    let k = table.layer_index(t_split).ok_or(ActionError::BadSplit(t_split))?;
    let remaining = table.steps() - (k + 1);
    if remaining < 1 {
        return Err(ActionError::BadSplit(t_split));
    }
    let mid = &table.layers[k];
    let end = table.layers.last().unwrap();
    let rebuilt = if remaining == 1 {
        // one step from a point source is its first layer
        let grid = mid.grid;
        strided_sources(grid, stride)
            .into_par_iter()
            .map(|z| {
                point_source_layer(model, grid, &grid.node(z), mid.values[z], table.delta, Direction::Backward)
                    .map_err(ActionError::from)
            })
            .try_reduce_with(|a, b| Ok(a.pointwise_min(&b).expect("same grid")))
            .expect("at least one source")?
    } else {
        min_over_sources(model, mid, remaining, settings, stride)?
    };
    Ok(end.sup_norm_diff(&rebuilt).expect("same grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::{evolve, step_backward};
    use crate::weakkam::solve_stationary;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    #[test]
    fn first_layer_formula() {
        let lin = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&lin, 1e-2);
        let g = grid(64);
        let x0 = g.node(10);
        let table = implicit_action(&lin, g, x0, 0.0, 0.1, &s, Direction::Backward).unwrap();
        assert_eq!(table.steps(), 10);
        assert_eq!(table.layers[0].values[10], 0.0);
        let x = g.node(13);
        let v = (x[0] - x0[0]) / 1e-2;
        let expect = 1e-2 * 0.5 * v * v;
        assert!((table.layers[0].values[13] - expect).abs() < 1e-12);
        let fwd = implicit_action(&lin, g, x0, 0.5, 0.1, &s, Direction::Forward).unwrap();
        assert!((fwd.layers[0].values[10] - 0.5 * (1.0 + 1e-2)).abs() < 1e-15);
    }

    #[test]
    fn horizon_validation() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let err = implicit_action(&p, grid(32), [0.0; 2], 0.0, 0.01, &s, Direction::Backward);
        assert!(matches!(err, Err(ActionError::BadHorizon { .. })));
        let lf = EvolveSettings::lax_friedrichs(1e-2);
        let err = implicit_action(&p, grid(32), [0.0; 2], 0.0, 1.0, &lf, Direction::Backward);
        assert!(matches!(err, Err(ActionError::NeedsVariational)));
    }

    #[test]
    fn pendulum_fixed_point_source_stays_at_zero() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let table = implicit_action(&p, grid(128), [0.0; 2], 0.0, 3.0, &s, Direction::Backward).unwrap();
        let mut prev = f64::INFINITY;
        for layer in &table.layers {
            let v = layer.values[0];
            assert!(v.abs() <= 1e-12 && v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn anchor_identity_with_evolve() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let g = grid(128);
        let table = implicit_action(&p, g, [1.0, 0.0], 0.3, 3.0, &s, Direction::Backward).unwrap();
        let h1 = table.layer(1.0).unwrap();
        let evolved = evolve(&p, h1, 2.0, &s, Direction::Backward).unwrap();
        let gap = table.layer(3.0).unwrap().sup_norm_diff(&evolved).unwrap();
        assert!(gap <= 1e-12, "{gap}");
    }

    #[test]
    fn monotone_in_source_value() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 2e-2);
        let g = grid(64);
        let lo = implicit_action(&p, g, [2.0, 0.0], -0.2, 1.0, &s, Direction::Backward).unwrap();
        let hi = implicit_action(&p, g, [2.0, 0.0], 0.4, 1.0, &s, Direction::Backward).unwrap();
        for (a, b) in lo.layers.iter().zip(&hi.layers) {
            assert!(a.max_excess_over(b).unwrap() <= 0.0);
        }
    }

    #[test]
    fn two_steps_from_sources_equal_direct_steps() {
        let p = ContactModel::pendulum();
        let mut s = EvolveSettings::variational(&p, 0.1);
        s.refine = false;
        s.search_radius = 0.3;
        let g = grid(32);
        let phi = GridFunction::from_fn(g, |x| (2.0 * x[0]).cos());
        let direct = step_backward(&p, &step_backward(&p, &phi, &s).unwrap(), &s).unwrap();
        let rebuilt = semigroup_from_action(&p, &phi, 0.2, &s, 1).unwrap();
        assert!(direct.sup_norm_diff(&rebuilt).unwrap() <= 1e-12);
    }

    #[test]
    fn stride_limit() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let phi = GridFunction::constant(grid(256), 0.0);
        assert!(matches!(
            semigroup_from_action(&p, &phi, 0.02, &s, 64),
            Err(ActionError::StrideTooCoarse { .. })
        ));
    }

    #[test]
    fn sources_reproduce_the_semigroup() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let g = grid(256);
        let zero = GridFunction::constant(g, 0.0);
        let (u_minus, _) = solve_stationary(&p, &zero, 1e-4, 60.0, &s).unwrap();
        let rebuilt = semigroup_from_action(&p, &u_minus, 1.0, &s, DEFAULT_STRIDE).unwrap();
        assert!(rebuilt.sup_norm_diff(&u_minus).unwrap() <= 6e-2);

        let lin = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&lin, 1e-2);
        let one = GridFunction::constant(g, 1.0);
        let rebuilt = semigroup_from_action(&lin, &one, 1.0, &s, DEFAULT_STRIDE).unwrap();
        let direct = evolve(&lin, &one, 1.0, &s, Direction::Backward).unwrap();
        assert!(rebuilt.sup_norm_diff(&direct).unwrap() <= 6e-2);
        assert!((rebuilt.values[7] - (-1.0f64).exp()).abs() <= 6e-2);
    }

    #[test]
    fn markov_defects() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let g = grid(256);
        let table = implicit_action(&p, g, [0.0; 2], 0.0, 2.0, &s, Direction::Backward).unwrap();
        let d = check_markov(&p, &table, 1.0, &s, DEFAULT_STRIDE).unwrap();
        assert!(d <= 8e-2, "{d}");
        let d = check_markov(&p, &table, 1.99, &s, 1).unwrap();
        assert!(d <= 8e-2, "{d}");

        let lin = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&lin, 1e-2);
        let table = implicit_action(&lin, g, [1.0, 0.0], 1.0, 2.0, &s, Direction::Backward).unwrap();
        assert!(check_markov(&lin, &table, 1.0, &s, DEFAULT_STRIDE).unwrap() <= 8e-2);
        assert!(matches!(check_markov(&lin, &table, 2.0, &s, 4), Err(ActionError::BadSplit(_))));
    }

    #[test]
    fn csv_and_sidecar() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 0.1);
        let table = implicit_action(&p, grid(16), [0.0; 2], 0.0, 0.5, &s, Direction::Backward).unwrap();
        let mut csv = Vec::new();
        table.write_csv(2, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 16);
        let mut bin = Vec::new();
        table.write_argmin(&mut bin).unwrap();
        assert_eq!(bin.len(), 4 * 16 * 3 * 4);
    }
}
