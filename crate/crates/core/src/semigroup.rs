//! Backward and forward Lax-Oleinik semigroups on a periodic grid.
//!
//! Two discretizations of `w_t + H(x, Dw, w) = 0` are provided: a one-step
//! variational (semi-Lagrangian) scheme, which also carries the forward
//! semigroup, and a monotone Lax-Friedrichs finite-difference scheme used as
//! an independent cross-check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{GridError, GridFunction};
use crate::model::{ContactModel, ModelError, Vec2};
use crate::optim::brent_min;

/// Evolution stops with [`SemigroupError::Diverged`] beyond this sup-norm.
pub const DIVERGENCE_BOUND: f64 = 1e6;
/// Lax-Friedrichs viscosity is recomputed this often.
pub const VISCOSITY_REFRESH: usize = 100;
const VISCOSITY_MARGIN: f64 = 1.25;
const VISCOSITY_FLOOR: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum SemigroupError {
    #[error("CFL ratio {ratio} exceeds 1/2")]
    CflViolation { ratio: f64 },
    #[error("delta * kappa = {product} exceeds 1/2")]
    ContractionViolation { product: f64 },
    #[error("the forward semigroup is only available with the variational backend")]
    ForwardNeedsVariational,
    #[error("negative evolution time {0}")]
    NegativeTime(f64),
    #[error("bad settings: {0}")]
    BadSettings(String),
    #[error("evolution diverged at t = {t} (sup-norm {sup_norm})")]
    Diverged { t: f64, sup_norm: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Variational,
    LaxFriedrichs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Backward,
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveSettings {
    pub backend: Backend,
    pub delta: f64,
    /// Largest displacement searched per variational step.
    pub search_radius: f64,
    /// Fixed Lax-Friedrichs coefficients per axis; estimated from the data when absent.
    pub viscosity: Option<[f64; 2]>,
    pub picard_iters: usize,
    /// Continuous refinement of the variational argmin between nodes.
    pub refine: bool,
}

impl EvolveSettings {
    pub fn variational(model: &ContactModel, delta: f64) -> Self {
        Self {
            backend: Backend::Variational,
            delta,
            search_radius: model.v_max * delta,
            viscosity: None,
            picard_iters: 1,
            refine: true,
        }
    }

    pub fn lax_friedrichs(delta: f64) -> Self {
        Self {
            backend: Backend::LaxFriedrichs,
            delta,
            search_radius: 0.0,
            viscosity: None,
            picard_iters: 1,
            refine: false,
        }
    }

    pub fn validate(&self, model: &ContactModel) -> Result<(), SemigroupError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(SemigroupError::BadSettings(format!("delta = {}", self.delta)));
        }
        if self.picard_iters == 0 {
            return Err(SemigroupError::BadSettings("picard_iters = 0".into()));
        }
        if self.backend == Backend::Variational && !(self.search_radius >= 0.0) {
            return Err(SemigroupError::BadSettings(format!(
                "search_radius = {}",
                self.search_radius
            )));
        }
        let product = self.delta * model.kappa;
        if product > 0.5 {
            return Err(SemigroupError::ContractionViolation { product });
        }
        Ok(())
    }

    fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            search_radius: self.search_radius * delta / self.delta,
            ..*self
        }
    }
}

/// Discretization tolerance `5 delta t + 2 h` used by the semigroup property checks.
pub fn scheme_tolerance(settings: &EvolveSettings, spacing: f64, t: f64) -> f64 {
    5.0 * settings.delta * t + 2.0 * spacing
}

struct NodeSearch<'a> {
    model: &'a ContactModel,
    w: &'a GridFunction,
    settings: &'a EvolveSettings,
    dir: Direction,
}

impl NodeSearch<'_> {
    /// Objective at displacement `s` from node `x`; minimized in both directions
    /// (the forward value is negated).
    fn objective(&self, x: &Vec2, s: &Vec2) -> Result<f64, ModelError> {
        let d = self.settings.delta;
        let y = [x[0] + s[0], x[1] + s[1]];
        let wy = self.w.interpolate(&y);
        match self.dir {
            Direction::Backward => {
                let v = [-s[0] / d, -s[1] / d];
                let mut val = wy + d * self.model.lagrangian(&y, &v, wy)?;
                for _ in 1..self.settings.picard_iters {
                    val = 0.5 * (wy + d * self.model.lagrangian(&y, &v, val)?) + 0.5 * val;
                }
                Ok(val)
            }
            Direction::Forward => {
                let v = [s[0] / d, s[1] / d];
                Ok(-(wy - d * self.model.lagrangian(x, &v, wy)?))
            }
        }
    }

    /// Optimal value at node `k` and the displacement `y - x` realizing it.
    fn node_value(&self, k: usize) -> Result<(f64, Vec2), ModelError> {
        self.point_value(&self.w.grid.node(k))
    }

    fn point_value(&self, x: &Vec2) -> Result<(f64, Vec2), ModelError> {
        let x = *x;
        let (best, s) = if self.w.grid.dim == 1 {
            self.search_1d(&x)?
        } else {
            self.search_2d(&x)?
        };
        Ok(match self.dir {
            Direction::Backward => (best, s),
            Direction::Forward => (-best, s),
        })
    }

    fn brent(
        &self,
        x: &Vec2,
        point: impl Fn(f64) -> Vec2,
        lo: f64,
        hi: f64,
    ) -> Result<(f64, f64), ModelError> {
        let mut err = None;
        let tol = 1e-9 * self.settings.search_radius.max(1e-300);
        let found = brent_min(
            |t| match self.objective(x, &point(t)) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::INFINITY
                }
            },
            lo,
            hi,
            tol,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(found),
        }
    }

    fn search_1d(&self, x: &Vec2) -> Result<(f64, Vec2), ModelError> {
        let h = self.w.grid.spacing;
        let r = self.settings.search_radius;
        let reach = (r / h + 1e-12).floor() as i64;
        let mut breaks: Vec<f64> = (-reach..=reach).map(|k| k as f64 * h).collect();
        if self.settings.refine && r > 0.0 {
            if breaks[0] > -r {
                breaks.insert(0, -r);
            }
            if *breaks.last().unwrap() < r {
                breaks.push(r);
            }
        }
        let mut vals = Vec::with_capacity(breaks.len());
        for &s in &breaks {
            vals.push(self.objective(x, &[s, 0.0])?);
        }
        let (b, mut best) = vals
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let mut best_s = breaks[b];
        if self.settings.refine {
            // w is linear between breakpoints; refine the pieces touching the best one.
            for (lo, hi) in [(b.wrapping_sub(1), b), (b, b + 1)] {
                if lo < breaks.len() && hi < breaks.len() {
                    let (t, v) = self.brent(x, |t| [t, 0.0], breaks[lo], breaks[hi])?;
                    if v < best {
                        best = v;
                        best_s = t;
                    }
                }
            }
        }
        Ok((best, [best_s, 0.0]))
    }

    fn search_2d(&self, x: &Vec2) -> Result<(f64, Vec2), ModelError> {
        let h = self.w.grid.spacing;
        let r = self.settings.search_radius;
        let reach = (r / h + 1e-12).floor() as i64;
        let mut best_s = [0.0, 0.0];
        let mut best = self.objective(x, &best_s)?;
        let consider = |s: Vec2, best: &mut f64, best_s: &mut Vec2| -> Result<(), ModelError> {
            let v = self.objective(x, &s)?;
            if v < *best {
                *best = v;
                *best_s = s;
            }
            Ok(())
        };
        for i in -reach..=reach {
            for j in -reach..=reach {
                let s = [i as f64 * h, j as f64 * h];
                if (i, j) != (0, 0) && s[0].hypot(s[1]) <= r * (1.0 + 1e-12) {
                    consider(s, &mut best, &mut best_s)?;
                }
            }
        }
        if !self.settings.refine || r == 0.0 {
            return Ok((best, best_s));
        }
        const COARSE: i64 = 4;
        for i in -COARSE..=COARSE {
            for j in -COARSE..=COARSE {
                let s = [r * i as f64 / COARSE as f64, r * j as f64 / COARSE as f64];
                if s[0].hypot(s[1]) <= r {
                    consider(s, &mut best, &mut best_s)?;
                }
            }
        }
        // Coordinate sweeps along the axes, where the interpolant is piecewise linear.
        for _ in 0..2 {
            for axis in 0..2 {
                let other = best_s[1 - axis];
                let half = (r * r - other * other).max(0.0).sqrt();
                let point = |t: f64| {
                    let mut s = [0.0; 2];
                    s[axis] = t;
                    s[1 - axis] = other;
                    s
                };
                let (t, v) = self.brent(x, point, -half, half)?;
                if v < best {
                    best = v;
                    best_s = point(t);
                }
            }
        }
        Ok((best, best_s))
    }
}

fn variational_step(
    model: &ContactModel,
    w: &GridFunction,
    settings: &EvolveSettings,
    dir: Direction,
) -> Result<GridFunction, SemigroupError> {
    Ok(variational_step_with_argmin(model, w, settings, dir)?.0)
}

/// One variational step that also returns, per node, the optimal displacement
/// `y - x` to the source point `y` in the previous layer.
pub fn variational_step_with_argmin(
    model: &ContactModel,
    w: &GridFunction,
    settings: &EvolveSettings,
    dir: Direction,
) -> Result<(GridFunction, Vec<Vec2>), SemigroupError> {
    settings.validate(model)?;
    if settings.backend != Backend::Variational {
        return Err(SemigroupError::BadSettings(
            "argmin recording needs the variational backend".into(),
        ));
    }
    let search = NodeSearch {
        model,
        w,
        settings,
        dir,
    };
    let (values, moves): (Vec<f64>, Vec<Vec2>) = (0..w.grid.len())
        .into_par_iter()
        .map(|k| search.node_value(k))
        .collect::<Result<Vec<_>, ModelError>>()?
        .into_iter()
        .unzip();
    Ok((GridFunction::new(w.grid, values)?, moves))
}

/// Optimal value of one variational step at an arbitrary point `x`, with the
/// displacement `y - x` realizing it.
pub fn variational_argmin_at(
    model: &ContactModel,
    w: &GridFunction,
    settings: &EvolveSettings,
    dir: Direction,
    x: &Vec2,
) -> Result<(f64, Vec2), SemigroupError> {
    let search = NodeSearch {
        model,
        w,
        settings,
        dir,
    };
    Ok(search.point_value(x)?)
}

/// Per-axis bound on `|H_p|` over the one-sided difference quotients of `w`,
/// with a margin for drift between refreshes.
pub fn viscosity_estimate(model: &ContactModel, w: &GridFunction) -> [f64; 2] {
    let grid = w.grid;
    let dim = grid.dim;
    let bound = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.node(k);
            let g = w.node_gradient(k);
            let mut m = [0.0f64; 2];
            let combos = if dim == 1 { 2 } else { 4 };
            for c in 0..combos {
                let mut p = [0.0; 2];
                for (i, pi) in p.iter_mut().enumerate().take(dim) {
                    *pi = if (c >> i) & 1 == 0 { g.left[i] } else { g.right[i] };
                }
                let hp = model.grad_p(&x, &p, w.values[k]);
                for i in 0..dim {
                    m[i] = m[i].max(hp[i].abs());
                }
            }
            m
        })
        .reduce(|| [0.0; 2], |a, b| [a[0].max(b[0]), a[1].max(b[1])]);
    let mut alpha = [0.0; 2];
    for i in 0..dim {
        alpha[i] = VISCOSITY_MARGIN * bound[i] + VISCOSITY_FLOOR;
    }
    alpha
}

fn check_cfl(alpha: &[f64; 2], delta: f64, spacing: f64) -> Result<(), SemigroupError> {
    let ratio = delta * alpha[0].max(alpha[1]) / spacing;
    if ratio > 0.5 {
        return Err(SemigroupError::CflViolation { ratio });
    }
    Ok(())
}

fn lax_friedrichs_step(
    model: &ContactModel,
    w: &GridFunction,
    delta: f64,
    alpha: &[f64; 2],
) -> Result<GridFunction, SemigroupError> {
    check_cfl(alpha, delta, w.grid.spacing)?;
    let grid = w.grid;
    let h = grid.spacing;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let [i, j] = grid.coords(k);
            let (i, j) = (i as isize, j as isize);
            let c = w.values[k];
            let mut p = [0.0; 2];
            let mut diffusion = 0.0;
            for axis in 0..grid.dim {
                let (fwd, back) = if axis == 0 {
                    (w.at(i + 1, j), w.at(i - 1, j))
                } else {
                    (w.at(i, j + 1), w.at(i, j - 1))
                };
                p[axis] = (fwd - back) / (2.0 * h);
                diffusion += alpha[axis] * (fwd - 2.0 * c + back) / (2.0 * h);
            }
            c - delta * model.hamiltonian(&grid.node(k), &p, c) + delta * diffusion
        })
        .collect();
    Ok(GridFunction::new(grid, values)?)
}

/// `T_delta^- w`.
pub fn step_backward(
    model: &ContactModel,
    w: &GridFunction,
    settings: &EvolveSettings,
) -> Result<GridFunction, SemigroupError> {
    settings.validate(model)?;
    match settings.backend {
        Backend::Variational => variational_step(model, w, settings, Direction::Backward),
        Backend::LaxFriedrichs => {
            let alpha = settings.viscosity.unwrap_or_else(|| viscosity_estimate(model, w));
            lax_friedrichs_step(model, w, settings.delta, &alpha)
        }
    }
}

/// `T_delta^+ w` (variational backend only).
pub fn step_forward(
    model: &ContactModel,
    w: &GridFunction,
    settings: &EvolveSettings,
) -> Result<GridFunction, SemigroupError> {
    settings.validate(model)?;
    if settings.backend != Backend::Variational {
        return Err(SemigroupError::ForwardNeedsVariational);
    }
    variational_step(model, w, settings, Direction::Forward)
}

pub fn evolve(
    model: &ContactModel,
    phi: &GridFunction,
    t: f64,
    settings: &EvolveSettings,
    dir: Direction,
) -> Result<GridFunction, SemigroupError> {
    evolve_observed(model, phi, t, settings, dir, 0, |_, _| {})
}

/// [`evolve`] that hands every `every`-th intermediate state (and the final one)
/// to `observer`; `every = 0` disables snapshots.
pub fn evolve_observed(
    model: &ContactModel,
    phi: &GridFunction,
    t: f64,
    settings: &EvolveSettings,
    dir: Direction,
    every: usize,
    mut observer: impl FnMut(f64, &GridFunction),
) -> Result<GridFunction, SemigroupError> {
    if !(t >= 0.0) {
        return Err(SemigroupError::NegativeTime(t));
    }
    settings.validate(model)?;
    if dir == Direction::Forward && settings.backend != Backend::Variational {
        return Err(SemigroupError::ForwardNeedsVariational);
    }
    let delta = settings.delta;
    let steps = (t / delta - 1e-9).ceil().max(0.0) as usize;
    let mut w = phi.clone();
    let mut alpha = settings.viscosity.unwrap_or([0.0; 2]);
    let mut elapsed = 0.0;
    for step in 0..steps {
        let d = if step + 1 == steps {
            t - delta * (steps - 1) as f64
        } else {
            delta
        };
        let local = settings.with_delta(d);
        w = match (settings.backend, dir) {
            (Backend::Variational, dir) => variational_step(model, &w, &local, dir)?,
            (Backend::LaxFriedrichs, _) => {
                if settings.viscosity.is_none() && step % VISCOSITY_REFRESH == 0 {
                    alpha = viscosity_estimate(model, &w);
                }
                lax_friedrichs_step(model, &w, d, &alpha)?
            }
        };
        elapsed += d;
        let sup = w.sup_norm();
        if !(sup <= DIVERGENCE_BOUND) {
            return Err(SemigroupError::Diverged {
                t: elapsed,
                sup_norm: sup,
            });
        }
        if every > 0 && ((step + 1) % every == 0 || step + 1 == steps) {
            observer(elapsed, &w);
        }
    }
    Ok(w)
}

/// Sup-norm gap between the two backends after backward evolution to `t`.
pub fn backends_agree(
    model: &ContactModel,
    phi: &GridFunction,
    t: f64,
    settings_v: &EvolveSettings,
    settings_lf: &EvolveSettings,
) -> Result<f64, SemigroupError> {
    let a = evolve(model, phi, t, settings_v, Direction::Backward)?;
    let b = evolve(model, phi, t, settings_lf, Direction::Backward)?;
    Ok(a.sup_norm_diff(&b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use proptest::prelude::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    #[test]
    fn one_step_examples() {
        let m = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&m, 0.1);
        let one = GridFunction::constant(grid(64), 1.0);
        let back = step_backward(&m, &one, &s).unwrap();
        assert!(back.values.iter().all(|v| (v - 0.9).abs() < 1e-15));
        let c = GridFunction::constant(grid(64), -2.5);
        let fwd = step_forward(&m, &c, &s).unwrap();
        assert!(fwd.values.iter().all(|v| (v - 1.1 * -2.5).abs() < 1e-14));
    }

    #[test]
    fn two_dimensional_step() {
        let m = ContactModel::linear_discount(2);
        let s = EvolveSettings::variational(&m, 0.1);
        let one = GridFunction::constant(PeriodicGrid::new(2, 16).unwrap(), 1.0);
        let back = step_backward(&m, &one, &s).unwrap();
        assert!(back.values.iter().all(|v| (v - 0.9).abs() < 1e-15));
    }

    #[test]
    fn settings_errors() {
        let m = ContactModel::linear_discount(1);
        let w = GridFunction::constant(grid(64), 0.0);
        let s = EvolveSettings::variational(&m, 0.6);
        assert!(matches!(step_backward(&m, &w, &s), Err(SemigroupError::ContractionViolation { .. })));
        let mut lf = EvolveSettings::lax_friedrichs(0.1);
        lf.viscosity = Some([100.0, 0.0]);
        assert!(matches!(step_backward(&m, &w, &lf), Err(SemigroupError::CflViolation { .. })));
        assert!(matches!(step_forward(&m, &w, &lf), Err(SemigroupError::ForwardNeedsVariational)));
        assert!(matches!(
            evolve(&m, &w, -1.0, &EvolveSettings::variational(&m, 0.1), Direction::Backward),
            Err(SemigroupError::NegativeTime(_))
        ));
    }

    #[test]
    fn shortened_last_step() {
        let m = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&m, 1e-3);
        let one = GridFunction::constant(grid(32), 1.0);
        let w = evolve(&m, &one, 0.0025, &s, Direction::Backward).unwrap();
        let expect = (1.0 - 1e-3) * (1.0 - 1e-3) * (1.0 - 5e-4);
        assert!((w.values[0] - expect).abs() < 1e-15);
        let zero = evolve(&m, &one, 0.0, &s, Direction::Backward).unwrap();
        assert_eq!(zero, one);
    }

    #[test]
    fn linear_discount_decays_like_the_scalar_ode() {
        let m = ContactModel::linear_discount(1);
        let one = GridFunction::constant(grid(256), 1.0);
        let w = evolve(&m, &one, 1.0, &EvolveSettings::variational(&m, 1e-3), Direction::Backward).unwrap();
        let target = GridFunction::constant(grid(256), (-1.0f64).exp());
        assert!(w.sup_norm_diff(&target).unwrap() <= 5e-3);
    }

    #[test]
    fn undiscounted_constant_growth() {
        let m = ContactModel::no_solution(1);
        let zero = GridFunction::constant(grid(64), 0.0);
        let w = evolve(&m, &zero, 10.0, &EvolveSettings::variational(&m, 1e-2), Direction::Backward).unwrap();
        assert!(w.values.iter().all(|v| (v - 10.0).abs() < 1e-9));
    }

    #[test]
    fn divergence_is_reported() {
        let m = ContactModel::free_discount(1, -1.0, 0.0);
        let one = GridFunction::constant(grid(16), 1.0);
        let err = evolve(&m, &one, 20.0, &EvolveSettings::variational(&m, 0.5), Direction::Backward).unwrap_err();
        match err {
            SemigroupError::Diverged { t, sup_norm } => assert!(t <= 20.0 && sup_norm > DIVERGENCE_BOUND),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn snapshots_are_streamed() {
        let m = ContactModel::linear_discount(1);
        let one = GridFunction::constant(grid(16), 1.0);
        let mut times = Vec::new();
        evolve_observed(&m, &one, 0.25, &EvolveSettings::variational(&m, 0.1), Direction::Backward, 2, |t, _| times.push(t))
            .unwrap();
        assert_eq!(times.len(), 2);
        assert!((times[0] - 0.2).abs() < 1e-12 && (times[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn backends_agree_on_catalog() {
        let p = ContactModel::pendulum();
        let zero = GridFunction::constant(grid(256), 0.0);
        let sv = EvolveSettings::variational(&p, 1e-3);
        let slf = EvolveSettings::lax_friedrichs(1e-3);
        assert_eq!(backends_agree(&p, &zero, 0.0, &sv, &slf).unwrap(), 0.0);
        assert!(backends_agree(&p, &zero, 2.0, &sv, &slf).unwrap() <= 5e-2);
        let lin = ContactModel::linear_discount(1);
        let one = GridFunction::constant(grid(256), 1.0);
        let sv = EvolveSettings::variational(&lin, 1e-3);
        assert!(backends_agree(&lin, &one, 1.0, &sv, &slf).unwrap() <= 1e-2);
    }

    #[test]
    fn semigroup_property_on_step_multiples() {
        let p = ContactModel::pendulum();
        let g = grid(128);
        let phi = GridFunction::from_fn(g, |x| (2.0 * x[0]).sin());
        let s = EvolveSettings::variational(&p, 1e-2);
        for (a, b) in [(0.5, 0.5), (0.5, 1.0), (1.0, 1.0)] {
            let whole = evolve(&p, &phi, a + b, &s, Direction::Backward).unwrap();
            let half = evolve(&p, &phi, a, &s, Direction::Backward).unwrap();
            let parts = evolve(&p, &half, b, &s, Direction::Backward).unwrap();
            let tol = 2.0 * scheme_tolerance(&s, g.spacing, a + b);
            assert!(whole.sup_norm_diff(&parts).unwrap() <= tol);
        }
    }

    #[test]
    fn refinement_never_raises_the_backward_value() {
        let p = ContactModel::pendulum();
        let phi = GridFunction::from_fn(grid(64), |x| x[0].sin() + 0.3 * (3.0 * x[0]).cos());
        let mut s = EvolveSettings::variational(&p, 0.05);
        let refined = step_backward(&p, &phi, &s).unwrap();
        s.refine = false;
        let coarse = step_backward(&p, &phi, &s).unwrap();
        assert!(refined.max_excess_over(&coarse).unwrap() <= 1e-14);
    }

    #[test]
    fn picard_iterations_move_toward_implicit_coupling() {
        // H = p^2/2 + u: implicit fixed point of v = w + d(-v) is w / (1 + d)
        let m = ContactModel::linear_discount(1);
        let mut s = EvolveSettings::variational(&m, 0.1);
        s.picard_iters = 60;
        let one = GridFunction::constant(grid(16), 1.0);
        let w = step_backward(&m, &one, &s).unwrap();
        assert!((w.values[0] - 1.0 / 1.1).abs() < 1e-9);
    }

    fn random_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            proptest::collection::vec(-2.0f64..2.0, n),
            proptest::collection::vec(0.0f64..1.0, n),
        )
            .prop_map(|(a, gap)| {
                let b = a.iter().zip(&gap).map(|(x, g)| x + g).collect();
                (a, b)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn steps_preserve_order((lo, hi) in random_pair(32)) {
            let p = ContactModel::pendulum();
            let g = grid(32);
            let lo = GridFunction::new(g, lo).unwrap();
            let hi = GridFunction::new(g, hi).unwrap();
            let sv = EvolveSettings::variational(&p, 0.05);
            let slf = EvolveSettings::lax_friedrichs(0.01);
            for (a, b) in [
                (step_backward(&p, &lo, &sv).unwrap(), step_backward(&p, &hi, &sv).unwrap()),
                (step_forward(&p, &lo, &sv).unwrap(), step_forward(&p, &hi, &sv).unwrap()),
            ] {
                prop_assert!(a.max_excess_over(&b).unwrap() <= 1e-12);
            }
            // monotone once the viscosity dominates |H_p| over the data's slopes
            let mut fixed = slf;
            fixed.viscosity = Some([2.0, 0.0]);
            let (lo, hi) = (lo.map(|v| 0.1 * v), hi.map(|v| 0.1 * v));
            let a = step_backward(&p, &lo, &fixed).unwrap();
            let b = step_backward(&p, &hi, &fixed).unwrap();
            prop_assert!(a.max_excess_over(&b).unwrap() <= 1e-12);
        }
    }
}
