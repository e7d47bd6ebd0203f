//! Minimizing curves from action tables, initial momenta, and the saddle's
//! stable manifold with the shooting selection of `p0`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::action::{implicit_action, ActionError, ActionTable};
use crate::flow::{integrate_extended, integrate_orbit, FlowError, Orbit, PreciseState, State};
use crate::grid::PeriodicGrid;
use crate::model::{torus_delta, wrap, ContactModel, ModelError, Vec2};
use crate::real::{DoubleDouble, Real};
use crate::semigroup::{variational_argmin_at, Direction, EvolveSettings, SemigroupError};

pub const DEFAULT_CAUCHY_TOL: f64 = 5e-2;
pub const DEFAULT_SEED: f64 = 1e-4;
pub const DEFAULT_T_BACK: f64 = 25.0;
/// Branch traces stop once `|p|` exceeds this.
pub const MANIFOLD_P_BOUND: f64 = 12.0;
const MANIFOLD_DT: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum MinimizerError {
    #[error("horizon list must be increasing with at least 3 entries: {0:?}")]
    BadHorizons(Vec<f64>),
    #[error("p_n(0) not Cauchy at the largest horizons: {:?}", .0.p_n)]
    NonCauchy(Box<MomentumDiagnostics>),
    #[error("planar reduction failed: {0}")]
    PlanarReductionFailed(String),
    #[error("not a saddle: eigenvalues {0:?}")]
    NotASaddle([f64; 2]),
    #[error("no manifold branch crosses x = {0}")]
    NoIntersection(f64),
    #[error("could not bracket the stable manifold near p = {0}")]
    PolishFailed(f64),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A backtracked minimizer sampled on the table's time grid.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteCurve {
    pub dim: usize,
    pub delta: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec2>,
    /// `v[k] = (x[k + 1] - x[k]) / delta`, torus-minimal.
    pub v: Vec<Vec2>,
    pub u: Vec<f64>,
    /// `p[k] = L_v(x[k], v[k], u[k])`.
    pub p: Vec<Vec2>,
}

impl DiscreteCurve {
    /// Displacement from `x[0]` to `x[k]` in the universal cover.
    pub fn unwrapped(&self, k: usize) -> Vec2 {
        let mut d = [0.0; 2];
        for v in &self.v[..k] {
            d[0] += v[0] * self.delta;
            d[1] += v[1] * self.delta;
        }
        d
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.dim == 1 {
            writeln!(w, "t,x,v,u,p")?;
        } else {
            writeln!(w, "t,x,y,vx,vy,u,px,py")?;
        }
        for k in 0..self.times.len() {
            let (v, p) = match k < self.v.len() {
                true => (self.v[k], self.p[k]),
                false => ([f64::NAN; 2], [f64::NAN; 2]),
            };
            let (t, x, u) = (self.times[k], self.x[k], self.u[k]);
            if self.dim == 1 {
                writeln!(w, "{t},{},{},{u},{}", x[0], v[0], p[0])?;
            } else {
                writeln!(w, "{t},{},{},{},{},{u},{},{}", x[0], x[1], v[0], v[1], p[0], p[1])?;
            }
        }
        Ok(())
    }
}

fn shift(dim: usize, x: &Vec2, s: &Vec2) -> Vec2 {
    let mut y = [0.0; 2];
    for i in 0..dim {
        y[i] = wrap(x[i] + s[i]);
    }
    y
}

fn minimal(dim: usize, a: &Vec2, b: &Vec2) -> Vec2 {
    let mut d = [0.0; 2];
    for i in 0..dim {
        d[i] = torus_delta(a[i], b[i]);
    }
    d
}

/// Follows optimal predecessors from the node nearest `x_target` at time `t`
/// back to the source. The first step uses the stored node argmin; later
/// steps re-solve the search at the continuous predecessor position.
pub fn backtrack_minimizer(
    model: &ContactModel,
    table: &ActionTable,
    settings: &EvolveSettings,
    x_target: &Vec2,
    t: f64,
) -> Result<DiscreteCurve, MinimizerError> {
    let grid = table.grid();
    let dim = grid.dim;
    let k_end = table
        .layer_index(t)
        .unwrap_or_else(|| ((t / table.delta).round() as usize).clamp(1, table.steps()) - 1);
    let node = grid.nearest(x_target);
    let mut pos = vec![grid.node(node)];
    for k in (1..=k_end).rev() {
        let here = *pos.last().unwrap();
        let s = if k == k_end {
            table.moves[k][node]
        } else {
            variational_argmin_at(model, &table.layers[k - 1], settings, Direction::Backward, &here)?.1
        };
        pos.push(shift(dim, &here, &s));
    }
    pos.push(table.source_x);
    pos.reverse();

    let delta = table.delta;
    let times: Vec<f64> = (0..pos.len()).map(|k| k as f64 * delta).collect();
    let mut u = vec![table.source_u];
    u.extend((0..=k_end).map(|k| table.layers[k].interpolate(&pos[k + 1])));
    let mut v = Vec::with_capacity(pos.len() - 1);
    let mut p = Vec::with_capacity(pos.len() - 1);
    for k in 0..pos.len() - 1 {
        let d = minimal(dim, &pos[k + 1], &pos[k]);
        let vk = [d[0] / delta, d[1] / delta];
        p.push(model.momentum(&pos[k], &vk, u[k])?);
        v.push(vk);
    }
    Ok(DiscreteCurve {
        dim,
        delta,
        times,
        x: pos,
        v,
        u,
        p,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentumDiagnostics {
    pub horizons: Vec<f64>,
    /// Refined `p_n(0)` per horizon.
    pub p_n: Vec<Vec2>,
    /// `L_v` on the first discrete segment, before refinement.
    pub p_segment: Vec<Vec2>,
    pub terminal: Vec<Vec2>,
    pub converged: bool,
}

/// Unwrapped x-displacement after time `tau` along the flow from `(x0, p, u0)`.
fn flow_displacement(model: &ContactModel, x0: &Vec2, p: &Vec2, u0: f64, tau: f64) -> Result<Vec2, FlowError> {
    let orbit = integrate_orbit(model, State::new(*x0, *p, u0), tau, 1e-2)?;
    if orbit.blown_up {
        return Err(FlowError::BlownUp);
    }
    let mut d = [0.0; 2];
    for w in orbit.states.windows(2) {
        for i in 0..model.dim {
            d[i] += torus_delta(w[1].x[i], w[0].x[i]);
        }
    }
    Ok(d)
}

/// Newton solve for the momentum whose flow reaches `x0 + target` at time `tau`.
fn two_point_momentum(
    model: &ContactModel,
    x0: &Vec2,
    u0: f64,
    target: &Vec2,
    tau: f64,
    guess: Vec2,
) -> Option<Vec2> {
    let dim = model.dim;
    let residual = |p: &Vec2| -> Option<Vec2> {
        let d = flow_displacement(model, x0, p, u0, tau).ok()?;
        Some([d[0] - target[0], if dim == 2 { d[1] - target[1] } else { 0.0 }])
    };
    let mut p = guess;
    for _ in 0..40 {
        let f = residual(&p)?;
        if f[0].hypot(f[1]) < 1e-11 {
            return Some(p);
        }
        let eps = 1e-6;
        let mut jac = [[1.0, 0.0], [0.0, 1.0]];
        for j in 0..dim {
            let mut q = p;
            q[j] += eps;
            let fq = residual(&q)?;
            for i in 0..dim {
                jac[i][j] = (fq[i] - f[i]) / eps;
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-12 {
            return None;
        }
        let mut step = [
            (jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            (jac[0][0] * f[1] - jac[1][0] * f[0]) / det,
        ];
        let norm = step[0].hypot(step[1]);
        if norm > 1.0 {
            step = [step[0] / norm, step[1] / norm];
        }
        p = [p[0] - step[0], p[1] - step[1]];
    }
    None
}

/// `p_n(0)` for each horizon: backtrack from the minimizing terminal node, then
/// refine the first-segment momentum by matching the flow to the curve's
/// position at time `min(1, n / 4)`.
pub fn initial_momentum(
    model: &ContactModel,
    grid: PeriodicGrid,
    x0: Vec2,
    u0: f64,
    horizons: &[f64],
    settings: &EvolveSettings,
    cauchy_tol: f64,
) -> Result<(Vec2, MomentumDiagnostics), MinimizerError> {
    if horizons.len() < 3 || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MinimizerError::BadHorizons(horizons.to_vec()));
    }
    let per_horizon = horizons
        .par_iter()
        .map(|&n| -> Result<(Vec2, Vec2, Vec2), MinimizerError> {
            let table = implicit_action(model, grid, x0, u0, n, settings, Direction::Backward)?;
            let last = table.layers.last().unwrap();
            let (node, _) = last
                .values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
            let terminal = grid.node(node);
            let curve = backtrack_minimizer(model, &table, settings, &terminal, table.t_end())?;
            let segment = curve.p[0];
            let m = ((n / 4.0).min(1.0) / table.delta).round().max(1.0) as usize;
            let target = curve.unwrapped(m);
            let tau = m as f64 * table.delta;
            let refined =
                two_point_momentum(model, &x0, u0, &target, tau, segment).unwrap_or(segment);
            Ok((refined, segment, terminal))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let diagnostics = MomentumDiagnostics {
        horizons: horizons.to_vec(),
        p_n: per_horizon.iter().map(|r| r.0).collect(),
        p_segment: per_horizon.iter().map(|r| r.1).collect(),
        terminal: per_horizon.iter().map(|r| r.2).collect(),
        converged: false,
    };
    let k = diagnostics.p_n.len();
    let (a, b) = (diagnostics.p_n[k - 2], diagnostics.p_n[k - 1]);
    if (a[0] - b[0]).hypot(a[1] - b[1]) > cauchy_tol {
        return Err(MinimizerError::NonCauchy(Box::new(diagnostics)));
    }
    Ok((b, MomentumDiagnostics { converged: true, ..diagnostics }))
}

fn table_horizon(settings: &EvolveSettings, span: f64) -> f64 {
    let steps = (span / settings.delta).round().max(2.0);
    steps * settings.delta
}

/// `max |u(t2) - h_{x(t1), u(t1)}(x(t2), t2 - t1)|` over the pairs.
pub fn check_globally_minimizing(
    model: &ContactModel,
    grid: PeriodicGrid,
    orbit: &Orbit,
    settings: &EvolveSettings,
    pairs: &[(f64, f64)],
) -> Result<f64, MinimizerError> {
    let defects = pairs
        .par_iter()
        .map(|&(t1, t2)| -> Result<f64, MinimizerError> {
            let (a, b) = (orbit.at_time(t1), orbit.at_time(t2));
            let horizon = table_horizon(settings, t2 - t1);
            let table = implicit_action(model, grid, a.x, a.u, horizon, settings, Direction::Backward)?;
            Ok((b.u - table.layers.last().unwrap().interpolate(&b.x)).abs())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// `max |u(t2) - min_{s in s_grid} h_{x(t1), u(t1)}(x(t2), s)|` over the pairs.
/// Times in `s_grid` are snapped to the table's step grid.
pub fn check_semistatic(
    model: &ContactModel,
    grid: PeriodicGrid,
    orbit: &Orbit,
    settings: &EvolveSettings,
    s_grid: &[f64],
    pairs: &[(f64, f64)],
) -> Result<f64, MinimizerError> {
    let s_max = s_grid.iter().copied().fold(2.0 * settings.delta, f64::max);
    let horizon = table_horizon(settings, s_max);
    let defects = pairs
        .par_iter()
        .map(|&(t1, t2)| -> Result<f64, MinimizerError> {
            let (a, b) = (orbit.at_time(t1), orbit.at_time(t2));
            let table = implicit_action(model, grid, a.x, a.u, horizon, settings, Direction::Backward)?;
            let best = s_grid
                .iter()
                .map(|&s| {
                    let k = ((s / settings.delta).round() as usize).clamp(2, table.steps()) - 1;
                    table.layers[k].interpolate(&b.x)
                })
                .fold(f64::INFINITY, f64::min);
            Ok((b.u - best).abs())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// `(x', p')` of the projected planar system at `u`.
fn planar_field(model: &ContactModel, z: [f64; 2], u: f64) -> [f64; 2] {
    let (dx, dp, _) = crate::flow::contact_vector_field(
        model,
        &State {
            x: [z[0], 0.0],
            p: [z[1], 0.0],
            u,
        },
    );
    [dx[0], dp[0]]
}

/// Checks that the `(x, p)` field does not depend on `u` at 100 samples.
pub fn check_planar(model: &ContactModel) -> Result<(), MinimizerError> {
    if model.dim != 1 {
        return Err(MinimizerError::PlanarReductionFailed(format!("dimension {}", model.dim)));
    }
    for i in 0..10 {
        for j in 0..10 {
            let z = [0.6 * i as f64 + 0.1, -3.0 + 0.6 * j as f64];
            let a = planar_field(model, z, -1.0);
            let b = planar_field(model, z, 1.0);
            let gap = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
            if gap > 1e-9 * (1.0 + a[0].abs() + a[1].abs()) {
                return Err(MinimizerError::PlanarReductionFailed(format!(
                    "field at {z:?} changes by {gap:e} with u"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SaddleLinearization {
    pub jacobian: [[f64; 2]; 2],
    pub stable: f64,
    pub unstable: f64,
    pub stable_vector: [f64; 2],
    pub unstable_vector: [f64; 2],
}

impl SaddleLinearization {
    pub fn stable_slope(&self) -> f64 {
        self.stable_vector[1] / self.stable_vector[0]
    }

    pub fn unstable_slope(&self) -> f64 {
        self.unstable_vector[1] / self.unstable_vector[0]
    }

    /// Coefficient of the unstable eigenvector in `d = a v_s + b v_u`.
    pub fn unstable_coordinate(&self, d: [f64; 2]) -> f64 {
        let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
        cross(self.stable_vector, d) / cross(self.stable_vector, self.unstable_vector)
    }
}

fn eigenvector(j: &[[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    let v = if b.abs() >= c.abs() { [b, lambda - a] } else { [lambda - d, c] };
    let n = v[0].hypot(v[1]);
    let s = if v[0] < 0.0 { -1.0 } else { 1.0 };
    [s * v[0] / n, s * v[1] / n]
}

/// Numeric Jacobian and eigenpairs of the planar field at `(0, 0)`.
pub fn linearize_saddle(model: &ContactModel) -> Result<SaddleLinearization, MinimizerError> {
    check_planar(model)?;
    let f0 = planar_field(model, [0.0, 0.0], 0.0);
    if f0[0].hypot(f0[1]) > 1e-10 {
        return Err(MinimizerError::PlanarReductionFailed(format!("(0, 0) is not a rest point: {f0:?}")));
    }
    let eps = 1e-6;
    let mut jacobian = [[0.0; 2]; 2];
    for k in 0..2 {
        let mut zp = [0.0; 2];
        let mut zm = [0.0; 2];
        zp[k] = eps;
        zm[k] = -eps;
        let (fp, fm) = (planar_field(model, zp, 0.0), planar_field(model, zm, 0.0));
        for i in 0..2 {
            jacobian[i][k] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    let tr = jacobian[0][0] + jacobian[1][1];
    let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc <= 0.0 {
        let re = 0.5 * tr;
        return Err(MinimizerError::NotASaddle([re, re]));
    }
    let (stable, unstable) = (0.5 * tr - disc.sqrt(), 0.5 * tr + disc.sqrt());
    if !(stable < 0.0 && unstable > 0.0) {
        return Err(MinimizerError::NotASaddle([stable, unstable]));
    }
    Ok(SaddleLinearization {
        jacobian,
        stable,
        unstable,
        stable_vector: eigenvector(&jacobian, stable),
        unstable_vector: eigenvector(&jacobian, unstable),
    })
}

/// One stable branch of the saddle in the universal cover, ordered outward
/// from the saddle.
#[derive(Clone, Debug, Serialize)]
pub struct ManifoldCurve {
    /// `+1` or `-1`: side of the stable eigenvector the branch was seeded on.
    pub branch: i8,
    pub eps_seed: f64,
    pub points: Vec<[f64; 2]>,
}

impl ManifoldCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "branch,x,p")?;
        for z in &self.points {
            writeln!(w, "{},{},{}", self.branch, z[0], z[1])?;
        }
        Ok(())
    }
}

fn trace_branch(model: &ContactModel, lin: &SaddleLinearization, sign: i8, eps: f64, t_back: f64) -> ManifoldCurve {
    let f = |z: [f64; 2]| planar_field(model, z, 0.0);
    let s = f64::from(sign) * eps;
    let mut z = [s * lin.stable_vector[0], s * lin.stable_vector[1]];
    let mut points = vec![[0.0, 0.0], z];
    let h = -MANIFOLD_DT;
    let steps = (t_back / MANIFOLD_DT).round() as usize;
    let add = |z: [f64; 2], k: [f64; 2], c: f64| [z[0] + c * k[0], z[1] + c * k[1]];
    for _ in 0..steps {
        let k1 = f(z);
        let k2 = f(add(z, k1, 0.5 * h));
        let k3 = f(add(z, k2, 0.5 * h));
        let k4 = f(add(z, k3, h));
        for i in 0..2 {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !(z[1].abs() <= MANIFOLD_P_BOUND) {
            break;
        }
        points.push(z);
    }
    ManifoldCurve {
        branch: sign,
        eps_seed: eps,
        points,
    }
}

/// Both stable branches, seeded at `+-eps_seed` along the stable eigenvector
/// and traced backward for `t_back` (or until `|p|` leaves the bound).
pub fn saddle_stable_manifold(
    model: &ContactModel,
    eps_seed: f64,
    t_back: f64,
) -> Result<(ManifoldCurve, ManifoldCurve), MinimizerError> {
    let lin = linearize_saddle(model)?;
    Ok(rayon::join(
        || trace_branch(model, &lin, 1, eps_seed, t_back),
        || trace_branch(model, &lin, -1, eps_seed, t_back),
    ))
}

/// All crossings `(x0 + 2 pi k, p)` of the lines `x = x0 + 2 pi k` by the
/// branches, linearly interpolated, sorted by `p` and deduplicated.
pub fn manifold_crossings(branches: &[&ManifoldCurve], x0: f64) -> Result<Vec<[f64; 2]>, MinimizerError> {
    let period = 2.0 * std::f64::consts::PI;
    let mut found: Vec<[f64; 2]> = Vec::new();
    for curve in branches {
        for seg in curve.points.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let (lo, hi) = (a[0].min(b[0]), a[0].max(b[0]));
            let k_lo = ((lo - x0) / period).ceil() as i64;
            let k_hi = ((hi - x0) / period).floor() as i64;
            for k in k_lo..=k_hi {
                let target = x0 + period * k as f64;
                let p = if b[0] == a[0] {
                    a[1]
                } else {
                    a[1] + (target - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
                };
                found.push([target, p]);
            }
        }
    }
    if found.is_empty() {
        return Err(MinimizerError::NoIntersection(x0));
    }
    found.sort_by(|a, b| a[1].total_cmp(&b[1]));
    found.dedup_by(|a, b| (a[1] - b[1]).abs() < 1e-9);
    Ok(found)
}

/// Momenta of [`manifold_crossings`].
pub fn shoot_p0(branches: &[&ManifoldCurve], x0: f64) -> Result<Vec<f64>, MinimizerError> {
    Ok(manifold_crossings(branches, x0)?.into_iter().map(|c| c[1]).collect())
}

/// Side of the stable manifold: the sign of the unstable coordinate when the
/// orbit leaves the saddle's neighbourhood, or at the end of the horizon.
fn manifold_side(model: &ContactModel, lin: &SaddleLinearization, x0: f64, p: DoubleDouble, u0: f64) -> Option<f64> {
    const NEAR: f64 = 0.3;
    const T_MAX: f64 = 80.0;
    let two_pi = DoubleDouble::new(std::f64::consts::TAU, 2.449_293_598_294_706_4e-16);
    let zero = DoubleDouble::from(0.0);
    let mut s = PreciseState::from_parts([DoubleDouble::from(x0), zero], [p, zero], u0);
    let mut approached = false;
    let mut d = [0.0; 2];
    for _ in 0..T_MAX as usize {
        s = integrate_extended(model, &s, 1.0, 1e-2).ok()?;
        let k = (s.x[0].to_f64() / two_pi.hi).round();
        d = [(s.x[0] - two_pi * DoubleDouble::from(k)).to_f64(), s.p[0].to_f64()];
        let dist = d[0].hypot(d[1]);
        if !dist.is_finite() {
            return None;
        }
        if dist < NEAR {
            approached = true;
        } else if approached {
            break;
        }
    }
    if !approached {
        return None;
    }
    let c = lin.unstable_coordinate(d);
    (c != 0.0).then_some(c.signum())
}

/// Bisects in double-double arithmetic for the momentum on the stable manifold
/// near `p_guess` at `x0`.
pub fn polish_p0(model: &ContactModel, x0: f64, p_guess: f64, u0: f64) -> Result<DoubleDouble, MinimizerError> {
    let lin = linearize_saddle(model)?;
    let side = |p: DoubleDouble| manifold_side(model, &lin, x0, p, u0);
    let mut width = 1e-5;
    let (mut lo, mut hi, s_lo) = loop {
        let lo = DoubleDouble::from(p_guess - width);
        let hi = DoubleDouble::from(p_guess + width);
        match (side(lo), side(hi)) {
            (Some(a), Some(b)) if a != b => break (lo, hi, a),
            _ if width < 0.1 => width *= 4.0,
            _ => return Err(MinimizerError::PolishFailed(p_guess)),
        }
    };
    let half = DoubleDouble::from(0.5);
    for _ in 0..120 {
        let mid = (lo + hi) * half;
        if (hi - lo).to_f64() < 1e-30 * (1.0 + p_guess.abs()) || mid <= lo || mid >= hi {
            break;
        }
        match side(mid) {
            Some(s) if s == s_lo => lo = mid,
            Some(_) => hi = mid,
            None => break,
        }
    }
    Ok((lo + hi) * half)
}

/// Final state after integrating `(x0, p0, u0)` for `t` in double-double arithmetic.
pub fn land_precise(model: &ContactModel, x0: f64, p0: DoubleDouble, u0: f64, t: f64) -> Result<State, MinimizerError> {
    let zero = DoubleDouble::from(0.0);
    let s = PreciseState::from_parts([DoubleDouble::from(x0), zero], [p0, zero], u0);
    Ok(integrate_extended(model, &s, t, 1e-2)?.to_state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::omega_limit;
    use crate::model::Sample;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, n).unwrap()
    }

    #[test]
    fn discounted_source_gives_constant_curve() {
        let lin = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&lin, 1e-2);
        let g = grid(64);
        let x0 = g.node(9);
        let table = implicit_action(&lin, g, x0, 0.0, 1.0, &s, Direction::Backward).unwrap();
        let curve = backtrack_minimizer(&lin, &table, &s, &x0, 1.0).unwrap();
        assert_eq!(curve.x.len(), 101);
        for k in 0..curve.x.len() {
            assert!(torus_delta(curve.x[k][0], x0[0]).abs() <= 1e-12);
            assert!(curve.u[k].abs() <= 1e-12);
        }
        assert!(curve.p.iter().all(|p| p[0].abs() <= 1e-9));
    }

    #[test]
    fn pendulum_fixed_point_curve() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let table = implicit_action(&p, grid(128), [0.0; 2], 0.0, 2.0, &s, Direction::Backward).unwrap();
        let curve = backtrack_minimizer(&p, &table, &s, &[0.0; 2], 2.0).unwrap();
        assert!(curve.x.iter().all(|x| torus_delta(x[0], 0.0).abs() <= 1e-9));
        assert!(curve.u.iter().all(|u| u.abs() <= 1e-2));
    }

    #[test]
    fn curve_endpoints_and_values() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let g = grid(128);
        let (x0, target) = (g.node(5), g.node(20));
        let table = implicit_action(&p, g, x0, 0.25, 1.5, &s, Direction::Backward).unwrap();
        let curve = backtrack_minimizer(&p, &table, &s, &[target[0] + 1e-3, 0.0], 1.0).unwrap();
        assert_eq!(curve.x[0], x0);
        assert_eq!(*curve.x.last().unwrap(), target);
        assert_eq!(curve.u[0], 0.25);
        assert_eq!(curve.times.len(), 101);
        for k in 1..curve.x.len() {
            assert_eq!(curve.u[k], table.layers[k - 1].interpolate(&curve.x[k]));
        }
        let mut out = Vec::new();
        curve.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 102);
    }

    #[test]
    fn momentum_at_rest_points() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let (p0, diag) = initial_momentum(&p, grid(256), [0.0; 2], 0.0, &[4.0, 8.0, 16.0], &s, DEFAULT_CAUCHY_TOL).unwrap();
        assert!(p0[0].abs() <= 2e-2 && diag.converged);
        let lin = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&lin, 1e-2);
        let (p0, _) = initial_momentum(&lin, grid(256), [1.0, 0.0], 0.5, &[4.0, 8.0, 16.0], &s, DEFAULT_CAUCHY_TOL).unwrap();
        assert!(p0[0].abs() <= 2e-2, "{p0:?}");
        assert!(matches!(
            initial_momentum(&lin, grid(64), [1.0, 0.0], 0.5, &[4.0, 8.0], &s, DEFAULT_CAUCHY_TOL),
            Err(MinimizerError::BadHorizons(_))
        ));
    }

    #[test]
    fn momentum_matches_stable_manifold() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let (a, b) = saddle_stable_manifold(&p, DEFAULT_SEED, DEFAULT_T_BACK).unwrap();
        let shots = shoot_p0(&[&a, &b], 1.0).unwrap();
        let (p0, _) = initial_momentum(&p, grid(256), [1.0, 0.0], 0.0, &[4.0, 8.0, 16.0], &s, DEFAULT_CAUCHY_TOL).unwrap();
        let gap = shots.iter().map(|q| (q - p0[0]).abs()).fold(f64::INFINITY, f64::min);
        assert!(gap <= 5e-2, "{gap}");
    }

    #[test]
    fn minimizing_defects() {
        let p = ContactModel::pendulum();
        let s = EvolveSettings::variational(&p, 1e-2);
        let g = grid(256);
        let rest = integrate_orbit(&p, State::scalar(0.0, 0.0, 0.0), 12.0, 1e-2).unwrap();
        assert!(check_globally_minimizing(&p, g, &rest, &s, &[(0.0, 1.0), (1.0, 3.0)]).unwrap() <= 2e-2);
        let s_grid: Vec<f64> = (1..=20).map(f64::from).collect();
        assert!(check_semistatic(&p, g, &rest, &s, &s_grid, &[(0.0, 1.0), (1.0, 3.0)]).unwrap() <= 2e-2);

        let spiral = integrate_orbit(&p, State::scalar(1.0, 0.0, 0.0), 12.0, 1e-2).unwrap();
        assert!(check_globally_minimizing(&p, g, &spiral, &s, &[(0.0, 10.0)]).unwrap() > 0.1);
        assert!(check_semistatic(&p, g, &spiral, &s, &s_grid, &[(0.0, 10.0)]).unwrap() > 0.1);

        let lin = ContactModel::linear_discount(1);
        let s = EvolveSettings::variational(&lin, 1e-2);
        let flat = integrate_orbit(&lin, State::scalar(2.0, 0.0, 0.0), 5.0, 1e-2).unwrap();
        assert!(check_semistatic(&lin, g, &flat, &s, &s_grid, &[(0.0, 2.0), (2.0, 5.0)]).unwrap() <= 2e-2);
    }

    #[test]
    fn saddle_linearization_matches_eigensolve() {
        let lin = linearize_saddle(&ContactModel::pendulum()).unwrap();
        let j = lin.jacobian;
        for (a, b) in [(j[0][0], 0.0), (j[0][1], 1.0), (j[1][0], 1.0), (j[1][1], -1.0)] {
            assert!((a - b).abs() < 1e-8);
        }
        let m = nalgebra::Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]);
        let mut eig: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
        eig.sort_by(f64::total_cmp);
        assert!((lin.stable - eig[0]).abs() < 1e-10 && (lin.unstable - eig[1]).abs() < 1e-10);
        let root5 = 5f64.sqrt();
        assert!((lin.stable - (-1.0 - root5) / 2.0).abs() < 1e-8);
        assert!((lin.unstable - (-1.0 + root5) / 2.0).abs() < 1e-8);
        assert!((lin.stable_slope() - (-1.0 - root5) / 2.0).abs() < 1e-8);
        assert!((lin.unstable_slope() - (-1.0 + root5) / 2.0).abs() < 1e-8);
        assert!((lin.unstable_coordinate(lin.unstable_vector) - 1.0).abs() < 1e-12);
        assert!(lin.unstable_coordinate(lin.stable_vector).abs() < 1e-12);
    }

    #[test]
    fn branches_are_symmetric_and_stable() {
        let p = ContactModel::pendulum();
        let (a, b) = saddle_stable_manifold(&p, DEFAULT_SEED, DEFAULT_T_BACK).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (za, zb) in a.points.iter().zip(&b.points) {
            assert!((za[0] + zb[0]).abs() <= 1e-12 && (za[1] + zb[1]).abs() <= 1e-12);
        }
        for branch in [&a, &b] {
            let z = branch.points[branch.points.len() / 2];
            let orbit = integrate_orbit(&p, State::scalar(z[0], z[1], 0.0), 50.0, 1e-2).unwrap();
            let closest = orbit
                .states
                .iter()
                .map(|s| torus_delta(s.x[0], 0.0).hypot(s.p[0]))
                .fold(f64::INFINITY, f64::min);
            assert!(closest <= 1e-3, "{closest}");
        }
    }

    #[test]
    fn shooting_examples_and_errors() {
        let p = ContactModel::pendulum();
        let (a, b) = saddle_stable_manifold(&p, DEFAULT_SEED, DEFAULT_T_BACK).unwrap();
        assert!(shoot_p0(&[&a, &b], 0.0).unwrap().contains(&0.0));
        let (a, b) = saddle_stable_manifold(&p, DEFAULT_SEED, 0.1).unwrap();
        assert!(matches!(shoot_p0(&[&a, &b], 2.0), Err(MinimizerError::NoIntersection(_))));
    }

    #[test]
    fn reduction_and_saddle_errors() {
        let coupled = ContactModel::generic("c", 1, |x, p, u| 0.5 * p[0] * p[0] + x[0].cos() + 0.5 * u * u, 10.0, 4.0, Some(3.0));
        assert!(matches!(linearize_saddle(&coupled), Err(MinimizerError::PlanarReductionFailed(_))));
        let flat2 = ContactModel::linear_discount(2);
        assert!(matches!(linearize_saddle(&flat2), Err(MinimizerError::PlanarReductionFailed(_))));
        let focus = ContactModel::free_discount(1, 1.0, -0.5);
        assert!(matches!(linearize_saddle(&focus), Err(MinimizerError::NotASaddle(_))));
    }

    #[test]
    fn perturbed_momentum_falls_to_the_focus() {
        let p = ContactModel::pendulum();
        let (a, b) = saddle_stable_manifold(&p, DEFAULT_SEED, DEFAULT_T_BACK).unwrap();
        let shots = shoot_p0(&[&a, &b], 1.0).unwrap();
        let p0 = shots.iter().copied().min_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap();
        let orbit = integrate_orbit(&p, State::scalar(1.0, p0 + 0.1, 0.0), 60.0, 1e-2).unwrap();
        let omega = omega_limit(&orbit, 0.25, 5e-2).unwrap();
        assert_eq!(omega.points.len(), 1);
        let focus = Sample::new([PI, 0.0], [0.0; 2], 2.0);
        assert!(crate::flow::phase_distance(1, &omega.points[0], &focus) <= 1e-2);
    }
}
