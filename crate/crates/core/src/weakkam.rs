//! Stationary solutions as long-time limits of the semigroups, the conjugate
//! limit `u_+`, the graph of `du_-` and the Mane set.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::grid::{GridError, GridFunction, PeriodicGrid};
use crate::model::{ContactModel, Sample};
use crate::semigroup::{evolve, Direction, EvolveSettings, SemigroupError, DIVERGENCE_BOUND};

/// Time between convergence probes.
pub const PROBE_INTERVAL: f64 = 1.0;
/// Consecutive growing probes that count as an unbounded trend.
pub const TREND_PROBES: usize = 20;
/// Probe differences used for the rate fit.
pub const RATE_WINDOW: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum WeakKamError {
    #[error("evolution diverged after t = {}", .0.samples.last().map_or(0.0, |s| s.t))]
    Diverged(Box<ConvergenceTrace>),
    #[error("no convergence by t_max = {}", .0.samples.last().map_or(0.0, |s| s.t))]
    NotConverged(Box<ConvergenceTrace>),
    #[error("no node within the Mane tolerance {0}")]
    EmptyResult(f64),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl WeakKamError {
    pub fn trace(&self) -> Option<&ConvergenceTrace> {
        match self {
            WeakKamError::Diverged(t) | WeakKamError::NotConverged(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeSample {
    pub t: f64,
    pub diff_prev: f64,
    /// Distance to the last probe; filled once the run ends.
    pub diff_final: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub samples: Vec<ProbeSample>,
    /// Fitted exponential decay rate of the probe differences.
    pub m_obs: Option<f64>,
    pub converged: bool,
    pub diverged: bool,
}

impl ConvergenceTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,diff_prev,diff_final,max,min")?;
        for s in &self.samples {
            writeln!(w, "{},{},{},{},{}", s.t, s.diff_prev, s.diff_final, s.max, s.min)?;
        }
        Ok(())
    }

    /// Longest run of consecutive probes whose maximum strictly decreases.
    pub fn longest_decreasing_run(&self) -> usize {
        let mut best = 0;
        let mut run = 0;
        for pair in self.samples.windows(2) {
            if pair[1].max < pair[0].max {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        best
    }
}

/// Least-squares slope of `ln diff` against `t`, negated.
pub fn fit_rate(samples: &[ProbeSample]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.diff_prev > 0.0 && s.diff_prev.is_finite())
        .map(|s| (s.t, s.diff_prev.ln()))
        .collect();
    let pts = &pts[pts.len().saturating_sub(RATE_WINDOW)..];
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(-sxy / sxx)
}

/// Sup-norm grew at every one of the last [`TREND_PROBES`] probes without the
/// increments dying out (convergence from below also grows, but geometrically slower).
fn unbounded_trend(sups: &[f64]) -> bool {
    if sups.len() <= TREND_PROBES {
        return false;
    }
    let w = &sups[sups.len() - TREND_PROBES - 1..];
    let growing = w.windows(2).all(|p| p[1] > p[0]);
    let first = w[1] - w[0];
    let last = w[TREND_PROBES] - w[TREND_PROBES - 1];
    growing && last >= 0.5 * first
}

fn probe_loop(
    model: &ContactModel,
    phi0: &GridFunction,
    tol: f64,
    t_max: f64,
    settings: &EvolveSettings,
    dir: Direction,
    nonincreasing: bool,
) -> Result<(GridFunction, ConvergenceTrace), WeakKamError> {
    settings.validate(model)?;
    let mut trace = ConvergenceTrace::default();
    let mut probes = vec![phi0.clone()];
    let mut sups = vec![phi0.sup_norm()];
    let mut w = phi0.clone();
    let mut t = 0.0;
    let finish = |trace: &mut ConvergenceTrace, probes: &[GridFunction]| {
        let last = probes.last().expect("initial probe");
        for (s, p) in trace.samples.iter_mut().zip(&probes[1..]) {
            s.diff_final = p.sup_norm_diff(last).unwrap_or(f64::NAN);
        }
        trace.m_obs = fit_rate(&trace.samples);
    };
    while t < t_max - 1e-12 {
        let dt = PROBE_INTERVAL.min(t_max - t);
        let block = if nonincreasing {
            clamped_block(model, &w, dt, settings, dir)
        } else {
            evolve(model, &w, dt, settings, dir)
        };
        let next = match block {
            Ok(next) => next,
            Err(SemigroupError::Diverged { .. }) => {
                trace.diverged = true;
                finish(&mut trace, &probes);
                return Err(WeakKamError::Diverged(Box::new(trace)));
            }
            Err(e) => return Err(e.into()),
        };
        t += dt;
        let diff = next.sup_norm_diff(&w)?;
        trace.samples.push(ProbeSample {
            t,
            diff_prev: diff,
            diff_final: f64::NAN,
            max: next.max(),
            min: next.min(),
        });
        log::debug!("probe t={t} diff={diff:.3e}");
        w = next;
        sups.push(w.sup_norm());
        probes.push(w.clone());
        if diff <= tol {
            trace.converged = true;
            finish(&mut trace, &probes);
            return Ok((w, trace));
        }
        if unbounded_trend(&sups) || sups.last().copied().unwrap_or(0.0) > DIVERGENCE_BOUND {
            trace.diverged = true;
            finish(&mut trace, &probes);
            return Err(WeakKamError::Diverged(Box::new(trace)));
        }
    }
    finish(&mut trace, &probes);
    Err(WeakKamError::NotConverged(Box::new(trace)))
}

/// Evolution where each step is followed by `min(new, old)`.
///
/// From a subsolution the exact forward orbit is nonincreasing in time, so
/// the clamp only removes upward scheme error. Without it the error at contact
/// points, where the forward semigroup expands like `e^t`, swamps the limit.
fn clamped_block(
    model: &ContactModel,
    w: &GridFunction,
    dt: f64,
    settings: &EvolveSettings,
    dir: Direction,
) -> Result<GridFunction, SemigroupError> {
    let mut w = w.clone();
    let mut left = dt;
    while left > 1e-12 {
        let d = settings.delta.min(left);
        let next = evolve(model, &w, d, settings, dir)?;
        w = next.pointwise_min(&w)?;
        left -= d;
    }
    Ok(w)
}

/// `u_-` as the long-time limit of the backward semigroup from `phi0`.
pub fn solve_stationary(
    model: &ContactModel,
    phi0: &GridFunction,
    tol: f64,
    t_max: f64,
    settings: &EvolveSettings,
) -> Result<(GridFunction, ConvergenceTrace), WeakKamError> {
    let h = phi0.grid.spacing;
    if tol < 10.0 * h * h {
        log::warn!("tol {tol} is below the grid resolution 10 h^2 = {}", 10.0 * h * h);
    }
    probe_loop(model, phi0, tol, t_max, settings, Direction::Backward, false)
}

/// `u_+` as the long-time limit of the forward semigroup from `u_minus`.
///
/// The input must be a (sub)solution; the forward orbit is then nonincreasing
/// and is computed with the clamp of [`clamped_block`].
pub fn conjugate_forward_limit(
    model: &ContactModel,
    u_minus: &GridFunction,
    tol: f64,
    t_max: f64,
    settings: &EvolveSettings,
) -> Result<(GridFunction, ConvergenceTrace), WeakKamError> {
    probe_loop(model, u_minus, tol, t_max, settings, Direction::Forward, true)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphSet {
    pub dim: usize,
    pub points: Vec<Sample>,
    pub nonsmooth: Vec<Sample>,
}

/// `(x, du_-(x), u_-(x))` at smooth nodes; kinks are listed separately.
pub fn graph_lambda(u_minus: &GridFunction) -> GraphSet {
    let grid = u_minus.grid;
    let mut points = Vec::new();
    let mut nonsmooth = Vec::new();
    for k in 0..grid.len() {
        let g = u_minus.node_gradient(k);
        let s = Sample::new(grid.node(k), g.value, u_minus.values[k]);
        if g.nonsmooth {
            nonsmooth.push(s);
        } else {
            points.push(s);
        }
    }
    GraphSet {
        dim: grid.dim,
        points,
        nonsmooth,
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StationaryCheck {
    /// Max `|H(x, Du, u)|` over smooth nodes with central differences.
    pub residual: f64,
    /// Max over all nodes and one-sided slopes of `H(x, p, u)`.
    pub subsolution_excess: f64,
}

pub fn verify_stationary(model: &ContactModel, u: &GridFunction) -> StationaryCheck {
    let grid = u.grid;
    let mut residual: f64 = 0.0;
    let mut excess = f64::NEG_INFINITY;
    for k in 0..grid.len() {
        let x = grid.node(k);
        let g = u.node_gradient(k);
        let val = u.values[k];
        if !g.nonsmooth {
            residual = residual.max(model.hamiltonian(&x, &g.value, val).abs());
        }
        let combos = if grid.dim == 1 { 2 } else { 4 };
        for c in 0..combos {
            let mut p = [0.0; 2];
            for (i, pi) in p.iter_mut().enumerate().take(grid.dim) {
                *pi = if (c >> i) & 1 == 0 { g.left[i] } else { g.right[i] };
            }
            excess = excess.max(model.hamiltonian(&x, &p, val));
        }
    }
    StationaryCheck {
        residual,
        subsolution_excess: excess,
    }
}

/// Default Mane extraction tolerance `3 (h + tol)`.
pub fn default_mane_epsilon(spacing: f64, tol: f64) -> f64 {
    3.0 * (spacing + tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManeSet {
    pub grid: PeriodicGrid,
    pub epsilon: f64,
    /// Every qualifying node.
    pub points: Vec<Sample>,
    /// One point per connected component of qualifying nodes: the node of
    /// smallest `u_- - u_+` gap.
    pub clusters: Vec<Sample>,
}

impl ManeSet {
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_samples(self.grid.dim, &self.points, w)
    }
}

pub fn write_samples<W: Write>(dim: usize, points: &[Sample], mut w: W) -> io::Result<()> {
    if dim == 1 {
        writeln!(w, "x,p,u")?;
    } else {
        writeln!(w, "x,y,p,q,u")?;
    }
    for s in points {
        if dim == 1 {
            writeln!(w, "{},{},{}", s.x[0], s.p[0], s.u)?;
        } else {
            writeln!(w, "{},{},{},{},{}", s.x[0], s.x[1], s.p[0], s.p[1], s.u)?;
        }
    }
    Ok(())
}

pub fn mane_set(
    u_minus: &GridFunction,
    u_plus: &GridFunction,
    epsilon: f64,
) -> Result<ManeSet, WeakKamError> {
    let grid = u_minus.grid;
    u_minus.sup_norm_diff(u_plus)?;
    let gap: Vec<f64> = u_minus
        .values
        .iter()
        .zip(&u_plus.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let member: Vec<bool> = gap.iter().map(|g| *g <= epsilon).collect();
    let sample = |k: usize| Sample::new(grid.node(k), u_minus.node_gradient(k).value, u_minus.values[k]);
    let points: Vec<Sample> = (0..grid.len()).filter(|&k| member[k]).map(sample).collect();
    if points.is_empty() {
        return Err(WeakKamError::EmptyResult(epsilon));
    }
    let mut seen = vec![false; grid.len()];
    let mut clusters = Vec::new();
    for start in 0..grid.len() {
        if !member[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut best = start;
        while let Some(k) = stack.pop() {
            if gap[k] < gap[best] {
                best = k;
            }
            let [i, j] = grid.coords(k);
            let (i, j) = (i as isize, j as isize);
            let mut nbrs = vec![grid.index(i - 1, j), grid.index(i + 1, j)];
            if grid.dim == 2 {
                nbrs.extend([grid.index(i, j - 1), grid.index(i, j + 1)]);
            }
            for q in nbrs {
                if member[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        clusters.push(sample(best));
    }
    Ok(ManeSet {
        grid,
        epsilon,
        points,
        clusters,
    })
}
