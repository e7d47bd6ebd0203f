//! Uniform periodic grids on T^1 / T^2 and functions sampled on them.

use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::{wrap, Vec2};

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("grid needs dim in {{1, 2}} and n >= 8, got dim = {dim}, n = {n}")]
    BadGrid { dim: usize, n: usize },
    #[error("grid mismatch: {0:?} vs {1:?}")]
    GridMismatch(PeriodicGrid, PeriodicGrid),
    #[error("value count {got} does not match grid size {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub dim: usize,
    pub n: usize,
    pub spacing: f64,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self, GridError> {
        if !(dim == 1 || dim == 2) || n < 8 {
            return Err(GridError::BadGrid { dim, n });
        }
        Ok(Self {
            dim,
            n,
            spacing: 2.0 * PI / n as f64,
        })
    }

    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Axis indices of a flat node index.
    #[inline]
    pub fn coords(&self, k: usize) -> [usize; 2] {
        if self.dim == 1 {
            [k, 0]
        } else {
            [k % self.n, k / self.n]
        }
    }

    /// Flat index of (possibly out of range) axis indices, wrapped.
    #[inline]
    pub fn index(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        let i = i.rem_euclid(n) as usize;
        if self.dim == 1 {
            i
        } else {
            i + self.n * j.rem_euclid(n) as usize
        }
    }

    #[inline]
    pub fn node(&self, k: usize) -> Vec2 {
        let [i, j] = self.coords(k);
        [i as f64 * self.spacing, j as f64 * self.spacing]
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    /// Flat index of the node nearest to `x`.
    pub fn nearest(&self, x: &Vec2) -> usize {
        let i = (wrap(x[0]) / self.spacing).round() as isize;
        let j = if self.dim == 2 {
            (wrap(x[1]) / self.spacing).round() as isize
        } else {
            0
        };
        self.index(i, j)
    }

    /// Torus distance between two points (max over used axes of the wrapped gap, Euclidean).
    pub fn distance(&self, a: &Vec2, b: &Vec2) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let d = crate::model::torus_delta(a[i], b[i]);
            s += d * d;
        }
        s.sqrt()
    }
}

/// One-sided slope difference above which a node counts as a kink.
pub fn slope_gap(grid: &PeriodicGrid) -> f64 {
    10.0 * grid.spacing
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeGradient {
    pub value: Vec2,
    pub left: Vec2,
    pub right: Vec2,
    pub nonsmooth: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::SizeMismatch {
                got: values.len(),
                want: grid.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(&Vec2) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(|x| f(&x)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Periodic multilinear interpolation; exact at nodes.
    #[inline]
    pub fn interpolate(&self, x: &Vec2) -> f64 {
        let h = self.grid.spacing;
        let sx = wrap(x[0]) / h;
        let i = sx.floor();
        let tx = sx - i;
        let i = i as isize;
        if self.grid.dim == 1 {
            let a = self.at(i, 0);
            if tx == 0.0 {
                return a;
            }
            return a + tx * (self.at(i + 1, 0) - a);
        }
        let sy = wrap(x[1]) / h;
        let j = sy.floor();
        let ty = sy - j;
        let j = j as isize;
        let f00 = self.at(i, j);
        let f10 = self.at(i + 1, j);
        let f01 = self.at(i, j + 1);
        let f11 = self.at(i + 1, j + 1);
        let lo = f00 + tx * (f10 - f00);
        let hi = f01 + tx * (f11 - f01);
        lo + ty * (hi - lo)
    }

    /// Central difference at the node nearest to `x`, with kink detection.
    pub fn numeric_gradient(&self, x: &Vec2) -> NodeGradient {
        self.node_gradient(self.grid.nearest(x))
    }

    pub fn node_gradient(&self, k: usize) -> NodeGradient {
        let h = self.grid.spacing;
        let [i, j] = self.grid.coords(k);
        let (i, j) = (i as isize, j as isize);
        let c = self.at(i, j);
        let mut left = [0.0; 2];
        let mut right = [0.0; 2];
        let mut value = [0.0; 2];
        let mut nonsmooth = false;
        for axis in 0..self.grid.dim {
            let (fwd, back) = if axis == 0 {
                (self.at(i + 1, j), self.at(i - 1, j))
            } else {
                (self.at(i, j + 1), self.at(i, j - 1))
            };
            left[axis] = (c - back) / h;
            right[axis] = (fwd - c) / h;
            value[axis] = (fwd - back) / (2.0 * h);
            if (right[axis] - left[axis]).abs() > slope_gap(&self.grid) {
                nonsmooth = true;
            }
        }
        NodeGradient {
            value,
            left,
            right,
            nonsmooth,
        }
    }

    fn same_grid(&self, other: &Self) -> Result<(), GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch(self.grid, other.grid));
        }
        Ok(())
    }

    pub fn sup_norm_diff(&self, other: &Self) -> Result<f64, GridError> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Largest `self - other` over nodes (positive when `self` exceeds `other` somewhere).
    pub fn max_excess_over(&self, other: &Self) -> Result<f64, GridError> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b)))
    }

    pub fn pointwise_min(&self, other: &Self) -> Result<Self, GridError> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.min(*b))
                .collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# dim={} n={}", self.grid.dim, self.grid.n)?;
        if self.grid.dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let x = self.grid.node(k);
            if self.grid.dim == 1 {
                writeln!(w, "{},{}", x[0], v)?;
            } else {
                writeln!(w, "{},{},{}", x[0], x[1], v)?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, GridError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| GridError::Csv("empty input".into()))??;
        let mut dim = None;
        let mut n = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("dim=") {
                dim = v.parse().ok();
            } else if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse().ok();
            }
        }
        let (dim, n) = match (dim, n) {
            (Some(d), Some(n)) => (d, n),
            _ => return Err(GridError::Csv(format!("bad header {header:?}"))),
        };
        let grid = PeriodicGrid::new(dim, n)?;
        lines.next();
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let last = line
                .rsplit(',')
                .next()
                .ok_or_else(|| GridError::Csv(line.clone()))?;
            values.push(
                last.trim()
                    .parse()
                    .map_err(|_| GridError::Csv(format!("bad value in {line:?}")))?,
            );
        }
        Self::new(grid, values)
    }
}
