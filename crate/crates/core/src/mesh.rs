//! Interval geometry, grid functions and quadrature.
//!
//! A [`Grid`] is a uniform mesh of `n` interior nodes on `(x_left, x_right)`.
//! A [`FieldFunction`] holds values at those nodes and is understood to vanish
//! identically outside the interval, which is the exterior Dirichlet
//! condition for the integral fractional Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default half-width fraction for [`boundary_decay_exponent`].
pub const DEFAULT_DECAY_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_left: f64,
    x_right: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(x_left: f64, x_right: f64, n: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite()) || x_left >= x_right {
            return Err(Error::Config(format!(
                "interval bounds must satisfy x_left < x_right, got ({x_left}, {x_right})"
            )));
        }
        if n < 4 {
            return Err(Error::Config(format!("need at least 4 interior nodes, got {n}")));
        }
        let h = (x_right - x_left) / (n as f64 + 1.0);
        Ok(Self { x_left, x_right, n, h })
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    /// Number of interior nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_left + self.x_right)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.x_right - self.x_left)
    }

    /// Coordinate of the 0-based node `j`, i.e. `x_left + (j + 1) h`.
    pub fn node(&self, j: usize) -> f64 {
        self.x_left + (j as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Distance from node `j` to the boundary.
    pub fn boundary_distance(&self, j: usize) -> f64 {
        let x = self.node(j);
        (x - self.x_left).min(self.x_right - x)
    }

    /// Quadrature measure of the domain, `n h`.
    pub fn measure(&self) -> f64 {
        self.n as f64 * self.h
    }
}

/// Values at the interior nodes of a grid; zero outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl FieldFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Length {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n()],
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_grid(&self, other: &FieldFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &FieldFunction) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &FieldFunction) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Discrete inner product `h Σ u_i v_i`.
    pub fn dot(&self, other: &FieldFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.grid.h() * dot(&self.values, &other.values))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Rectangle-rule `L^p` norm `(h Σ |u_i|^p)^{1/p}`.
pub fn lp_norm(u: &FieldFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("lp_norm needs finite p >= 1, got {p}")));
    }
    Ok(lp_norm_raw(u.values(), u.grid().h(), p))
}

pub(crate) fn lp_norm_raw(values: &[f64], h: f64, p: f64) -> f64 {
    let sup = sup_norm(values);
    if sup == 0.0 {
        return 0.0;
    }
    // scale by the sup norm so large fields do not overflow |u|^p
    let s: f64 = values.iter().map(|v| (v.abs() / sup).powf(p)).sum();
    sup * (h * s).powf(1.0 / p)
}

/// Least-squares slope of `log u` against `log d(x)` over the nodes whose
/// boundary distance is below `fraction * half_width`, skipping the single
/// node adjacent to each endpoint.
pub fn boundary_decay_exponent(u: &FieldFunction, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 0.2) {
        return Err(Error::Domain(format!(
            "decay window fraction must lie in (0, 0.2], got {fraction}"
        )));
    }
    let grid = u.grid();
    let cutoff = fraction * grid.half_width();
    let n = grid.n();
    let window: Vec<usize> = (1..n - 1)
        .filter(|&j| grid.boundary_distance(j) < cutoff)
        .collect();
    if window.len() < 2 {
        return Err(Error::Domain(format!(
            "decay window holds {} nodes; refine the grid or widen the window",
            window.len()
        )));
    }
    let mut pts = Vec::with_capacity(window.len());
    for &j in &window {
        let v = u.values()[j];
        if !(v > 0.0) {
            return Err(Error::NonPositive { node: j, value: v });
        }
        pts.push((grid.boundary_distance(j).ln(), v.ln()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}
