//! Uniform grids on scaled intervals and profiles sampled on them.
//!
//! A grid covers the mesoscopic interval `[-left/eps, right/eps]`; `left` and
//! `right` are macroscopic half-lengths. Both endpoints are grid points.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_POINT_CAP: usize = 10_000_000;

/// Largest relative downward adjustment of the requested spacing.
const MAX_SPACING_SHRINK: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub epsilon: f64,
    pub left: f64,
    pub right: f64,
    pub spacing: f64,
    pub n: usize,
}

impl Grid {
    pub fn lo(&self) -> f64 {
        -self.left / self.epsilon
    }

    pub fn hi(&self) -> f64 {
        self.right / self.epsilon
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi()
        } else {
            self.lo() + i as f64 * self.spacing
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    /// Index of the node at `x`, if `x` sits on the grid.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.lo()) / self.spacing;
        let k = t.round();
        if k < 0.0 || k as usize >= self.n || (t - k).abs() > 1e-6 {
            return None;
        }
        Some(k as usize)
    }

    /// Index of the midpoint node of a grid with an even number of intervals.
    pub fn center(&self) -> Option<usize> {
        (self.n % 2 == 1).then_some(self.n / 2)
    }

    /// Same nodes relabelled so that the origin moves by `shift` (macroscopic units).
    pub fn translated(&self, shift: f64) -> Grid {
        Grid {
            left: self.left - shift,
            right: self.right + shift,
            ..*self
        }
    }

    /// Nodes `start..=end` as a grid of their own.
    pub fn sub_range(&self, start: usize, end: usize) -> Result<Grid> {
        if start >= end || end >= self.n {
            return Err(invalid(format!("bad sub-range {start}..={end} of {}", self.n)));
        }
        Ok(Grid {
            epsilon: self.epsilon,
            left: -self.x(start) * self.epsilon,
            right: self.x(end) * self.epsilon,
            spacing: self.spacing,
            n: end - start + 1,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid serializes")
    }
}

/// Grid on `eps^-1 [-left, right]` with spacing at most `spacing`.
pub fn build_grid(eps: f64, left: f64, right: f64, spacing: f64) -> Result<Grid> {
    build_grid_capped(eps, left, right, spacing, DEFAULT_POINT_CAP)
}

pub fn build_grid_capped(eps: f64, left: f64, right: f64, spacing: f64, cap: usize) -> Result<Grid> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0,1), got {eps}")));
    }
    grid_with_scale(eps, left, right, spacing, cap, 1)
}

/// Grid on `eps^-1 [-half, half]` with an even number of intervals, so the
/// origin is the center node.
pub fn symmetric_grid(eps: f64, half: f64, spacing: f64) -> Result<Grid> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0,1), got {eps}")));
    }
    grid_with_scale(eps, half, half, spacing, DEFAULT_POINT_CAP, 2)
}

/// Unscaled grid on `[lo, hi]` (epsilon set to 1).
pub fn mesoscopic_grid(lo: f64, hi: f64, spacing: f64) -> Result<Grid> {
    grid_with_scale(1.0, -lo, hi, spacing, DEFAULT_POINT_CAP, 1)
}

fn grid_with_scale(eps: f64, left: f64, right: f64, spacing: f64, cap: usize, multiple: usize) -> Result<Grid> {
    if !(spacing > 0.0 && spacing <= 0.1) {
        return Err(invalid(format!("spacing must lie in (0, 0.1], got {spacing}")));
    }
    if !(left + right > 0.0) || !left.is_finite() || !right.is_finite() {
        return Err(invalid(format!("empty interval [-{left}, {right}]")));
    }
    let length = (left + right) / eps;
    let raw = length / spacing;
    let mut intervals = (raw - 1e-9).ceil().max(1.0) as usize;
    if intervals % multiple != 0 {
        intervals += multiple - intervals % multiple;
    }
    let needed = intervals + 1;
    if needed > cap {
        return Err(Error::GridTooLarge { needed, cap });
    }
    let adjusted = length / intervals as f64;
    if adjusted < spacing * (1.0 - MAX_SPACING_SHRINK) {
        return Err(invalid(format!(
            "spacing {spacing} cannot be fitted to length {length} within 1%"
        )));
    }
    Ok(Grid {
        epsilon: eps,
        left,
        right,
        spacing: adjusted,
        n: needed,
    })
}

/// Values sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(invalid(format!("{} values for {} grid points", values.len(), grid.n)));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|i| f(grid.x(i))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn integral(&self) -> f64 {
        integrate(&self.grid, &self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Profile {
        Profile {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `x,value` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", fmt17(self.grid.x(i)), fmt17(*v))?;
        }
        Ok(())
    }

    /// Reads values written by [`Profile::write_csv`] back onto `grid`.
    pub fn read_csv<R: BufRead>(grid: Grid, r: R) -> Result<Profile> {
        let cols = read_csv_columns(r, &["x", "value"])?;
        Profile::new(grid, cols[1].clone())
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Trapezoid integral of node values.
pub fn integrate(grid: &Grid, v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..n - 1].iter().sum();
    grid.spacing * (inner + 0.5 * (v[0] + v[n - 1]))
}

/// Cumulative trapezoid integral from node `origin` (signed: negative to the left).
pub fn cumulative_from(grid: &Grid, v: &[f64], origin: usize) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    let half = 0.5 * grid.spacing;
    for i in origin + 1..n {
        out[i] = out[i - 1] + half * (v[i - 1] + v[i]);
    }
    for i in (0..origin).rev() {
        out[i] = out[i + 1] - half * (v[i] + v[i + 1]);
    }
    out
}

/// Cumulative integral from `origin` with the Euler-Maclaurin end correction
/// `-(dx^2 / 12) (v'(x) - v'(origin))`, fourth order for smooth `v`. The
/// derivative is centered inside and one-sided second order at the ends, so
/// even data on a symmetric grid still gives an odd result.
pub fn cumulative_corrected_from(grid: &Grid, v: &[f64], origin: usize) -> Vec<f64> {
    let n = v.len();
    let mut out = cumulative_from(grid, v, origin);
    if n < 3 {
        return out;
    }
    let dx = grid.spacing;
    let slope = |i: usize| {
        if i == 0 {
            (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)
        } else if i + 1 == n {
            (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx)
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * dx)
        }
    };
    let s0 = slope(origin);
    for (i, o) in out.iter_mut().enumerate() {
        if i != origin {
            *o -= dx * dx / 12.0 * (slope(i) - s0);
        }
    }
    out
}

/// Formats with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    // `+ 0.0` prints negative zero as zero
    format!("{:.16e}", v + 0.0)
}

/// Reads a CSV with a header containing at least `names`, returning those columns.
pub fn read_csv_columns<R: BufRead>(r: R, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = r.lines().filter(|l| match l {
        Ok(s) => !s.trim().is_empty() && !s.starts_with('#'),
        Err(_) => true,
    });
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            cols.iter()
                .position(|c| c == n)
                .ok_or_else(|| Error::Parse(format!("missing column {n}")))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        for (k, &c) in idx.iter().enumerate() {
            let f = fields
                .get(c)
                .ok_or_else(|| Error::Parse(format!("row {} is short", lineno + 2)))?;
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {f}", lineno + 2)))?;
            out[k].push(v);
        }
    }
    Ok(out)
}
