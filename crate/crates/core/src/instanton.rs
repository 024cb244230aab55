//! The odd increasing front `m = tanh(beta J * m)` on the line, its
//! derivative, and the linearized operator around it.
//!
//! The iteration runs on the deviation `d = m_beta - m` over `x >= 0`; the
//! profile is odd by construction and the exponentially small tail keeps
//! full relative precision.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{integrate, mesoscopic_grid, sup_norm, Grid, Profile};
use crate::kernel::{Boundary, Kernel};
use crate::stats::linear_fit;
use crate::thermo::ThermoParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstantonSeed {
    /// `m_beta * sign(x)`.
    Sign,
    /// `m_beta * tanh(x)`.
    Tanh,
}

#[derive(Clone, Copy, Debug)]
pub struct InstantonOptions {
    /// Absolute stopping tolerance on the fixed-point residual.
    pub tol: f64,
    /// Relative stopping tolerance on the deviation tail.
    pub rel_tol: f64,
    pub omega: f64,
    pub seed: InstantonSeed,
    pub max_iter: usize,
}

impl Default for InstantonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            rel_tol: 1e-10,
            omega: 0.5,
            seed: InstantonSeed::Sign,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Instanton {
    pub grid: Grid,
    pub profile: Profile,
    pub derivative: Profile,
    /// `beta (1 - m^2)` along the front.
    pub p_bar: Profile,
    /// `m_beta - m` at `x = k * spacing`, `k = 0..=n_half`.
    pub deviation: Vec<f64>,
    pub decay_rate: f64,
    pub decay_r2: f64,
    /// Weighted norm of the derivative, `int (m')^2 / p_bar`.
    pub norm_sq: f64,
    /// `int m' / p_bar`.
    pub mean: f64,
    pub m_beta: f64,
    pub halfwidth: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InstantonSummary {
    pub m_beta: f64,
    pub decay_rate: f64,
    pub decay_r2: f64,
    pub mean: f64,
    pub norm_sq: f64,
    pub halfwidth: f64,
    pub spacing: f64,
    pub iterations: usize,
}

pub fn compute_instanton(params: &ThermoParams, kernel: &Kernel, halfwidth: f64, opts: InstantonOptions) -> Result<Instanton> {
    let dx = kernel.spacing;
    if halfwidth < 20.0 {
        return Err(invalid(format!("instanton half-width must be at least 20, got {halfwidth}")));
    }
    if dx > 0.05 {
        return Err(invalid(format!("instanton spacing must be at most 0.05, got {dx}")));
    }
    let n_half = (halfwidth / dx - 1e-9).ceil() as usize;
    let x_half = n_half as f64 * dx;
    let grid = mesoscopic_grid(-x_half, x_half, dx)?;
    let collar = ((x_half - 1.0) / dx + 1e-9).floor() as usize;
    let kh = kernel.half as isize;
    let w = kernel.weights();
    let (beta, mb) = (params.beta, params.m_beta);
    let cosh_a = (beta * mb).cosh();

    let mut d: Vec<f64> = (0..=n_half)
        .map(|k| {
            let x = k as f64 * dx;
            match (k, opts.seed) {
                (0, _) => mb,
                (_, _) if k > collar => 0.0,
                (_, InstantonSeed::Sign) => 0.0,
                (_, InstantonSeed::Tanh) => mb * 2.0 / ((2.0 * x).exp() + 1.0),
            }
        })
        .collect();
    let mut next = d.clone();
    let mut iterations = 0;
    loop {
        let (mut abs_change, mut rel_change) = (0.0_f64, 0.0_f64);
        for k in 1..=collar {
            let mut s = 0.0;
            for off in -kh..=kh {
                let l = k as isize - off;
                let e = match l.cmp(&0) {
                    std::cmp::Ordering::Greater => d[l as usize],
                    std::cmp::Ordering::Equal => mb,
                    std::cmp::Ordering::Less => 2.0 * mb - d[(-l) as usize],
                };
                s += w[(off + kh) as usize] * e;
            }
            let fresh = (beta * s).sinh() / (cosh_a * (beta * (mb - s)).cosh());
            let change = (fresh - d[k]).abs();
            abs_change = abs_change.max(change);
            if fresh > 1e-290 || d[k] > 1e-290 {
                rel_change = rel_change.max(change / fresh.max(d[k]));
            }
            next[k] = (1.0 - opts.omega) * d[k] + opts.omega * fresh;
        }
        std::mem::swap(&mut d, &mut next);
        iterations += 1;
        if abs_change < opts.tol && rel_change < opts.rel_tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                what: "instanton iteration",
                iterations,
                last: abs_change,
            });
        }
    }

    let nf = grid.n;
    let centre = n_half;
    let mut profile = vec![0.0; nf];
    for (i, v) in profile.iter_mut().enumerate() {
        if i > centre {
            *v = mb - d[i - centre];
        } else if i < centre {
            *v = -(mb - d[centre - i]);
        }
    }
    let derivative = band_limited_derivative(&grid, &profile, mb);
    let p_bar: Vec<f64> = profile.iter().map(|m| beta * (1.0 - m) * (1.0 + m)).collect();
    let r1: Vec<f64> = derivative.iter().zip(&p_bar).map(|(a, p)| a / p).collect();
    let r2: Vec<f64> = derivative.iter().zip(&p_bar).map(|(a, p)| a * a / p).collect();
    let mean = integrate(&grid, &r1);
    let norm_sq = integrate(&grid, &r2);

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, &v) in d.iter().enumerate() {
        let x = k as f64 * dx;
        if x >= 5.0 && x <= x_half - 2.0 + 1e-9 && v > 0.0 {
            xs.push(x);
            ys.push(v.ln());
        }
    }
    let fit = linear_fit(&xs, &ys).ok_or_else(|| invalid("instanton tail too short for a decay fit"))?;

    Ok(Instanton {
        grid,
        profile: Profile::new(grid, profile)?,
        derivative: Profile::new(grid, derivative)?,
        p_bar: Profile::new(grid, p_bar)?,
        deviation: d,
        decay_rate: -fit.slope,
        decay_r2: fit.r2,
        norm_sq,
        mean,
        m_beta: mb,
        halfwidth: x_half,
        iterations,
    })
}

impl Instanton {
    pub fn summary(&self) -> InstantonSummary {
        InstantonSummary {
            m_beta: self.m_beta,
            decay_rate: self.decay_rate,
            decay_r2: self.decay_r2,
            mean: self.mean,
            norm_sq: self.norm_sq,
            halfwidth: self.halfwidth,
            spacing: self.grid.spacing,
            iterations: self.iterations,
        }
    }

    /// Sup of `|m - tanh(beta J * m)|` on `|x| <= X - 1`.
    pub fn residual(&self, params: &ThermoParams, kernel: &Kernel) -> Result<f64> {
        let c = kernel.convolve(&self.profile, Boundary::Free)?;
        let lim = self.halfwidth - 1.0 + 1e-9;
        let mut r = 0.0_f64;
        for i in 0..self.grid.n {
            if self.grid.x(i).abs() <= lim {
                r = r.max((self.profile.values[i] - (params.beta * c.values[i]).tanh()).abs());
            }
        }
        Ok(r)
    }

    /// Linearized operator `p_bar J * f` with free boundary.
    pub fn apply(&self, kernel: &Kernel, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; f.len()];
        kernel.convolve_into(f, Boundary::Free, &mut out)?;
        for (o, p) in out.iter_mut().zip(&self.p_bar.values) {
            *o *= p;
        }
        Ok(out)
    }

    /// `int f g / p_bar`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let v: Vec<f64> = (0..self.grid.n).map(|i| f[i] * g[i] / self.p_bar.values[i]).collect();
        integrate(&self.grid, &v)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        interp4(&self.grid, &self.profile.values, x, self.m_beta.copysign(x))
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        interp4(&self.grid, &self.derivative.values, x, 0.0)
    }
}

/// Derivative of the band-limited interpolant of an odd front with limits
/// `+-level`. The smooth reference `level * tanh(x)` is differentiated exactly,
/// so the lattice sum only sees a decaying remainder.
fn band_limited_derivative(grid: &Grid, v: &[f64], level: f64) -> Vec<f64> {
    let n = v.len();
    let xs = grid.points();
    let rest: Vec<f64> = (0..n).map(|i| v[i] - level * xs[i].tanh()).collect();
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for (j, r) in rest.iter().enumerate() {
                if j != i {
                    let q = i as isize - j as isize;
                    let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                    s += r * sign / q as f64;
                }
            }
            s / grid.spacing + level / xs[i].cosh().powi(2)
        })
        .collect()
}

/// Four-point Lagrange interpolation; `outside` beyond the grid.
fn interp4(grid: &Grid, v: &[f64], x: f64, outside: f64) -> f64 {
    let t = (x - grid.lo()) / grid.spacing;
    if t < 0.0 || t > (grid.n - 1) as f64 {
        return outside;
    }
    let k = t.round();
    if (t - k).abs() < 1e-9 {
        return v[k as usize];
    }
    let i = (t.floor() as usize).clamp(1, grid.n - 3);
    let s = t - i as f64;
    let (a, b, c, d) = (v[i - 1], v[i], v[i + 1], v[i + 2]);
    -s * (s - 1.0) * (s - 2.0) / 6.0 * a + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * b
        - (s + 1.0) * s * (s - 2.0) / 2.0 * c
        + (s + 1.0) * s * (s - 1.0) / 6.0 * d
}

/// Position `x > 0` where the front reaches `m_beta - eps`.
pub fn instanton_threshold(inst: &Instanton, eps: f64) -> Result<f64> {
    let d = &inst.deviation;
    if !(eps > 0.0) || eps > inst.m_beta {
        return Err(invalid(format!("threshold {eps} outside (0, m_beta]")));
    }
    let dx = inst.grid.spacing;
    for k in 0..d.len() - 1 {
        if d[k] >= eps && d[k + 1] < eps {
            // the deviation is close to exponential, so interpolate its log
            let t = if d[k + 1] > 0.0 {
                (d[k] / eps).ln() / (d[k] / d[k + 1]).ln()
            } else {
                (d[k] - eps) / (d[k] - d[k + 1])
            };
            return Ok((k as f64 + t) * dx);
        }
    }
    Err(invalid(format!("threshold {eps} not reached inside the front window")))
}

/// `||(P A)^n f~||_inf` for `n = 0..=n_max`, where `P` removes the
/// derivative direction in the `1/p_bar` inner product.
pub fn complement_decay(inst: &Instanton, kernel: &Kernel, f: &Profile, n_max: usize) -> Result<Vec<f64>> {
    let mp = &inst.derivative.values;
    let nn = inst.inner(mp, mp);
    let project = |v: &mut Vec<f64>| {
        let c = inst.inner(v, mp) / nn;
        for (a, b) in v.iter_mut().zip(mp) {
            *a -= c * b;
        }
    };
    let mut psi = f.values.clone();
    project(&mut psi);
    let mut out = vec![sup_norm(&psi)];
    for _ in 0..n_max {
        psi = inst.apply(kernel, &psi)?;
        project(&mut psi);
        out.push(sup_norm(&psi));
    }
    Ok(out)
}
