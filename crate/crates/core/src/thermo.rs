//! Mean-field thermodynamics: potential, convex envelope, pressure, branch inverses.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{integrate, Profile};
use crate::kernel::{Boundary, Kernel};
use crate::roots::{bisect_polish, golden_max};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermoParams {
    pub beta: f64,
    /// Positive solution of `m = tanh(beta m)`.
    pub m_beta: f64,
    /// Spinodal value `sqrt(1 - 1/beta)`.
    pub m_star: f64,
}

impl ThermoParams {
    pub fn new(beta: f64) -> Result<Self> {
        Ok(Self {
            beta,
            m_beta: solve_m_beta(beta)?,
            m_star: (1.0 - 1.0 / beta).sqrt(),
        })
    }
}

pub fn solve_m_beta(beta: f64) -> Result<f64> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(invalid(format!("beta must exceed 1, got {beta}")));
    }
    // g < 0 just right of 0, g(1) > 0
    let lo = (0.5 * (3.0 * (beta - 1.0) / beta.powi(3)).sqrt()).min(0.5);
    let g = |m: f64| m - (beta * m).tanh();
    let dg = |m: f64| 1.0 - beta / (beta * m).cosh().powi(2);
    let lo = if g(lo) < 0.0 { lo } else { 1e-300 };
    bisect_polish(g, dg, lo, 1.0)
}

/// Entropy `S(m)`, zero at `m = +-1`.
pub fn entropy(m: f64) -> f64 {
    let xlx = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() };
    -(xlx(0.5 * (1.0 + m)) + xlx(0.5 * (1.0 - m)))
}

pub fn phi(p: &ThermoParams, m: f64) -> f64 {
    -0.5 * m * m - entropy(m) / p.beta
}

fn check_open(m: f64) -> Result<()> {
    if !(m.abs() < 1.0) {
        return Err(invalid(format!("magnetization {m} outside (-1, 1)")));
    }
    Ok(())
}

/// [`phi`] restricted to the open interval.
pub fn try_phi(p: &ThermoParams, m: f64) -> Result<f64> {
    check_open(m)?;
    Ok(phi(p, m))
}

/// [`a_beta`] restricted to the open interval.
pub fn try_a_beta(p: &ThermoParams, m: f64) -> Result<f64> {
    check_open(m)?;
    Ok(a_beta(p, m))
}

pub fn phi_prime(p: &ThermoParams, m: f64) -> f64 {
    -m + m.atanh() / p.beta
}

pub fn phi_second(p: &ThermoParams, m: f64) -> f64 {
    -1.0 + 1.0 / (p.beta * (1.0 - m * m))
}

/// Mobility `beta (1 - m^2)`.
pub fn chi(p: &ThermoParams, m: f64) -> f64 {
    p.beta * (1.0 - m) * (1.0 + m)
}

/// `1 - beta (1 - m^2)`, equal to `chi * phi''`.
pub fn d_star(p: &ThermoParams, m: f64) -> f64 {
    1.0 - chi(p, m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diffusivity {
    pub value: f64,
    /// Set when `m` lies strictly inside the plateau `(-m_beta, m_beta)`.
    pub plateau: bool,
}

/// Macroscopic diffusion coefficient `chi(m) a''(m)`; zero on the plateau.
pub fn d_beta(p: &ThermoParams, m: f64) -> Diffusivity {
    if m.abs() < p.m_beta {
        Diffusivity {
            value: 0.0,
            plateau: true,
        }
    } else {
        Diffusivity {
            value: d_star(p, m),
            plateau: false,
        }
    }
}

/// Convex envelope of `phi`.
pub fn a_beta(p: &ThermoParams, m: f64) -> f64 {
    if m.abs() >= p.m_beta {
        phi(p, m)
    } else {
        phi(p, p.m_beta)
    }
}

pub fn a_beta_prime(p: &ThermoParams, m: f64) -> f64 {
    if m.abs() >= p.m_beta {
        phi_prime(p, m)
    } else {
        0.0
    }
}

/// Pressure `sup_s { h s - a_beta(s) }` by golden-section search.
pub fn pressure(p: &ThermoParams, h: f64) -> f64 {
    golden_max(|s| h * s - a_beta(p, s), -1.0, 1.0, 1e-13).1
}

/// Root of `phi'(m) = g` on `[m_star, 1]`, which requires `g >= phi'(m_star)`.
pub fn positive_branch_root(p: &ThermoParams, g: f64) -> Result<f64> {
    if g == 0.0 {
        return Ok(p.m_beta);
    }
    let floor = phi_prime(p, p.m_star);
    if g < floor {
        return Err(Error::BranchRange { h: g, bound: floor });
    }
    let beta = p.beta;
    // same sign as phi'(m) - g on (m_star, 1)
    let f = |m: f64| m - (beta * (m + g)).tanh();
    let df = |m: f64| 1.0 - beta / (beta * (m + g)).cosh().powi(2);
    let (lo, hi) = if g > 0.0 { (p.m_beta, 1.0) } else { (p.m_star, p.m_beta) };
    bisect_polish(f, df, lo, hi)
}

/// Inverse of `a_beta'` off the plateau; `h = 0` is rejected.
pub fn a_prime_inverse(p: &ThermoParams, h: f64) -> Result<f64> {
    if h == 0.0 || !h.is_finite() {
        return Err(invalid("a' is not invertible at h = 0; use a_prime_inverse_side"));
    }
    Ok(h.signum() * positive_branch_root(p, h.abs())?)
}

/// As [`a_prime_inverse`], returning `side * m_beta` at `h = 0`.
pub fn a_prime_inverse_side(p: &ThermoParams, h: f64, side: f64) -> Result<f64> {
    if h == 0.0 {
        Ok(side.signum() * p.m_beta)
    } else {
        a_prime_inverse(p, h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Inverse of `phi'` on `(m_star, 1)` or `(-1, -m_star)`, metastable part included.
pub fn phi_prime_inverse_metastable(p: &ThermoParams, h: f64, branch: Sign) -> Result<f64> {
    let s = branch.value();
    positive_branch_root(p, s * h).map(|m| s * m).map_err(|e| match e {
        Error::BranchRange { bound, .. } => Error::BranchRange { h, bound: s * bound },
        other => other,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldRoot {
    pub value: f64,
    /// Two minimizers tie; `value` is the positive one.
    pub degenerate: bool,
}

/// Root of `m = tanh(beta (m + h))` minimizing `phi(s) - h s`.
pub fn mean_field_root(p: &ThermoParams, h: f64) -> Result<MeanFieldRoot> {
    if h == 0.0 {
        return Ok(MeanFieldRoot {
            value: p.m_beta,
            degenerate: true,
        });
    }
    Ok(MeanFieldRoot {
        value: a_prime_inverse(p, h)?,
        degenerate: false,
    })
}

/// Free energy `int phi(m) + 1/4 iint J^neum (m(x) - m(y))^2`, trapezoid in both variables.
pub fn free_energy(p: &ThermoParams, kernel: &Kernel, m: &Profile) -> Result<f64> {
    let g = &m.grid;
    for &v in &m.values {
        check_open(v)?;
    }
    let sq = m.map(|v| v * v);
    let km = kernel.convolve(m, Boundary::Neumann)?;
    let ksq = kernel.convolve(&sq, Boundary::Neumann)?;
    let ones = kernel.convolve(&Profile::constant(*g, 1.0), Boundary::Neumann)?;
    let local: Vec<f64> = m.values.iter().map(|&v| phi(p, v)).collect();
    let pair: Vec<f64> = (0..g.n)
        .map(|i| {
            let v = m.values[i];
            v * v * ones.values[i] - 2.0 * v * km.values[i] + ksq.values[i]
        })
        .collect();
    Ok(integrate(g, &local) + 0.25 * integrate(g, &pair))
}
