//! Off-center interface at `eps^-1 x0`: the odd problem on the extended
//! domain `eps^-1 [-1, 1 + 2 x0]`, restricted to `eps^-1 [-1, 1]` with a
//! boundary correction, then iterated with the flux map projected off the
//! principal eigenvector.

use serde::Serialize;

use crate::antisym::{prepare, solve_odd, AntisymSolution, IterationTrace, SolverConfig};
use crate::error::{invalid, Error, Result};
use crate::grid::{cumulative_corrected_from, integrate, sup_norm, Grid, Profile};
use crate::instanton::Instanton;
use crate::kernel::{Boundary, Kernel};
use crate::meso::{inner_solve, InnerOptions, MesoState};
use crate::spectral::{max_eig, SpectralOptions, SpectralResult};
use crate::stefan::Branch;
use crate::thermo::{chi, ThermoParams};

/// `N(f) = sup E(x) |f(x)|` with `E = exp(a_plus (eps^-1 - x))` right of the
/// interface and `exp(a_minus (x + eps^-1))` left of it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeightedNorm {
    pub a_plus: f64,
    pub a_minus: f64,
    pub eps: f64,
    pub x0: f64,
}

impl WeightedNorm {
    pub fn new(a_plus: f64, eps: f64, x0: f64) -> Result<Self> {
        if !(a_plus > 0.0) || !(x0.abs() < 1.0) {
            return Err(invalid("weighted norm needs a_plus > 0 and |x0| < 1"));
        }
        Ok(Self {
            a_plus,
            a_minus: a_plus * (1.0 - x0) / (1.0 + x0),
            eps,
            x0,
        })
    }

    /// Weight at mesoscopic `x`.
    pub fn weight(&self, x: f64) -> f64 {
        let inv = 1.0 / self.eps;
        if x >= self.x0 * inv {
            (self.a_plus * (inv - x)).exp()
        } else {
            (self.a_minus * (x + inv)).exp()
        }
    }

    pub fn norm(&self, grid: &Grid, f: &[f64]) -> f64 {
        (0..f.len()).map(|i| self.weight(grid.x(i)) * f[i].abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AsymConfig {
    pub solver: SolverConfig,
    pub spectral: SpectralOptions,
    /// Overrides the default weight rate.
    pub a_plus: Option<f64>,
    /// Radius of the admissible set in the weighted norm.
    pub b: f64,
    /// Stop when the weighted increment falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AsymConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            spectral: SpectralOptions::default(),
            a_plus: None,
            b: 0.1,
            tol: 1e-9,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AsymProblem {
    pub x0: f64,
    pub j: f64,
    pub eps: f64,
    /// Odd solution on the extended domain, relabelled so the interface sits at `eps^-1 x0`.
    pub extended: MesoState,
    pub extended_solve: AntisymSolution,
    pub extended_spectrum: SpectralResult,
    /// Principal eigenvector of the extended problem on the restricted domain.
    pub u_star: Profile,
    pub r_eps: Profile,
    pub h_eps: Profile,
    pub m_eps: Profile,
    pub seed_residual: f64,
    pub norm: WeightedNorm,
    /// Node of `eps^-1 x0`.
    pub interface_index: usize,
}

/// Default weight rate: a quarter of the smaller of the bulk resolvent rate
/// and the front decay rate, each scaled as the two sides require.
pub fn default_a_plus(state: &MesoState, inst: &Instanton, x0: f64) -> f64 {
    let g = state.grid;
    let c = g.center().unwrap_or(g.n / 2);
    let bulk = state
        .p
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| (g.x(*i) - g.x(c)).abs() > 10.0)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    let resolvent_rate = if bulk > 0.0 && bulk < 1.0 { -bulk.ln() / 2.0 } else { inst.decay_rate };
    0.25 * (resolvent_rate * (1.0 - x0)).min(inst.decay_rate * (1.0 + x0) / (1.0 - x0))
}

fn relabel(p: &Profile, grid: Grid) -> Profile {
    Profile { grid, values: p.values.clone() }
}

fn restrict(p: &Profile, grid: Grid) -> Profile {
    Profile { grid, values: p.values[..grid.n].to_vec() }
}

/// Solves the extended problem and builds the restricted seed pair.
pub fn build_asym_problem(params: &ThermoParams, eps: f64, j: f64, x0: f64, cfg: &AsymConfig) -> Result<AsymProblem> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(invalid(format!("x0 must lie in (0,1) here, got {x0}")));
    }
    let setup = prepare(params, &cfg.solver, eps, 1.0 + x0)?;
    let sol = solve_odd(params, setup, eps, j, 1.0 + x0, Branch::Stable, &cfg.solver)?;
    let ext_grid = sol.state.grid.translated(x0);
    let kernel = sol.setup.kernel.clone();
    let extended = MesoState::new(params, &kernel, relabel(&sol.state.h, ext_grid), relabel(&sol.state.m, ext_grid))?;
    let spectrum = max_eig(&extended, &cfg.spectral)?;

    let end = ext_grid
        .index_of(1.0 / eps)
        .ok_or_else(|| Error::Misaligned(format!("eps^-1 = {} is not a node of the extended grid", 1.0 / eps)))?;
    let grid = ext_grid.sub_range(0, end)?;
    let interface_index = grid
        .index_of(x0 / eps)
        .ok_or_else(|| Error::Misaligned("interface is not a node".into()))?;

    let m_eps = restrict(&extended.m, grid);
    let full = kernel.convolve(&extended.m, Boundary::Neumann)?;
    let part = kernel.convolve(&m_eps, Boundary::Neumann)?;
    let r: Vec<f64> = (0..grid.n).map(|i| full.values[i] - part.values[i]).collect();
    let r_eps = Profile::new(grid, r)?;
    let h: Vec<f64> = (0..grid.n).map(|i| extended.h.values[i] + r_eps.values[i]).collect();
    let h_eps = Profile::new(grid, h)?;
    let seed_residual = crate::meso::residual(params, &kernel, &h_eps, &m_eps)?;

    let u_star = restrict(&spectrum.u, grid);
    if integrate(&grid, &u_star.values) <= 0.0 {
        return Err(invalid("principal eigenvector has no mass on the restricted domain"));
    }
    let a_plus = match cfg.a_plus {
        Some(a) => a,
        None => default_a_plus(&extended, &sol.setup.instanton, x0),
    };
    let norm = WeightedNorm::new(a_plus, eps, x0)?;
    Ok(AsymProblem {
        x0,
        j,
        eps,
        extended,
        extended_solve: sol,
        extended_spectrum: spectrum,
        u_star,
        r_eps,
        h_eps,
        m_eps,
        seed_residual,
        norm,
        interface_index,
    })
}

impl AsymProblem {
    pub fn grid(&self) -> Grid {
        self.m_eps.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.extended.kernel
    }

    /// `f - (int f u*) / (int u*)`.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        let g = self.grid();
        let fu: Vec<f64> = f.iter().zip(&self.u_star.values).map(|(a, b)| a * b).collect();
        let c = integrate(&g, &fu) / integrate(&g, &self.u_star.values);
        f.iter().map(|v| v - c).collect()
    }

    pub fn u_star_integral(&self, f: &[f64]) -> f64 {
        let fu: Vec<f64> = f.iter().zip(&self.u_star.values).map(|(a, b)| a * b).collect();
        integrate(&self.grid(), &fu)
    }
}

/// `-eps j int_{eps^-1 x0}^x 1/chi(m)`, then projected off `u*`.
pub fn projected_field(params: &ThermoParams, problem: &AsymProblem, m: &Profile, chi_floor: f64) -> Result<Profile> {
    let g = problem.grid();
    let mut inv = Vec::with_capacity(g.n);
    for &v in &m.values {
        let c = chi(params, v);
        if c < chi_floor {
            return Err(Error::MobilityFloor { value: c });
        }
        inv.push(1.0 / c);
    }
    let hat: Vec<f64> = cumulative_corrected_from(&g, &inv, problem.interface_index)
        .into_iter()
        .map(|v| -problem.eps * problem.j * v)
        .collect();
    Profile::new(g, problem.project(&hat))
}

/// One projected step from `m_n`; `m` is re-solved starting at `m_n`.
pub fn projected_iterate(params: &ThermoParams, problem: &AsymProblem, m_n: &Profile, cfg: &AsymConfig) -> Result<(Profile, MesoState)> {
    let h = projected_field(params, problem, m_n, cfg.solver.chi_floor)?;
    let inner = InnerOptions { odd: false, ..cfg.solver.inner };
    let state = inner_solve(params, problem.kernel(), &h, m_n, &inner)?;
    Ok((h, state))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GReport {
    pub weighted_distance: f64,
    pub b: f64,
    pub u_star_integral: f64,
    /// Sup of the derivative of `h - h_eps`, bound `eps`.
    pub slope: f64,
    /// Same on `|x - eps^-1 x0| <= log(1/eps)^2`, bound `eps^2`.
    pub window_slope: f64,
    pub in_ball: bool,
    pub orthogonal: bool,
    pub slope_ok: bool,
    pub window_slope_ok: bool,
}

impl GReport {
    pub fn member(&self) -> bool {
        self.in_ball && self.orthogonal && self.slope_ok && self.window_slope_ok
    }
}

/// Tests the four conditions of the admissible set for `h`.
pub fn check_g_membership(problem: &AsymProblem, h: &Profile, b: f64) -> GReport {
    let g = problem.grid();
    let eps = problem.eps;
    let diff: Vec<f64> = (0..g.n).map(|i| h.values[i] - problem.h_eps.values[i]).collect();
    let weighted_distance = problem.norm.norm(&g, &diff);
    let u_star_integral = problem.u_star_integral(&h.values);
    let scale = integrate(&g, &problem.u_star.values) * sup_norm(&h.values).max(1e-300);
    let window = (1.0 / eps).ln().powi(2);
    let centre = g.x(problem.interface_index);
    let mut slope = 0.0_f64;
    let mut window_slope = 0.0_f64;
    for i in 0..g.n {
        let d = if i == 0 {
            (diff[1] - diff[0]) / g.spacing
        } else if i + 1 == g.n {
            (diff[i] - diff[i - 1]) / g.spacing
        } else {
            (diff[i + 1] - diff[i - 1]) / (2.0 * g.spacing)
        };
        slope = slope.max(d.abs());
        if (g.x(i) - centre).abs() <= window {
            window_slope = window_slope.max(d.abs());
        }
    }
    GReport {
        weighted_distance,
        b,
        u_star_integral,
        slope,
        window_slope,
        in_ball: weighted_distance <= b,
        orthogonal: u_star_integral.abs() <= 1e-10 * scale,
        slope_ok: slope <= eps,
        window_slope_ok: window_slope <= eps * eps,
    }
}

#[derive(Clone, Debug)]
pub struct AsymSolution {
    pub state: MesoState,
    pub problem: AsymProblem,
    /// Increments in the sup norm, as for the odd solver.
    pub trace: IterationTrace,
    /// Increments `N(h_{n+1} - h_n)`; the first entry is `N(h_0 - h_eps)`.
    pub weighted_increments: Vec<f64>,
    /// Zero of `h` near `eps^-1 x0` (mesoscopic).
    pub interface_position: f64,
    /// Zero of `m` closest to `eps^-1 x0` (mesoscopic).
    pub m_zero: Option<f64>,
    pub seed_report: GReport,
    pub final_report: GReport,
    /// Sup distance between the restricted `u*` and the principal eigenvector
    /// of the solved state, both scaled to unit sup norm.
    pub eigenvector_shift: Option<f64>,
    /// Set when the solve ran on the reflected problem (`x0 < 0`).
    pub mirrored: bool,
}

impl AsymSolution {
    pub fn eps_x_eps(&self) -> f64 {
        self.problem.eps * self.interface_position
    }
}

/// Linear-interpolated zero of `v` in `[lo, hi]` closest to `target`.
pub fn zero_crossing(grid: &Grid, v: &[f64], target: f64, lo: f64, hi: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..v.len().saturating_sub(1) {
        let (a, b) = (grid.x(i), grid.x(i + 1));
        if b < lo || a > hi {
            continue;
        }
        let z = if v[i] == 0.0 {
            a
        } else if v[i] * v[i + 1] < 0.0 {
            a + (b - a) * v[i] / (v[i] - v[i + 1])
        } else {
            continue;
        };
        if z < lo || z > hi {
            continue;
        }
        if best.map_or(true, |q| (z - target).abs() < (q - target).abs()) {
            best = Some(z);
        }
    }
    best
}

/// Profile with `x0 != 0`; negative `x0` is solved on the reflected problem.
pub fn solve_off_center(params: &ThermoParams, eps: f64, j: f64, x0: f64, cfg: &AsymConfig) -> Result<AsymSolution> {
    if j == 0.0 {
        return Err(invalid("current j must be nonzero"));
    }
    if x0 == 0.0 {
        return Err(invalid("x0 = 0 is the odd problem"));
    }
    let mirrored = x0 < 0.0;
    let (jj, xx) = if mirrored { (-j, -x0) } else { (j, x0) };
    let problem = build_asym_problem(params, eps, jj, xx, cfg)?;
    let mut sol = iterate(params, problem, cfg)?;
    if mirrored {
        reflect(params, &mut sol)?;
    }
    Ok(sol)
}

fn iterate(params: &ThermoParams, problem: AsymProblem, cfg: &AsymConfig) -> Result<AsymSolution> {
    let g = problem.grid();
    let mut m = problem.m_eps.clone();
    let mut h_prev = problem.h_eps.clone();
    let mut trace = IterationTrace::default();
    let mut weighted = Vec::new();
    let mut seed_report = None;
    for _ in 0..cfg.max_iter {
        let (h, state) = projected_iterate(params, &problem, &m, cfg)?;
        if seed_report.is_none() {
            seed_report = Some(check_g_membership(&problem, &h, cfg.b));
        }
        let diff: Vec<f64> = (0..g.n).map(|i| h.values[i] - h_prev.values[i]).collect();
        let wn = problem.norm.norm(&g, &diff);
        weighted.push(wn);
        let inc = sup_norm(&diff);
        let minc = crate::grid::sup_diff(&state.m.values, &m.values);
        if let Some(&prev) = trace.increments.last() {
            trace.contraction_ratios.push(inc / prev);
        }
        trace.increments.push(inc);
        trace.m_increments.push(minc);
        trace.residuals.push(state.residual_norm);
        m = state.m.clone();
        h_prev = h;
        if weighted.len() > 1 && wn < cfg.tol {
            return finish(problem, state, trace, weighted, seed_report.expect("set on first step"), cfg);
        }
    }
    Err(Error::NonConvergence {
        what: "projected iteration",
        iterations: cfg.max_iter,
        last: weighted.last().copied().unwrap_or(f64::NAN),
    })
}

fn finish(
    problem: AsymProblem,
    state: MesoState,
    trace: IterationTrace,
    weighted: Vec<f64>,
    seed_report: GReport,
    cfg: &AsymConfig,
) -> Result<AsymSolution> {
    let g = problem.grid();
    let centre = g.x(problem.interface_index);
    let interface_position = zero_crossing(&g, &state.h.values, centre, centre - 2.0, centre + 2.0)
        .ok_or_else(|| Error::NoBracket("no zero of h within 2 units of the interface".into()))?;
    let m_zero = zero_crossing(&g, &state.m.values, centre, g.lo(), g.hi());
    let final_report = check_g_membership(&problem, &state.h, cfg.b);
    let eigenvector_shift = max_eig(&state, &cfg.spectral).ok().map(|s| {
        let a = sup_norm(&s.u.values);
        let b = sup_norm(&problem.u_star.values);
        (0..g.n).map(|i| (s.u.values[i] / a - problem.u_star.values[i] / b).abs()).fold(0.0, f64::max)
    });
    Ok(AsymSolution {
        state,
        problem,
        trace,
        weighted_increments: weighted,
        interface_position,
        m_zero,
        seed_report,
        final_report,
        eigenvector_shift,
        mirrored: false,
    })
}

/// Maps the solution of the reflected problem back: `x -> -x`.
fn reflect(params: &ThermoParams, sol: &mut AsymSolution) -> Result<()> {
    let g = sol.state.grid;
    let rev = |p: &Profile| Profile { grid: g, values: p.values.iter().rev().copied().collect() };
    let h = rev(&sol.state.h);
    let m = rev(&sol.state.m);
    sol.state = MesoState::new(params, &sol.state.kernel, h, m)?;
    sol.interface_position = -sol.interface_position;
    sol.m_zero = sol.m_zero.map(|z| -z);
    sol.mirrored = true;
    Ok(())
}
