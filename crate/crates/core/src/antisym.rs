//! Odd stationary profiles on a symmetric domain: composite seed, the
//! flux map `h -> -eps j int_0^x 1/chi(m(h))`, and its fixed-point iteration.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{cumulative_corrected_from, sup_diff, sup_norm, symmetric_grid, Grid, Profile};
use crate::instanton::{compute_instanton, instanton_threshold, Instanton, InstantonOptions};
use crate::kernel::{build_kernel_shape, Kernel, KernelShape};
use crate::meso::{effective_field, inner_solve, InnerOptions, MesoState};
use crate::stefan::{solve_metastable_stefan, solve_stefan, Branch, StefanSolution};
use crate::thermo::{chi, ThermoParams};

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub spacing: f64,
    pub kernel_shape: KernelShape,
    pub instanton_halfwidth: f64,
    /// Seed matching point is `instanton_threshold + 2 n0`.
    pub n0: usize,
    /// Stop when successive fields differ by less than this (sup norm).
    pub tol: f64,
    pub max_iter: usize,
    pub chi_floor: f64,
    pub inner: InnerOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            spacing: 0.05,
            kernel_shape: KernelShape::CosSquared,
            instanton_halfwidth: 20.0,
            n0: 2,
            tol: 1e-10,
            max_iter: 200,
            chi_floor: 1e-6,
            inner: InnerOptions::default(),
        }
    }
}

/// Grid, kernel and front shared by one solve.
#[derive(Clone, Debug)]
pub struct Setup {
    pub grid: Grid,
    pub kernel: Kernel,
    pub instanton: Instanton,
}

/// Symmetric grid of macroscopic half-length `half`, with matching kernel and front.
pub fn prepare(params: &ThermoParams, cfg: &SolverConfig, eps: f64, half: f64) -> Result<Setup> {
    let grid = symmetric_grid(eps, half, cfg.spacing)?;
    let kernel = build_kernel_shape(cfg.kernel_shape, grid.spacing)?;
    let instanton = compute_instanton(params, &kernel, cfg.instanton_halfwidth, InstantonOptions::default())?;
    Ok(Setup { grid, kernel, instanton })
}

#[derive(Clone, Debug)]
pub struct CompositeSeed {
    pub m0: Profile,
    pub h0: Profile,
    pub xi_eps: f64,
    pub n0: usize,
    /// Where the front is within `eps` of `m_beta`.
    pub threshold: f64,
    /// `||A^n0 psi|| / ||psi||` for an odd test function, linearized at the front.
    pub odd_decay: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IterationTrace {
    pub increments: Vec<f64>,
    pub m_increments: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl IterationTrace {
    fn push(&mut self, inc: f64, minc: f64, res: f64) {
        if let Some(&prev) = self.increments.last() {
            self.contraction_ratios.push(inc / prev);
        }
        self.increments.push(inc);
        self.m_increments.push(minc);
        self.residuals.push(res);
    }
}

/// Sign of `m` right of the center for the given branch and current.
fn right_sign(branch: Branch, j: f64) -> f64 {
    match branch {
        Branch::Stable => -j.signum(),
        Branch::Metastable => j.signum(),
    }
}

fn macro_profile(params: &ThermoParams, branch: Branch, j: f64, ell: f64) -> Result<StefanSolution> {
    match branch {
        Branch::Stable => solve_stefan(params, j, 0.0, ell, 2),
        Branch::Metastable => solve_metastable_stefan(params, j, ell, 2, true),
    }
}

/// Front on `[0, xi_eps]`, rescaled macroscopic profile beyond, extended oddly.
pub fn build_seed(params: &ThermoParams, setup: &Setup, eps: f64, j: f64, ell: f64, n0: usize, branch: Branch) -> Result<CompositeSeed> {
    let grid = setup.grid;
    let centre = grid.center().ok_or_else(|| invalid("seed grid needs a center node"))?;
    let inst = &setup.instanton;
    let threshold = instanton_threshold(inst, eps)?;
    let xi = threshold + 2.0 * n0 as f64;
    if xi >= 0.5 * grid.hi() {
        return Err(invalid(format!(
            "matching point {xi} is not inside half the domain ({}); lower n0 or eps",
            0.5 * grid.hi()
        )));
    }
    if xi >= inst.halfwidth - 1.0 {
        return Err(invalid("matching point beyond the front window"));
    }
    let stefan = macro_profile(params, branch, j, ell)?;
    let sigma = right_sign(branch, j);
    let mut m = vec![0.0; grid.n];
    let mut outer_idx = Vec::new();
    let mut outer_r = Vec::new();
    for i in centre..grid.n {
        let x = grid.x(i);
        if x <= xi {
            m[i] = sigma * inst.value_at(x);
        } else {
            outer_idx.push(i);
            outer_r.push(eps * (x - xi));
        }
    }
    let (_, um) = stefan.sample(&outer_r)?;
    for (k, &i) in outer_idx.iter().enumerate() {
        m[i] = um[k];
    }
    for i in 0..centre {
        m[i] = -m[grid.n - 1 - i];
    }
    m[centre] = 0.0;
    let m0 = Profile::new(grid, m)?;
    let h0 = effective_field(params, &setup.kernel, &m0)?;

    let test: Vec<f64> = inst.grid.points().iter().map(|x| x * (-x * x).exp()).collect();
    let mut psi = test.clone();
    for _ in 0..n0 {
        psi = inst.apply(&setup.kernel, &psi)?;
    }
    Ok(CompositeSeed {
        m0,
        h0,
        xi_eps: xi,
        n0,
        threshold,
        odd_decay: sup_norm(&psi) / sup_norm(&test),
    })
}

/// `-eps j int_center^x 1/chi(m)`, exactly odd.
pub fn flux_field(params: &ThermoParams, m: &Profile, eps: f64, j: f64, chi_floor: f64) -> Result<Profile> {
    let grid = m.grid;
    let centre = grid.center().ok_or_else(|| invalid("flux field needs a center node"))?;
    let mut inv = vec![0.0; grid.n];
    for (o, &v) in inv.iter_mut().zip(&m.values) {
        let c = chi(params, v);
        if c < chi_floor {
            return Err(Error::MobilityFloor { value: c });
        }
        *o = 1.0 / c;
    }
    let mut h: Vec<f64> = cumulative_corrected_from(&grid, &inv, centre).into_iter().map(|v| -eps * j * v).collect();
    for i in 0..centre {
        h[i] = -h[grid.n - 1 - i];
    }
    Profile::new(grid, h)
}

/// One application of the flux map: solve for `m(h)`, return the new field.
pub fn t_map(params: &ThermoParams, kernel: &Kernel, h: &Profile, m_guess: &Profile, eps: f64, j: f64, cfg: &SolverConfig) -> Result<(Profile, MesoState)> {
    let inner = InnerOptions { odd: true, ..cfg.inner };
    let state = inner_solve(params, kernel, h, m_guess, &inner)?;
    let next = flux_field(params, &state.m, eps, j, cfg.chi_floor)?;
    Ok((next, state))
}

#[derive(Clone, Debug)]
pub struct AntisymSolution {
    pub state: MesoState,
    pub trace: IterationTrace,
    pub seed: CompositeSeed,
    pub setup: Setup,
    pub eps: f64,
    pub j: f64,
    pub ell: f64,
    pub branch: Branch,
    /// `sup |h + eps j int_0^x 1/chi(m)|` at the returned state.
    pub self_consistency: f64,
    pub monotone: bool,
    /// Length of the increasing stretch around the center (metastable runs).
    pub i_eps: Option<f64>,
}

/// Stable odd profile on `eps^-1 [-ell, ell]` with current `j`.
pub fn solve_stable(params: &ThermoParams, eps: f64, j: f64, ell: f64, cfg: &SolverConfig) -> Result<AntisymSolution> {
    let setup = prepare(params, cfg, eps, ell)?;
    solve_odd(params, setup, eps, j, ell, Branch::Stable, cfg)
}

/// Metastable odd profile: `j > 0`, negative phase on the left.
pub fn solve_metastable(params: &ThermoParams, eps: f64, j: f64, ell: f64, cfg: &SolverConfig) -> Result<AntisymSolution> {
    if j <= 0.0 {
        return Err(invalid("metastable solve needs j > 0"));
    }
    let setup = prepare(params, cfg, eps, ell)?;
    solve_odd(params, setup, eps, j, ell, Branch::Metastable, cfg)
}

/// Fixed-point iteration from the composite seed on a prepared symmetric setup.
pub fn solve_odd(params: &ThermoParams, setup: Setup, eps: f64, j: f64, ell: f64, branch: Branch, cfg: &SolverConfig) -> Result<AntisymSolution> {
    if j == 0.0 {
        return Err(invalid("current j must be nonzero"));
    }
    let seed = build_seed(params, &setup, eps, j, ell, cfg.n0, branch)?;
    let mut h = seed.h0.clone();
    let mut m = seed.m0.clone();
    let mut trace = IterationTrace::default();
    let mut rising = 0;
    for _ in 0..cfg.max_iter {
        let (next, state) = t_map(params, &setup.kernel, &h, &m, eps, j, cfg)?;
        let inc = sup_diff(&next.values, &h.values);
        let minc = sup_diff(&state.m.values, &m.values);
        trace.push(inc, minc, state.residual_norm);
        if let Some(&r) = trace.contraction_ratios.last() {
            rising = if r >= 1.0 { rising + 1 } else { 0 };
            if rising >= 10 {
                return Err(Error::ContractionFailure { steps: rising });
            }
        }
        m = state.m.clone();
        if inc < cfg.tol {
            let sign = right_sign(branch, j);
            let monotone = strictly_monotone(&state.m.values, sign, 1e-14);
            let i_eps = (branch == Branch::Metastable).then(|| increasing_stretch(&state.m, 1e-12));
            return Ok(AntisymSolution {
                state,
                trace,
                seed,
                setup,
                eps,
                j,
                ell,
                branch,
                self_consistency: inc,
                monotone,
                i_eps,
            });
        }
        h = next;
    }
    Err(Error::NonConvergence {
        what: "flux-map iteration",
        iterations: cfg.max_iter,
        last: trace.increments.last().copied().unwrap_or(f64::NAN),
    })
}

/// All first differences carry `sign` and exceed `floor` in size.
pub fn strictly_monotone(v: &[f64], sign: f64, floor: f64) -> bool {
    v.windows(2).all(|w| sign * (w[1] - w[0]) > floor)
}

/// Signs of the maximal runs of first differences larger than `floor`.
pub fn monotone_runs(v: &[f64], floor: f64) -> Vec<i8> {
    let mut runs: Vec<i8> = Vec::new();
    for w in v.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= floor {
            continue;
        }
        let s = if d > 0.0 { 1 } else { -1 };
        if runs.last() != Some(&s) {
            runs.push(s);
        }
    }
    runs
}

/// Length of the maximal interval around the center on which `m` increases.
pub fn increasing_stretch(m: &Profile, floor: f64) -> f64 {
    let g = m.grid;
    let c = g.center().unwrap_or(g.n / 2);
    let v = &m.values;
    let mut lo = c;
    while lo > 0 && v[lo] - v[lo - 1] > floor {
        lo -= 1;
    }
    let mut hi = c;
    while hi + 1 < g.n && v[hi + 1] - v[hi] > floor {
        hi += 1;
    }
    g.x(hi) - g.x(lo)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HydroError {
    /// Sup over nodes outside the jump window.
    pub m: f64,
    /// Sup over all nodes.
    pub h: f64,
}

/// Distance between the mesoscopic state at `eps^-1 x` and the macroscopic
/// profile at `x`; `m` skips `|x - x0| < half_window` (macroscopic units).
pub fn hydrodynamic_error(state: &MesoState, stefan: &StefanSolution, half_window: f64) -> Result<HydroError> {
    let g = state.grid;
    let xs: Vec<f64> = g.points().iter().map(|x| x * g.epsilon).collect();
    let (h, m) = stefan.sample(&xs)?;
    let mut err = HydroError { m: 0.0, h: 0.0 };
    for i in 0..g.n {
        err.h = err.h.max((state.h.values[i] - h[i]).abs());
        if (xs[i] - stefan.x0).abs() >= half_window {
            err.m = err.m.max((state.m.values[i] - m[i]).abs());
        }
    }
    Ok(err)
}
