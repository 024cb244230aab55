//! The mesoscopic equation `m = tanh(beta J^neum * m + beta h)` for a given
//! field `h`, and the linearization `A = p J^neum *` around a solution.

use crate::banded::Banded;
use crate::error::{invalid, Error, Result};
use crate::grid::{sup_diff, sup_norm, Grid, Profile};
use crate::kernel::{Boundary, Kernel};
use crate::thermo::ThermoParams;

/// Magnetizations this close to one are treated as saturated.
pub const SATURATION: f64 = 1.0 - 1e-8;

#[derive(Clone, Debug)]
pub struct MesoState {
    pub grid: Grid,
    pub h: Profile,
    pub m: Profile,
    /// `beta / cosh^2(beta J * m + beta h)`.
    pub p: Profile,
    pub residual_norm: f64,
    pub kernel: Kernel,
    pub beta: f64,
}

/// Field for which `m` solves the equation exactly.
pub fn effective_field(params: &ThermoParams, kernel: &Kernel, m: &Profile) -> Result<Profile> {
    if m.sup_norm() >= 1.0 {
        return Err(Error::Saturation { sup: m.sup_norm() });
    }
    let c = kernel.convolve(m, Boundary::Neumann)?;
    let values = m
        .values
        .iter()
        .zip(&c.values)
        .map(|(v, cv)| v.atanh() / params.beta - cv)
        .collect();
    Profile::new(m.grid, values)
}

/// Sup norm of `m - tanh(beta J^neum * m + beta h)`.
pub fn residual(params: &ThermoParams, kernel: &Kernel, h: &Profile, m: &Profile) -> Result<f64> {
    let c = kernel.convolve(m, Boundary::Neumann)?;
    Ok((0..m.len())
        .map(|i| (m.values[i] - (params.beta * (c.values[i] + h.values[i])).tanh()).abs())
        .fold(0.0, f64::max))
}

impl MesoState {
    pub fn new(params: &ThermoParams, kernel: &Kernel, h: Profile, m: Profile) -> Result<Self> {
        if h.grid != m.grid {
            return Err(invalid("h and m live on different grids"));
        }
        let c = kernel.convolve(&m, Boundary::Neumann)?;
        let beta = params.beta;
        let mut res = 0.0_f64;
        let mut p = vec![0.0; m.len()];
        for i in 0..m.len() {
            let arg = beta * (c.values[i] + h.values[i]);
            res = res.max((m.values[i] - arg.tanh()).abs());
            p[i] = beta / arg.cosh().powi(2);
        }
        Ok(Self {
            grid: m.grid,
            p: Profile::new(m.grid, p)?,
            h,
            m,
            residual_norm: res,
            kernel: kernel.clone(),
            beta,
        })
    }

    /// `A psi = p J^neum * psi`.
    pub fn apply_a(&self, psi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; psi.len()];
        self.kernel
            .convolve_into(psi, Boundary::Neumann, &mut out)
            .expect("grid checked at construction");
        for (o, p) in out.iter_mut().zip(&self.p.values) {
            *o *= p;
        }
        out
    }
}

pub fn apply_a(state: &MesoState, psi: &[f64]) -> Vec<f64> {
    state.apply_a(psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMethod {
    /// Damped Picard, switching to Newton when it stalls.
    Auto,
    Picard,
    Newton,
}

#[derive(Clone, Copy, Debug)]
pub struct InnerOptions {
    pub tol: f64,
    pub omega: f64,
    pub max_picard: usize,
    /// Picard counts as stalled after this many steps with residual ratio above `stall_ratio`.
    pub stall_window: usize,
    pub stall_ratio: f64,
    pub newton_max: usize,
    /// Relative step size at which Newton stops.
    pub newton_rel_tol: f64,
    pub continuation_steps: usize,
    /// Keep `m` odd about the grid center.
    pub odd: bool,
    pub method: InnerMethod,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            omega: 0.7,
            max_picard: 5000,
            stall_window: 50,
            stall_ratio: 0.999,
            newton_max: 50,
            newton_rel_tol: 1e-12,
            continuation_steps: 16,
            odd: false,
            method: InnerMethod::Auto,
        }
    }
}

fn antisymmetrize(v: &mut [f64]) {
    let n = v.len();
    for i in 0..n / 2 {
        let a = 0.5 * (v[i] - v[n - 1 - i]);
        v[i] = a;
        v[n - 1 - i] = -a;
    }
    if n % 2 == 1 {
        v[n / 2] = 0.0;
    }
}

struct Problem<'a> {
    beta: f64,
    kernel: &'a Kernel,
    h: &'a [f64],
    matrix: Banded,
    odd: bool,
}

impl Problem<'_> {
    /// `(tanh(arg), p)` at `m`.
    fn image(&self, m: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut c = vec![0.0; m.len()];
        self.kernel
            .convolve_into(m, Boundary::Neumann, &mut c)
            .expect("length checked");
        let mut t = vec![0.0; m.len()];
        let mut p = vec![0.0; m.len()];
        for i in 0..m.len() {
            let arg = self.beta * (c[i] + self.h[i]);
            t[i] = arg.tanh();
            p[i] = self.beta / arg.cosh().powi(2);
        }
        (t, p)
    }

    fn residual(&self, m: &[f64]) -> f64 {
        sup_diff(m, &self.image(m).0)
    }

    fn picard(&self, m: &mut Vec<f64>, opts: &InnerOptions) -> Result<bool> {
        let mut omega = opts.omega;
        let mut res = self.residual(m);
        let mut stalled = 0;
        for _ in 0..opts.max_picard {
            if res < opts.tol {
                return Ok(true);
            }
            let (t, _) = self.image(m);
            let trial: Vec<f64> = m.iter().zip(&t).map(|(a, b)| (1.0 - omega) * a + omega * b).collect();
            let mut trial = trial;
            if self.odd {
                antisymmetrize(&mut trial);
            }
            let new_res = self.residual(&trial);
            if new_res > res {
                omega *= 0.5;
                if omega < 1e-6 {
                    return Ok(false);
                }
            }
            stalled = if new_res > opts.stall_ratio * res { stalled + 1 } else { 0 };
            *m = trial;
            res = new_res;
            check_saturation(m)?;
            if stalled >= opts.stall_window {
                return Ok(false);
            }
        }
        Ok(res < opts.tol)
    }

    fn newton(&self, m: &mut Vec<f64>, opts: &InnerOptions) -> Result<bool> {
        let mut res = self.residual(m);
        for _ in 0..opts.newton_max {
            if res < opts.tol {
                return Ok(true);
            }
            let (t, p) = self.image(m);
            let f: Vec<f64> = m.iter().zip(&t).map(|(a, b)| b - a).collect();
            let lu = self.matrix.identity_minus_scaled(&p).factor()?;
            let step = lu.solve(&f);
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda > 1e-4 {
                let mut trial: Vec<f64> = m.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
                if self.odd {
                    antisymmetrize(&mut trial);
                }
                if sup_norm(&trial) < 1.0 {
                    let r = self.residual(&trial);
                    if r < res || r < opts.tol {
                        *m = trial;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Ok(false);
            }
            check_saturation(m)?;
            if lambda * sup_norm(&step) <= opts.newton_rel_tol * sup_norm(m).max(1.0) && res < 1e3 * opts.tol {
                return Ok(true);
            }
        }
        Ok(res < opts.tol)
    }
}

fn check_saturation(m: &[f64]) -> Result<()> {
    let s = sup_norm(m);
    if s >= SATURATION {
        return Err(Error::Saturation { sup: s });
    }
    Ok(())
}

/// Solves for `m` given `h`, starting from `m_init`.
pub fn inner_solve(params: &ThermoParams, kernel: &Kernel, h: &Profile, m_init: &Profile, opts: &InnerOptions) -> Result<MesoState> {
    if h.grid != m_init.grid {
        return Err(invalid("h and m live on different grids"));
    }
    if (h.grid.spacing - kernel.spacing).abs() > 1e-12 * kernel.spacing {
        return Err(Error::SpacingMismatch {
            grid: h.grid.spacing,
            kernel: kernel.spacing,
        });
    }
    check_saturation(&m_init.values)?;
    let problem = Problem {
        beta: params.beta,
        kernel,
        h: &h.values,
        matrix: kernel.neumann_matrix(h.len())?,
        odd: opts.odd,
    };
    let mut m = m_init.values.clone();
    if opts.odd {
        antisymmetrize(&mut m);
    }
    let done = match opts.method {
        InnerMethod::Picard => problem.picard(&mut m, opts)?,
        InnerMethod::Newton => problem.newton(&mut m, opts)?,
        InnerMethod::Auto => problem.picard(&mut m, opts)? || problem.newton(&mut m, opts)?,
    };
    if !done {
        match continuation(params, &problem, &m_init.values, opts) {
            Ok(v) => m = v,
            // a front far from its resting place drifts along a nearly neutral
            // translation mode; plain Picard still gets there, slowly
            Err(e) if opts.method == InnerMethod::Auto => {
                let patient = InnerOptions {
                    max_picard: 20 * opts.max_picard,
                    stall_window: usize::MAX,
                    ..*opts
                };
                if !problem.picard(&mut m, &patient)? {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    let state = MesoState::new(params, kernel, h.clone(), Profile::new(h.grid, m)?)?;
    if state.residual_norm >= opts.tol.max(1e-14) * 10.0 {
        return Err(Error::NonConvergence {
            what: "inner solve",
            iterations: opts.newton_max,
            last: state.residual_norm,
        });
    }
    Ok(state)
}

/// Follows `h_t = h_seed + t (h - h_seed)` from `t = 0`, where `m_seed` is exact.
fn continuation(params: &ThermoParams, problem: &Problem, m_seed: &[f64], opts: &InnerOptions) -> Result<Vec<f64>> {
    let grid_len = m_seed.len();
    let mut c = vec![0.0; grid_len];
    problem.kernel.convolve_into(m_seed, Boundary::Neumann, &mut c)?;
    let h_seed: Vec<f64> = (0..grid_len).map(|i| m_seed[i].atanh() / params.beta - c[i]).collect();
    let target = problem.h;
    let mut m = m_seed.to_vec();
    let mut t = 0.0;
    let mut dt = 1.0 / opts.continuation_steps.max(1) as f64;
    while t < 1.0 {
        let t1 = (t + dt).min(1.0);
        let h1: Vec<f64> = (0..grid_len).map(|i| h_seed[i] + t1 * (target[i] - h_seed[i])).collect();
        let step = Problem {
            beta: problem.beta,
            kernel: problem.kernel,
            h: &h1,
            matrix: problem.matrix.clone(),
            odd: problem.odd,
        };
        // predictor along dm/dt = (I - pK)^-1 p dh/dt
        let (_, p) = step.image(&m);
        let dh: Vec<f64> = (0..grid_len).map(|i| (t1 - t) * (target[i] - h_seed[i]) * p[i]).collect();
        let lu = step.matrix.identity_minus_scaled(&p).factor()?;
        let dm = lu.solve(&dh);
        let mut trial: Vec<f64> = m.iter().zip(&dm).map(|(a, b)| a + b).collect();
        let ok = sup_norm(&trial) < SATURATION && step.newton(&mut trial, opts)?;
        if ok {
            m = trial;
            t = t1;
        } else {
            dt *= 0.5;
            if dt < 1e-6 {
                return Err(Error::NonConvergence {
                    what: "continuation",
                    iterations: opts.continuation_steps,
                    last: t,
                });
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::symmetric_grid;
    use crate::kernel::build_kernel;

    #[test]
    fn effective_field_round_trip() {
        let p = ThermoParams::new(2.0).unwrap();
        let g = symmetric_grid(0.1, 1.0, 0.05).unwrap();
        let k = build_kernel(g.spacing).unwrap();
        let m = Profile::from_fn(g, |x| 0.96 * (2.0 * x).tanh());
        let h = effective_field(&p, &k, &m).unwrap();
        assert!(residual(&p, &k, &h, &m).unwrap() < 1e-14);
    }

    #[test]
    fn saturated_field() {
        let p = ThermoParams::new(2.0).unwrap();
        let g = symmetric_grid(0.1, 1.0, 0.05).unwrap();
        let k = build_kernel(g.spacing).unwrap();
        let h = Profile::constant(g, 10.0);
        let m = Profile::constant(g, 0.9);
        assert!(matches!(
            inner_solve(&p, &k, &h, &m, &InnerOptions::default()),
            Err(Error::Saturation { .. })
        ));
    }
}
