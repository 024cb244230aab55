//! Principal eigenpair of `A = p J^neum *`, the gap below it, and inversion
//! of `A - 1` off the principal direction.
//!
//! `A` is self-adjoint for `<f, g> = int f g / p`, which is used throughout.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{integrate, sup_norm, Profile};
use crate::instanton::Instanton;
use crate::meso::MesoState;
use crate::stats::linear_fit;

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub lambda: f64,
    /// Positive, with `<u, u> = 1`.
    pub u: Profile,
    /// Modulus of the largest eigenvalue off `u`.
    pub lambda2: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub tol: f64,
    /// Pointwise relative change below which the eigenvector counts as converged.
    pub pointwise_tol: f64,
    pub max_iter: usize,
    pub gap_tol: f64,
    pub gap_max_iter: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tol: 1e-15,
            pointwise_tol: 1e-11,
            max_iter: 20_000,
            gap_tol: 1e-9,
            gap_max_iter: 5_000,
        }
    }
}

/// `<f, g> = int f g / p`.
pub fn weighted_inner(state: &MesoState, f: &[f64], g: &[f64]) -> f64 {
    let v: Vec<f64> = (0..f.len()).map(|i| f[i] * g[i] / state.p.values[i]).collect();
    integrate(&state.grid, &v)
}

pub fn rayleigh_quotient(state: &MesoState, v: &[f64]) -> f64 {
    weighted_inner(state, v, &state.apply_a(v)) / weighted_inner(state, v, v)
}

/// Power iteration seeded with `p`.
pub fn max_eig(state: &MesoState, opts: &SpectralOptions) -> Result<SpectralResult> {
    let mut u = state.p.values.clone();
    normalize(state, &mut u);
    let mut lambda = rayleigh_quotient(state, &u);
    let mut iterations = 0;
    loop {
        let mut w = state.apply_a(&u);
        let rq = weighted_inner(state, &u, &w);
        normalize(state, &mut w);
        let peak = sup_norm(&w);
        let mut rel = 0.0_f64;
        for (a, b) in w.iter().zip(&u) {
            if *a > 1e-250 * peak {
                rel = rel.max((a - b).abs() / a);
            }
        }
        u = w;
        iterations += 1;
        let settled = (rq - lambda).abs() <= opts.tol * rq.abs().max(1.0) && rel < opts.pointwise_tol;
        lambda = rq;
        if settled {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                what: "power iteration",
                iterations,
                last: rel,
            });
        }
    }
    let lambda = rayleigh_quotient(state, &u);
    let u = Profile::new(state.grid, u)?;
    let lambda2 = gap_estimate(state, &u.values, opts)?;
    Ok(SpectralResult {
        lambda,
        u,
        lambda2,
        iterations,
    })
}

fn normalize(state: &MesoState, v: &mut [f64]) {
    let nrm = weighted_inner(state, v, v).sqrt();
    for x in v.iter_mut() {
        *x /= nrm;
    }
}

fn deflate(state: &MesoState, v: &mut [f64], u: &[f64]) {
    let c = weighted_inner(state, v, u) / weighted_inner(state, u, u);
    for (a, b) in v.iter_mut().zip(u) {
        *a -= c * b;
    }
}

/// Deterministic seed with components in every direction.
fn probe_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64;
            (0.37 * t).sin() + 0.5 * (1.3 * t + 0.2).cos() + 0.25
        })
        .collect()
}

/// `|lambda_2|` by power iteration on the complement of `u`.
pub fn gap_estimate(state: &MesoState, u: &[f64], opts: &SpectralOptions) -> Result<f64> {
    let mut psi = probe_vector(u.len());
    deflate(state, &mut psi, u);
    normalize(state, &mut psi);
    let mut est = 0.0;
    for _ in 0..opts.gap_max_iter {
        let mut w = state.apply_a(&psi);
        deflate(state, &mut w, u);
        let growth = weighted_inner(state, &w, &w).sqrt();
        if growth == 0.0 {
            return Ok(0.0);
        }
        for x in w.iter_mut() {
            *x /= growth;
        }
        psi = w;
        if (growth - est).abs() <= opts.gap_tol * growth {
            return Ok(growth);
        }
        est = growth;
    }
    Ok(est)
}

/// Solves `(A - 1) x = f~` with `f~ = f - <f, u> u / <u, u>` and `x` orthogonal to `u`.
pub fn solve_l_complement(state: &MesoState, spec: &SpectralResult, f: &[f64]) -> Result<Vec<f64>> {
    if spec.lambda2 >= 1.0 {
        return Err(Error::GapClosed { lambda2: spec.lambda2 });
    }
    let u = &spec.u.values;
    let mut ft = f.to_vec();
    deflate(state, &mut ft, u);
    let scale = sup_norm(&ft).max(1e-300);
    // x = -sum_n A^n f~ while it converges quickly, conjugate gradients otherwise
    let x = if spec.lambda2 < 0.95 {
        let mut term = ft.clone();
        let mut x: Vec<f64> = ft.iter().map(|v| -v).collect();
        let mut converged = false;
        for _ in 0..20_000 {
            term = state.apply_a(&term);
            deflate(state, &mut term, u);
            for (a, b) in x.iter_mut().zip(&term) {
                *a -= b;
            }
            if sup_norm(&term) < 1e-15 * scale {
                converged = true;
                break;
            }
        }
        if converged {
            x
        } else {
            conjugate_gradient(state, u, &ft)?
        }
    } else {
        conjugate_gradient(state, u, &ft)?
    };
    let mut check = state.apply_a(&x);
    for i in 0..x.len() {
        check[i] -= x[i] + ft[i];
    }
    let res = sup_norm(&check);
    if res >= 1e-9 * scale.max(1.0) {
        return Err(Error::NonConvergence {
            what: "complement solve",
            iterations: 0,
            last: res,
        });
    }
    Ok(x)
}

/// CG for `(1 - A) y = f~` in the weighted inner product; returns `x = -y`.
fn conjugate_gradient(state: &MesoState, u: &[f64], ft: &[f64]) -> Result<Vec<f64>> {
    let op = |v: &[f64]| -> Vec<f64> {
        let mut w = state.apply_a(v);
        for i in 0..v.len() {
            w[i] = v[i] - w[i];
        }
        deflate(state, &mut w, u);
        w
    };
    let n = ft.len();
    let mut y = vec![0.0; n];
    let mut r = ft.to_vec();
    let mut d = r.clone();
    let mut rr = weighted_inner(state, &r, &r);
    let stop = 1e-30 * rr.max(1e-300);
    for _ in 0..10 * n {
        if rr <= stop {
            break;
        }
        let ad = op(&d);
        let alpha = rr / weighted_inner(state, &d, &ad);
        for i in 0..n {
            y[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rr_new = weighted_inner(state, &r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
    }
    Ok(y.into_iter().map(|v| -v).collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct UShape {
    /// Sup of `|u - m~'|` on the window around the interface.
    pub sup_diff: f64,
    pub window: f64,
    /// Smallest R^2 of the log-linear tail fits on the two sides.
    pub tail_r2: f64,
    pub tail_rate: f64,
    pub tail_points: usize,
}

/// Compares `u` with the normalized front derivative centered at `center`
/// (mesoscopic) on `|x - center| <= window_const * log(1/eps)`, and fits
/// `log u` on both tails (the last two units before each boundary are skipped).
pub fn check_u_shape(state: &MesoState, spec: &SpectralResult, inst: &Instanton, center: f64, window_const: f64) -> Result<UShape> {
    let g = &state.grid;
    let eps = g.epsilon;
    let window = window_const * (1.0 / eps).ln();
    let scale = inst.norm_sq.sqrt();
    let u = &spec.u.values;
    let mut sup = 0.0_f64;
    let peak = sup_norm(u);
    let mut sides: [(Vec<f64>, Vec<f64>); 2] = Default::default();
    for i in 0..g.n {
        let x = g.x(i);
        let r = x - center;
        if r.abs() <= window {
            sup = sup.max((u[i] - inst.derivative_at(r) / scale).abs());
        } else {
            let to_edge = if r > 0.0 { g.hi() - x } else { x - g.lo() };
            if to_edge > 2.0 && u[i] > 1e-280 * peak {
                let s = &mut sides[usize::from(r > 0.0)];
                s.0.push(r.abs());
                s.1.push(u[i].ln());
            }
        }
    }
    let mut r2 = f64::INFINITY;
    let mut rate = 0.0;
    let mut points = 0;
    for (xs, ys) in &sides {
        if xs.len() >= 5 {
            let fit = linear_fit(xs, ys).ok_or_else(|| invalid("degenerate tail fit"))?;
            r2 = r2.min(fit.r2);
            rate += -fit.slope * xs.len() as f64;
            points += xs.len();
        }
    }
    if points == 0 {
        return Err(invalid("no tail points outside the window"));
    }
    Ok(UShape {
        sup_diff: sup,
        window,
        tail_r2: r2,
        tail_rate: rate / points as f64,
        tail_points: points,
    })
}
