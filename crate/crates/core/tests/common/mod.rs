//! Brute-force oracles shared by the thermodynamics tests and the acceptance run.
#![allow(dead_code)]

use stefan_core::grid::Profile;
use stefan_core::kernel::build_kernel;
use stefan_core::thermo::{a_beta, phi, pressure, ThermoParams};

/// Lower convex hull of sampled points, evaluated back at the samples.
pub fn lower_hull_at_samples(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = vec![0.0; xs.len()];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a..=b {
            let t = (xs[i] - xs[a]) / (xs[b] - xs[a]);
            out[i] = ys[a] + t * (ys[b] - ys[a]);
        }
    }
    out
}


pub fn free_energy_double_sum(p: &ThermoParams, m: &Profile) -> f64 {
    let g = m.grid;
    let k = build_kernel(g.spacing).unwrap();
    let n = g.n;
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 * g.spacing } else { g.spacing };
    let jn = |i: usize, j: usize| {
        let (i, j) = (i as isize, j as isize);
        let last = (n - 1) as isize;
        k.at(i - j) + k.at(i + j) + k.at(i - (2 * last - j))
    };
    let mut local = 0.0;
    let mut pair = 0.0;
    for i in 0..n {
        local += w(i) * phi(p, m.values[i]);
        for j in 0..n {
            let d = m.values[i] - m.values[j];
            pair += w(i) * w(j) * jn(i, j) * d * d;
        }
    }
    local + 0.25 * pair
}


/// Worst `|sup_h (h s - P(h)) - a_beta(s)|` over `samples` values of `s`,
/// each maximized by golden section over `h` in `[-1, 1]`.
pub fn legendre_round_trip_error(p: &ThermoParams, samples: usize) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..samples {
        let s = -0.98 + 1.96 * k as f64 / (samples - 1) as f64;
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        let g = |h: f64| h * s - pressure(p, h);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..120 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if g(a) < g(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        worst = worst.max((g(0.5 * (lo + hi)) - a_beta(p, s)).abs());
    }
    worst
}
