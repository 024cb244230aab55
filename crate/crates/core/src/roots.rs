//! Scalar root finding, maximization and the embedded Runge-Kutta pair.

use crate::error::{Error, Result};

/// Bisection down to a bracket of width `1e-15`, followed by one Newton step
/// that is kept only if it stays in the bracket and lowers the residual.
pub fn bisect_polish(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!("f({lo})={flo}, f({hi})={fhi}")));
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    let d = df(x);
    if d != 0.0 && d.is_finite() {
        let y = x - fx / d;
        if y >= lo && y <= hi && f(y).abs() < fx.abs() {
            return Ok(y);
        }
    }
    Ok(x)
}

/// Golden-section maximization of a concave function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(a, f(a)), (b, f(b)), (c, fc), (d, fd)];
    candidates
        .into_iter()
        .fold((a, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Dormand-Prince 5(4) integration of a scalar ODE `y' = f(t, y)` from `t0`
/// forward through the increasing abscissae `stops`, returning `y` at each.
/// `on_step` sees every accepted node.
pub fn dopri45(
    mut f: impl FnMut(f64, f64) -> Result<f64>,
    t0: f64,
    y0: f64,
    stops: &[f64],
    atol: f64,
    mut on_step: impl FnMut(f64, f64),
) -> Result<Vec<f64>> {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let rtol = atol;
    let mut out = Vec::with_capacity(stops.len());
    let (mut t, mut y) = (t0, y0);
    on_step(t, y);
    let span = stops.last().map_or(0.0, |s| s - t0).abs().max(1e-12);
    let mut h = span * 1e-3;
    let mut k1 = f(t, y)?;
    for &stop in stops {
        if stop < t {
            return Err(Error::InvalidParameter("integration stops must increase".into()));
        }
        let mut steps = 0usize;
        while t < stop {
            steps += 1;
            if steps > 1_000_000 {
                return Err(Error::NonConvergence {
                    what: "ODE integration",
                    iterations: steps,
                    last: h,
                });
            }
            let last = t + h >= stop;
            let hh = if last { stop - t } else { h };
            let mut k = [0.0; 7];
            k[0] = k1;
            for s in 0..6 {
                let mut yy = y;
                for (r, a) in A[s].iter().enumerate().take(s + 1) {
                    yy += hh * a * k[r];
                }
                k[s + 1] = f(t + C[s] * hh, yy)?;
            }
            let mut y5 = y;
            for (r, a) in A[5].iter().enumerate() {
                y5 += hh * a * k[r];
            }
            let err: f64 = hh * E.iter().zip(&k).map(|(e, kk)| e * kk).sum::<f64>();
            let scale = atol + rtol * y.abs().max(y5.abs());
            let ratio = err.abs() / scale;
            if ratio <= 1.0 || hh < 1e-14 * span {
                t = if last { stop } else { t + hh };
                y = y5;
                k1 = k[6];
                on_step(t, y);
            }
            let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || ratio > 1.0 {
                h = hh * fac;
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect_polish(|x| x * x - 2.0, |x| 2.0 * x, 0.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn golden_on_parabola() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 1.0, -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dopri_exponential() {
        let ys = dopri45(|_, y| Ok(-y), 0.0, 1.0, &[0.5, 1.0, 3.0], 1e-11, |_, _| {}).unwrap();
        for (y, t) in ys.iter().zip([0.5f64, 1.0, 3.0]) {
            assert!((y - (-t).exp()).abs() < 1e-9);
        }
    }
}
