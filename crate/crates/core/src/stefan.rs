//! Macroscopic free-boundary profiles: `h' = -j / chi(m)` with `m` on a branch
//! of the inverse of `phi'`, odd about the jump point `x0`.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::fmt17;
use crate::roots::dopri45;
use crate::thermo::{chi, phi_prime, positive_branch_root, ThermoParams};

/// The profile reaching `1 - SATURATION_GAP` defines the maximal length.
pub const SATURATION_GAP: f64 = 1e-6;
const ODE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `|m| > m_beta`, convex envelope.
    Stable,
    /// `m_star < |m| < m_beta`, jump between `-m_beta` and `m_beta`.
    Metastable,
}

/// Right half `r >= 0` of an odd profile, parametrized by an increasing
/// variable `q >= 0` with `dq/dr = |j| / chi(m(q))`.
#[derive(Clone, Copy, Debug)]
struct HalfLine {
    params: ThermoParams,
    j: f64,
    /// Sign of `m` to the right of the jump.
    sigma: f64,
    /// `+1` when `|h|` grows away from the jump on a stable branch.
    s: f64,
}

impl HalfLine {
    fn new(params: ThermoParams, j: f64, branch: Branch) -> Self {
        let (sigma, s) = match branch {
            Branch::Stable => (-j.signum(), 1.0),
            Branch::Metastable => (j.signum(), -1.0),
        };
        Self { params, j, sigma, s }
    }

    fn h_of(&self, q: f64) -> f64 {
        self.sigma * self.s * q
    }

    fn m_of(&self, q: f64) -> Result<f64> {
        Ok(self.sigma * positive_branch_root(&self.params, self.s * q)?)
    }

    fn q_end(&self) -> f64 {
        let p = &self.params;
        if self.s > 0.0 {
            phi_prime(p, 1.0 - SATURATION_GAP)
        } else {
            -phi_prime(p, p.m_star)
        }
    }

    /// Distance from the jump at which each `q` is reached; `on_step` sees `(q, r)`.
    fn r_of_q(&self, q: &[f64], on_step: impl FnMut(f64, f64)) -> Result<Vec<f64>> {
        let aj = self.j.abs();
        dopri45(
            |qq, _| Ok(chi(&self.params, self.m_of(qq)?) / aj),
            0.0,
            0.0,
            q,
            ODE_TOL,
            on_step,
        )
    }

    fn q_of_r(&self, r: &[f64]) -> Result<Vec<f64>> {
        let aj = self.j.abs();
        let qmax = self.q_end();
        dopri45(
            |_, q| Ok(aj / chi(&self.params, self.m_of(q.clamp(0.0, qmax))?)),
            0.0,
            0.0,
            r,
            ODE_TOL,
            |_, _| {},
        )
    }

    fn length(&self) -> Result<f64> {
        Ok(self.r_of_q(&[self.q_end()], |_, _| {})?[0])
    }

    /// `(h, m)` at distances `r >= 0`, any order.
    fn sample(&self, r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut order: Vec<usize> = (0..r.len()).collect();
        order.sort_by(|&a, &b| r[a].total_cmp(&r[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| r[i]).collect();
        let q = self.q_of_r(&sorted)?;
        let mut h = vec![0.0; r.len()];
        let mut m = vec![0.0; r.len()];
        for (k, &i) in order.iter().enumerate() {
            h[i] = self.h_of(q[k]);
            m[i] = self.m_of(q[k])?;
        }
        Ok((h, m))
    }
}

/// Profile sampled on `x`; the jump abscissa `x0` appears twice, carrying the
/// left and right limits.
#[derive(Clone, Debug, Serialize)]
pub struct StefanSolution {
    #[serde(skip)]
    pub params: ThermoParams,
    pub j: f64,
    pub x0: f64,
    pub domain: (f64, f64),
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub m: Vec<f64>,
    /// Maximal length (stable) or breakdown length (metastable).
    pub ell_j: f64,
    pub branch: Branch,
}

impl StefanSolution {
    fn half(&self) -> HalfLine {
        HalfLine::new(self.params, self.j, self.branch)
    }

    /// `(h, m)` at arbitrary abscissae; at `x0` the right limit is returned.
    pub fn sample(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let r: Vec<f64> = xs.iter().map(|x| (x - self.x0).abs()).collect();
        let (mut h, mut m) = self.half().sample(&r)?;
        for (i, x) in xs.iter().enumerate() {
            if *x < self.x0 {
                h[i] = -h[i];
                m[i] = -m[i];
            }
        }
        Ok((h, m))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,h,m")?;
        for i in 0..self.x.len() {
            writeln!(w, "{},{},{}", fmt17(self.x[i]), fmt17(self.h[i]), fmt17(self.m[i]))?;
        }
        Ok(())
    }
}

fn check_current(j: f64) -> Result<()> {
    if j == 0.0 || !j.is_finite() {
        return Err(invalid("current j must be nonzero (j = 0 is the critical case)"));
    }
    Ok(())
}

/// Maximal length of a stable profile with current `j`.
pub fn maximal_length(params: &ThermoParams, j: f64) -> Result<f64> {
    check_current(j)?;
    HalfLine::new(*params, j, Branch::Stable).length()
}

/// Length at which the metastable profile reaches the spinodal.
pub fn breakdown_length(params: &ThermoParams, j: f64) -> Result<f64> {
    check_current(j)?;
    HalfLine::new(*params, j, Branch::Metastable).length()
}

/// Maximal stable solution on `(-ell_j, ell_j)`, sampled at the integrator nodes.
pub fn solve_maximal(params: &ThermoParams, j: f64) -> Result<StefanSolution> {
    check_current(j)?;
    let half = HalfLine::new(*params, j, Branch::Stable);
    let mut nodes = Vec::new();
    let ell_j = half.r_of_q(&[half.q_end()], |q, r| nodes.push((q, r)))?[0];
    let mut right = Vec::with_capacity(nodes.len());
    for &(q, r) in &nodes {
        right.push((r, half.h_of(q), half.m_of(q)?));
    }
    let mut sol = assemble(*params, j, 0.0, &right, Branch::Stable, ell_j);
    sol.domain = (-ell_j, ell_j);
    Ok(sol)
}

fn assemble(params: ThermoParams, j: f64, x0: f64, right: &[(f64, f64, f64)], branch: Branch, ell_j: f64) -> StefanSolution {
    let mut x = Vec::with_capacity(2 * right.len());
    let mut h = Vec::with_capacity(2 * right.len());
    let mut m = Vec::with_capacity(2 * right.len());
    for &(r, hh, mm) in right.iter().rev() {
        x.push(x0 - r);
        h.push(-hh);
        m.push(-mm);
    }
    for &(r, hh, mm) in right {
        x.push(x0 + r);
        h.push(hh);
        m.push(mm);
    }
    StefanSolution {
        params,
        j,
        x0,
        domain: (f64::NAN, f64::NAN),
        x,
        h,
        m,
        ell_j,
        branch,
    }
}

fn sample_domain(params: ThermoParams, j: f64, x0: f64, ell: f64, n: usize, branch: Branch, ell_j: f64) -> Result<StefanSolution> {
    if n < 2 {
        return Err(invalid("need at least two sample points"));
    }
    let mut xs: Vec<f64> = (0..n).map(|i| -ell + 2.0 * ell * i as f64 / (n - 1) as f64).collect();
    let at = xs.partition_point(|&x| x < x0 - 1e-12 * ell);
    if xs.get(at).is_some_and(|&x| (x - x0).abs() <= 1e-12 * ell) {
        xs[at] = x0;
        xs.insert(at, x0);
    } else {
        xs.insert(at, x0);
        xs.insert(at, x0);
    }
    let mut sol = StefanSolution {
        params,
        j,
        x0,
        domain: (-ell, ell),
        x: Vec::new(),
        h: Vec::new(),
        m: Vec::new(),
        ell_j,
        branch,
    };
    let (h, mut m) = sol.sample(&xs)?;
    // left limit at the first copy of x0
    m[at] = -m[at];
    sol.x = xs;
    sol.h = h;
    sol.m = m;
    Ok(sol)
}

/// Stable profile on `(-ell, ell)` with its jump at `x0`, sampled on `n` points.
pub fn solve_stefan(params: &ThermoParams, j: f64, x0: f64, ell: f64, n: usize) -> Result<StefanSolution> {
    check_current(j)?;
    if !(ell > 0.0) || x0.abs() >= ell {
        return Err(invalid(format!("need |x0| < ell, got x0={x0}, ell={ell}")));
    }
    let ell_j = maximal_length(params, j)?;
    let reach = ell + x0.abs();
    if reach >= ell_j {
        return Err(Error::Infeasible { ell: reach, ell_j });
    }
    sample_domain(*params, j, x0, ell, n, Branch::Stable, ell_j)
}

/// Metastable profile on `(-ell, ell)` with its jump at the origin. For `j > 0`
/// the left phase is negative; `j < 0` (mirrored) needs `allow_mirrored`.
pub fn solve_metastable_stefan(params: &ThermoParams, j: f64, ell: f64, n: usize, allow_mirrored: bool) -> Result<StefanSolution> {
    check_current(j)?;
    if j < 0.0 && !allow_mirrored {
        return Err(invalid("metastable profile needs j > 0 unless mirrored"));
    }
    if !(ell > 0.0) {
        return Err(invalid("ell must be positive"));
    }
    let breakdown = breakdown_length(params, j)?;
    if ell >= breakdown {
        return Err(Error::MetastableBreakdown { ell, breakdown });
    }
    sample_domain(*params, j, 0.0, ell, n, Branch::Metastable, breakdown)
}

/// Stable profile on `(-ell, ell)` with boundary values `m(-ell) = m_minus`,
/// `m(ell) = m_plus`, found by shooting on the current and the jump position.
pub fn solve_dirichlet(params: &ThermoParams, m_minus: f64, m_plus: f64, ell: f64, n: usize) -> Result<StefanSolution> {
    let mb = params.m_beta;
    if !(m_minus.abs() > mb && m_plus.abs() > mb && m_minus.abs() < 1.0 && m_plus.abs() < 1.0) {
        return Err(invalid("boundary values must satisfy m_beta < |m| < 1"));
    }
    if m_minus.signum() == m_plus.signum() {
        return Err(invalid("boundary values must have opposite signs"));
    }
    if !(ell > 0.0) {
        return Err(invalid("ell must be positive"));
    }
    let sign = if m_plus > 0.0 { -1.0 } else { 1.0 };
    // distance from the jump at which |m| reaches the target, for current j
    let reach = |j: f64, target: f64| -> Result<f64> {
        let half = HalfLine::new(*params, j, Branch::Stable);
        Ok(half.r_of_q(&[phi_prime(params, target)], |_, _| {})?[0])
    };
    let width = |j: f64| -> Result<f64> { Ok(reach(j, m_plus.abs())? + reach(j, m_minus.abs())?) };
    // width decreases with |j|
    let (mut lo, mut hi) = (1e-8_f64, 1e3_f64);
    if width(sign * hi)? > 2.0 * ell || width(sign * lo)? < 2.0 * ell {
        return Err(invalid("no current matches the requested width"));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if width(sign * mid)? > 2.0 * ell {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    let j = sign * (lo * hi).sqrt();
    let x0 = ell - reach(j, m_plus.abs())?;
    let ell_j = maximal_length(params, j)?;
    let sol = sample_domain(*params, j, x0, ell, n, Branch::Stable, ell_j)?;
    let (_, ends) = sol.sample(&[-ell, ell])?;
    let miss = (ends[0] - m_minus).abs().max((ends[1] - m_plus).abs());
    if miss >= 1e-6 {
        return Err(Error::NonConvergence {
            what: "Dirichlet shooting",
            iterations: 200,
            last: miss,
        });
    }
    Ok(sol)
}
