use std::sync::OnceLock;

use proptest::prelude::*;
use stefan_core::asym::*;
use stefan_core::grid::{mesoscopic_grid, sup_norm, Profile};
use stefan_core::thermo::ThermoParams;
use stefan_core::Error;

const X0: f64 = 0.2;
const J: f64 = -0.02;

fn p2() -> ThermoParams {
    ThermoParams::new(2.0).unwrap()
}

fn solution() -> &'static AsymSolution {
    static CELL: OnceLock<AsymSolution> = OnceLock::new();
    CELL.get_or_init(|| solve_off_center(&p2(), 0.1, J, X0, &AsymConfig::default()).unwrap())
}

#[test]
fn weight_shape() {
    let eps = 0.05;
    let w = WeightedNorm::new(0.2, eps, X0).unwrap();
    assert!((w.a_minus - 0.2 * 0.8 / 1.2).abs() < 1e-15);
    assert!((w.weight(-1.0 / eps) - 1.0).abs() < 1e-12);
    assert!((w.weight(1.0 / eps) - 1.0).abs() < 1e-12);
    let peak = (0.2f64 * (1.0 - X0) / eps).exp();
    assert!((w.weight(X0 / eps) - peak).abs() < 1e-9 * peak);
    // both pieces agree at the interface
    let left = (w.a_minus * (X0 / eps - 1e-9 + 1.0 / eps)).exp();
    assert!((left - peak).abs() < 1e-6 * peak);
    for x in [-15.0, -5.0, 0.0, 3.9] {
        assert!(w.weight(x) < w.weight(x + 0.1));
    }
    for x in [4.0, 10.0, 19.0] {
        assert!(w.weight(x) > w.weight(x + 0.1));
    }
    assert!(WeightedNorm::new(0.0, eps, X0).is_err());
    assert!(WeightedNorm::new(0.2, eps, 1.0).is_err());
}

#[test]
fn weighted_norm_examples() {
    let eps = 0.1;
    let w = WeightedNorm::new(0.25, eps, X0).unwrap();
    let g = mesoscopic_grid(-10.0, 10.0, 0.05).unwrap();
    let zero = vec![0.0; g.n];
    assert_eq!(w.norm(&g, &zero), 0.0);
    // a bump at the boundary is weighted by one
    let mut edge = zero.clone();
    edge[g.n - 1] = 0.5;
    assert!((w.norm(&g, &edge) - 0.5).abs() < 1e-12);
    assert!(w.norm(&g, &edge) > 0.1);
    // the same bump at the interface is amplified
    let mut mid = zero.clone();
    mid[g.index_of(2.0).unwrap()] = 0.5;
    assert!(w.norm(&g, &mid) > 0.5 * (0.25f64 * 8.0).exp() * 0.99);
}

#[test]
fn restricted_seed() {
    let s = solution();
    let pr = &s.problem;
    let g = pr.grid();
    assert!((g.lo() + 10.0).abs() < 1e-9 && (g.hi() - 10.0).abs() < 1e-9);
    assert!((g.x(pr.interface_index) - 2.0).abs() < 1e-9);
    assert!(pr.seed_residual < 1e-9);
    // the boundary correction only lives within the kernel range of the cut
    for i in 0..g.n {
        if g.x(i) < g.hi() - 1.0 - 1e-9 {
            assert!(pr.r_eps.values[i].abs() < 1e-15, "x={}", g.x(i));
        }
    }
    let r = pr.r_eps.sup_norm();
    assert!(r > 0.0 && r < 1e-2);
    // h_eps is the extended field plus the correction
    for i in 0..g.n {
        assert!((pr.h_eps.values[i] - pr.extended.h.values[i] - pr.r_eps.values[i]).abs() < 1e-15);
    }
}

#[test]
fn extended_eigenvector_symmetric_about_interface() {
    let s = solution();
    let u = &s.problem.extended_spectrum.u.values;
    let n = u.len();
    let peak = sup_norm(u);
    for i in 0..n {
        assert!((u[i] - u[n - 1 - i]).abs() < 1e-8 * peak);
    }
    assert!(s.problem.u_star.values.iter().all(|&v| v > 0.0));
}

#[test]
fn projection_removes_eigen_component() {
    let s = solution();
    let pr = &s.problem;
    let g = pr.grid();
    let f: Vec<f64> = g.points().iter().map(|x| 0.3 + 0.01 * x + (0.2 * x).sin()).collect();
    let q = pr.project(&f);
    assert!(pr.u_star_integral(&q).abs() < 1e-12 * sup_norm(&f));
    // constants are removed entirely
    let c = pr.project(&vec![2.5; g.n]);
    assert!(sup_norm(&c) < 1e-12);
    let field = projected_field(&p2(), pr, &pr.m_eps, 1e-6).unwrap();
    assert!(pr.u_star_integral(&field.values).abs() < 1e-12 * field.sup_norm());
}

#[test]
fn solution_properties() {
    let s = solution();
    let eps = 0.1;
    assert!(!s.mirrored);
    assert!(s.state.residual_norm < 1e-11);
    assert!((s.eps_x_eps() - X0).abs() <= eps);
    let mz = s.m_zero.unwrap();
    assert!((eps * mz - X0).abs() <= eps);
    assert!(s.seed_report.member(), "{:?}", s.seed_report);
    assert!(s.final_report.member(), "{:?}", s.final_report);
    let w = &s.weighted_increments;
    assert!(*w.last().unwrap() < 1e-9);
    for pair in w.windows(2) {
        assert!(pair[1] < 0.5 * pair[0]);
    }
    assert!(s.eigenvector_shift.unwrap() < 1e-3);
    let m = &s.state.m.values;
    assert!(m.windows(2).all(|p| p[1] > p[0]));
}

#[test]
fn reflected_interface() {
    let p = p2();
    let cfg = AsymConfig::default();
    let base = solution();
    let refl = solve_off_center(&p, 0.1, -J, -X0, &cfg).unwrap();
    assert!(refl.mirrored);
    assert!((refl.interface_position + base.interface_position).abs() < 1e-12);
    let n = refl.state.m.len();
    for i in 0..n {
        assert!((refl.state.m.values[i] - base.state.m.values[n - 1 - i]).abs() < 1e-14);
        assert!((refl.state.h.values[i] - base.state.h.values[n - 1 - i]).abs() < 1e-14);
    }
    assert!(refl.state.residual_norm < 1e-11);
}

#[test]
fn invalid_inputs() {
    let p = p2();
    let cfg = AsymConfig::default();
    assert!(solve_off_center(&p, 0.1, J, 0.0, &cfg).is_err());
    assert!(solve_off_center(&p, 0.1, 0.0, X0, &cfg).is_err());
    assert!(build_asym_problem(&p, 0.1, J, 1.0, &cfg).is_err());
    assert!(matches!(build_asym_problem(&p, 0.03, J, X0, &cfg), Err(Error::Misaligned(_))));
    assert!(matches!(solve_off_center(&p, 0.1, -0.2, X0, &cfg), Err(Error::Infeasible { .. })));
}

#[test]
fn zero_crossing_examples() {
    let g = mesoscopic_grid(-2.0, 2.0, 0.1).unwrap();
    let v: Vec<f64> = g.points().iter().map(|x| (x - 0.33) * (x + 1.27)).collect();
    let z = zero_crossing(&g, &v, 0.0, -2.0, 2.0).unwrap();
    assert!((z - 0.33).abs() < 0.01);
    let z = zero_crossing(&g, &v, -1.0, -2.0, 2.0).unwrap();
    assert!((z + 1.27).abs() < 0.01);
    assert!(zero_crossing(&g, &v, 0.0, 0.5, 2.0).is_none());
    let w: Vec<f64> = g.points().iter().map(|x| x - 0.5).collect();
    assert!((zero_crossing(&g, &w, 0.0, -2.0, 2.0).unwrap() - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_bounds(a in 0.05f64..1.0, x0 in -0.9f64..0.9, t in -1.0f64..1.0, eps in prop::sample::select(vec![0.025, 0.05, 0.1, 0.2, 0.25])) {
        let w = WeightedNorm::new(a, eps, x0).unwrap();
        let x = t / eps;
        let e = w.weight(x);
        prop_assert!(e >= 1.0 - 1e-12);
        prop_assert!(e <= w.weight(x0 / eps) * (1.0 + 1e-12));
        let g = mesoscopic_grid(-1.0 / eps, 1.0 / eps, 0.05).unwrap();
        let f: Vec<f64> = g.points().iter().map(|y| (0.3 * y).cos()).collect();
        // N is a norm: homogeneous and at least the sup norm
        prop_assert!((w.norm(&g, &f.iter().map(|v| -2.0 * v).collect::<Vec<_>>()) - 2.0 * w.norm(&g, &f)).abs() < 1e-9 * w.norm(&g, &f));
        prop_assert!(w.norm(&g, &f) >= sup_norm(&f) * (1.0 - 1e-12));
    }
}

#[test]
fn seed_profile_matches_extended_state() {
    let s = solution();
    let pr = &s.problem;
    let g = pr.grid();
    let restricted = Profile { grid: g, values: pr.extended.m.values[..g.n].to_vec() };
    assert_eq!(restricted.values, pr.m_eps.values);
}
