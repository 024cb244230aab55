use stefan_core::antisym::*;
use stefan_core::grid::{mesoscopic_grid, Profile};
use stefan_core::meso::MesoState;
use stefan_core::kernel::build_kernel;
use stefan_core::stefan::{solve_metastable_stefan, solve_stefan, Branch};
use stefan_core::thermo::ThermoParams;
use stefan_core::Error;

fn p2() -> ThermoParams {
    ThermoParams::new(2.0).unwrap()
}

fn is_odd(v: &[f64], tol: f64) -> bool {
    let n = v.len();
    (0..n).all(|i| (v[i] + v[n - 1 - i]).abs() <= tol)
}

#[test]
fn composite_seed_properties() {
    let p = p2();
    let cfg = SolverConfig::default();
    let eps = 0.1;
    let setup = prepare(&p, &cfg, eps, 1.0).unwrap();
    let seed = build_seed(&p, &setup, eps, -0.02, 1.0, 2, Branch::Stable).unwrap();
    let g = setup.grid;
    assert!(is_odd(&seed.m0.values, 0.0));
    assert!(is_odd(&seed.h0.values, 1e-13));
    assert!(seed.m0.sup_norm() < 1.0);
    assert!((seed.xi_eps - seed.threshold - 4.0).abs() < 1e-12);
    // the front part solves the zero-field equation up to Neumann and matching effects
    for i in 0..g.n {
        let x = g.x(i);
        if x >= 0.0 && x <= seed.xi_eps - 1.0 {
            assert!(seed.h0.values[i].abs() < 1e-5, "x={x} h0={}", seed.h0.values[i]);
        }
    }
    // the two pieces meet continuously at the matching point
    let k = g.index_of(seed.xi_eps).unwrap_or_else(|| ((seed.xi_eps - g.lo()) / g.spacing) as usize);
    assert!((seed.m0.values[k + 1] - seed.m0.values[k]).abs() < 2.0 * eps);
    assert!(seed.odd_decay > 0.0 && seed.odd_decay < 1.0);
    let longer = build_seed(&p, &setup, eps, -0.02, 1.0, 1, Branch::Stable).unwrap();
    assert!(seed.odd_decay < longer.odd_decay);
}

#[test]
fn seed_rejects_wide_matching_point() {
    let p = p2();
    let cfg = SolverConfig::default();
    let setup = prepare(&p, &cfg, 0.1, 1.0).unwrap();
    assert!(build_seed(&p, &setup, 0.1, -0.02, 1.0, 10, Branch::Stable).is_err());
}

#[test]
fn flux_map_is_odd_and_monotone() {
    let p = p2();
    let cfg = SolverConfig::default();
    let eps = 0.1;
    let setup = prepare(&p, &cfg, eps, 1.0).unwrap();
    let seed = build_seed(&p, &setup, eps, -0.02, 1.0, 2, Branch::Stable).unwrap();
    let (next, state) = t_map(&p, &setup.kernel, &seed.h0, &seed.m0, eps, -0.02, &cfg).unwrap();
    assert!(is_odd(&next.values, 0.0));
    assert!(is_odd(&state.m.values, 1e-15));
    assert!(strictly_monotone(&next.values, 1.0, 0.0));
    // the field is the quadrature of the mobility integral from the center
    let c = setup.grid.center().unwrap();
    let f = flux_field(&p, &state.m, eps, -0.02, 1e-6).unwrap();
    assert_eq!(f.values[c], 0.0);
    assert_eq!(f.values, next.values);
    let sat = Profile::constant(setup.grid, 0.999_999_9);
    assert!(matches!(flux_field(&p, &sat, eps, -0.02, 1e-6), Err(Error::MobilityFloor { .. })));
}

#[test]
fn stable_solution() {
    let p = p2();
    let cfg = SolverConfig::default();
    for (eps, j) in [(0.1, -0.02), (0.1, 0.02), (0.05, -0.02)] {
        let s = solve_stable(&p, eps, j, 1.0, &cfg).unwrap();
        assert!(s.state.residual_norm < 1e-11);
        assert!(s.self_consistency < 1e-10);
        assert!(s.monotone);
        assert!(is_odd(&s.state.m.values, 1e-14));
        assert!(s.trace.contraction_ratios.iter().all(|&r| r < 1.0));
        assert!(s.trace.increments.len() <= 30);
        assert!(s.i_eps.is_none());

        let stefan = solve_stefan(&p, j, 0.0, 1.0, 3).unwrap();
        let err = hydrodynamic_error(&s.state, &stefan, eps * s.seed.xi_eps).unwrap();
        let scale = eps * (1.0 / eps).ln();
        assert!(err.m < 0.05 * scale, "eps={eps}: {}", err.m);
        assert!(err.h < 0.1 * scale, "eps={eps}: {}", err.h);
    }
}

#[test]
fn interface_region_shrinks() {
    let p = p2();
    let cfg = SolverConfig::default();
    let frac = |eps: f64| {
        let s = solve_stable(&p, eps, -0.02, 1.0, &cfg).unwrap();
        let v = &s.state.m.values;
        v.iter().filter(|m| m.abs() < p.m_beta).count() as f64 / v.len() as f64
    };
    let a = frac(0.1);
    let b = frac(0.05);
    assert!(b < a, "{a} {b}");
}

#[test]
fn metastable_solution() {
    let p = p2();
    let cfg = SolverConfig::default();
    let eps = 0.1;
    let s = solve_metastable(&p, eps, 0.02, 1.0, &cfg).unwrap();
    assert!(s.state.residual_norm < 1e-11);
    assert_eq!(monotone_runs(&s.state.m.values, 1e-12), vec![-1, 1, -1]);
    assert!(strictly_monotone(&s.state.h.values, -1.0, 0.0));
    let g = s.state.grid;
    for i in 0..g.n {
        let m = s.state.m.values[i].abs();
        if g.x(i).abs() > s.seed.xi_eps {
            assert!(m > p.m_star && m < 1.0);
        }
    }
    let i_eps = s.i_eps.unwrap();
    assert!(i_eps > 0.0 && i_eps < 2.0 * s.seed.xi_eps);
    let stefan = solve_metastable_stefan(&p, 0.02, 1.0, 3, false).unwrap();
    let err = hydrodynamic_error(&s.state, &stefan, eps * s.seed.xi_eps).unwrap();
    assert!(err.h < 0.05);

    assert!(solve_metastable(&p, eps, -0.02, 1.0, &cfg).is_err());
}

#[test]
fn infeasible_and_degenerate_inputs() {
    let p = p2();
    let cfg = SolverConfig::default();
    assert!(matches!(solve_stable(&p, 0.1, -0.2, 1.0, &cfg), Err(Error::Infeasible { .. })));
    assert!(solve_stable(&p, 0.1, 0.0, 1.0, &cfg).is_err());
    assert!(matches!(
        solve_metastable(&p, 0.1, 0.2, 1.0, &cfg),
        Err(Error::MetastableBreakdown { .. })
    ));
}

#[test]
fn hydro_error_vanishes_on_the_limit_profile() {
    let p = p2();
    let k = build_kernel(0.05).unwrap();
    let stefan = solve_stefan(&p, -0.02, 0.0, 1.0, 3).unwrap();
    let g = mesoscopic_grid(-10.0, 10.0, 0.05).unwrap();
    let g = stefan_core::grid::Grid { epsilon: 0.1, ..g };
    let xs: Vec<f64> = g.points().iter().map(|x| 0.1 * x).collect();
    let (h, m) = stefan.sample(&xs).unwrap();
    let state = MesoState::new(&p, &k, Profile::new(g, h).unwrap(), Profile::new(g, m).unwrap()).unwrap();
    let err = hydrodynamic_error(&state, &stefan, 0.0).unwrap();
    assert_eq!(err.h, 0.0);
    assert_eq!(err.m, 0.0);
}

#[test]
fn monotonicity_helpers() {
    assert!(strictly_monotone(&[0.0, 1.0, 2.0], 1.0, 0.5));
    assert!(!strictly_monotone(&[0.0, 1.0, 1.2], 1.0, 0.5));
    assert!(strictly_monotone(&[2.0, 1.0, 0.0], -1.0, 0.0));
    assert_eq!(monotone_runs(&[0.0, -1.0, -1.0, 0.5, 2.0, 1.0], 1e-12), vec![-1, 1, -1]);
    assert_eq!(monotone_runs(&[1.0, 1.0], 0.0), Vec::<i8>::new());
    let g = mesoscopic_grid(-1.0, 1.0, 0.1).unwrap();
    let m = Profile::from_fn(g, |x| if x.abs() < 0.45 { x } else { -x });
    assert!((increasing_stretch(&m, 0.0) - 0.8).abs() < 1e-12);
}
