use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stefan_core::grid::{mesoscopic_grid, sup_diff, Grid, Profile};
use stefan_core::kernel::{build_kernel, Boundary, Kernel};
use stefan_core::meso::*;
use stefan_core::spectral::weighted_inner;
use stefan_core::thermo::ThermoParams;
use stefan_core::Error;

fn setup(half: f64) -> (ThermoParams, Kernel, Grid) {
    let p = ThermoParams::new(2.0).unwrap();
    let k = build_kernel(0.05).unwrap();
    let g = mesoscopic_grid(-half, half, 0.05).unwrap();
    (p, k, g)
}

/// Dense Neumann convolution matrix assembled column by column.
fn dense_neumann(k: &Kernel, g: Grid) -> DMatrix<f64> {
    let n = g.n;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = k.convolve(&Profile::new(g, e).unwrap(), Boundary::Neumann).unwrap();
        for i in 0..n {
            a[(i, j)] = col.values[i];
        }
    }
    a
}

/// Positive root of `m = tanh(beta (m + h))` by bisection on `(0, 1)`.
fn constant_root(beta: f64, h: f64) -> f64 {
    let f = |m: f64| m - (beta * (m + h)).tanh();
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn effective_field_round_trip() {
    let (p, k, g) = setup(6.0);
    let m = Profile::from_fn(g, |x| 0.9 * (1.3 * x).tanh() + 0.05 * (x).sin());
    let h = effective_field(&p, &k, &m).unwrap();
    assert!(residual(&p, &k, &h, &m).unwrap() < 1e-14);
    let state = MesoState::new(&p, &k, h, m).unwrap();
    assert!(state.residual_norm < 1e-14);
    let sat = Profile::constant(g, 1.0);
    assert!(matches!(effective_field(&p, &k, &sat), Err(Error::Saturation { .. })));
}

#[test]
fn residual_examples() {
    let (p, k, g) = setup(3.0);
    let zero = Profile::constant(g, 0.0);
    assert_eq!(residual(&p, &k, &zero, &zero).unwrap(), 0.0);
    let mb = Profile::constant(g, p.m_beta);
    assert!(residual(&p, &k, &zero, &mb).unwrap() < 1e-15);
    let half = Profile::constant(g, 0.5);
    let expected = (0.5 - (2.0f64 * 0.5).tanh()).abs();
    assert!((residual(&p, &k, &zero, &half).unwrap() - expected).abs() < 1e-15);
}

#[test]
fn constant_field_gives_constant_solution() {
    let (p, k, g) = setup(5.0);
    for h0 in [0.01, 0.1, 0.4] {
        let h = Profile::constant(g, h0);
        let init = Profile::constant(g, 0.9);
        let s = inner_solve(&p, &k, &h, &init, &InnerOptions::default()).unwrap();
        let oracle = constant_root(p.beta, h0);
        assert!(s.m.values.iter().all(|v| (v - oracle).abs() < 1e-11), "h0={h0}");
        assert!(s.residual_norm < 1e-12);
    }
}

#[test]
fn picard_and_newton_agree() {
    let (p, k, g) = setup(8.0);
    let h = Profile::from_fn(g, |x| 0.003 * x);
    let init = Profile::from_fn(g, |x| p.m_beta * x.tanh());
    let picard = InnerOptions { method: InnerMethod::Picard, ..InnerOptions::default() };
    let newton = InnerOptions { method: InnerMethod::Newton, ..InnerOptions::default() };
    let a = inner_solve(&p, &k, &h, &init, &picard).unwrap();
    let b = inner_solve(&p, &k, &h, &init, &newton).unwrap();
    let c = inner_solve(&p, &k, &h, &init, &InnerOptions::default()).unwrap();
    assert!(sup_diff(&a.m.values, &b.m.values) < 1e-10);
    assert!(sup_diff(&a.m.values, &c.m.values) < 1e-10);
}

#[test]
fn odd_data_stays_odd() {
    let (p, k, g) = setup(8.0);
    let h = Profile::from_fn(g, |x| 0.004 * x);
    let init = Profile::from_fn(g, |x| p.m_beta * (0.7 * x).tanh());
    let opts = InnerOptions { odd: true, ..InnerOptions::default() };
    let s = inner_solve(&p, &k, &h, &init, &opts).unwrap();
    let v = &s.m.values;
    let n = v.len();
    for i in 0..n {
        assert!((v[i] + v[n - 1 - i]).abs() < 1e-14);
    }
    assert!(s.residual_norm < 1e-12);
}

#[test]
fn susceptibility_at_fixed_point() {
    let (p, k, g) = setup(8.0);
    let h = Profile::from_fn(g, |x| 0.002 * x);
    let init = Profile::from_fn(g, |x| p.m_beta * x.tanh());
    let s = inner_solve(&p, &k, &h, &init, &InnerOptions::default()).unwrap();
    for (pv, m) in s.p.values.iter().zip(&s.m.values) {
        assert!((pv - p.beta * (1.0 - m * m)).abs() < 1e-11);
    }
}

#[test]
fn linear_response_to_field_bump() {
    let (p, k, g) = setup(6.0);
    let h = Profile::from_fn(g, |x| 0.003 * x);
    let init = Profile::from_fn(g, |x| p.m_beta * x.tanh());
    let base = inner_solve(&p, &k, &h, &init, &InnerOptions::default()).unwrap();
    let delta = 1e-6;
    let bump = |x: f64| delta * (-(x - 2.0).powi(2)).exp();
    let h2 = Profile::from_fn(g, |x| 0.003 * x + bump(x));
    let moved = inner_solve(&p, &k, &h2, &base.m, &InnerOptions::default()).unwrap();

    // (I - diag(p) J) dm = diag(p) dh
    let n = g.n;
    let jm = dense_neumann(&k, g);
    let pd = DMatrix::from_diagonal(&DVector::from_vec(base.p.values.clone()));
    let lhs = DMatrix::identity(n, n) - &pd * jm;
    let rhs = &pd * DVector::from_iterator(n, g.points().into_iter().map(bump));
    let dm = lhs.lu().solve(&rhs).unwrap();
    for i in 0..n {
        let actual = moved.m.values[i] - base.m.values[i];
        assert!((actual - dm[i]).abs() < 1e-3 * dm.amax(), "i={i}");
    }
}

#[test]
fn linearization_is_self_adjoint() {
    let (p, k, g) = setup(6.0);
    let m = Profile::from_fn(g, |x| 0.95 * (x - 0.5).tanh());
    let h = effective_field(&p, &k, &m).unwrap();
    let s = MesoState::new(&p, &k, h, m).unwrap();
    let f: Vec<f64> = g.points().iter().map(|x| (-(x - 1.0).powi(2)).exp() + 0.1).collect();
    let gv: Vec<f64> = g.points().iter().map(|x| (0.3 * x).sin()).collect();
    let lhs = weighted_inner(&s, &apply_a(&s, &f), &gv);
    let rhs = weighted_inner(&s, &f, &apply_a(&s, &gv));
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} {rhs}");
}

#[test]
fn mismatched_inputs_rejected() {
    let (p, k, g) = setup(3.0);
    let other = mesoscopic_grid(-4.0, 4.0, 0.05).unwrap();
    let h = Profile::constant(g, 0.0);
    let bad = Profile::constant(other, 0.5);
    assert!(inner_solve(&p, &k, &h, &bad, &InnerOptions::default()).is_err());
    let k2 = build_kernel(0.025).unwrap();
    let init = Profile::constant(g, 0.5);
    assert!(matches!(
        inner_solve(&p, &k2, &h, &init, &InnerOptions::default()),
        Err(Error::SpacingMismatch { .. })
    ));
    let sat = Profile::constant(g, 0.9999999999);
    assert!(matches!(
        inner_solve(&p, &k, &h, &sat, &InnerOptions::default()),
        Err(Error::Saturation { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_satisfy_equation(beta in 1.2f64..3.0, slope in 0.002f64..0.01, amp in 0.7f64..0.95, shift in -0.3f64..0.3) {
        let p = ThermoParams::new(beta).unwrap();
        let k = build_kernel(0.05).unwrap();
        let g = mesoscopic_grid(-5.0, 5.0, 0.05).unwrap();
        let h = Profile::from_fn(g, |x| slope * x);
        let init = Profile::from_fn(g, |x| amp * (x - shift).tanh());
        let s = inner_solve(&p, &k, &h, &init, &InnerOptions::default()).unwrap();
        prop_assert!(residual(&p, &k, &h, &s.m).unwrap() < 1e-12);
        prop_assert!(s.m.sup_norm() < 1.0);
        // the effective field recovers the data
        let back = effective_field(&p, &k, &s.m).unwrap();
        prop_assert!(sup_diff(&back.values, &h.values) < 1e-9);
    }
}
