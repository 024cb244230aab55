use proptest::prelude::*;
use stefan_core::stefan::*;
use stefan_core::thermo::{chi, phi_prime, ThermoParams};
use stefan_core::Error;

fn p2() -> ThermoParams {
    ThermoParams::new(2.0).unwrap()
}

/// Antiderivative of `chi * phi''`, which makes the profile explicit:
/// distance from the jump is `|G(|m|) - G(m_beta)| / |j|`.
fn g_antideriv(beta: f64, s: f64) -> f64 {
    (1.0 - beta) * s + beta * s * s * s / 3.0
}

fn distance_oracle(p: &ThermoParams, j: f64, m: f64) -> f64 {
    (g_antideriv(p.beta, m.abs()) - g_antideriv(p.beta, p.m_beta)).abs() / j.abs()
}

#[test]
fn maximal_length_closed_form() {
    let p = p2();
    for j in [-0.2, -0.02, 0.5, -3.0] {
        let ell = maximal_length(&p, j).unwrap();
        let oracle = distance_oracle(&p, j, 1.0 - 1e-6);
        assert!((ell - oracle).abs() < 1e-9 * oracle.max(1.0), "j={j}: {ell} vs {oracle}");
    }
    assert!((maximal_length(&p, -0.2).unwrap() - 0.1947).abs() < 1e-4);
    assert!(maximal_length(&p, 0.0).is_err());
    // decreasing in |j|
    for j in [0.01, 0.1, 1.0] {
        assert!(maximal_length(&p, 2.0 * j).unwrap() < maximal_length(&p, j).unwrap());
    }
}

#[test]
fn breakdown_length_closed_form() {
    let p = p2();
    let b = breakdown_length(&p, 0.02).unwrap();
    let oracle = (g_antideriv(2.0, p.m_beta) - g_antideriv(2.0, p.m_star)) / 0.02;
    assert!((b - oracle).abs() < 1e-9 * oracle);
    assert!((b * 0.02 - 0.0991).abs() < 1e-4);
}

#[test]
fn maximal_solution_profile() {
    let p = p2();
    let j = -0.2;
    let sol = solve_maximal(&p, j).unwrap();
    let n = sol.x.len();
    for i in 0..n {
        assert!((sol.x[i] + sol.x[n - 1 - i]).abs() < 1e-14);
        assert!((sol.h[i] + sol.h[n - 1 - i]).abs() < 1e-14);
        assert!((sol.m[i] + sol.m[n - 1 - i]).abs() < 1e-14);
        let r = sol.x[i].abs();
        assert!((r - distance_oracle(&p, j, sol.m[i])).abs() < 1e-8, "x={}", sol.x[i]);
        assert!((sol.h[i] - phi_prime(&p, sol.m[i])).abs() < 1e-9);
    }
    assert!((1.0 - sol.m[n - 1]).abs() < 2e-6);
    assert!((sol.domain.1 - sol.ell_j).abs() < 1e-14);
}

#[test]
fn saturates_with_slope_j() {
    let p = p2();
    let j = -0.2;
    let sol = solve_maximal(&p, j).unwrap();
    let ell = sol.ell_j;
    let (_, m) = sol.sample(&[ell - 2e-3, ell - 1e-3]).unwrap();
    let slope = (m[1] - m[0]) / 1e-3;
    assert!((slope + j).abs() < 0.01 * j.abs(), "slope {slope}");
}

#[test]
fn restriction_of_maximal_solution() {
    let p = p2();
    let j = -0.02;
    let maximal = solve_maximal(&p, j).unwrap();
    let sol = solve_stefan(&p, j, 0.2, 1.0, 101).unwrap();
    let shifted: Vec<f64> = sol.x.iter().map(|x| x - 0.2).collect();
    let (h, m) = maximal.sample(&shifted).unwrap();
    let jump = sol.x.iter().position(|&x| x == 0.2).unwrap();
    for i in 0..sol.x.len() {
        assert!((sol.h[i] - h[i]).abs() < 1e-8);
        if i != jump {
            assert!((sol.m[i] - m[i]).abs() < 1e-8);
        }
    }
    // duplicated abscissa carries both limits
    assert_eq!(sol.x[jump], sol.x[jump + 1]);
    assert!((sol.m[jump] + p.m_beta).abs() < 1e-14 && (sol.m[jump + 1] - p.m_beta).abs() < 1e-14);
    assert!(sol.m[0] < -p.m_beta && *sol.m.last().unwrap() > p.m_beta);
}

#[test]
fn stable_profile_properties() {
    let p = p2();
    let j = -0.02;
    let sol = solve_stefan(&p, j, 0.0, 1.0, 2001).unwrap();
    let n = sol.x.len();
    for i in 0..n {
        assert!(sol.m[i].abs() >= p.m_beta - 1e-15);
    }
    for w in sol.h.windows(2) {
        assert!(w[1] >= w[0]);
    }
    for i in 0..n - 1 {
        if sol.x[i + 1] > sol.x[i] {
            assert!(sol.m[i + 1] > sol.m[i] && sol.h[i + 1] > sol.h[i]);
        }
    }
    // flux constancy against a Richardson estimate of the difference error
    for i in 2..n - 2 {
        if sol.x[i - 2] == sol.x[i - 1] || sol.x[i - 1] == sol.x[i] || sol.x[i] == sol.x[i + 1] || sol.x[i + 1] == sol.x[i + 2] {
            continue;
        }
        let d1 = (sol.h[i + 1] - sol.h[i - 1]) / (sol.x[i + 1] - sol.x[i - 1]);
        let d2 = (sol.h[i + 2] - sol.h[i - 2]) / (sol.x[i + 2] - sol.x[i - 2]);
        let c = chi(&p, sol.m[i]);
        let est = c * (d1 - d2).abs() / 3.0;
        assert!((c * d1 + j).abs() <= 10.0 * est + 1e-12, "x={}", sol.x[i]);
    }
}

#[test]
fn infeasible_domain_is_reported() {
    let p = p2();
    match solve_stefan(&p, -0.2, 0.0, 1.0, 11) {
        Err(Error::Infeasible { ell_j, .. }) => assert!((ell_j - 0.1947).abs() < 1e-4),
        other => panic!("expected infeasible, got {other:?}"),
    }
    assert!(matches!(solve_stefan(&p, -0.02, 0.9, 1.2, 11), Err(Error::Infeasible { .. })));
    assert!(solve_stefan(&p, 0.0, 0.0, 1.0, 11).is_err());
}

#[test]
fn dirichlet_round_trip() {
    let p = p2();
    let sol = solve_dirichlet(&p, -0.98, 0.98, 1.0, 101).unwrap();
    assert!(sol.j < 0.0);
    assert!(sol.x0.abs() < 1e-8);
    let again = solve_stefan(&p, sol.j, sol.x0, 1.0, 101).unwrap();
    assert!((again.m[0] + 0.98).abs() < 1e-6 && (again.m.last().unwrap() - 0.98).abs() < 1e-6);

    let asym = solve_dirichlet(&p, -0.97, 0.99, 1.0, 101).unwrap();
    let again = solve_stefan(&p, asym.j, asym.x0, 1.0, 101).unwrap();
    assert!((again.m[0] + 0.97).abs() < 1e-6 && (again.m.last().unwrap() - 0.99).abs() < 1e-6);
    assert!(asym.x0 < 0.0, "steeper side is shorter: x0 = {}", asym.x0);

    let mirrored = solve_dirichlet(&p, 0.98, -0.98, 1.0, 101).unwrap();
    assert!(mirrored.j > 0.0);

    // boundary data approaching the plateau edges needs ever smaller currents
    let mut prev = f64::INFINITY;
    for d in [0.02, 0.01, 0.003, 0.001] {
        let s = solve_dirichlet(&p, -(p.m_beta + d), p.m_beta + d, 1.0, 11).unwrap();
        assert!(s.j.abs() < prev);
        prev = s.j.abs();
    }
    assert!(prev < 1e-3);
    assert!(solve_dirichlet(&p, -0.9, 0.98, 1.0, 11).is_err());
}

#[test]
fn metastable_profile() {
    let p = p2();
    let j = 0.02;
    let sol = solve_metastable_stefan(&p, j, 1.0, 401, false).unwrap();
    let jump = sol.x.iter().position(|&x| x == 0.0).unwrap();
    assert!((sol.m[jump] + p.m_beta).abs() < 1e-14 && (sol.m[jump + 1] - p.m_beta).abs() < 1e-14);
    for i in 0..sol.x.len() {
        let m = sol.m[i].abs();
        assert!(m > p.m_star && m <= p.m_beta + 1e-15);
        assert!((distance_oracle(&p, j, sol.m[i]) - sol.x[i].abs()).abs() < 1e-8);
        if sol.x[i] < 0.0 {
            assert!(sol.m[i] < 0.0);
        }
    }
    for i in 0..sol.x.len() - 1 {
        if sol.x[i + 1] > sol.x[i] {
            assert!(sol.h[i + 1] < sol.h[i]);
        }
    }
    assert!(matches!(
        solve_metastable_stefan(&p, j, 5.0, 11, false),
        Err(Error::MetastableBreakdown { .. })
    ));
    assert!(solve_metastable_stefan(&p, -j, 1.0, 11, false).is_err());
    let mirrored = solve_metastable_stefan(&p, -j, 1.0, 11, true).unwrap();
    assert!(mirrored.m[0] > 0.0);
}

#[test]
fn csv_carries_both_jump_rows() {
    let p = p2();
    let sol = solve_stefan(&p, -0.02, 0.0, 1.0, 5).unwrap();
    let mut buf = Vec::new();
    sol.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,h,m");
    assert_eq!(lines.len(), 1 + 6);
    assert_eq!(lines.iter().filter(|l| l.starts_with("0.0000000000000000e0,")).count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn positions_follow_closed_form(beta in 1.2f64..4.0, j in 0.005f64..0.5, sign in prop::bool::ANY, frac in 0.05f64..0.9) {
        let p = ThermoParams::new(beta).unwrap();
        let j = if sign { j } else { -j };
        let ell = frac * maximal_length(&p, j).unwrap();
        let sol = solve_stefan(&p, j, 0.0, ell, 41).unwrap();
        for i in 0..sol.x.len() {
            let r = distance_oracle(&p, j, sol.m[i]);
            prop_assert!((r - sol.x[i].abs()).abs() < 1e-7 * (1.0 + ell));
            prop_assert!((sol.m[i] + sol.m[sol.x.len() - 1 - i]).abs() < 1e-12);
            // increasing for j < 0, decreasing for j > 0
            if i + 1 < sol.x.len() && sol.x[i + 1] > sol.x[i] {
                prop_assert!((sol.m[i + 1] - sol.m[i]) * -j.signum() > 0.0);
            }
        }
    }
}
