mod oracles;

use nadp::calibration::{
    calibrate, check_dp_condition, classic_gaussian_sigma, dp_condition_lhs, g, g_derivative, phi, solve_u_star,
    PrivacyParams,
};
use oracles::*;
use proptest::prelude::*;

const EPSILONS: [f64; 6] = [0.1, 1.0, 5.0, 10.0, 20.0, 40.0];
const DELTAS: [f64; 4] = [1e-6, 1.0 / 73404.0, 1e-3, 0.1];

#[test]
fn phi_matches_quadrature() {
    assert!((quad_phi(1.96) - 0.975_002_104_851_779_6).abs() < 1e-14);
    assert!((phi(1.96) - quad_phi(1.96)).abs() < 1e-14);
    let mut t = -8.0;
    while t <= 8.0 {
        assert!((phi(t) - quad_phi(t)).abs() < 1e-14, "t = {t}");
        t += 0.137;
    }
    // Deep tail: relative agreement.
    for &t in &[-12.0, -20.0, -30.0] {
        let (a, b) = (phi(t), quad_phi(t));
        assert!(((a - b) / b).abs() < 1e-10, "t = {t}: {a} vs {b}");
    }
}

#[test]
fn g_matches_quadrature_oracle() {
    for &eps in &EPSILONS {
        for &u in &[0.01, 0.05, 0.1, 0.3, 0.7, 1.0, 2.0, 5.0, 20.0] {
            let (a, b) = (g(u, eps).unwrap(), quad_g(u, eps));
            assert!((a - b).abs() < 1e-10, "eps {eps}, u {u}: {a} vs {b}");
        }
    }
}

#[test]
fn u_star_is_minimal_under_the_oracle() {
    for &eps in &EPSILONS {
        for &delta in &DELTAS {
            let u = solve_u_star(&PrivacyParams::new(eps, delta).unwrap()).unwrap();
            assert!(quad_g(u, eps) <= delta * (1.0 + 1e-9), "eps {eps}, delta {delta}");
            assert!(quad_g(0.999 * u, eps) > delta, "eps {eps}, delta {delta}");
            assert!(g(u, eps).unwrap() <= delta);
            assert!(g(u * (1.0 - 10.0 * 1e-12), eps).unwrap() > delta);
        }
    }
}

#[test]
fn u_star_is_monotone_in_both_parameters() {
    for &eps in &EPSILONS {
        let us: Vec<f64> = DELTAS
            .iter()
            .map(|&d| solve_u_star(&PrivacyParams::new(eps, d).unwrap()).unwrap())
            .collect();
        assert!(us.windows(2).all(|w| w[0] > w[1]), "eps {eps}: {us:?}");
    }
    for &delta in &DELTAS {
        let us: Vec<f64> = EPSILONS
            .iter()
            .map(|&e| solve_u_star(&PrivacyParams::new(e, delta).unwrap()).unwrap())
            .collect();
        assert!(us.windows(2).all(|w| w[0] > w[1]), "delta {delta}: {us:?}");
    }
}

#[test]
fn epsilon_zero_has_a_root() {
    let u = solve_u_star(&PrivacyParams::new(0.0, 0.05).unwrap()).unwrap();
    // With ε = 0, g(u) = 1 − 2Φ(−1/(2u)).
    assert!((1.0 - 2.0 * quad_phi(-1.0 / (2.0 * u)) - 0.05).abs() < 1e-9);
}

#[test]
fn classic_sigma_is_sufficient_and_never_tighter() {
    for k in 1..=9 {
        let eps = k as f64 / 10.0;
        for &delta in &DELTAS {
            let params = PrivacyParams::new(eps, delta).unwrap();
            let classic = classic_gaussian_sigma(eps, delta, 1.0).unwrap();
            assert!(check_dp_condition(1.0, classic, &params));
            assert!(quad_g(classic, eps) <= delta);
            let u = solve_u_star(&params).unwrap();
            assert!(u <= classic, "eps {eps}, delta {delta}: {u} > {classic}");
        }
    }
}

#[test]
fn classic_sigma_hand_values() {
    // ln(1.25/δ) = 2 gives σ = 2/ε.
    let delta = 1.25 * (-2.0f64).exp();
    let s = classic_gaussian_sigma(1.0 - 1e-12, delta, 1.0).unwrap();
    assert!((s - 2.0).abs() < 1e-10);
    assert_eq!(classic_gaussian_sigma(0.5, 0.01, 0.0).unwrap(), 0.0);
}

#[test]
fn dp_check_at_and_below_the_optimum() {
    for &eps in &[0.5, 1.0, 5.0] {
        for &delta in &DELTAS {
            let params = PrivacyParams::new(eps, delta).unwrap();
            let cal = calibrate(&params, &[0.0, 1.0, 2.5]).unwrap();
            let u = cal.u_star;
            assert_eq!(cal.sigma_per_component[0], 0.0);
            for (k, &delta_i) in [1.0, 2.5].iter().enumerate() {
                let sigma = cal.sigma_per_component[k + 1];
                assert_eq!(sigma, u * delta_i);
                assert!(check_dp_condition(delta_i, sigma, &params));
                assert!(!check_dp_condition(delta_i, 0.99 * sigma, &params));
            }
        }
    }
    let params = PrivacyParams::new(1.0, 0.01).unwrap();
    assert!(check_dp_condition(1.0, 1e12, &params));
    assert!(!check_dp_condition(1.0, 1e-12, &params));
}

proptest! {
    #[test]
    fn phi_is_symmetric(t in -30.0f64..30.0) {
        prop_assert!((phi(t) + phi(-t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn g_is_strictly_decreasing(u1 in 0.01f64..20.0, f in 1.001f64..3.0, eps in 0.0f64..40.0) {
        let u2 = u1 * f;
        let (a, b) = (g(u1, eps).unwrap(), g(u2, eps).unwrap());
        prop_assert!(b <= a);
        // Strictness is only observable where g has not rounded to 1 or 0.
        if a < 1.0 - 1e-9 && b > 1e-300 {
            prop_assert!(b < a);
        }
    }

    #[test]
    fn derivative_matches_finite_differences(u in 0.05f64..5.0, eps in 0.0f64..5.0) {
        let h = 1e-5 * u;
        let fd = (g(u + h, eps).unwrap() - g(u - h, eps).unwrap()) / (2.0 * h);
        let exact = g_derivative(u, eps).unwrap();
        // Rounding in g is ~1e-16; the difference quotient only resolves
        // slopes whose change over the step is well above that.
        prop_assume!(exact.abs() * h > 1e-9);
        prop_assert!(((fd - exact) / exact).abs() < 1e-6, "{} vs {}", fd, exact);
    }

    #[test]
    fn condition_written_two_ways_agrees(sens in 0.01f64..10.0, u in 0.05f64..10.0, eps in 0.0f64..20.0) {
        let sigma = u * sens;
        let direct = dp_condition_lhs(sens, sigma, eps);
        let via_g = g(sigma / sens, eps).unwrap();
        prop_assert!((direct - via_g).abs() < 1e-12, "{} vs {}", direct, via_g);
    }
}
