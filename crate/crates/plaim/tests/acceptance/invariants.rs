//! Property tests for the algebraic invariants that hold across whole
//! parameter families.

use proptest::prelude::*;

use plaim::geometry::sqc_from_pl_ac;
use plaim::optim::NmContinuizedConfig;
use plaim::testbed::hard_bump;
use plaim::trajectory::fit_rate;

proptest! {
    /// Conversion identity: tau * mu_sqc = a sqrt(mu mu0) whenever tau is
    /// not clipped at 1.
    #[test]
    fn sqc_conversion_identity(
        mu in 1e-6f64..1e2,
        mu0_factor in 1.0f64..100.0,
        l0_factor in 1.0f64..100.0,
        a in 0.01f64..1.0,
    ) {
        let mu0 = mu * mu0_factor;
        let l0 = mu0 * l0_factor;
        let (tau, mu_sqc) = sqc_from_pl_ac(mu, mu0, l0, a).unwrap();
        prop_assert!(tau > 0.0 && tau <= 1.0);
        if a * (mu / l0).sqrt() < 1.0 {
            let lhs = tau * mu_sqc;
            let rhs = a * (mu * mu0).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
        }
    }

    /// The continuized momentum coefficients stay inside their closed-form
    /// ranges and grow with the inter-event gap.
    #[test]
    fn continuized_coefficients_bounded_monotone(
        eta in 1e-3f64..10.0,
        eta_prime in 0.0f64..10.0,
        g1 in 1e-6f64..5.0,
        dg in 1e-6f64..5.0,
    ) {
        prop_assume!(eta + eta_prime > 1e-3);
        let cfg = NmContinuizedConfig::new(eta, eta_prime, 0.1, 0.1).unwrap();
        let (a1, b1) = cfg.coefficients(g1);
        let (a2, b2) = cfg.coefficients(g1 + dg);
        prop_assert!((0.0..=1.0).contains(&a1));
        prop_assert!(a1 <= eta / (eta + eta_prime) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&b1));
        prop_assert!(a2 >= a1 - 1e-12, "alpha must grow with the gap");
        prop_assert!(b2 >= b1 - 1e-12, "beta must grow with the gap");
    }

    /// The bump component is C^1 at all three breakpoints for any y > 0:
    /// the adjacent closed-form pieces agree in value and slope.
    #[test]
    fn hard_bump_c1_for_any_y(y in 1e-3f64..1e3) {
        let tol = 1e-12 * (1.0 + y * y);
        let b1 = 31.0 * y / 32.0;
        let b3 = 33.0 * y / 32.0;
        // piece values on each side of the middle breakpoints
        let left_of_y = 0.5 * y * y - 16.0 * (y - b1) * (y - b1);
        let right_of_y = 0.5 * y * y - y * y / 32.0 + 16.0 * (y - b3) * (y - b3);
        prop_assert!((left_of_y - right_of_y).abs() <= tol);
        let slope_left = y - 32.0 * (y - b1);
        let slope_right = y + 32.0 * (y - b3);
        prop_assert!((slope_left - slope_right).abs() <= tol * 32.0 / (1.0 + y));
        // implementation agrees with the analytic pieces at the breakpoints
        prop_assert!((hard_bump(b1, y).0 - 0.5 * b1 * b1).abs() <= tol);
        prop_assert!((hard_bump(b3, y).0 - (0.5 * b3 * b3 - y * y / 32.0)).abs() <= tol);
        // derivative vanishes exactly at the flat spot
        prop_assert!(hard_bump(y, y).1.abs() <= 1e-12 * (1.0 + y));
    }

    /// Rate fitting inverts exact exponentials for arbitrary rates and
    /// multipliers.
    #[test]
    fn fit_rate_inverts_exact_exponentials(
        rate in 1e-4f64..2.0,
        log_k in -5.0f64..5.0,
        n in 20usize..200,
    ) {
        let times: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let gaps: Vec<f64> = times.iter().map(|&t| log_k.exp() * (-rate * t).exp()).collect();
        let fit = fit_rate(&times, &gaps, None).unwrap();
        prop_assert!((fit.rate - rate).abs() <= 1e-9 * rate.max(1.0));
        prop_assert!((fit.r_squared - 1.0).abs() <= 1e-9);
    }

    /// Two-point strong-growth outcomes have mean one and second moment rho,
    /// exactly.
    #[test]
    fn sgc_outcomes_moments(rho in 1.0f64..100.0) {
        let noise = plaim::optim::NoiseModel::two_point(rho).unwrap();
        let (lo, hi) = noise.outcomes();
        prop_assert!(((lo + hi) / 2.0 - 1.0).abs() <= 1e-12);
        prop_assert!(((lo * lo + hi * hi) / 2.0 - rho).abs() <= 1e-9 * rho);
    }
}
