mod common;

use common::{diffusion_critical, jump_critical};
use nlbranch::criteria::{k_integral_bounds, stable_k_integral, stable_second_order_quadrature};
use nlbranch::montecarlo::Proportion;
use nlbranch::numerics::Integrator;
use nlbranch::simulator::{PathState, SimConfig, Simulator};
use nlbranch::{classify, gamma, CriteriaConfig, InfinityBehavior, Method, RngStream, StableMeasure};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_recurrence(x in 0.05f64..5.0) {
        let lhs = gamma(x + 1.0).unwrap();
        let rhs = x * gamma(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
    }

    #[test]
    fn stable_identity_holds(alpha in 1.05f64..1.95, log_u in -1.0f64..4.0) {
        let u = 10f64.powf(log_u);
        let q = stable_second_order_quadrature(&StableMeasure::new(alpha), u, &Integrator::new(1e-12)).unwrap();
        let exact = gamma(alpha).unwrap() * u.powf(-alpha);
        prop_assert!((q - exact).abs() <= 1e-8 * exact, "{q} vs {exact}");
    }

    #[test]
    fn k_integral_within_bounds(alpha in 1.1f64..1.9, rho in 0.25f64..3.0, log_u in 1.0f64..6.0) {
        let u = 10f64.powf(log_u);
        let k = stable_k_integral(&StableMeasure::new(alpha), u, rho, &Integrator::new(1e-10)).unwrap();
        let b = k_integral_bounds(alpha, u, rho).unwrap();
        prop_assert!(b.lower <= k && k <= b.upper, "{} <= {k} <= {}", b.lower, b.upper);
    }

    #[test]
    fn wilson_interval_is_sane(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let p = Proportion::wilson(k, n);
        prop_assert!(0.0 <= p.ci95_low && p.ci95_low <= p.p_hat);
        prop_assert!(p.p_hat <= p.ci95_high && p.ci95_high <= 1.0);
        let wider = Proportion::wilson(k, n);
        let more = Proportion::wilson(4 * k, 4 * n);
        prop_assert!(more.ci95_high - more.ci95_low <= wider.ci95_high - wider.ci95_low + 1e-12);
    }

    #[test]
    fn rng_streams_replay(seed in any::<u64>(), stream in any::<u64>(), skip in 0usize..50) {
        let mut a = RngStream::new(seed, stream);
        for _ in 0..skip {
            a.next_uniform();
        }
        let mut b = RngStream::at_counter(seed, stream, a.counter());
        for _ in 0..8 {
            prop_assert_eq!(a.next_uniform().to_bits(), b.next_uniform().to_bits());
        }
    }

    #[test]
    fn diffusion_family_follows_the_threshold(r1 in 1.0f64..4.0, alpha in 1.1f64..1.9) {
        let m = diffusion_critical(r1, alpha).validate().unwrap();
        let r = classify(&m, &CriteriaConfig::default()).unwrap();
        prop_assert_eq!(r.method, Method::Symbolic);
        let expected = if r1 <= 2.0 {
            InfinityBehavior::StaysInfinite
        } else {
            InfinityBehavior::ComesDownFromInfinity
        };
        prop_assert_eq!(r.infinity_behavior, expected);
    }

    #[test]
    fn jump_family_follows_the_threshold(offset in -0.5f64..1.0, alpha in 1.1f64..1.9) {
        let m = jump_critical(alpha + offset, alpha).validate().unwrap();
        let r = classify(&m, &CriteriaConfig::default()).unwrap();
        let expected = if offset <= 0.0 {
            InfinityBehavior::StaysInfinite
        } else {
            InfinityBehavior::ComesDownFromInfinity
        };
        prop_assert_eq!(r.infinity_behavior, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn paths_stay_in_the_state_space(seed in any::<u64>(), x0 in 0.01f64..100.0, r in 0.5f64..2.5) {
        let m = jump_critical(1.5 + (r - 1.5) * 0.5, 1.5).validate().unwrap();
        let sim = Simulator::new(&m, SimConfig { cap_b: 1e6, eps_cut: 0.1, ..SimConfig::default() }).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let mut s = PathState::new(x0);
        for _ in 0..200 {
            let next = sim.step(s, &mut rng);
            prop_assert!(next.t >= s.t);
            prop_assert!(next.x >= 0.0 && next.x <= 1e6);
            if s.is_frozen() {
                prop_assert_eq!(next.x, s.x);
            }
            s = next;
        }
    }
}
