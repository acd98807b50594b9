use proptest::prelude::*;

use shallow_bs::arch::{self, build_local_parallel, build_nlhs, realize, CircuitArchitecture};
use shallow_bs::fock::{self, enumerate_outcomes, FockPattern};
use shallow_bs::gaussian::{self, GbsConfig};
use shallow_bs::linalg::RngStream;
use shallow_bs::stats;

fn architecture(choice: u8) -> CircuitArchitecture {
    match choice % 3 {
        0 => build_local_parallel(1, &[7], 4).unwrap(),
        1 => build_local_parallel(2, &[3, 2], 3).unwrap(),
        _ => build_nlhs(3, 1).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forbidden_fock_outcomes_have_zero_probability(choice in any::<u8>(), seed in any::<u64>(), n in 1usize..4, cut in 0usize..5) {
        let a = architecture(choice);
        let depth = cut.min(a.depth());
        let mut rng = RngStream::new(seed, 0).rng();
        let input = stats::random_collision_free_pattern(a.mode_count(), n, &mut rng).unwrap();
        let u = realize(&a.prefix(depth).unwrap(), &mut rng);
        let mut permitted = 0u64;
        for s in enumerate_outcomes(a.mode_count(), n) {
            if fock::is_permitted_fbs(&a, &input, &s, depth).unwrap() {
                permitted += 1;
            } else {
                prop_assert!(fock::fbs_probability(&u, &input, &s).unwrap() < 1e-12);
            }
        }
        let report = fock::count_permitted_fbs(&a, &input, depth).unwrap();
        prop_assert_eq!(report.exact_count, permitted);
        prop_assert!(report.exact_count as u128 <= report.upper_bound);
    }

    #[test]
    fn forbidden_gaussian_outcomes_have_zero_weight(choice in any::<u8>(), seed in any::<u64>(), cut in 0usize..4) {
        let a = architecture(choice);
        let depth = cut.min(a.depth());
        let m = a.mode_count();
        let cfg = GbsConfig::new(m, m, 0.3, 2).unwrap();
        let input = cfg.default_inputs();
        let u = realize(&a.prefix(depth).unwrap(), &mut RngStream::new(seed, 1).rng());
        for s in enumerate_outcomes(m, 4) {
            if !gaussian::is_permitted_gbs(&a, &cfg, &input, &s, depth).unwrap() {
                prop_assert!(gaussian::gbs_unnormalized_probability(&u, &cfg, &s).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn clipped_cones_count_fewer_outcomes(seed in any::<u64>(), lambda in 0.05f64..1.0, beta in 0.05f64..0.95) {
        let a = build_local_parallel(1, &[12], 6).unwrap();
        let mut rng = RngStream::new(seed, 2).rng();
        let input = stats::random_collision_free_pattern(12, 2, &mut rng).unwrap();
        let eff = fock::effective_delta_fbs(&a, &input, 6, lambda, beta).unwrap();
        let plain = fock::count_permitted_fbs(&a, &input, 6).unwrap();
        prop_assert!(eff.exact_count <= plain.exact_count);
        prop_assert!(eff.exact_count as u128 <= eff.upper_bound);
        prop_assert!((0.0..=1.0).contains(&eff.delta_exact));
    }

    #[test]
    fn full_connectivity_permits_everything(n in 1usize..4) {
        let a = build_nlhs(3, 1).unwrap();
        let input = FockPattern::new((0..n).collect());
        let r = fock::count_permitted_fbs(&a, &input, 3).unwrap();
        prop_assert_eq!(r.exact_count as u128, fock::outcome_count(8, n));
        prop_assert_eq!(r.delta_exact, 1.0);
        for i in 0..8 {
            prop_assert_eq!(arch::round_trip_lightcone(&a, i, 3).unwrap().len(), 8);
        }
    }
}
