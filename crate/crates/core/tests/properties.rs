use proptest::prelude::*;
use quasistat::analysis::{front_ceiling, front_position, front_profile, gap_vector, markov_bound_check};
use quasistat::dynamics::{
    apply_increments, apply_log_weights, evolve_multiplicative, shift_leader, shift_tail, IncrementLaw,
};
use quasistat::pointproc::{
    config_from_mass_partition, mass_partition_from_config, sample_pd_poisson_kingman, sample_pd_stickbreaking,
    sample_pk_powerlaw, sample_pp_exponential, PointConfiguration,
};
use quasistat::stattest::{energy_distance_perm_test, ks_two_sample, SampleMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config_strategy() -> impl Strategy<Value = PointConfiguration> {
    (prop::collection::vec(-20.0f64..20.0, 2..40), 0.0f64..2.0)
        .prop_map(|(pts, tail)| PointConfiguration::from_unsorted(pts, 1.0, tail).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampler_partitions_are_proper(seed in any::<u64>(), alpha in 0.05f64..0.95, n in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pk = sample_pd_poisson_kingman(alpha, n, &mut rng).unwrap();
        prop_assert!((pk.total() - 1.0).abs() <= 1e-12);
        // Exact top-n stick breaking gets slow for large α and n.
        let sb = sample_pd_stickbreaking(alpha.min(0.7), n.min(10), &mut rng).unwrap();
        prop_assert!((sb.total() - 1.0).abs() <= 1e-12);
        prop_assert!(sb.masses().windows(2).all(|w| w[0] >= w[1]));
        let pp = sample_pp_exponential(alpha, n, &mut rng).unwrap();
        let xi = mass_partition_from_config(&pp).unwrap();
        prop_assert!((xi.total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn evolved_partitions_stay_proper(seed in any::<u64>(), alpha in 0.1f64..0.9, sigma in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let law = IncrementLaw::lognormal_weight(0.0, sigma).unwrap();
        let mut p = sample_pd_poisson_kingman(alpha, 100, &mut rng).unwrap();
        for _ in 0..3 {
            p = evolve_multiplicative(&p, &law, 1.0, &mut rng).unwrap();
            prop_assert!((p.total() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn config_mass_round_trip(config in config_strategy()) {
        let p = mass_partition_from_config(&config).unwrap();
        let back = config_from_mass_partition(&p).unwrap();
        let p2 = mass_partition_from_config(&back).unwrap();
        for (a, b) in p.masses().iter().zip(p2.masses()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((p.tail_mass() - p2.tail_mass()).abs() <= 1e-12);
    }

    #[test]
    fn gaps_survive_shifts(config in config_strategy()) {
        let k = config.len() - 1;
        let g = gap_vector(&config, k).unwrap();
        for shifted in [shift_leader(&config), shift_tail(&config).unwrap()] {
            let h = gap_vector(&shifted, k).unwrap();
            for (a, b) in g.iter().zip(&h) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn additive_and_multiplicative_commute(
        config in config_strategy(),
        seed in any::<u64>(),
        sigma in 0.1f64..2.0,
    ) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let law = IncrementLaw::gaussian(0.0, sigma).unwrap();
        let h: Vec<f64> = (0..config.len()).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sigma * z }).collect();
        let (moved, _) = apply_increments(&config, &h, law.log_mgf(1.0)).unwrap();
        let lhs = mass_partition_from_config(&moved).unwrap();
        let xi = mass_partition_from_config(&config).unwrap();
        let (rhs, _) = apply_log_weights(&xi, &h[..xi.len()], law.log_mgf(1.0)).unwrap();
        prop_assert_eq!(lhs.len(), rhs.len());
        for (a, b) in lhs.masses().iter().zip(rhs.masses()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        prop_assert!((lhs.tail_mass() - rhs.tail_mass()).abs() <= 1e-10);
    }

    #[test]
    fn constant_weights_are_identity(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_pd_poisson_kingman(0.5, 50, &mut rng).unwrap();
        let law = IncrementLaw::constant(c).unwrap();
        let q = evolve_multiplicative(&p, &law, 1.0, &mut rng).unwrap();
        for (a, b) in p.masses().iter().zip(q.masses()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn top_n_is_a_prefix(seed in any::<u64>(), n in 1usize..100, extra in 1usize..100, alpha in 0.1f64..0.9) {
        let small = sample_pp_exponential(1.0, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let large = sample_pp_exponential(1.0, n + extra, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(small.points(), &large.points()[..n]);
        let a = sample_pk_powerlaw(alpha, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = sample_pk_powerlaw(alpha, n + extra, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a.atoms[..], &b.atoms[..n]);
    }

    #[test]
    fn profile_monotone_and_root_accurate(config in config_strategy(), tau in 1usize..12) {
        let law = IncrementLaw::gaussian(0.0, 1.0).unwrap();
        let profile = front_profile(&config, &law, tau).unwrap();
        let lo = config.points()[config.len() - 1] - 5.0;
        let hi = config.leader() + 5.0 + tau as f64;
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let y = lo + (hi - lo) * i as f64 / 99.0;
            let f = profile.eval(y);
            prop_assert!(f <= prev);
            prev = f;
        }
        let z = front_position(&profile).unwrap();
        prop_assert!((profile.eval(z) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn markov_bound_holds_exactly(config in config_strategy(), tau in 0usize..12) {
        let start = shift_tail(&config).unwrap();
        let law = IncrementLaw::gaussian(0.0, 1.0).unwrap();
        let profile = front_profile(&start, &law, tau).unwrap();
        let grid: Vec<f64> = (0..100).map(|i| -10.0 + 0.25 * i as f64).collect();
        let check = markov_bound_check(&profile, &grid).unwrap();
        prop_assert_eq!(check.violations, 0);
        prop_assert!(front_position(&profile).unwrap() <= front_ceiling(&law, 1.0, tau));
    }

    #[test]
    fn ks_symmetric_and_bounded(
        xs in prop::collection::vec(-5.0f64..5.0, 1..60),
        ys in prop::collection::vec(-5.0f64..5.0, 1..60),
    ) {
        let a = ks_two_sample(&xs, &ys).unwrap();
        let b = ks_two_sample(&ys, &xs).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a.statistic));
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn permutation_p_value_in_range(
        xs in prop::collection::vec(-5.0f64..5.0, 4..40),
        ys in prop::collection::vec(-5.0f64..5.0, 4..40),
        seed in any::<u64>(),
    ) {
        let x = SampleMatrix::from_flat(xs[..xs.len() / 2 * 2].to_vec(), 2).unwrap();
        let y = SampleMatrix::from_flat(ys[..ys.len() / 2 * 2].to_vec(), 2).unwrap();
        let a = energy_distance_perm_test(&x, &y, 199, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = energy_distance_perm_test(&x, &y, 199, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.p_value >= 1.0 / 200.0 && a.p_value <= 1.0);
    }
}
