use mcbf_core::baselines::{qos_power_allocation, FixedDirectionGains};
use mcbf_core::channel::{db_to_linear, generate_channels, linear_to_db, ChannelSet, NetworkConfig};
use mcbf_core::coordination::master_update;
use mcbf_core::qos::{it_index, ItVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn it_index_is_a_bijection(n in 2usize..5, k in 1usize..4) {
        let mut seen = vec![false; n * (n - 1) * k];
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                for u in 0..k {
                    let idx = it_index(i, j, u, n, k).unwrap();
                    prop_assert!(!seen[idx]);
                    seen[idx] = true;
                }
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        prop_assert!(it_index(0, 0, 0, n, k).is_err());
    }

    #[test]
    fn master_update_moves_at_most_mu_and_stays_nonnegative(
        values in prop::collection::vec(0.0f64..5.0, 4),
        g in prop::collection::vec(-3.0f64..3.0, 4),
        mu in 0.0f64..2.0,
    ) {
        prop_assume!(g.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let it = ItVector::from_values(2, 2, values).unwrap();
        let next = master_update(&it, &g, mu).unwrap();
        prop_assert!(next.values.iter().all(|&v| v >= 0.0));
        let moved = next.values.iter().zip(&it.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(moved <= mu + 1e-12);
    }

    #[test]
    fn db_round_trip(x in -60.0f64..60.0) {
        prop_assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-9);
    }

    #[test]
    fn channel_json_round_trip_is_exact(
        n in 1usize..4, k in 1usize..3, nt in 1usize..4, seed in any::<u64>(),
        r_intra in 0.0f64..0.95, r_inter in 0.0f64..0.95,
    ) {
        let mut cfg = NetworkConfig::new(n, k, nt).with_seed(seed);
        cfg.r_intra = r_intra;
        cfg.r_inter = r_inter;
        let ch = generate_channels(&cfg).unwrap();
        let back = ChannelSet::from_json(&ch.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), ch.to_json());
        for i in 0..n {
            for j in 0..n {
                for u in 0..k {
                    prop_assert_eq!(back.h(i, j, u), ch.h(i, j, u));
                }
            }
        }
    }

    #[test]
    fn fixed_point_allocation_meets_every_target(
        seed in any::<u64>(), gamma_db in -5.0f64..8.0,
    ) {
        let ch = generate_channels(&NetworkConfig::new(2, 2, 4).with_seed(seed)).unwrap();
        let gains = FixedDirectionGains::isotropic(&ch, 1.0);
        let gamma = db_to_linear(gamma_db);
        if let Some(p) = qos_power_allocation(&gains, &[gamma; 2]).unwrap() {
            let sinr = gains.sinr(&p);
            prop_assert!(sinr.iter().all(|&s| s >= gamma * (1.0 - 1e-9)));
            // minimality: some user of every cell sits on its target
            for i in 0..2 {
                prop_assert!((0..2).any(|u| sinr[(i, u)] <= gamma * (1.0 + 1e-6)));
            }
        }
    }
}
