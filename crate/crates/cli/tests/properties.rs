use proptest::prelude::*;

use uavnoma_cli::csv::format_value;
use uavnoma_cli::RunConfig;

proptest! {
    #[test]
    fn csv_values_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let back: f64 = format_value(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn config_round_trips_through_toml(
        rho in 0.01f64..0.99,
        m in 0.5f64..50.0,
        k_db in -10.0f64..30.0,
        seed in 0..=i64::MAX as u64,
        samples in 0u64..10_000_000,
        values in prop::collection::btree_set(-20i32..60, 2..8),
    ) {
        let mut c = RunConfig::default();
        c.channel.rho = rho;
        c.channel.m = m;
        c.channel.k_db = k_db;
        c.sim.seed = seed;
        c.sim.samples = samples;
        c.sweep.values = Some(values.into_iter().map(f64::from).collect());
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert!(back.model().is_ok());
    }
}
