mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use support::telemetry_oracle::{check, random_records};

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn summary_matches_direct_computation(seed in any::<u64>()) {
        let records = random_records(&mut ChaCha8Rng::seed_from_u64(seed), 200);
        prop_assert_eq!(check(&records, 0.0, 5.0).map(|_| ()), Ok(()));
    }
}

#[test]
fn worked_examples() {
    let r = |t, temp_c| a2sc_core::TelemetryRecord { t_ms: t, lat: 53.0, lon: -2.0, temp_c, humidity_pct: 80.0 };
    let report = check(&[r(0, 2.0), r(10, 9.0), r(20, 3.0)], 0.0, 5.0).unwrap();
    assert_eq!((report.excursion_count, report.excursion_time_ms), (1, 10));
    let single = check(&[r(5, 9.0)], 0.0, 5.0).unwrap();
    assert_eq!((single.quality_score, single.excursion_time_ms), (1.0, 0));
}
