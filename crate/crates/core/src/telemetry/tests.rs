use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::messaging::AgentAddress;
use crate::runtime::SimClock;

fn rec(t_ms: u64, temp_c: f64) -> TelemetryRecord<f64> {
    TelemetryRecord { t_ms, lat: 51.0, lon: -1.0, temp_c, humidity_pct: 80.0 }
}

fn range05() -> SafeRange<f64> {
    SafeRange::new(0.0, 5.0)
}

#[test]
fn tracking_id_matches_published_example() {
    assert_eq!(generate_tracking_id("Hermes", 1594666109633).unwrap(), "Hermes1594666109633");
    assert_eq!(generate_tracking_id("DPD", 42).unwrap(), "DPD0000000000042");
    assert!(generate_tracking_id("", 1).is_err());
    assert!(generate_tracking_id("Her mes", 1).is_err());
}

#[test]
fn parses_well_formed_file() {
    let text = "t_ms,lat,lon,temp_c,humidity_pct\n0,51.5,-0.12,3.5,80\n30000,51.6,-0.2,3.9,81.5\n60000,51.7,-0.3,4.1,82\n";
    let records: Vec<TelemetryRecord<f64>> = parse_dataset(text).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[1], TelemetryRecord { t_ms: 30000, lat: 51.6, lon: -0.2, temp_c: 3.9, humidity_pct: 81.5 });
    assert_eq!(parse_dataset::<f64>(&write_dataset(&records)).unwrap(), records);
}

#[test]
fn rejects_repeated_timestamps() {
    let text = "t_ms,lat,lon,temp_c,humidity_pct\n5,0,0,1,1\n5,0,0,1,1\n";
    assert!(matches!(parse_dataset::<f64>(text), Err(DatasetError::NonMonotoneTimestamps { line: 3 })));
}

#[test]
fn rejects_out_of_range_latitude() {
    let text = "t_ms,lat,lon,temp_c,humidity_pct\n0,123.0,0,1,1\n";
    assert!(matches!(parse_dataset::<f64>(text), Err(DatasetError::CoordinateOutOfRange { line: 2 })));
}

#[test]
fn rejects_bad_header_and_garbage() {
    assert!(matches!(parse_dataset::<f64>("t,lat\n"), Err(DatasetError::Parse { line: 1, .. })));
    let text = "t_ms,lat,lon,temp_c,humidity_pct\n0,abc,0,1,1\n";
    assert!(matches!(parse_dataset::<f64>(text), Err(DatasetError::Parse { line: 2, .. })));
}

#[test]
fn header_only_is_empty_dataset() {
    assert!(parse_dataset::<f64>("t_ms,lat,lon,temp_c,humidity_pct\n").unwrap().is_empty());
}

fn route(n_points: usize, noise_c: f64) -> SyntheticRoute<f64> {
    SyntheticRoute { n_points, base_temp_c: 3.0, noise_c, humidity_pct: 85.0, cadence_ms: DEFAULT_CADENCE_MS }
}

#[test]
fn two_point_route_is_endpoints() {
    let (o, d) = (GeoPoint::new(51.0, -2.0), GeoPoint::new(52.0, -1.0));
    let r = synthesize_route(o, d, &route(2, 1.0), &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0].position(), o);
    assert_eq!(r[1].position(), d);
    assert_eq!(r[1].t_ms, DEFAULT_CADENCE_MS);
}

#[test]
fn zero_noise_keeps_base_temperature() {
    let r = synthesize_route(GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 1.0), &route(20, 0.0), &mut ChaCha8Rng::seed_from_u64(9));
    assert!(r.iter().all(|x| x.temp_c == 3.0));
}

#[test]
fn midpoint_is_interpolated() {
    let r = synthesize_route(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 10.0), &route(3, 0.5), &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(r[1].lon, 5.0);
    assert_eq!(r[1].lat, 0.0);
}

#[test]
fn synthesis_is_deterministic_and_bounded() {
    let o = GeoPoint::new(53.4, -2.2);
    let d = GeoPoint::new(51.5, -0.1);
    let a = synthesize_route(o, d, &route(50, 1.5), &mut ChaCha8Rng::seed_from_u64(77));
    let b = synthesize_route(o, d, &route(50, 1.5), &mut ChaCha8Rng::seed_from_u64(77));
    assert_eq!(a, b);
    assert!(a.iter().all(|x| (x.temp_c - 3.0).abs() <= 1.5));
}

#[test]
fn in_range_temps_have_no_excursion() {
    let s = summarize_records("T", &[rec(0, 2.0), rec(10, 3.0), rec(20, 4.0)], range05(), 0.95).unwrap();
    assert_eq!(s.excursion_count, 0);
    assert_eq!(s.excursion_time_ms, 0);
    assert_eq!(s.quality_score, 1.0);
    assert_eq!(s.verdict, Verdict::Acceptable);
}

#[test]
fn single_spike_is_one_excursion() {
    let s = summarize_records("T", &[rec(0, 2.0), rec(10, 9.0), rec(20, 3.0)], range05(), 0.95).unwrap();
    assert_eq!(s.excursion_count, 1);
    // the spike holds from t=10 until the next record at t=20
    assert_eq!(s.excursion_time_ms, 10);
    assert_eq!(s.quality_score, 0.5);
    assert_eq!(s.verdict, Verdict::Compromised);
    assert_eq!((s.temp_min, s.temp_max), (2.0, 9.0));
    assert!((s.temp_mean - 14.0 / 3.0).abs() < 1e-12);
}

#[test]
fn degenerate_single_record() {
    let s = summarize_records("T", &[rec(7, 11.0)], range05(), 0.95).unwrap();
    assert_eq!(s.duration_ms, 0);
    assert_eq!(s.excursion_time_ms, 0);
    assert_eq!(s.excursion_count, 1);
    assert_eq!(s.quality_score, 1.0);
    assert_eq!(s.distance_km, 0.0);
}

#[test]
fn empty_records_and_undelivered_jobs_are_errors() {
    assert!(summarize_records::<f64>("T", &[], range05(), 0.95).is_err());
    let job = DeliveryJob::new("T", "o", AgentAddress::new("p").unwrap(), GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 0.0));
    assert_eq!(summarize(&job, range05(), 0.95), Err(SummaryError::NotDelivered("T".into())));
}

#[test]
fn one_degree_of_meridian() {
    let d = haversine_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 0.0));
    let expected = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    assert!((d - expected).abs() < 1e-9);
}

#[test]
fn london_to_paris() {
    let d = haversine_km(GeoPoint::new(51.5074, -0.1278), GeoPoint::new(48.8566, 2.3522));
    assert!((d - 343.5).abs() < 1.0, "{d}");
}

#[test]
fn works_with_f32() {
    let records = [
        TelemetryRecord::<f32> { t_ms: 0, lat: 0.0, lon: 0.0, temp_c: 1.0, humidity_pct: 50.0 },
        TelemetryRecord::<f32> { t_ms: 100, lat: 0.0, lon: 1.0, temp_c: 8.0, humidity_pct: 50.0 },
    ];
    let s = summarize_records("F", &records, SafeRange::new(0.0f32, 5.0), 0.95).unwrap();
    assert_eq!(s.excursion_count, 1);
    assert!((s.distance_km - 111.19).abs() < 0.01);
}

fn ten_records() -> Vec<TelemetryRecord<f64>> {
    (0..10).map(|i| rec(i * 1000, 3.0 + i as f64 * 0.1)).collect()
}

fn pending_job() -> DeliveryJob<f64> {
    DeliveryJob::new("Hermes1", "o-1", AgentAddress::new("3pl").unwrap(), GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 1.0))
}

#[test]
fn replay_emits_every_record_in_order() {
    let data = ten_records();
    let mut seen = Vec::new();
    let mut clock = SimClock::new(0.0);
    let job = replay(pending_job(), &data, &mut clock, |r| seen.push(*r)).unwrap();
    assert_eq!(seen, data);
    assert_eq!(job.records, data);
    assert_eq!(job.status, JobStatus::Delivered);
    assert_eq!(clock.now(), 9000);
}

#[test]
fn replay_of_empty_dataset_fails() {
    let mut n = 0;
    let job = replay(pending_job(), &[], &mut SimClock::new(0.0), |_| n += 1).unwrap();
    assert_eq!(job.status, JobStatus::Failed);
    assert_eq!(n, 0);
}

#[test]
fn paced_and_unpaced_replay_agree() {
    let data = ten_records();
    let (mut fast, mut paced) = (Vec::new(), Vec::new());
    replay(pending_job(), &data, &mut SimClock::new(0.0), |r| fast.push(*r)).unwrap();
    let start = std::time::Instant::now();
    replay(pending_job(), &data, &mut SimClock::new(200.0), |r| paced.push(*r)).unwrap();
    assert!(start.elapsed() >= std::time::Duration::from_millis(40));
    assert_eq!(fast, paced);
}

#[test]
fn job_transitions_are_forward_only() {
    let mut job = pending_job();
    assert!(job.push_record(rec(0, 1.0)).is_err());
    job.start(0).unwrap();
    job.push_record(rec(0, 1.0)).unwrap();
    assert_eq!(job.push_record(rec(0, 1.0)), Err(JobError::NonMonotone(0)));
    job.finish().unwrap();
    assert!(job.start(1).is_err());
    assert!(job.fail().is_err());
}

fn scan_excursions(temps: &[f64], lo: f64, hi: f64) -> u64 {
    let outside: Vec<bool> = temps.iter().map(|t| *t < lo || *t > hi).collect();
    (0..outside.len()).filter(|&i| outside[i] && (i == 0 || !outside[i - 1])).count() as u64
}

proptest! {
    #[test]
    fn excursion_count_matches_scan(
        temps in prop::collection::vec(-5.0f64..15.0, 1..60),
        steps in prop::collection::vec(1u64..5000, 60),
    ) {
        let mut t = 0;
        let records: Vec<_> = temps.iter().enumerate().map(|(i, temp)| {
            if i > 0 { t += steps[i]; }
            rec(t, *temp)
        }).collect();
        let s = summarize_records("P", &records, range05(), 0.95).unwrap();
        prop_assert_eq!(s.excursion_count, scan_excursions(&temps, 0.0, 5.0));
        prop_assert!(s.temp_min <= s.temp_mean && s.temp_mean <= s.temp_max);
        prop_assert!((0.0..=1.0).contains(&s.quality_score));
        prop_assert!(s.excursion_time_ms <= s.duration_ms);
    }

    #[test]
    fn distance_is_zero_iff_points_coincide(
        pts in prop::collection::vec((-80.0f64..80.0, -170.0f64..170.0), 1..10),
    ) {
        let records: Vec<_> = pts.iter().enumerate().map(|(i, (lat, lon))| TelemetryRecord {
            t_ms: i as u64, lat: *lat, lon: *lon, temp_c: 1.0, humidity_pct: 1.0,
        }).collect();
        let s = summarize_records("P", &records, range05(), 0.95).unwrap();
        let all_same = pts.iter().all(|p| p == &pts[0]);
        prop_assert!(s.distance_km >= 0.0);
        prop_assert_eq!(s.distance_km == 0.0, all_same);
    }

    #[test]
    fn dataset_round_trips(temps in prop::collection::vec(-30.0f64..50.0, 0..30)) {
        let records: Vec<_> = temps.iter().enumerate().map(|(i, t)| rec(i as u64 * 30_000, *t)).collect();
        prop_assert_eq!(parse_dataset::<f64>(&write_dataset(&records)).unwrap(), records);
    }
}
