//! Direct computations of the delivery summary, for comparison.

use rand::Rng;

use a2sc_core::telemetry::{summarize_records, SafeRange, SummaryReport, TelemetryRecord};

pub struct Expected {
    pub excursion_count: u64,
    pub excursion_time_ms: u64,
    pub temp_min: f64,
    pub temp_max: f64,
    pub temp_mean: f64,
    pub distance_km: f64,
    pub duration_ms: u64,
}

/// Great-circle distance via the chord between unit vectors.
fn chord_km(a: &TelemetryRecord<f64>, b: &TelemetryRecord<f64>) -> f64 {
    let v = |lat: f64, lon: f64| {
        let (lat, lon) = (lat.to_radians(), lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (p, q) = (v(a.lat, a.lon), v(b.lat, b.lon));
    let chord = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    2.0 * 6371.0 * (chord / 2.0).min(1.0).asin()
}

pub fn expected(records: &[TelemetryRecord<f64>], min_c: f64, max_c: f64) -> Expected {
    let outside: Vec<bool> = records.iter().map(|r| r.temp_c < min_c || r.temp_c > max_c).collect();
    let last = records.len() - 1;
    let mut excursion_count = 0;
    let mut excursion_time_ms = 0;
    let mut i = 0;
    while i < records.len() {
        if !outside[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < records.len() && outside[i] {
            i += 1;
        }
        // The run lasts until the first in-range record, or the last record.
        let end = i.min(last);
        excursion_count += 1;
        excursion_time_ms += records[end].t_ms - records[start].t_ms;
    }
    let mut temps: Vec<f64> = records.iter().map(|r| r.temp_c).collect();
    temps.sort_by(f64::total_cmp);
    let temp_mean = temps.iter().sum::<f64>() / temps.len() as f64;
    Expected {
        excursion_count,
        excursion_time_ms,
        temp_min: temps[0],
        temp_max: temps[temps.len() - 1],
        temp_mean,
        distance_km: records.windows(2).map(|w| chord_km(&w[0], &w[1])).sum(),
        duration_ms: records[last].t_ms - records[0].t_ms,
    }
}

/// Up to `max_len` monotone records around a cold-chain set point, some of
/// them landing exactly on the range bounds.
pub fn random_records(rng: &mut impl Rng, max_len: usize) -> Vec<TelemetryRecord<f64>> {
    let n = rng.random_range(1..=max_len.max(1));
    let mut t = rng.random_range(0..1_000_000u64);
    let (mut lat, mut lon) = (rng.random_range(-60.0..60.0), rng.random_range(-170.0..170.0));
    (0..n)
        .map(|_| {
            t += rng.random_range(0..=120_000);
            lat = f64::clamp(lat + rng.random_range(-0.05..0.05), -89.0, 89.0);
            lon = f64::clamp(lon + rng.random_range(-0.05..0.05), -179.0, 179.0);
            let temp_c = match rng.random_range(0..10) {
                0 => 0.0,
                1 => 5.0,
                _ => rng.random_range(-3.0..9.0),
            };
            TelemetryRecord { t_ms: t, lat, lon, temp_c, humidity_pct: rng.random_range(60.0..95.0) }
        })
        .collect()
}

pub fn check(records: &[TelemetryRecord<f64>], min_c: f64, max_c: f64) -> Result<SummaryReport<f64>, String> {
    let report = summarize_records("T1", records, SafeRange { min_c, max_c }, 0.95).map_err(|e| e.to_string())?;
    let e = expected(records, min_c, max_c);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut problems = Vec::new();
    if report.excursion_count != e.excursion_count {
        problems.push(format!("excursion_count {} != {}", report.excursion_count, e.excursion_count));
    }
    if report.excursion_time_ms != e.excursion_time_ms {
        problems.push(format!("excursion_time {} != {}", report.excursion_time_ms, e.excursion_time_ms));
    }
    if report.duration_ms != e.duration_ms {
        problems.push(format!("duration {} != {}", report.duration_ms, e.duration_ms));
    }
    for (name, got, want) in [
        ("temp_min", report.temp_min, e.temp_min),
        ("temp_max", report.temp_max, e.temp_max),
        ("temp_mean", report.temp_mean, e.temp_mean),
    ] {
        if !close(got, want) {
            problems.push(format!("{name} {got} != {want}"));
        }
    }
    if (report.distance_km - e.distance_km).abs() > 1e-6 * e.distance_km.max(1.0) {
        problems.push(format!("distance {} != {}", report.distance_km, e.distance_km));
    }
    let quality = if e.duration_ms == 0 { 1.0 } else { 1.0 - e.excursion_time_ms as f64 / e.duration_ms as f64 };
    if !close(report.quality_score, quality) {
        problems.push(format!("quality {} != {quality}", report.quality_score));
    }
    if problems.is_empty() {
        Ok(report)
    } else {
        Err(problems.join("; "))
    }
}
