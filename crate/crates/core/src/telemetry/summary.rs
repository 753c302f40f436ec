use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{cast, DeliveryJob, GeoPoint, JobStatus, TelemetryRecord, EARTH_RADIUS_KM};
use crate::messaging::Millis;

/// Inclusive safe temperature band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeRange<T> {
    pub min_c: T,
    pub max_c: T,
}

impl<T: Float> SafeRange<T> {
    pub fn new(min_c: T, max_c: T) -> Self {
        Self { min_c, max_c }
    }

    pub fn contains(&self, temp_c: T) -> bool {
        temp_c >= self.min_c && temp_c <= self.max_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Acceptable,
    Compromised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport<T> {
    pub tracking_id: String,
    pub duration_ms: Millis,
    pub distance_km: T,
    pub temp_min: T,
    pub temp_max: T,
    pub temp_mean: T,
    pub excursion_count: u64,
    pub excursion_time_ms: Millis,
    pub quality_score: T,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SummaryError {
    #[error("delivery {0} is not delivered")]
    NotDelivered(String),
    #[error("delivery {0} has no records")]
    Empty(String),
}

/// Great-circle distance in kilometres.
pub fn haversine_km<T: Float>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let two = cast::<T>(2.0);
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / two).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / two).sin().powi(2);
    let h = h.min(T::one()).max(T::zero());
    two * cast::<T>(EARTH_RADIUS_KM) * h.sqrt().asin()
}

pub fn summarize<T: Float>(
    job: &DeliveryJob<T>,
    safe: SafeRange<T>,
    threshold: T,
) -> Result<SummaryReport<T>, SummaryError> {
    if job.status != JobStatus::Delivered {
        return Err(SummaryError::NotDelivered(job.tracking_id.clone()));
    }
    summarize_records(&job.tracking_id, &job.records, safe, threshold)
}

/// Summary analytics over time-ordered records.
///
/// An excursion is a maximal run of consecutive records outside `safe`.
/// Each out-of-range record contributes the interval to the next record,
/// so a trailing out-of-range record adds no time.
pub fn summarize_records<T: Float>(
    tracking_id: &str,
    records: &[TelemetryRecord<T>],
    safe: SafeRange<T>,
    threshold: T,
) -> Result<SummaryReport<T>, SummaryError> {
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Err(SummaryError::Empty(tracking_id.to_string()));
    };
    let duration_ms = last.t_ms - first.t_ms;

    let mut distance_km = T::zero();
    let mut excursion_count = 0u64;
    let mut excursion_time_ms: Millis = 0;
    let mut outside_before = false;
    for (i, r) in records.iter().enumerate() {
        let outside = !safe.contains(r.temp_c);
        if outside && !outside_before {
            excursion_count += 1;
        }
        outside_before = outside;
        if let Some(next) = records.get(i + 1) {
            distance_km = distance_km + haversine_km(r.position(), next.position());
            if outside {
                excursion_time_ms += next.t_ms - r.t_ms;
            }
        }
    }

    let temp_min = records.iter().map(|r| r.temp_c).fold(T::infinity(), T::min);
    let temp_max = records.iter().map(|r| r.temp_c).fold(T::neg_infinity(), T::max);
    let sum = records.iter().fold(T::zero(), |acc, r| acc + r.temp_c);
    let temp_mean = (sum / cast::<T>(records.len() as f64)).max(temp_min).min(temp_max);

    let quality_score = if duration_ms == 0 {
        T::one()
    } else {
        T::one() - cast::<T>(excursion_time_ms as f64) / cast::<T>(duration_ms as f64)
    };
    let verdict = if quality_score >= threshold { Verdict::Acceptable } else { Verdict::Compromised };

    Ok(SummaryReport {
        tracking_id: tracking_id.to_string(),
        duration_ms,
        distance_km,
        temp_min,
        temp_max,
        temp_mean,
        excursion_count,
        excursion_time_ms,
        quality_score,
        verdict,
    })
}
