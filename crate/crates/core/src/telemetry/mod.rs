//! Delivery telemetry: tracking ids, datasets, replay and summary analytics.
//!
//! Analytics are generic over the floating-point type; the crate root
//! exposes `f64` aliases.

mod dataset;
mod job;
mod summary;
mod synth;
mod tracking;

pub use dataset::{load_dataset, parse_dataset, write_dataset, DatasetError, CSV_HEADER};
pub use job::{replay, DeliveryJob, JobError, JobStatus};
pub use summary::{haversine_km, summarize, summarize_records, SafeRange, SummaryError, SummaryReport, Verdict};
pub use synth::{synthesize_route, SyntheticRoute, DEFAULT_CADENCE_MS};
pub use tracking::{generate_tracking_id, InvalidCarrierName};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::messaging::Millis;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_QUALITY_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    pub lat: T,
    pub lon: T,
}

impl<T: Float> GeoPoint<T> {
    pub fn new(lat: T, lon: T) -> Self {
        Self { lat, lon }
    }

    pub fn in_range(&self) -> bool {
        let (lat_max, lon_max) = (cast::<T>(90.0), cast::<T>(180.0));
        self.lat >= -lat_max && self.lat <= lat_max && self.lon >= -lon_max && self.lon <= lon_max
    }
}

/// One sample; `t_ms` counts from delivery start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord<T> {
    pub t_ms: Millis,
    pub lat: T,
    pub lon: T,
    pub temp_c: T,
    pub humidity_pct: T,
}

impl<T: Float> TelemetryRecord<T> {
    pub fn position(&self) -> GeoPoint<T> {
        GeoPoint::new(self.lat, self.lon)
    }
}

pub(crate) fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("f64 constant fits the float type")
}

#[cfg(test)]
mod tests;
