use num_traits::Float;
use rand::Rng;

use super::{cast, GeoPoint, TelemetryRecord};
use crate::messaging::Millis;

pub const DEFAULT_CADENCE_MS: Millis = 30_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRoute<T> {
    pub n_points: usize,
    pub base_temp_c: T,
    pub noise_c: T,
    pub humidity_pct: T,
    pub cadence_ms: Millis,
}

/// A straight-line route from `origin` to `destination` with noisy
/// temperatures. Deterministic for a given `rng` state.
pub fn synthesize_route<T: Float, R: Rng + ?Sized>(
    origin: GeoPoint<T>,
    destination: GeoPoint<T>,
    params: &SyntheticRoute<T>,
    rng: &mut R,
) -> Vec<TelemetryRecord<T>> {
    assert!(params.n_points >= 2, "a route needs at least two points");
    let last = params.n_points - 1;
    (0..params.n_points)
        .map(|i| {
            let (lat, lon) = if i == last {
                (destination.lat, destination.lon)
            } else {
                let f = cast::<T>(i as f64) / cast::<T>(last as f64);
                (origin.lat + (destination.lat - origin.lat) * f, origin.lon + (destination.lon - origin.lon) * f)
            };
            let u: f64 = rng.random_range(-1.0..=1.0);
            TelemetryRecord {
                t_ms: i as Millis * params.cadence_ms,
                lat,
                lon,
                temp_c: params.base_temp_c + params.noise_c * cast::<T>(u),
                humidity_pct: params.humidity_pct,
            }
        })
        .collect()
}
