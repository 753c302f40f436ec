//! Core of the agent-based supply chain: messaging, dialogue protocols,
//! discovery, the agent runtime, domain agents, delivery telemetry and the
//! gateway projections.

pub mod agents;
pub mod config;
pub mod discovery;
pub mod events;
pub mod gateway;
pub mod messaging;
pub mod protocol;
pub mod runtime;
pub mod system;
pub mod telemetry;

/// Telemetry types at the default `f64` precision.
pub type TelemetryRecord = telemetry::TelemetryRecord<f64>;
pub type GeoPoint = telemetry::GeoPoint<f64>;
pub type SafeRange = telemetry::SafeRange<f64>;
pub type SummaryReport = telemetry::SummaryReport<f64>;
pub type DeliveryJob = telemetry::DeliveryJob<f64>;
