use thiserror::Error;

use crate::messaging::Millis;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("carrier name {0:?} must be non-empty and alphanumeric")]
pub struct InvalidCarrierName(pub String);

/// `carrier_name` followed by the 13-digit epoch-millisecond timestamp.
pub fn generate_tracking_id(carrier_name: &str, epoch_ms: Millis) -> Result<String, InvalidCarrierName> {
    if carrier_name.is_empty() || !carrier_name.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(InvalidCarrierName(carrier_name.to_string()));
    }
    Ok(format!("{carrier_name}{epoch_ms:013}"))
}
