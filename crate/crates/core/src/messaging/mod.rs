//! Agent communication language.
//!
//! Every interaction between agents is an [`Envelope`]: a performative, the
//! dialogue it belongs to, routing addresses, and a structured content body
//! whose shape is fixed by a named ontology. Envelopes travel in a canonical
//! text form (see [`wire`]) so traces stay readable and diffable.

mod address;
pub mod canonical;
mod envelope;
pub mod ontology;
mod performative;
pub mod wire;

pub use address::{AddressError, AgentAddress};
pub use envelope::{DialogueId, Envelope, InvalidEnvelope};
pub use ontology::{ContentError, ContentViolation, FieldType, Ontology, OntologyRegistry, Schema};
pub use performative::{Performative, ProtocolId, UnknownName};
pub use wire::{decode, encode, WireError};

/// Simulated-clock timestamp or duration in milliseconds.
pub type Millis = u64;

/// Structured key-value message body.
pub type Content = serde_json::Map<String, serde_json::Value>;

/// Built-in ontology identifiers.
pub mod ontologies {
    pub const MEAT_TRADE: &str = "meat_trade";
    pub const DELIVERY_SERVICE: &str = "delivery_service";
    pub const TELEMETRY: &str = "telemetry";
    pub const DISCOVERY: &str = "discovery";
}

/// True when `s` can sit in a `key=value` header line.
pub(crate) fn header_safe(s: &str) -> bool {
    !s.chars().any(char::is_control)
}
