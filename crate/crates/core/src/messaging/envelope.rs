use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ontology::{ContentError, OntologyRegistry};
use super::{header_safe, AgentAddress, Content, Millis, Performative, ProtocolId};

/// Conversation identifier shared by every message of one dialogue.
pub type DialogueId = String;

/// One message between two agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub sender: AgentAddress,
    pub receiver: AgentAddress,
    pub protocol_id: ProtocolId,
    pub ontology_id: String,
    pub performative: Performative,
    pub dialogue_id: DialogueId,
    pub reply_with: Option<String>,
    pub in_reply_to: Option<String>,
    pub sent_at: Millis,
    pub content: Content,
}

/// The first envelope field that breaks an invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid envelope field {field}: {reason}")]
pub struct InvalidEnvelope {
    pub field: &'static str,
    pub reason: String,
}

impl InvalidEnvelope {
    pub(crate) fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self { field, reason: reason.into() }
    }
}

impl Envelope {
    /// Checks the envelope against the built-in ontologies.
    pub fn validate(&self) -> Result<(), InvalidEnvelope> {
        self.validate_with(OntologyRegistry::builtin())
    }

    /// Checks fields in wire order and reports the first that fails.
    ///
    /// Whether `in_reply_to` names an earlier token of the same dialogue is a
    /// dialogue-level property and is enforced by the protocol engine.
    pub fn validate_with(&self, ontologies: &OntologyRegistry) -> Result<(), InvalidEnvelope> {
        if self.ontology_id.is_empty() || !header_safe(&self.ontology_id) {
            return Err(InvalidEnvelope::new("ontology_id", "empty or contains control characters"));
        }
        if !ontologies.contains(&self.ontology_id) {
            return Err(InvalidEnvelope::new(
                "ontology_id",
                format!("unregistered ontology {:?}", self.ontology_id),
            ));
        }
        if !self.protocol_id.allows(self.performative) {
            return Err(InvalidEnvelope::new(
                "performative",
                format!("{} is not legal in {}", self.performative, self.protocol_id),
            ));
        }
        if self.dialogue_id.is_empty() {
            return Err(InvalidEnvelope::new("dialogue_id", "empty"));
        }
        if !header_safe(&self.dialogue_id) {
            return Err(InvalidEnvelope::new("dialogue_id", "contains control characters"));
        }
        check_token("reply_with", self.reply_with.as_deref())?;
        check_token("in_reply_to", self.in_reply_to.as_deref())?;
        match ontologies.validate_content(&self.ontology_id, self.performative, &self.content) {
            Ok(()) => Ok(()),
            Err(ContentError::Invalid(violations)) => Err(InvalidEnvelope::new(
                "content",
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
            )),
            Err(e @ ContentError::UnknownOntology(_)) => {
                Err(InvalidEnvelope::new("ontology_id", e.to_string()))
            }
        }
    }

    /// Content lookup helpers used throughout the agents.
    pub fn text(&self, key: &str) -> Option<&str> {
        self.content.get(key).and_then(|v| v.as_str())
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.content.get(key).and_then(|v| v.as_f64())
    }
}

fn check_token(field: &'static str, token: Option<&str>) -> Result<(), InvalidEnvelope> {
    match token {
        Some("") => Err(InvalidEnvelope::new(field, "present but empty")),
        Some(t) if !header_safe(t) => Err(InvalidEnvelope::new(field, "contains control characters")),
        _ => Ok(()),
    }
}
