//! Canonical text encoding of an [`Envelope`].
//!
//! ```text
//! A2SC1
//! sender=cmc
//! receiver=supplier-1
//! protocol_id=contract_net
//! ontology_id=meat_trade
//! performative=cfp
//! dialogue_id=sc-1/cmc/2
//! reply_with=cmc#1
//! in_reply_to=
//! sent_at=20
//!
//! {"quantity_kg":50,"sku":"beef-01"}
//! ```
//!
//! Header fields appear in fixed order, absent optionals encode as an empty
//! value, and the body is canonical minified JSON followed by `\n`. Because
//! the body never contains a raw newline, a record is exactly twelve lines and
//! records can be concatenated without framing.

use thiserror::Error;

use super::{canonical, AgentAddress, Envelope, InvalidEnvelope, Performative, ProtocolId};

pub const MAGIC: &str = "A2SC1";

/// Header keys in wire order.
pub const HEADER_KEYS: [&str; 9] = [
    "sender",
    "receiver",
    "protocol_id",
    "ontology_id",
    "performative",
    "dialogue_id",
    "reply_with",
    "in_reply_to",
    "sent_at",
];

/// Lines per record: magic, headers, blank separator, body.
pub const RECORD_LINES: usize = HEADER_KEYS.len() + 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error(transparent)]
    Invalid(#[from] InvalidEnvelope),
}

fn malformed(reason: impl Into<String>) -> WireError {
    WireError::Malformed(reason.into())
}

pub fn encode(envelope: &Envelope) -> Result<Vec<u8>, WireError> {
    envelope.validate()?;
    Ok(render(envelope).into_bytes())
}

fn render(e: &Envelope) -> String {
    let values = [
        e.sender.as_str(),
        e.receiver.as_str(),
        e.protocol_id.as_str(),
        &e.ontology_id,
        e.performative.as_str(),
        &e.dialogue_id,
        e.reply_with.as_deref().unwrap_or(""),
        e.in_reply_to.as_deref().unwrap_or(""),
        &e.sent_at.to_string(),
    ];
    let mut out = String::with_capacity(256);
    out.push_str(MAGIC);
    out.push('\n');
    for (key, value) in HEADER_KEYS.iter().zip(values) {
        out.push_str(key);
        out.push('=');
        out.push_str(value);
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&canonical::to_string(&serde_json::Value::Object(e.content.clone())));
    out.push('\n');
    out
}

pub fn decode(bytes: &[u8]) -> Result<Envelope, WireError> {
    let text = std::str::from_utf8(bytes).map_err(|e| malformed(format!("not UTF-8: {e}")))?;
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| malformed("missing final newline"))?;
    let lines: Vec<&str> = body.split('\n').collect();
    if lines.len() != RECORD_LINES {
        return Err(malformed(format!("expected {RECORD_LINES} lines, found {}", lines.len())));
    }
    if lines[0] != MAGIC {
        return Err(malformed("missing A2SC1 magic line"));
    }
    let mut values = [""; 9];
    for (i, key) in HEADER_KEYS.iter().enumerate() {
        let (k, v) = lines[i + 1]
            .split_once('=')
            .ok_or_else(|| malformed(format!("header line {} has no '='", i + 2)))?;
        if k != *key {
            return Err(malformed(format!("expected header {key}, found {k:?}")));
        }
        values[i] = v;
    }
    if !lines[10].is_empty() {
        return Err(malformed("missing blank line before body"));
    }
    let content = match serde_json::from_str::<serde_json::Value>(lines[11]) {
        Ok(serde_json::Value::Object(map)) => map,
        Ok(_) => return Err(malformed("body is not a JSON object")),
        Err(e) => return Err(malformed(format!("body is not JSON: {e}"))),
    };
    let sent_at = values[8]
        .parse::<u64>()
        .map_err(|_| malformed(format!("sent_at {:?} is not an integer", values[8])))?;

    let address = |field: &'static str, v: &str| {
        AgentAddress::new(v).map_err(|e| InvalidEnvelope::new(field, e.to_string()))
    };
    let optional = |v: &str| (!v.is_empty()).then(|| v.to_string());
    let envelope = Envelope {
        sender: address("sender", values[0])?,
        receiver: address("receiver", values[1])?,
        protocol_id: values[2]
            .parse::<ProtocolId>()
            .map_err(|e| InvalidEnvelope::new("protocol_id", e.to_string()))?,
        ontology_id: values[3].to_string(),
        performative: values[4]
            .parse::<Performative>()
            .map_err(|e| InvalidEnvelope::new("performative", e.to_string()))?,
        dialogue_id: values[5].to_string(),
        reply_with: optional(values[6]),
        in_reply_to: optional(values[7]),
        sent_at,
        content,
    };
    envelope.validate()?;
    if render(&envelope).as_bytes() != bytes {
        return Err(malformed("non-canonical encoding"));
    }
    Ok(envelope)
}
