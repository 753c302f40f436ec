use serde_json::{json, Value};

use super::Location;
use crate::messaging::{ontologies, AgentAddress, Content, DialogueId, ProtocolId};
use crate::protocol::{Decision, Dialogue, ProtocolError, RequestKind};
use crate::runtime::{Behaviour, Context};

/// Registry categories each agent type registers under.
pub mod categories {
    pub const SUPPLIER: &str = "meat_supply";
    pub const WHOLESALER: &str = "meat_wholesale";
    pub const RETAILER: &str = "meat_retail";
    pub const LOGISTICS: &str = "logistics";
    pub const THREE_PL: &str = "three_pl";
}

pub const ACTION_REGISTER: &str = "register";
pub const ACTION_NEGOTIATE: &str = "negotiate";
pub const ACTION_SERVICE: &str = "service";

/// Registration at start, plus reactions to both protocols.
pub fn default_behaviours() -> Vec<Behaviour> {
    vec![
        Behaviour::one_shot(ACTION_REGISTER),
        Behaviour::reactive_all(ProtocolId::ContractNet, ACTION_NEGOTIATE),
        Behaviour::reactive_all(ProtocolId::RequestResponse, ACTION_SERVICE),
    ]
}

/// The scenario a dialogue belongs to: the id up to its first `/`.
pub fn scenario_of(dialogue_id: &str) -> &str {
    dialogue_id.split('/').next().unwrap_or(dialogue_id)
}

pub(crate) fn content(value: Value) -> Content {
    match value {
        Value::Object(map) => map,
        other => panic!("content must be a JSON object, got {other}"),
    }
}

pub(crate) fn location_json(location: &Location) -> Value {
    json!({ "lat": location.lat, "lon": location.lon })
}

pub(crate) fn location_from(value: Option<&Value>) -> Option<Location> {
    let v = value?;
    Some(Location::new(v.get("lat")?.as_f64()?, v.get("lon")?.as_f64()?))
}

/// Opens a single-round request dialogue and returns its id.
pub(crate) fn request(
    ctx: &mut Context<'_>,
    scope: &str,
    to: &AgentAddress,
    ontology: &str,
    kind: RequestKind,
    body: Value,
) -> Result<DialogueId, ProtocolError> {
    let id = ctx.next_dialogue_id(scope);
    let dialogue = Dialogue::initiator(
        id.clone(),
        ProtocolId::RequestResponse,
        ontology,
        ctx.me().clone(),
        [to.clone()],
        ctx.timeouts(),
    );
    ctx.open(dialogue, Decision::Request { kind, content: content(body) })?;
    Ok(id)
}

pub(crate) fn respond(ctx: &mut Context<'_>, dialogue_id: &str, body: Value) {
    let _ = ctx.drive(dialogue_id, Decision::Respond(content(body)));
}

pub(crate) fn register(ctx: &mut Context<'_>, admin: &AgentAddress, category: &str, location: Option<&Location>) {
    let mut attributes = json!({ "category": category, "agent_type": ctx.agent_type().as_str() });
    if let Some(loc) = location {
        attributes["lat"] = json!(loc.lat);
        attributes["lon"] = json!(loc.lon);
    }
    let body = json!({ "action": "register", "attributes": attributes });
    let _ = request(ctx, "boot", admin, ontologies::DISCOVERY, RequestKind::Post, body);
}
