//! The admin agent: the registry's only envelope-facing endpoint.
//!
//! `request_post {action: "register", attributes}` upserts the sender's
//! description, `request_post {action: "deregister"}` removes it, and
//! `request_get {query}` answers `{agents: [...]}` in address order.

use serde_json::{json, Value};

use super::query::{AttrValue, Query};
use super::registry::{ServiceDescription, SharedRegistry};
use crate::messaging::{ontologies, Envelope, Performative, ProtocolId};
use crate::protocol::Decision;
use crate::runtime::{Agent, AgentEvent, Behaviour, Context};

pub const SERVE: &str = "serve_discovery";

pub struct AdminAgent {
    registry: SharedRegistry,
}

impl AdminAgent {
    pub fn new(registry: SharedRegistry) -> Self {
        Self { registry }
    }

    pub fn registry(&self) -> &SharedRegistry {
        &self.registry
    }

    pub fn behaviours() -> Vec<Behaviour> {
        vec![Behaviour::reactive(
            ProtocolId::RequestResponse,
            [Performative::RequestGet, Performative::RequestPost],
            SERVE,
        )]
    }

    fn answer(&self, env: &Envelope, now: u64) -> Value {
        if env.ontology_id != ontologies::DISCOVERY {
            return json!({ "error": format!("unsupported ontology {}", env.ontology_id) });
        }
        match env.performative {
            Performative::RequestGet => {
                let query = env.content.get("query").cloned().unwrap_or(Value::Null);
                match Query::from_json(&query).and_then(|q| self.registry.search(&q)) {
                    Ok(agents) => json!({ "agents": agents }),
                    Err(e) => json!({ "error": format!("invalid_query: {e}") }),
                }
            }
            Performative::RequestPost => match env.text("action") {
                Some("register") => {
                    let mut desc = ServiceDescription::new(env.sender.clone(), now);
                    if let Some(attrs) = env.content.get("attributes") {
                        let Some(attrs) = attrs.as_object() else {
                            return json!({ "error": "attributes must be an object" });
                        };
                        for (name, value) in attrs {
                            let Some(value) = AttrValue::from_json(value) else {
                                return json!({ "error": format!("attribute {name} is not a scalar") });
                            };
                            desc.attributes.insert(name.clone(), value);
                        }
                    }
                    self.registry.register(desc);
                    json!({ "status": "registered" })
                }
                Some("deregister") => {
                    self.registry.deregister(&env.sender);
                    json!({ "status": "deregistered" })
                }
                other => json!({ "error": format!("unknown action {}", other.unwrap_or("")) }),
            },
            _ => json!({ "error": "unsupported performative" }),
        }
    }
}

impl Agent for AdminAgent {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        let AgentEvent::Message { envelope, .. } = event else { return };
        let Value::Object(reply) = self.answer(&envelope, ctx.now()) else { unreachable!() };
        let _ = ctx.drive(&envelope.dialogue_id, Decision::Respond(reply));
    }

    fn snapshot(&self) -> Value {
        self.registry.snapshot()
    }
}
