//! The logistics service provider: quotes delivery options from its rate
//! card, books deliveries with a randomly assigned 3PL, monitors the
//! telemetry feed and relays completion back to the shipper.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::common::{categories, register, request, respond, scenario_of, ACTION_REGISTER};
use super::trade::{assign_3pl, select_delivery_option, DeliveryMode, DeliveryOption};
use super::{grams_from_kg, Cents, Grams, Location, Preference};
use crate::messaging::{ontologies, AgentAddress, DialogueId, Envelope, Millis, Performative, ProtocolId};
use crate::protocol::RequestKind;
use crate::runtime::{Agent, AgentEvent, Context};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateEntry {
    pub option_id: String,
    #[serde(default)]
    pub mode: DeliveryMode,
    pub base_cents: Cents,
    #[serde(default)]
    pub per_kg_cents: Cents,
    pub eta_ms: Millis,
}

impl RateEntry {
    /// Base charge plus the per-kilogram rate, rounding part kilograms up.
    pub fn price(&self, quantity: Grams) -> Cents {
        self.base_cents + (self.per_kg_cents * quantity).div_ceil(1000)
    }
}

#[derive(Debug, Clone)]
struct Booking {
    request: DialogueId,
    shipper: AgentAddress,
    order_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticsDelivery {
    pub tracking_id: String,
    pub order_id: String,
    pub shipper: AgentAddress,
    pub three_pl: AgentAddress,
    pub status: String,
    /// Telemetry informs received on the monitoring feed, in order.
    pub telemetry: Vec<Value>,
}

pub struct Logistics {
    admin: AgentAddress,
    pub location: Location,
    rate_card: Vec<RateEntry>,
    three_pls: Vec<AgentAddress>,
    pending: BTreeMap<DialogueId, Booking>,
    deliveries: BTreeMap<String, LogisticsDelivery>,
}

impl Logistics {
    pub fn new(admin: AgentAddress, location: Location, rate_card: Vec<RateEntry>, three_pls: Vec<AgentAddress>) -> Self {
        Self { admin, location, rate_card, three_pls, pending: BTreeMap::new(), deliveries: BTreeMap::new() }
    }

    pub fn deliveries(&self) -> &BTreeMap<String, LogisticsDelivery> {
        &self.deliveries
    }

    fn options(&self, me: &AgentAddress, quantity: Grams) -> Vec<DeliveryOption> {
        self.rate_card
            .iter()
            .map(|r| DeliveryOption {
                option_id: r.option_id.clone(),
                carrier: me.clone(),
                mode: r.mode,
                cost_cents: r.price(quantity),
                eta_ms: r.eta_ms,
            })
            .collect()
    }

    fn quote(&self, ctx: &mut Context<'_>, env: &Envelope) {
        let quantity = env.content.get("quantity_kg").and_then(Value::as_f64).and_then(grams_from_kg).unwrap_or(0);
        let mut options = self.options(ctx.me(), quantity);
        if env.content.get("assign").and_then(Value::as_bool) == Some(true) {
            let preference = env.text("preference").and_then(Preference::parse).unwrap_or_default();
            options = select_delivery_option(&options, preference).cloned().into_iter().collect();
        }
        let options: Vec<Value> = options.iter().map(DeliveryOption::to_json).collect();
        respond(ctx, &env.dialogue_id, json!({ "options": options }));
    }

    fn book(&mut self, ctx: &mut Context<'_>, env: &Envelope) {
        let option_id = env.text("option_id").unwrap_or("");
        let Some(rate) = self.rate_card.iter().find(|r| r.option_id == option_id).cloned() else {
            respond(ctx, &env.dialogue_id, json!({ "error": format!("unknown option {option_id:?}") }));
            return;
        };
        let Some(three_pl) = assign_3pl(&self.three_pls, ctx.rng()).cloned() else {
            respond(ctx, &env.dialogue_id, json!({ "error": "no 3PL available" }));
            return;
        };
        let mut body = Value::Object(env.content.clone());
        body["action"] = json!("assign");
        body["eta_ms"] = json!(rate.eta_ms);
        let scope = scenario_of(&env.dialogue_id).to_string();
        match request(ctx, &scope, &three_pl, ontologies::DELIVERY_SERVICE, RequestKind::Post, body) {
            Ok(id) => {
                ctx.notify(format!("{} assigned order {} to {three_pl}", ctx.me(), env.text("order_id").unwrap_or("")));
                let booking = Booking {
                    request: env.dialogue_id.clone(),
                    shipper: env.sender.clone(),
                    order_id: env.text("order_id").unwrap_or("").to_string(),
                };
                self.pending.insert(id, booking);
            }
            Err(_) => respond(ctx, &env.dialogue_id, json!({ "error": "assignment failed" })),
        }
    }

    /// The 3PL accepted (or failed to accept) an assignment.
    fn on_assigned(&mut self, ctx: &mut Context<'_>, assign_id: &str, env: Option<&Envelope>) {
        let Some(booking) = self.pending.remove(assign_id) else { return };
        let accepted = env.filter(|e| !e.content.contains_key("error"));
        let Some((tracking_id, three_pl)) = accepted.and_then(|e| Some((e.text("tracking_id")?.to_string(), e.sender.clone())))
        else {
            respond(ctx, &booking.request, json!({ "error": "three_pl_unavailable" }));
            return;
        };
        respond(
            ctx,
            &booking.request,
            json!({ "status": "booked", "tracking_id": tracking_id, "carrier": three_pl.as_str() }),
        );
        self.deliveries.insert(
            tracking_id.clone(),
            LogisticsDelivery {
                tracking_id,
                order_id: booking.order_id,
                shipper: booking.shipper,
                three_pl,
                status: "in_transit".into(),
                telemetry: Vec::new(),
            },
        );
    }

    /// `delivered` or `delivery_failed` from the 3PL: acknowledge and relay.
    fn on_finished(&mut self, ctx: &mut Context<'_>, env: &Envelope) {
        let tracking_id = env.text("tracking_id").unwrap_or("").to_string();
        let Some(delivery) = self.deliveries.get_mut(&tracking_id) else {
            respond(ctx, &env.dialogue_id, json!({ "error": "unknown_tracking_id" }));
            return;
        };
        let action = env.text("action").unwrap_or("").to_string();
        delivery.status = if action == "delivered" { "delivered".into() } else { "failed".into() };
        let (shipper, order_id) = (delivery.shipper.clone(), delivery.order_id.clone());
        respond(ctx, &env.dialogue_id, json!({ "status": "ok" }));
        let body = json!({ "action": action, "order_id": order_id, "tracking_id": tracking_id, "status": delivery.status });
        let scope = scenario_of(&env.dialogue_id).to_string();
        let _ = request(ctx, &scope, &shipper, ontologies::DELIVERY_SERVICE, RequestKind::Post, body);
    }
}

impl Agent for Logistics {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        match event {
            AgentEvent::Behaviour { action, .. } if action == ACTION_REGISTER => {
                let location = self.location;
                register(ctx, &self.admin, categories::LOGISTICS, Some(&location));
            }
            AgentEvent::Message { envelope: env, .. } => match (env.protocol_id, env.performative) {
                (ProtocolId::RequestResponse, Performative::RequestGet) if env.ontology_id == ontologies::DELIVERY_SERVICE => {
                    self.quote(ctx, &env)
                }
                (ProtocolId::RequestResponse, Performative::RequestPost) if env.ontology_id == ontologies::DELIVERY_SERVICE => {
                    match env.text("action") {
                        Some("book") => self.book(ctx, &env),
                        Some("delivered" | "delivery_failed") => self.on_finished(ctx, &env),
                        _ => respond(ctx, &env.dialogue_id, json!({ "error": "unknown action" })),
                    }
                }
                (ProtocolId::RequestResponse, Performative::RequestGet | Performative::RequestPost) => {
                    respond(ctx, &env.dialogue_id, json!({ "error": "unsupported request" }))
                }
                (ProtocolId::RequestResponse, Performative::Response) => {
                    self.on_assigned(ctx, &env.dialogue_id, Some(&env));
                }
                (ProtocolId::ContractNet, Performative::Inform) if env.ontology_id == ontologies::TELEMETRY => {
                    let tracking_id = env.text("tracking_id").unwrap_or("");
                    if let Some(d) = self.deliveries.get_mut(tracking_id) {
                        d.telemetry.push(Value::Object(env.content.clone()));
                    }
                }
                _ => {}
            },
            AgentEvent::Expired { dialogue_id } => self.on_assigned(ctx, &dialogue_id, None),
            AgentEvent::Behaviour { .. } | AgentEvent::Timer { .. } | AgentEvent::Control(_) => {}
        }
    }

    fn snapshot(&self) -> Value {
        json!({ "deliveries": self.deliveries })
    }
}
