//! The selling side of a contract-net negotiation, shared by suppliers and
//! the wholesaler.
//!
//! A cfp triggers a delivery quote from the seller's logistics agent; the
//! quote plus stock and list price decide the bid. An award books the chosen
//! option, and the shipment is posted once logistics has a tracking id.
//! `delivered` from logistics completes the dialogue.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::common::{content, location_json, request, respond, scenario_of};
use super::trade::{assess_order, Assessment, DeliveryOption, PriceTable, Proposal, PurchaseOrder};
use super::{kg, Grams, InventoryLedger, Location, Preference};
use crate::messaging::{ontologies, AgentAddress, DialogueId, Envelope, Millis, Performative};
use crate::protocol::{Decision, DialogueState, ParticipantState, RequestKind};
use crate::runtime::Context;

#[derive(Debug, Clone)]
struct Quote {
    cfp: DialogueId,
    order: PurchaseOrder,
}

#[derive(Debug, Clone)]
struct Bid {
    order: PurchaseOrder,
    proposal: Proposal,
}

#[derive(Debug, Clone)]
struct Sale {
    cfp: DialogueId,
    order: PurchaseOrder,
    tracking_id: Option<String>,
}

/// What the owning agent should react to after a seller step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SellerOutcome {
    Nothing,
    Shipped { cfp: DialogueId, sku: String, quantity: Grams },
}

#[derive(Debug, Clone)]
pub struct SellerDesk {
    pub location: Location,
    pub logistics: AgentAddress,
    pub prices: PriceTable,
    /// Ask logistics to assign a single option instead of quoting all.
    pub assigned_delivery: bool,
    pub proposal_ttl_ms: Millis,
    quotes: BTreeMap<DialogueId, Quote>,
    bids: BTreeMap<DialogueId, Bid>,
    bookings: BTreeMap<DialogueId, Sale>,
    shipped: BTreeMap<String, Sale>,
}

impl SellerDesk {
    pub fn new(location: Location, logistics: AgentAddress, prices: PriceTable, assigned_delivery: bool) -> Self {
        Self {
            location,
            logistics,
            prices,
            assigned_delivery,
            proposal_ttl_ms: 60_000,
            quotes: BTreeMap::new(),
            bids: BTreeMap::new(),
            bookings: BTreeMap::new(),
            shipped: BTreeMap::new(),
        }
    }

    /// Stock promised to open proposals.
    pub fn committed(&self, sku: &str) -> Grams {
        self.bids.values().filter(|b| b.order.sku == sku).map(|b| b.order.quantity).sum::<Grams>()
            + self.bookings.values().filter(|s| s.order.sku == sku).map(|s| s.order.quantity).sum::<Grams>()
    }

    pub fn owns_request(&self, dialogue_id: &str) -> bool {
        self.quotes.contains_key(dialogue_id) || self.bookings.contains_key(dialogue_id)
    }

    /// A contract-net envelope on a dialogue where this agent participates.
    pub fn on_negotiation(&mut self, ctx: &mut Context<'_>, env: &Envelope, ledger: &InventoryLedger) {
        match env.performative {
            Performative::Cfp => self.on_cfp(ctx, env, ledger),
            Performative::AcceptProposal => self.on_accept(ctx, env),
            Performative::RejectProposal | Performative::Failure => {
                self.bids.remove(&env.dialogue_id);
            }
            _ => {}
        }
    }

    fn on_cfp(&mut self, ctx: &mut Context<'_>, env: &Envelope, ledger: &InventoryLedger) {
        let me = ctx.me().clone();
        let Some(order) = PurchaseOrder::from_cfp(&env.content, env.sender.clone(), me, &env.dialogue_id) else {
            let _ = ctx.drive(&env.dialogue_id, Decision::Refuse(content(json!({ "reason": "invalid_order" }))));
            return;
        };
        if !(ledger.contains(&order.sku) && self.prices.contains_key(&order.sku)) {
            let _ = ctx.drive(&env.dialogue_id, Decision::Refuse(content(json!({ "reason": "unknown_sku" }))));
            return;
        }
        let destination = env.content.get("destination").cloned().unwrap_or(Value::Null);
        let preference = env.content.get("preference").and_then(Value::as_str).and_then(Preference::parse);
        let mut body = json!({
            "sku": order.sku,
            "quantity_kg": kg(order.quantity),
            "origin": location_json(&self.location),
            "destination": if destination.is_object() { destination } else { location_json(&self.location) },
        });
        if self.assigned_delivery {
            body["assign"] = json!(true);
            body["preference"] = json!(preference.unwrap_or_default().as_str());
        }
        let scope = scenario_of(&env.dialogue_id).to_string();
        match request(ctx, &scope, &self.logistics, ontologies::DELIVERY_SERVICE, RequestKind::Get, body) {
            Ok(id) => {
                self.quotes.insert(id, Quote { cfp: env.dialogue_id.clone(), order });
            }
            Err(_) => {
                let _ = ctx.drive(&env.dialogue_id, Decision::Refuse(content(json!({ "reason": "no_delivery_options" }))));
            }
        }
    }

    fn still_open(ctx: &Context<'_>, cfp: &str, state: ParticipantState) -> bool {
        ctx.dialogue(cfp).is_some_and(|d| d.state == DialogueState::Participant(state))
    }

    /// A response (or its absence, `env == None`) to one of our requests.
    pub fn on_response(
        &mut self,
        ctx: &mut Context<'_>,
        request_id: &str,
        env: Option<&Envelope>,
        ledger: &mut InventoryLedger,
    ) -> SellerOutcome {
        if let Some(quote) = self.quotes.remove(request_id) {
            self.on_quote(ctx, quote, env, ledger);
            return SellerOutcome::Nothing;
        }
        if let Some(sale) = self.bookings.remove(request_id) {
            return self.on_booking(ctx, sale, env, ledger);
        }
        SellerOutcome::Nothing
    }

    fn on_quote(&mut self, ctx: &mut Context<'_>, quote: Quote, env: Option<&Envelope>, ledger: &InventoryLedger) {
        if !Self::still_open(ctx, &quote.cfp, ParticipantState::CfpReceived) {
            return;
        }
        let options = env
            .filter(|e| !e.content.contains_key("error"))
            .and_then(|e| DeliveryOption::list_from_json(e.content.get("options")))
            .unwrap_or_default();
        if options.is_empty() {
            let _ = ctx.drive(&quote.cfp, Decision::Refuse(content(json!({ "reason": "no_delivery_options" }))));
            return;
        }
        let committed = self.committed(&quote.order.sku);
        let proposal_id = format!("{}:proposal", quote.cfp);
        let valid_until = ctx.now() + self.proposal_ttl_ms;
        match assess_order(&quote.order, ledger, committed, &self.prices, options, proposal_id, valid_until) {
            Assessment::Accept(proposal) => {
                if ctx.drive(&quote.cfp, Decision::Propose(proposal.to_content())).is_ok() {
                    self.bids.insert(quote.cfp, Bid { order: quote.order, proposal });
                }
            }
            Assessment::Refuse(reason) => {
                let _ = ctx.drive(&quote.cfp, Decision::Refuse(content(json!({ "reason": reason.as_str() }))));
            }
        }
    }

    fn on_accept(&mut self, ctx: &mut Context<'_>, env: &Envelope) {
        let Some(bid) = self.bids.remove(&env.dialogue_id) else { return };
        let option = match env.content.get("option_id").and_then(Value::as_str) {
            Some(id) => bid.proposal.delivery_options.iter().find(|o| o.option_id == id),
            None => bid.proposal.delivery_options.first(),
        };
        let Some(option) = option.cloned() else {
            let _ = ctx.drive(&env.dialogue_id, Decision::Fail(content(json!({ "reason": "unknown_option" }))));
            return;
        };
        let body = json!({
            "action": "book",
            "order_id": bid.order.order_id,
            "option_id": option.option_id,
            "sku": bid.order.sku,
            "quantity_kg": kg(bid.order.quantity),
            "origin": location_json(&self.location),
            "destination": env_destination(ctx, &env.dialogue_id).unwrap_or_else(|| location_json(&self.location)),
            "consignee": bid.order.buyer.as_str(),
            "eta_ms": option.eta_ms,
        });
        let scope = scenario_of(&env.dialogue_id).to_string();
        match request(ctx, &scope, &option.carrier, ontologies::DELIVERY_SERVICE, RequestKind::Post, body) {
            Ok(id) => {
                let sale = Sale { cfp: env.dialogue_id.clone(), order: bid.order, tracking_id: None };
                self.bookings.insert(id, sale);
            }
            Err(_) => {
                let _ = ctx.drive(&env.dialogue_id, Decision::Fail(content(json!({ "reason": "booking_failed" }))));
            }
        }
    }

    fn on_booking(
        &mut self,
        ctx: &mut Context<'_>,
        mut sale: Sale,
        env: Option<&Envelope>,
        ledger: &mut InventoryLedger,
    ) -> SellerOutcome {
        let fail = |ctx: &mut Context<'_>, reason: &str| {
            let _ = ctx.drive(&sale.cfp, Decision::Fail(content(json!({ "reason": reason }))));
        };
        if !Self::still_open(ctx, &sale.cfp, ParticipantState::Awarded) {
            return SellerOutcome::Nothing;
        }
        let tracking_id = env
            .filter(|e| !e.content.contains_key("error"))
            .and_then(|e| e.text("tracking_id"))
            .map(str::to_string);
        let Some(tracking_id) = tracking_id else {
            fail(ctx, "booking_failed");
            return SellerOutcome::Nothing;
        };
        if let Err(e) = ledger.post_shipment(&sale.order.sku, sale.order.quantity, ctx.now()) {
            log::warn!("{}: {e}", ctx.me());
            fail(ctx, "insufficient_stock");
            return SellerOutcome::Nothing;
        }
        ctx.notify(format!(
            "{} shipped {} kg of {} for order {} ({tracking_id})",
            ctx.me(),
            kg(sale.order.quantity),
            sale.order.sku,
            sale.order.order_id
        ));
        let outcome = SellerOutcome::Shipped { cfp: sale.cfp.clone(), sku: sale.order.sku.clone(), quantity: sale.order.quantity };
        sale.tracking_id = Some(tracking_id.clone());
        self.shipped.insert(tracking_id, sale);
        outcome
    }

    /// `request_post {action: delivered | delivery_failed}` from logistics.
    /// Returns false if the request was not about one of our shipments.
    pub fn on_delivery_notice(&mut self, ctx: &mut Context<'_>, env: &Envelope) -> bool {
        let action = env.text("action").unwrap_or("");
        if !matches!(action, "delivered" | "delivery_failed") {
            return false;
        }
        let tracking_id = env.text("tracking_id").unwrap_or("").to_string();
        let Some(sale) = self.shipped.remove(&tracking_id) else {
            respond(ctx, &env.dialogue_id, json!({ "error": "unknown_tracking_id" }));
            return true;
        };
        respond(ctx, &env.dialogue_id, json!({ "status": "ok" }));
        let decision = if action == "delivered" {
            Decision::Complete(content(json!({
                "order_id": sale.order.order_id,
                "status": "delivered",
                "tracking_id": tracking_id,
                "sku": sale.order.sku,
                "quantity_kg": kg(sale.order.quantity),
            })))
        } else {
            Decision::Fail(content(json!({ "reason": "delivery_failed" })))
        };
        let _ = ctx.drive(&sale.cfp, decision);
        true
    }

    /// A participant dialogue or one of our requests passed its deadline.
    pub fn on_expired(&mut self, ctx: &mut Context<'_>, dialogue_id: &str, ledger: &mut InventoryLedger) -> SellerOutcome {
        if self.owns_request(dialogue_id) {
            return self.on_response(ctx, dialogue_id, None, ledger);
        }
        self.bids.remove(dialogue_id);
        SellerOutcome::Nothing
    }

    pub fn snapshot(&self) -> Value {
        json!({
            "open_bids": self.bids.keys().collect::<Vec<_>>(),
            "shipments": self.shipped.iter().map(|(t, s)| (t.clone(), json!(s.order.order_id))).collect::<BTreeMap<_, _>>(),
        })
    }
}

fn env_destination(ctx: &Context<'_>, cfp: &str) -> Option<Value> {
    ctx.dialogue(cfp)?
        .last_received(Performative::Cfp)?
        .content
        .get("destination")
        .filter(|v| v.is_object())
        .cloned()
}
