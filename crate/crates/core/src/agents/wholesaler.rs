//! The wholesaler (address `cmc` in the bundled scenarios): sells to retailers and restocks from
//! suppliers, automatically when a sale drops stock below the reorder point.

use serde_json::{json, Value};

use super::buyer::{BuyerDesk, BuyerOutcome, Purchase};
use super::common::{categories, register, scenario_of, ACTION_REGISTER};
use super::seller::{SellerDesk, SellerOutcome};
use super::{Control, InventoryLedger, Preference};
use crate::messaging::{AgentAddress, Envelope, Performative, ProtocolId};
use crate::protocol::Role;
use crate::runtime::{Agent, AgentEvent, Context};

pub struct Wholesaler {
    admin: AgentAddress,
    ledger: InventoryLedger,
    seller: SellerDesk,
    buyer: BuyerDesk,
    pub reorder_preference: Preference,
}

impl Wholesaler {
    pub fn new(admin: AgentAddress, ledger: InventoryLedger, seller: SellerDesk, buyer: BuyerDesk) -> Self {
        Self { admin, ledger, seller, buyer, reorder_preference: Preference::Cheapest }
    }

    pub fn ledger(&self) -> &InventoryLedger {
        &self.ledger
    }

    fn settle(&mut self, outcome: BuyerOutcome, ctx: &mut Context<'_>) {
        match outcome {
            BuyerOutcome::Nothing => {}
            BuyerOutcome::Received { sku, quantity } => self.ledger.post_receipt(&sku, quantity, ctx.now()),
            BuyerOutcome::Abandoned { sku, quantity } => self.ledger.release_in_flight(&sku, quantity),
        }
    }

    fn after_sale(&mut self, outcome: SellerOutcome, ctx: &mut Context<'_>) {
        let SellerOutcome::Shipped { cfp, sku, .. } = outcome else { return };
        match self.ledger.check_reorder(&sku) {
            Ok(Some(req)) => {
                ctx.notify(format!("{}: {sku} below reorder point, replenishing {} kg", ctx.me(), super::kg(req.quantity)));
                let purchase = Purchase {
                    scope: scenario_of(&cfp).to_string(),
                    order_id: None,
                    sku: req.sku,
                    quantity: req.quantity,
                    preference: self.reorder_preference,
                };
                let outcome = self.buyer.start(ctx, purchase);
                self.settle(outcome, ctx);
            }
            Ok(None) => {}
            Err(e) => log::warn!("{}: {e}", ctx.me()),
        }
    }

    fn on_message(&mut self, ctx: &mut Context<'_>, env: Envelope) {
        let id = env.dialogue_id.clone();
        match env.protocol_id {
            ProtocolId::ContractNet => {
                let role = ctx.dialogue(&id).map(|d| d.role);
                if role == Some(Role::Participant) {
                    self.seller.on_negotiation(ctx, &env, &self.ledger);
                } else if self.buyer.owns_call(&id) {
                    let outcome = self.buyer.on_call_update(ctx, &id);
                    self.settle(outcome, ctx);
                }
            }
            ProtocolId::RequestResponse => match env.performative {
                Performative::Response if self.buyer.owns_search(&id) => {
                    let outcome = self.buyer.on_search(ctx, &id, Some(&env));
                    self.settle(outcome, ctx);
                }
                Performative::Response => {
                    let outcome = self.seller.on_response(ctx, &id, Some(&env), &mut self.ledger);
                    self.after_sale(outcome, ctx);
                }
                Performative::RequestPost => {
                    if !self.seller.on_delivery_notice(ctx, &env) {
                        super::common::respond(ctx, &id, json!({ "error": "unsupported request" }));
                    }
                }
                _ => super::common::respond(ctx, &id, json!({ "error": "unsupported request" })),
            },
        }
    }
}

impl Agent for Wholesaler {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        match event {
            AgentEvent::Behaviour { action, .. } if action == ACTION_REGISTER => {
                let location = self.seller.location;
                register(ctx, &self.admin, categories::WHOLESALER, Some(&location));
            }
            AgentEvent::Behaviour { .. } | AgentEvent::Timer { .. } => {}
            AgentEvent::Control(Control::Replenish { scenario, order_id, sku, quantity, preference }) => {
                let quantity = quantity.or_else(|| self.ledger.line(&sku).map(|l| l.reorder_quantity));
                let Some(quantity) = quantity.filter(|q| *q > 0) else {
                    ctx.notify(format!("{}: cannot replenish unknown sku {sku}", ctx.me()));
                    return;
                };
                if self.ledger.record_order(&sku, quantity).is_err() {
                    ctx.notify(format!("{}: cannot replenish unknown sku {sku}", ctx.me()));
                    return;
                }
                let outcome = self.buyer.start(ctx, Purchase { scope: scenario, order_id, sku, quantity, preference });
                self.settle(outcome, ctx);
            }
            AgentEvent::Control(other) => log::warn!("{}: ignoring {other:?}", ctx.me()),
            AgentEvent::Message { envelope, .. } => self.on_message(ctx, envelope),
            AgentEvent::Expired { dialogue_id } => {
                if self.buyer.owns_search(&dialogue_id) {
                    let outcome = self.buyer.on_search(ctx, &dialogue_id, None);
                    self.settle(outcome, ctx);
                } else if self.buyer.owns_call(&dialogue_id) {
                    let outcome = self.buyer.on_call_update(ctx, &dialogue_id);
                    self.settle(outcome, ctx);
                } else {
                    let outcome = self.seller.on_expired(ctx, &dialogue_id, &mut self.ledger);
                    self.after_sale(outcome, ctx);
                }
            }
        }
    }

    fn snapshot(&self) -> Value {
        json!({ "ledger": self.ledger, "buyer": self.buyer.snapshot(), "seller": self.seller.snapshot() })
    }
}
