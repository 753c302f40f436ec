use serde_json::{json, Value};

use super::buyer::{BuyerDesk, BuyerOutcome, Purchase};
use super::common::{categories, register, respond, ACTION_REGISTER};
use super::{Control, InventoryLedger};
use crate::messaging::{AgentAddress, Performative, ProtocolId};
use crate::runtime::{Agent, AgentEvent, Context};

pub struct Retailer {
    admin: AgentAddress,
    ledger: InventoryLedger,
    buyer: BuyerDesk,
}

impl Retailer {
    pub fn new(admin: AgentAddress, ledger: InventoryLedger, buyer: BuyerDesk) -> Self {
        Self { admin, ledger, buyer }
    }

    pub fn ledger(&self) -> &InventoryLedger {
        &self.ledger
    }

    fn settle(&mut self, outcome: BuyerOutcome, ctx: &mut Context<'_>) {
        match outcome {
            BuyerOutcome::Received { sku, quantity } => self.ledger.post_receipt(&sku, quantity, ctx.now()),
            BuyerOutcome::Abandoned { sku, quantity } => self.ledger.release_in_flight(&sku, quantity),
            BuyerOutcome::Nothing => {}
        }
    }
}

impl Agent for Retailer {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        match event {
            AgentEvent::Behaviour { action, .. } if action == ACTION_REGISTER => {
                let location = self.buyer.location;
                register(ctx, &self.admin, categories::RETAILER, Some(&location));
            }
            AgentEvent::Control(Control::Purchase { scenario, order_id, sku, quantity, preference }) => {
                let _ = self.ledger.record_order(&sku, quantity);
                let outcome = self.buyer.start(ctx, Purchase { scope: scenario, order_id, sku, quantity, preference });
                self.settle(outcome, ctx);
            }
            AgentEvent::Message { envelope: env, .. } => {
                let id = env.dialogue_id.clone();
                let outcome = match (env.protocol_id, env.performative) {
                    (ProtocolId::ContractNet, _) if self.buyer.owns_call(&id) => self.buyer.on_call_update(ctx, &id),
                    (ProtocolId::RequestResponse, Performative::Response) => self.buyer.on_search(ctx, &id, Some(&env)),
                    (ProtocolId::RequestResponse, Performative::RequestGet | Performative::RequestPost) => {
                        respond(ctx, &id, json!({ "error": "unsupported request" }));
                        BuyerOutcome::Nothing
                    }
                    _ => BuyerOutcome::Nothing,
                };
                self.settle(outcome, ctx);
            }
            AgentEvent::Expired { dialogue_id } => {
                let outcome = if self.buyer.owns_search(&dialogue_id) {
                    self.buyer.on_search(ctx, &dialogue_id, None)
                } else {
                    self.buyer.on_call_update(ctx, &dialogue_id)
                };
                self.settle(outcome, ctx);
            }
            AgentEvent::Behaviour { .. } | AgentEvent::Timer { .. } | AgentEvent::Control(_) => {}
        }
    }

    fn snapshot(&self) -> Value {
        json!({ "ledger": self.ledger, "buyer": self.buyer.snapshot() })
    }
}
