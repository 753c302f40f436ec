use serde_json::{json, Value};

use super::common::{categories, register, respond, ACTION_REGISTER};
use super::seller::SellerDesk;
use super::InventoryLedger;
use crate::messaging::{AgentAddress, Performative, ProtocolId};
use crate::runtime::{Agent, AgentEvent, Context};

pub struct Supplier {
    admin: AgentAddress,
    ledger: InventoryLedger,
    seller: SellerDesk,
}

impl Supplier {
    pub fn new(admin: AgentAddress, ledger: InventoryLedger, seller: SellerDesk) -> Self {
        Self { admin, ledger, seller }
    }

    pub fn ledger(&self) -> &InventoryLedger {
        &self.ledger
    }
}

impl Agent for Supplier {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        match event {
            AgentEvent::Behaviour { action, .. } if action == ACTION_REGISTER => {
                let location = self.seller.location;
                register(ctx, &self.admin, categories::SUPPLIER, Some(&location));
            }
            AgentEvent::Message { envelope: env, .. } => match (env.protocol_id, env.performative) {
                (ProtocolId::ContractNet, _) => self.seller.on_negotiation(ctx, &env, &self.ledger),
                (ProtocolId::RequestResponse, Performative::Response) => {
                    self.seller.on_response(ctx, &env.dialogue_id, Some(&env), &mut self.ledger);
                }
                (ProtocolId::RequestResponse, Performative::RequestPost) => {
                    if !self.seller.on_delivery_notice(ctx, &env) {
                        respond(ctx, &env.dialogue_id, json!({ "error": "unsupported request" }));
                    }
                }
                (ProtocolId::RequestResponse, _) => {
                    respond(ctx, &env.dialogue_id, json!({ "error": "unsupported request" }));
                }
            },
            AgentEvent::Expired { dialogue_id } => {
                self.seller.on_expired(ctx, &dialogue_id, &mut self.ledger);
            }
            AgentEvent::Behaviour { .. } | AgentEvent::Timer { .. } | AgentEvent::Control(_) => {}
        }
    }

    fn snapshot(&self) -> Value {
        json!({ "ledger": self.ledger, "seller": self.seller.snapshot() })
    }
}
