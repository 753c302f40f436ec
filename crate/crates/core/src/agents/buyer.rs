//! The buying side: find sellers through the registry, call for proposals,
//! award the best landed cost and wait for the delivery to complete.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use super::common::{content, location_json, request};
use super::trade::{select_delivery_option, select_proposal, Proposal};
use super::{kg, Grams, Location, Preference};
use crate::messaging::{ontologies, AgentAddress, DialogueId, Envelope, Millis, ProtocolId};
use crate::protocol::{Decision, Dialogue, DialogueState, InitiatorState, Outcome, RequestKind, Timeouts};
use crate::runtime::Context;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Purchase {
    /// Scenario prefix for every dialogue this purchase opens.
    pub scope: String,
    pub order_id: Option<String>,
    pub sku: String,
    pub quantity: Grams,
    pub preference: Preference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuyerOutcome {
    Nothing,
    Received { sku: String, quantity: Grams },
    /// The purchase ended without goods.
    Abandoned { sku: String, quantity: Grams },
}

#[derive(Debug, Clone)]
pub struct BuyerDesk {
    pub admin: AgentAddress,
    pub location: Location,
    /// Registry category of the sellers to call.
    pub seller_category: &'static str,
    /// Whether the accept names a delivery option (replenishment) or leaves
    /// it to the seller's logistics (wholesale).
    pub selects_delivery: bool,
    pub reply_window_ms: Millis,
    searches: BTreeMap<DialogueId, Purchase>,
    calls: BTreeMap<DialogueId, Purchase>,
    awarded: BTreeSet<DialogueId>,
}

impl BuyerDesk {
    pub fn new(admin: AgentAddress, location: Location, seller_category: &'static str, selects_delivery: bool) -> Self {
        Self {
            admin,
            location,
            seller_category,
            selects_delivery,
            reply_window_ms: crate::protocol::DEFAULT_REPLY_MS,
            searches: BTreeMap::new(),
            calls: BTreeMap::new(),
            awarded: BTreeSet::new(),
        }
    }

    pub fn owns_search(&self, dialogue_id: &str) -> bool {
        self.searches.contains_key(dialogue_id)
    }

    pub fn owns_call(&self, dialogue_id: &str) -> bool {
        self.calls.contains_key(dialogue_id)
    }

    /// Starts with a registry search for sellers.
    pub fn start(&mut self, ctx: &mut Context<'_>, purchase: Purchase) -> BuyerOutcome {
        let body = json!({ "query": [{ "attribute": "category", "op": "eq", "value": self.seller_category }] });
        match request(ctx, &purchase.scope.clone(), &self.admin, ontologies::DISCOVERY, RequestKind::Get, body) {
            Ok(id) => {
                self.searches.insert(id, purchase);
                BuyerOutcome::Nothing
            }
            Err(_) => BuyerOutcome::Abandoned { sku: purchase.sku, quantity: purchase.quantity },
        }
    }

    /// The registry answered (or the search expired when `env` is `None`).
    pub fn on_search(&mut self, ctx: &mut Context<'_>, search_id: &str, env: Option<&Envelope>) -> BuyerOutcome {
        let Some(purchase) = self.searches.remove(search_id) else { return BuyerOutcome::Nothing };
        let me = ctx.me().clone();
        let sellers: Vec<AgentAddress> = env
            .and_then(|e| e.content.get("agents"))
            .and_then(Value::as_array)
            .map(|list| {
                list.iter()
                    .filter_map(|a| a.as_str().and_then(|s| AgentAddress::new(s).ok()))
                    .filter(|a| *a != me)
                    .collect()
            })
            .unwrap_or_default();
        if sellers.is_empty() {
            ctx.notify(format!("{me} found no {} agents for {}", self.seller_category, purchase.sku));
            return BuyerOutcome::Abandoned { sku: purchase.sku, quantity: purchase.quantity };
        }
        let id = ctx.next_dialogue_id(&purchase.scope);
        let timeouts = Timeouts { reply_ms: self.reply_window_ms, ..ctx.timeouts() };
        let dialogue = Dialogue::initiator(id.clone(), ProtocolId::ContractNet, ontologies::MEAT_TRADE, me.clone(), sellers.clone(), timeouts);
        let order_id = purchase.order_id.clone().unwrap_or_else(|| id.clone());
        let cfp = json!({
            "order_id": order_id,
            "sku": purchase.sku,
            "quantity_kg": kg(purchase.quantity),
            "reply_by": ctx.now() + self.reply_window_ms,
            "destination": location_json(&self.location),
            "preference": purchase.preference.as_str(),
        });
        if ctx.open(dialogue, Decision::CallForProposals(content(cfp))).is_err() {
            return BuyerOutcome::Abandoned { sku: purchase.sku, quantity: purchase.quantity };
        }
        let names: Vec<_> = sellers.iter().map(AgentAddress::as_str).collect();
        ctx.notify(format!("{me} called for proposals on order {order_id} from {}", names.join(", ")));
        self.calls.insert(id, purchase);
        BuyerOutcome::Nothing
    }

    /// Something happened on one of our calls: a delivered envelope or an
    /// expiry. Awards once every answer is in, and settles terminal states.
    pub fn on_call_update(&mut self, ctx: &mut Context<'_>, call_id: &str) -> BuyerOutcome {
        let Some(state) = ctx.dialogue(call_id).map(|d| d.state) else { return BuyerOutcome::Nothing };
        match state {
            DialogueState::Initiator(InitiatorState::Evaluating) if !self.awarded.contains(call_id) => {
                self.award(ctx, call_id);
                BuyerOutcome::Nothing
            }
            DialogueState::Initiator(InitiatorState::Concluded(outcome)) => {
                let Some(purchase) = self.calls.remove(call_id) else { return BuyerOutcome::Nothing };
                self.awarded.remove(call_id);
                let me = ctx.me().clone();
                if outcome == Outcome::Completed {
                    ctx.notify(format!("{me} received {} kg of {}", kg(purchase.quantity), purchase.sku));
                    BuyerOutcome::Received { sku: purchase.sku, quantity: purchase.quantity }
                } else {
                    ctx.notify(format!("{me}: order on {call_id} ended {outcome:?}"));
                    BuyerOutcome::Abandoned { sku: purchase.sku, quantity: purchase.quantity }
                }
            }
            _ => BuyerOutcome::Nothing,
        }
    }

    fn award(&mut self, ctx: &mut Context<'_>, call_id: &str) {
        let Some(purchase) = self.calls.get(call_id).cloned() else { return };
        let Some(dialogue) = ctx.dialogue(call_id) else { return };
        let proposals: Vec<(AgentAddress, Proposal)> = dialogue
            .proposals()
            .iter()
            .filter_map(|(sender, env)| Proposal::from_content(&env.content).map(|p| (sender.clone(), p)))
            .collect();
        let Some((winner, _)) = select_proposal(&proposals) else {
            // Nothing usable: the evaluation window runs out and the call times out.
            return;
        };
        let won = &proposals.iter().find(|(s, _)| *s == winner).expect("winner proposed").1;
        let mut accept = json!({ "proposal_id": won.proposal_id });
        if self.selects_delivery {
            if let Some(option) = select_delivery_option(&won.delivery_options, purchase.preference) {
                accept["option_id"] = json!(option.option_id);
            }
        }
        let reject = dialogue
            .proposals()
            .iter()
            .filter(|(sender, _)| **sender != winner)
            .map(|(sender, env)| {
                let id = env.content.get("proposal_id").cloned().unwrap_or(json!(""));
                (sender.clone(), content(json!({ "proposal_id": id, "reason": "not_selected" })))
            })
            .collect();
        let decision = Decision::Award { winner: winner.clone(), accept: content(accept), reject };
        if ctx.drive(call_id, decision).is_ok() {
            self.awarded.insert(call_id.to_string());
            ctx.notify(format!("{} accepted proposal {} from {winner}", ctx.me(), won.proposal_id));
        }
    }

    pub fn snapshot(&self) -> Value {
        json!({
            "open_calls": self.calls.keys().collect::<Vec<_>>(),
            "open_searches": self.searches.keys().collect::<Vec<_>>(),
        })
    }
}
