//! Order assessment and proposal selection.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{grams_from_kg, kg, money, money_to_cents, Cents, Grams, InventoryLedger};
use crate::messaging::{AgentAddress, Content, Millis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    #[default]
    Cheapest,
    Fastest,
}

impl Preference {
    pub fn as_str(self) -> &'static str {
        match self {
            Preference::Cheapest => "cheapest",
            Preference::Fastest => "fastest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cheapest" => Some(Preference::Cheapest),
            "fastest" => Some(Preference::Fastest),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    #[default]
    RefrigeratedRoad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryOption {
    pub option_id: String,
    /// The logistics agent offering the option.
    pub carrier: AgentAddress,
    pub mode: DeliveryMode,
    pub cost_cents: Cents,
    pub eta_ms: Millis,
}

impl DeliveryOption {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("option serializes")
    }

    pub fn from_json(value: &Value) -> Option<Self> {
        serde_json::from_value(value.clone()).ok()
    }

    pub fn list_from_json(value: Option<&Value>) -> Option<Vec<Self>> {
        value?.as_array()?.iter().map(Self::from_json).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PurchaseOrder {
    pub order_id: String,
    pub buyer: AgentAddress,
    pub seller: AgentAddress,
    pub sku: String,
    pub quantity: Grams,
    pub max_unit_price: Option<Cents>,
    pub needed_by: Option<Millis>,
}

impl PurchaseOrder {
    /// Reads an order from `cfp` content; `None` if a required field is
    /// missing or the quantity is not positive.
    pub fn from_cfp(content: &Content, buyer: AgentAddress, seller: AgentAddress, fallback_id: &str) -> Option<Self> {
        let quantity = grams_from_kg(content.get("quantity_kg")?.as_f64()?)?;
        if quantity == 0 {
            return None;
        }
        Some(Self {
            order_id: content.get("order_id").and_then(Value::as_str).unwrap_or(fallback_id).to_string(),
            buyer,
            seller,
            sku: content.get("sku")?.as_str()?.to_string(),
            quantity,
            max_unit_price: content.get("max_unit_price").and_then(Value::as_f64).and_then(money_to_cents),
            needed_by: content.get("needed_by").and_then(Value::as_u64),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub proposal_id: String,
    pub sku: String,
    pub quantity: Grams,
    /// Per kilogram.
    pub unit_price: Cents,
    pub delivery_options: Vec<DeliveryOption>,
    pub valid_until: Millis,
}

impl Proposal {
    pub fn to_content(&self) -> Content {
        let Value::Object(map) = json!({
            "proposal_id": self.proposal_id,
            "sku": self.sku,
            "quantity_kg": kg(self.quantity),
            "unit_price": money(self.unit_price),
            "delivery_options": self.delivery_options.iter().map(DeliveryOption::to_json).collect::<Vec<_>>(),
            "valid_until": self.valid_until,
        }) else {
            unreachable!()
        };
        map
    }

    pub fn from_content(content: &Content) -> Option<Self> {
        Some(Self {
            proposal_id: content.get("proposal_id")?.as_str()?.to_string(),
            sku: content.get("sku")?.as_str()?.to_string(),
            quantity: grams_from_kg(content.get("quantity_kg")?.as_f64()?)?,
            unit_price: money_to_cents(content.get("unit_price")?.as_f64()?)?,
            delivery_options: DeliveryOption::list_from_json(content.get("delivery_options"))?,
            valid_until: content.get("valid_until")?.as_u64()?,
        })
    }

    /// Goods value plus the cheapest option's cost, in milli-cents so the
    /// comparison stays in exact integers.
    pub fn landed_cost(&self) -> Option<u128> {
        let option = select_delivery_option(&self.delivery_options, Preference::Cheapest)?;
        Some(self.quantity as u128 * self.unit_price as u128 + option.cost_cents as u128 * 1000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefuseReason {
    InsufficientStock,
    PriceFloor,
    UnknownSku,
}

impl RefuseReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RefuseReason::InsufficientStock => "insufficient_stock",
            RefuseReason::PriceFloor => "price_floor",
            RefuseReason::UnknownSku => "unknown_sku",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assessment {
    Accept(Proposal),
    Refuse(RefuseReason),
}

/// Static list prices per sku, per kilogram.
pub type PriceTable = BTreeMap<String, Cents>;

/// Decides whether to bid on `order` given stock already promised to other
/// open proposals. `options` must be non-empty for an acceptance.
pub fn assess_order(
    order: &PurchaseOrder,
    ledger: &InventoryLedger,
    committed: Grams,
    prices: &PriceTable,
    options: Vec<DeliveryOption>,
    proposal_id: String,
    valid_until: Millis,
) -> Assessment {
    let (Some(line), Some(&price)) = (ledger.line(&order.sku), prices.get(&order.sku)) else {
        return Assessment::Refuse(RefuseReason::UnknownSku);
    };
    if line.on_hand.saturating_sub(committed) < order.quantity {
        return Assessment::Refuse(RefuseReason::InsufficientStock);
    }
    if order.max_unit_price.is_some_and(|cap| cap < price) {
        return Assessment::Refuse(RefuseReason::PriceFloor);
    }
    Assessment::Accept(Proposal {
        proposal_id,
        sku: order.sku.clone(),
        quantity: order.quantity,
        unit_price: price,
        delivery_options: options,
        valid_until,
    })
}

/// Picks the proposal with the lowest landed cost; ties go to the smaller
/// eta of the cost-minimal option, then to the smaller address. Returns the
/// winner and that option. Proposals without options are ignored.
pub fn select_proposal(proposals: &[(AgentAddress, Proposal)]) -> Option<(AgentAddress, DeliveryOption)> {
    proposals
        .iter()
        .filter_map(|(sender, p)| {
            let option = select_delivery_option(&p.delivery_options, Preference::Cheapest)?;
            Some(((p.landed_cost()?, option.eta_ms, sender), option))
        })
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|((_, _, sender), option)| (sender.clone(), option.clone()))
}

pub fn select_delivery_option(options: &[DeliveryOption], preference: Preference) -> Option<&DeliveryOption> {
    options.iter().min_by(|a, b| {
        let key = |o: &DeliveryOption| match preference {
            Preference::Cheapest => (o.cost_cents, o.eta_ms),
            Preference::Fastest => (o.eta_ms, o.cost_cents),
        };
        key(a).cmp(&key(b)).then_with(|| a.option_id.cmp(&b.option_id))
    })
}

/// Uniform choice from the agent's own random stream.
pub fn assign_3pl<'a, R: Rng + ?Sized>(eligible: &'a [AgentAddress], rng: &mut R) -> Option<&'a AgentAddress> {
    if eligible.is_empty() {
        return None;
    }
    eligible.get(rng.random_range(0..eligible.len()))
}
