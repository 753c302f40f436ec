//! Domain logic of the supply-chain agents.
//!
//! Quantities are integer grams and money is integer cents; both are
//! rendered as kilograms and currency units on the wire.

mod buyer;
mod common;
mod ledger;
mod logistics;
mod retailer;
mod seller;
mod supplier;
mod three_pl;
mod trade;
mod wholesaler;


use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use buyer::{BuyerDesk, Purchase};
pub use common::{categories, default_behaviours, scenario_of, ACTION_NEGOTIATE, ACTION_REGISTER, ACTION_SERVICE};
pub use ledger::{InventoryLedger, LedgerError, Posting, PostingKind, ReplenishmentRequest, StockLine};
pub use logistics::{Logistics, LogisticsDelivery, RateEntry};
pub use retailer::Retailer;
pub use seller::SellerDesk;
pub use supplier::Supplier;
pub use three_pl::{TelemetrySource, ThreePl};
pub use trade::{
    assess_order, assign_3pl, select_delivery_option, select_proposal, Assessment, DeliveryMode, DeliveryOption,
    Preference, PriceTable, Proposal, PurchaseOrder, RefuseReason,
};
pub use wholesaler::Wholesaler;

use crate::telemetry::GeoPoint;

pub type Grams = u64;
pub type Cents = u64;
pub type Location = GeoPoint<f64>;

/// Kilograms as rendered on the wire.
pub fn kg(grams: Grams) -> f64 {
    grams as f64 / 1000.0
}

/// Nearest whole gram; `None` for negative or non-finite input.
pub fn grams_from_kg(kg: f64) -> Option<Grams> {
    (kg.is_finite() && kg >= 0.0).then(|| (kg * 1000.0).round() as Grams)
}

pub fn money(cents: Cents) -> f64 {
    cents as f64 / 100.0
}

pub fn money_to_cents(amount: f64) -> Option<Cents> {
    (amount.is_finite() && amount >= 0.0).then(|| (amount * 100.0).round() as Cents)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub sku: String,
    pub name: String,
    pub perishable: bool,
    pub safe_min_c: f64,
    pub safe_max_c: f64,
    pub quality_threshold: f64,
}

pub type Catalog = BTreeMap<String, Product>;

/// Instructions the gateway and the scenario driver inject into agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "control")]
pub enum Control {
    /// Wholesaler: restock `sku` from suppliers. Without a quantity the
    /// line's reorder quantity is used.
    Replenish { scenario: String, order_id: Option<String>, sku: String, quantity: Option<Grams>, preference: Preference },
    /// Retailer: buy `sku` from a wholesaler.
    Purchase { scenario: String, order_id: Option<String>, sku: String, quantity: Grams, preference: Preference },
}
