use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Grams;
use crate::messaging::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StockLine {
    pub on_hand: Grams,
    pub reorder_point: Grams,
    pub reorder_quantity: Grams,
    pub in_flight: Grams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostingKind {
    Receipt,
    Shipment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub at: Millis,
    pub sku: String,
    pub kind: PostingKind,
    pub grams: Grams,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("unknown sku {0}")]
    UnknownSku(String),
    #[error("insufficient stock of {sku}: {on_hand} g on hand, {requested} g requested")]
    InsufficientStock { sku: String, on_hand: Grams, requested: Grams },
}

/// A replenishment the reorder policy asks for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplenishmentRequest {
    pub sku: String,
    pub quantity: Grams,
}

/// Per-sku stock. `on_hand` changes only through receipt and shipment
/// postings, all of which are journaled.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InventoryLedger {
    lines: BTreeMap<String, StockLine>,
    initial: BTreeMap<String, Grams>,
    postings: Vec<Posting>,
}

impl InventoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_line(mut self, sku: &str, line: StockLine) -> Self {
        self.add_line(sku, line);
        self
    }

    pub fn add_line(&mut self, sku: &str, line: StockLine) {
        self.initial.insert(sku.to_string(), line.on_hand);
        self.lines.insert(sku.to_string(), line);
    }

    pub fn line(&self, sku: &str) -> Option<&StockLine> {
        self.lines.get(sku)
    }

    pub fn contains(&self, sku: &str) -> bool {
        self.lines.contains_key(sku)
    }

    pub fn skus(&self) -> impl Iterator<Item = &str> {
        self.lines.keys().map(String::as_str)
    }

    pub fn initial(&self, sku: &str) -> Option<Grams> {
        self.initial.get(sku).copied()
    }

    pub fn postings(&self) -> &[Posting] {
        &self.postings
    }

    fn line_mut(&mut self, sku: &str) -> Result<&mut StockLine, LedgerError> {
        self.lines.get_mut(sku).ok_or_else(|| LedgerError::UnknownSku(sku.to_string()))
    }

    /// `on_hand += quantity`; the matching amount leaves `in_flight`.
    /// Receiving an sku the ledger has never seen opens a line for it.
    pub fn post_receipt(&mut self, sku: &str, quantity: Grams, at: Millis) {
        if !self.contains(sku) {
            self.add_line(sku, StockLine::default());
        }
        let line = self.lines.get_mut(sku).expect("line exists");
        line.on_hand += quantity;
        line.in_flight -= line.in_flight.min(quantity);
        self.postings.push(Posting { at, sku: sku.to_string(), kind: PostingKind::Receipt, grams: quantity });
    }

    /// `on_hand -= quantity`; refuses to go negative and leaves the ledger
    /// unchanged on error.
    pub fn post_shipment(&mut self, sku: &str, quantity: Grams, at: Millis) -> Result<(), LedgerError> {
        let line = self.line_mut(sku)?;
        if line.on_hand < quantity {
            return Err(LedgerError::InsufficientStock { sku: sku.to_string(), on_hand: line.on_hand, requested: quantity });
        }
        line.on_hand -= quantity;
        self.postings.push(Posting { at, sku: sku.to_string(), kind: PostingKind::Shipment, grams: quantity });
        Ok(())
    }

    /// Fires iff `on_hand + in_flight < reorder_point`, and then books
    /// `reorder_quantity` into `in_flight` so it cannot fire again for the
    /// same shortfall. That needs `reorder_quantity >= reorder_point`, which
    /// scenario configs enforce.
    pub fn check_reorder(&mut self, sku: &str) -> Result<Option<ReplenishmentRequest>, LedgerError> {
        let line = self.line_mut(sku)?;
        if line.reorder_quantity == 0 || line.on_hand + line.in_flight >= line.reorder_point {
            return Ok(None);
        }
        line.in_flight += line.reorder_quantity;
        Ok(Some(ReplenishmentRequest { sku: sku.to_string(), quantity: line.reorder_quantity }))
    }

    /// Books an order placed outside the reorder policy into `in_flight`.
    pub fn record_order(&mut self, sku: &str, quantity: Grams) -> Result<(), LedgerError> {
        self.line_mut(sku)?.in_flight += quantity;
        Ok(())
    }

    /// Takes back quantity of an order that will not arrive.
    pub fn release_in_flight(&mut self, sku: &str, quantity: Grams) {
        if let Some(line) = self.lines.get_mut(sku) {
            line.in_flight -= line.in_flight.min(quantity);
        }
    }

    pub fn total(&self, sku: &str, kind: PostingKind) -> Grams {
        self.postings.iter().filter(|p| p.sku == sku && p.kind == kind).map(|p| p.grams).sum()
    }

    /// `on_hand == initial + receipts - shipments` for every sku.
    pub fn is_conserved(&self) -> bool {
        self.lines.iter().all(|(sku, line)| {
            let initial = self.initial.get(sku).copied().unwrap_or(0);
            line.on_hand + self.total(sku, PostingKind::Shipment) == initial + self.total(sku, PostingKind::Receipt)
        })
    }
}
