//! Scenario configuration: a TOML document describing the products, the
//! agent population and the scenario to run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{grams_from_kg, money_to_cents, Catalog, Grams, Preference, Product, StockLine};
use crate::messaging::{AgentAddress, Millis};
use crate::runtime::AgentType;
use crate::telemetry::{DEFAULT_CADENCE_MS, DEFAULT_QUALITY_THRESHOLD};

pub const DEFAULT_EPOCH_MS: Millis = 1_594_666_000_000;
pub const DEFAULT_T_END_MS: Millis = 24 * 60 * 60 * 1000;
pub const DEFAULT_RESULT_DEADLINE_MS: Millis = 12 * 60 * 60 * 1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationConfig {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    pub sku: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub perishable: bool,
    pub safe_temp_range: Option<[f64; 2]>,
    pub quality_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryConfig {
    pub sku: String,
    pub on_hand_kg: f64,
    #[serde(default)]
    pub reorder_point_kg: f64,
    #[serde(default)]
    pub reorder_quantity_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub option_id: String,
    /// Fixed charge in currency units.
    pub base: f64,
    /// Charge per kilogram in currency units.
    #[serde(default)]
    pub per_kg: f64,
    pub eta_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(default = "default_base_temp")]
    pub base_temp_c: f64,
    #[serde(default)]
    pub noise_c: f64,
    #[serde(default = "default_humidity")]
    pub humidity_pct: f64,
    #[serde(default = "default_cadence")]
    pub cadence_ms: Millis,
}

fn default_base_temp() -> f64 {
    3.0
}

fn default_humidity() -> f64 {
    85.0
}

fn default_cadence() -> Millis {
    DEFAULT_CADENCE_MS
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { base_temp_c: default_base_temp(), noise_c: 0.0, humidity_pct: default_humidity(), cadence_ms: default_cadence() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryConfig {
    pub dataset: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub address: String,
    #[serde(rename = "type")]
    pub agent_type: AgentType,
    pub location: Option<LocationConfig>,
    /// The logistics agent a seller quotes and books deliveries with.
    pub logistics: Option<String>,
    /// List price per kilogram, in currency units.
    #[serde(default)]
    pub prices: BTreeMap<String, f64>,
    #[serde(default)]
    pub inventory: Vec<InventoryConfig>,
    #[serde(default)]
    pub rate_card: Vec<RateConfig>,
    #[serde(default)]
    pub three_pls: Vec<String>,
    pub carrier_name: Option<String>,
    pub telemetry: Option<TelemetryConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Replenishment,
    Wholesale,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Replenishment => "replenishment",
            ScenarioKind::Wholesale => "wholesale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub sku: String,
    pub quantity_kg: Option<f64>,
    #[serde(default)]
    pub preference: Preference,
    /// Retailer placing the order in a wholesale scenario.
    pub buyer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default = "default_t_end")]
    pub t_end_ms: Millis,
    #[serde(default = "default_epoch")]
    pub epoch_ms: Millis,
    #[serde(default = "default_latency")]
    pub latency_ms: Millis,
    #[serde(default = "default_cfp_deadline")]
    pub cfp_deadline_ms: Millis,
    /// How long an awarded seller has to report the delivery outcome.
    #[serde(default = "default_result_deadline")]
    pub result_deadline_ms: Millis,
    #[serde(default)]
    pub products: Vec<ProductConfig>,
    pub agents: Vec<AgentEntry>,
    pub scenario: Option<ScenarioSection>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_t_end() -> Millis {
    DEFAULT_T_END_MS
}

fn default_epoch() -> Millis {
    DEFAULT_EPOCH_MS
}

fn default_latency() -> Millis {
    crate::runtime::DEFAULT_LATENCY_MS
}

fn default_cfp_deadline() -> Millis {
    crate::protocol::DEFAULT_REPLY_MS
}

fn default_result_deadline() -> Millis {
    DEFAULT_RESULT_DEADLINE_MS
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self, ConfigError> {
        let mut config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        config.base_dir = base_dir;
        config.validate()?;
        Ok(config)
    }

    /// Resolves a path from the config against its directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn agent(&self, address: &str) -> Option<&AgentEntry> {
        self.agents.iter().find(|a| a.address == address)
    }

    pub fn of_type(&self, agent_type: AgentType) -> impl Iterator<Item = &AgentEntry> {
        self.agents.iter().filter(move |a| a.agent_type == agent_type)
    }

    pub fn admin(&self) -> &AgentEntry {
        self.of_type(AgentType::Admin).next().expect("validated config has an admin")
    }

    pub fn catalog(&self) -> Catalog {
        self.products
            .iter()
            .map(|p| {
                let [min, max] = p.safe_temp_range.unwrap_or([f64::MIN, f64::MAX]);
                let product = Product {
                    sku: p.sku.clone(),
                    name: if p.name.is_empty() { p.sku.clone() } else { p.name.clone() },
                    perishable: p.perishable,
                    safe_min_c: min,
                    safe_max_c: max,
                    quality_threshold: p.quality_threshold.unwrap_or(DEFAULT_QUALITY_THRESHOLD),
                };
                (p.sku.clone(), product)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(ConfigError::invalid("speed", "must be a non-negative number"));
        }
        if self.t_end_ms == 0 {
            return Err(ConfigError::invalid("t_end_ms", "must be positive"));
        }
        if self.cfp_deadline_ms == 0 {
            return Err(ConfigError::invalid("cfp_deadline_ms", "must be positive"));
        }
        let mut skus = BTreeSet::new();
        for (i, p) in self.products.iter().enumerate() {
            let field = |f: &str| format!("products[{i}].{f}");
            if p.sku.is_empty() {
                return Err(ConfigError::invalid(field("sku"), "must not be empty"));
            }
            if !skus.insert(p.sku.as_str()) {
                return Err(ConfigError::invalid(field("sku"), format!("duplicate sku {:?}", p.sku)));
            }
            match p.safe_temp_range {
                Some([min, max]) if !(min < max) => {
                    return Err(ConfigError::invalid(field("safe_temp_range"), "min must be below max"))
                }
                None if p.perishable => {
                    return Err(ConfigError::invalid(field("safe_temp_range"), "required for perishable products"))
                }
                _ => {}
            }
            if p.quality_threshold.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
                return Err(ConfigError::invalid(field("quality_threshold"), "must lie in [0, 1]"));
            }
        }

        let mut types = BTreeMap::new();
        for (i, a) in self.agents.iter().enumerate() {
            let field = format!("agents[{i}].address");
            AgentAddress::new(&a.address).map_err(|e| ConfigError::invalid(&field, e.to_string()))?;
            if types.insert(a.address.as_str(), a.agent_type).is_some() {
                return Err(ConfigError::invalid(field, format!("duplicate address {:?}", a.address)));
            }
        }
        let admins = self.of_type(AgentType::Admin).count();
        if admins != 1 {
            return Err(ConfigError::invalid("agents", format!("exactly one admin agent required, found {admins}")));
        }
        if self.of_type(AgentType::Wholesaler).next().is_none() {
            return Err(ConfigError::invalid("agents", "at least one wholesaler required"));
        }

        for (i, a) in self.agents.iter().enumerate() {
            self.validate_agent(i, a, &types, &skus)?;
        }
        let slowest = self.agents.iter().flat_map(|a| &a.rate_card).map(|r| r.eta_ms).max().unwrap_or(0);
        if self.result_deadline_ms <= slowest {
            return Err(ConfigError::invalid(
                "result_deadline_ms",
                format!("must exceed the slowest delivery eta ({slowest} ms)"),
            ));
        }
        if let Some(s) = &self.scenario {
            self.validate_scenario(s, &types, &skus)?;
        }
        Ok(())
    }

    fn validate_agent(
        &self,
        i: usize,
        a: &AgentEntry,
        types: &BTreeMap<&str, AgentType>,
        skus: &BTreeSet<&str>,
    ) -> Result<(), ConfigError> {
        let field = |f: &str| format!("agents[{i}].{f}");
        let needs_location = matches!(
            a.agent_type,
            AgentType::Wholesaler | AgentType::Supplier | AgentType::Retailer | AgentType::Logistics
        );
        match a.location {
            None if needs_location => return Err(ConfigError::invalid(field("location"), "required")),
            Some(l) if !crate::telemetry::GeoPoint::new(l.lat, l.lon).in_range() => {
                return Err(ConfigError::invalid(field("location"), "coordinates out of range"))
            }
            _ => {}
        }
        if matches!(a.agent_type, AgentType::Wholesaler | AgentType::Supplier) {
            match a.logistics.as_deref() {
                None => return Err(ConfigError::invalid(field("logistics"), "required for sellers")),
                Some(l) if types.get(l) != Some(&AgentType::Logistics) => {
                    return Err(ConfigError::invalid(field("logistics"), format!("{l:?} is not a logistics agent")))
                }
                _ => {}
            }
            for (sku, price) in &a.prices {
                if !skus.contains(sku.as_str()) {
                    return Err(ConfigError::invalid(field(&format!("prices.{sku}")), "unknown sku"));
                }
                if money_to_cents(*price).is_none_or(|c| c == 0) {
                    return Err(ConfigError::invalid(field(&format!("prices.{sku}")), "must be positive"));
                }
            }
        }
        for (j, line) in a.inventory.iter().enumerate() {
            let f = |x: &str| field(&format!("inventory[{j}].{x}"));
            if !skus.contains(line.sku.as_str()) {
                return Err(ConfigError::invalid(f("sku"), format!("unknown sku {:?}", line.sku)));
            }
            for (name, v) in [
                ("on_hand_kg", line.on_hand_kg),
                ("reorder_point_kg", line.reorder_point_kg),
                ("reorder_quantity_kg", line.reorder_quantity_kg),
            ] {
                if grams_from_kg(v).is_none() {
                    return Err(ConfigError::invalid(f(name), "must be a non-negative number"));
                }
            }
            if line.reorder_point_kg > 0.0 && line.reorder_quantity_kg < line.reorder_point_kg {
                return Err(ConfigError::invalid(
                    f("reorder_quantity_kg"),
                    "must be at least reorder_point_kg so one replenishment covers a shortfall",
                ));
            }
        }
        if a.agent_type == AgentType::Logistics {
            if a.rate_card.is_empty() {
                return Err(ConfigError::invalid(field("rate_card"), "at least one rate required"));
            }
            let mut ids = BTreeSet::new();
            for (j, r) in a.rate_card.iter().enumerate() {
                if r.option_id.is_empty() || !ids.insert(r.option_id.as_str()) {
                    return Err(ConfigError::invalid(field(&format!("rate_card[{j}].option_id")), "must be unique and non-empty"));
                }
                if r.eta_ms == 0 {
                    return Err(ConfigError::invalid(field(&format!("rate_card[{j}].eta_ms")), "must be positive"));
                }
                if money_to_cents(r.base).is_none() || money_to_cents(r.per_kg).is_none() {
                    return Err(ConfigError::invalid(field(&format!("rate_card[{j}]")), "costs must be non-negative"));
                }
            }
            if a.three_pls.is_empty() {
                return Err(ConfigError::invalid(field("three_pls"), "at least one 3PL required"));
            }
            for (j, p) in a.three_pls.iter().enumerate() {
                if types.get(p.as_str()) != Some(&AgentType::ThreePl) {
                    return Err(ConfigError::invalid(field(&format!("three_pls[{j}]")), format!("{p:?} is not a three_pl agent")));
                }
            }
        }
        if a.agent_type == AgentType::ThreePl {
            let name = a.carrier_name.as_deref().unwrap_or("");
            if crate::telemetry::generate_tracking_id(name, 0).is_err() {
                return Err(ConfigError::invalid(field("carrier_name"), "must be non-empty and alphanumeric"));
            }
            if let Some(t) = &a.telemetry {
                if t.dataset.is_some() == t.synthetic.is_some() {
                    return Err(ConfigError::invalid(field("telemetry"), "set exactly one of dataset or synthetic"));
                }
                if t.synthetic.as_ref().is_some_and(|s| s.cadence_ms == 0) {
                    return Err(ConfigError::invalid(field("telemetry.synthetic.cadence_ms"), "must be positive"));
                }
            }
        }
        Ok(())
    }

    fn validate_scenario(
        &self,
        s: &ScenarioSection,
        types: &BTreeMap<&str, AgentType>,
        skus: &BTreeSet<&str>,
    ) -> Result<(), ConfigError> {
        if !skus.contains(s.sku.as_str()) {
            return Err(ConfigError::invalid("scenario.sku", format!("unknown sku {:?}", s.sku)));
        }
        if let Some(q) = s.quantity_kg {
            if grams_from_kg(q).is_none_or(|g| g == 0) {
                return Err(ConfigError::invalid("scenario.quantity_kg", "must be positive"));
            }
        }
        if s.kind == ScenarioKind::Wholesale {
            if s.quantity_kg.is_none() {
                return Err(ConfigError::invalid("scenario.quantity_kg", "required for wholesale"));
            }
            match s.buyer.as_deref() {
                None => return Err(ConfigError::invalid("scenario.buyer", "required for wholesale")),
                Some(b) if types.get(b) != Some(&AgentType::Retailer) => {
                    return Err(ConfigError::invalid("scenario.buyer", format!("{b:?} is not a retailer")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

impl InventoryConfig {
    pub fn stock_line(&self) -> StockLine {
        let g = |kg: f64| -> Grams { grams_from_kg(kg).unwrap_or(0) };
        StockLine {
            on_hand: g(self.on_hand_kg),
            reorder_point: g(self.reorder_point_kg),
            reorder_quantity: g(self.reorder_quantity_kg),
            in_flight: 0,
        }
    }
}
