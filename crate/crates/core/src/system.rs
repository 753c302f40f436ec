//! Boots a configured agent population on a runtime: the discovery service
//! first, then every other agent.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use crate::agents::{
    categories, default_behaviours, money_to_cents, BuyerDesk, Catalog, InventoryLedger, Location, Logistics,
    PriceTable, RateEntry, Retailer, SellerDesk, Supplier, TelemetrySource, ThreePl, Wholesaler,
};
use crate::config::{AgentEntry, ConfigError, ScenarioConfig, SyntheticConfig};
use crate::discovery::{AdminAgent, SharedRegistry};
use crate::events::EventLog;
use crate::messaging::{AgentAddress, Millis};
use crate::protocol::Timeouts;
use crate::runtime::{derive_seed, Agent, AgentConfig, AgentType, Runtime, RuntimeError, RuntimeOptions};
use crate::telemetry::{load_dataset, DatasetError};

#[derive(Debug, Error)]
pub enum BootError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{field}: cannot load dataset: {source}")]
    Dataset { field: String, source: DatasetError },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// Launch-time overrides of the config's run settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BootOptions {
    pub seed: Option<u64>,
    pub speed: Option<f64>,
    pub t_end_ms: Option<Millis>,
    /// Leave the runtime unpaced because the caller paces it against wall
    /// time itself, as the HTTP server does.
    pub external_pacing: bool,
}

pub struct System {
    pub config: ScenarioConfig,
    pub runtime: Runtime,
    pub registry: SharedRegistry,
    pub catalog: Arc<Catalog>,
    admin: AgentAddress,
}

fn address(raw: &str) -> AgentAddress {
    AgentAddress::new(raw).expect("validated config address")
}

fn location(entry: &AgentEntry) -> Location {
    entry.location.map(|l| Location::new(l.lat, l.lon)).unwrap_or_else(|| Location::new(0.0, 0.0))
}

impl System {
    /// Builds the runtime and spawns every agent at time zero.
    ///
    /// Registration messages are queued but not yet processed, see
    /// [`System::run_until_ready`].
    pub fn boot(mut config: ScenarioConfig, overrides: &BootOptions) -> Result<Self, BootError> {
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(speed) = overrides.speed {
            config.speed = speed;
        }
        if let Some(t_end) = overrides.t_end_ms {
            config.t_end_ms = t_end;
        }
        config.validate()?;

        let options = RuntimeOptions {
            latency_ms: config.latency_ms,
            timeouts: Timeouts { reply_ms: config.cfp_deadline_ms, result_ms: config.result_deadline_ms },
            speed: if overrides.external_pacing { 0.0 } else { config.speed },
            ..RuntimeOptions::default()
        };
        let runtime = Runtime::with_log(options, Arc::new(EventLog::new()));
        let registry = SharedRegistry::new();
        let catalog = Arc::new(config.catalog());
        let admin = address(&config.admin().address);
        let mut system = Self { config, runtime, registry, catalog, admin };

        let admin_entry = system.config.admin().clone();
        let agent = Box::new(AdminAgent::new(system.registry.clone()));
        system.spawn(&admin_entry, AdminAgent::behaviours(), agent)?;
        for (i, entry) in system.config.agents.clone().iter().enumerate() {
            if entry.agent_type == AgentType::Admin {
                continue;
            }
            let agent = system.build(i, entry)?;
            system.spawn(entry, default_behaviours(), agent)?;
        }
        Ok(system)
    }

    fn spawn(&mut self, entry: &AgentEntry, behaviours: Vec<crate::runtime::Behaviour>, agent: Box<dyn Agent>) -> Result<(), BootError> {
        let addr = address(&entry.address);
        let config = AgentConfig {
            rng_seed: derive_seed(self.config.seed, &addr),
            address: addr,
            agent_type: entry.agent_type,
            behaviours,
        };
        self.runtime.spawn(config, agent)?;
        Ok(())
    }

    fn ledger(entry: &AgentEntry) -> InventoryLedger {
        let mut ledger = InventoryLedger::new();
        for line in &entry.inventory {
            ledger.add_line(&line.sku, line.stock_line());
        }
        ledger
    }

    fn seller(&self, entry: &AgentEntry, assigned_delivery: bool) -> SellerDesk {
        let prices: PriceTable =
            entry.prices.iter().filter_map(|(sku, p)| money_to_cents(*p).map(|c| (sku.clone(), c))).collect();
        let logistics = address(entry.logistics.as_deref().expect("validated seller logistics"));
        SellerDesk::new(location(entry), logistics, prices, assigned_delivery)
    }

    fn buyer(&self, entry: &AgentEntry, seller_category: &'static str, selects_delivery: bool) -> BuyerDesk {
        let mut desk = BuyerDesk::new(self.admin.clone(), location(entry), seller_category, selects_delivery);
        desk.reply_window_ms = self.config.cfp_deadline_ms;
        desk
    }

    fn build(&self, index: usize, entry: &AgentEntry) -> Result<Box<dyn Agent>, BootError> {
        let admin = self.admin.clone();
        Ok(match entry.agent_type {
            AgentType::Admin => unreachable!("admin is spawned separately"),
            // Restocking lets the wholesaler pick the delivery option; its
            // own sales to retailers get a carrier assigned by logistics.
            AgentType::Wholesaler => Box::new(Wholesaler::new(
                admin,
                Self::ledger(entry),
                self.seller(entry, true),
                self.buyer(entry, categories::SUPPLIER, true),
            )),
            AgentType::Supplier => Box::new(Supplier::new(admin, Self::ledger(entry), self.seller(entry, false))),
            AgentType::Retailer => {
                Box::new(Retailer::new(admin, Self::ledger(entry), self.buyer(entry, categories::WHOLESALER, false)))
            }
            AgentType::Logistics => {
                let rates = entry
                    .rate_card
                    .iter()
                    .map(|r| RateEntry {
                        option_id: r.option_id.clone(),
                        mode: Default::default(),
                        base_cents: money_to_cents(r.base).unwrap_or(0),
                        per_kg_cents: money_to_cents(r.per_kg).unwrap_or(0),
                        eta_ms: r.eta_ms,
                    })
                    .collect();
                let three_pls = entry.three_pls.iter().map(|a| address(a)).collect();
                Box::new(Logistics::new(admin, location(entry), rates, three_pls))
            }
            AgentType::ThreePl => {
                let source = self.telemetry_source(index, entry)?;
                let name = entry.carrier_name.clone().unwrap_or_default();
                Box::new(ThreePl::new(admin, name, self.config.epoch_ms, source, self.catalog.clone()))
            }
        })
    }

    fn telemetry_source(&self, index: usize, entry: &AgentEntry) -> Result<TelemetrySource, BootError> {
        let telemetry = entry.telemetry.clone().unwrap_or_default();
        if let Some(path) = &telemetry.dataset {
            let records = load_dataset(self.config.resolve(path))
                .map_err(|source| BootError::Dataset { field: format!("agents[{index}].telemetry.dataset"), source })?;
            return Ok(TelemetrySource::Dataset(Arc::new(records)));
        }
        let SyntheticConfig { base_temp_c, noise_c, humidity_pct, cadence_ms } = telemetry.synthetic.unwrap_or_default();
        Ok(TelemetrySource::Synthetic { base_temp_c, noise_c, humidity_pct, cadence_ms })
    }

    pub fn admin(&self) -> &AgentAddress {
        &self.admin
    }

    /// Every non-admin agent has registered with the discovery service.
    pub fn is_ready(&self) -> bool {
        self.registry.read(|r| r.len()) + 1 >= self.config.agents.len()
    }

    /// Steps the runtime until registration completes. Returns false if the
    /// runtime ran dry first.
    pub fn run_until_ready(&mut self) -> bool {
        while !self.is_ready() {
            if !self.runtime.step() {
                return false;
            }
        }
        true
    }

    /// Ledger snapshots of the agents holding stock, by address.
    pub fn ledgers(&self) -> BTreeMap<String, Value> {
        self.runtime
            .agents()
            .filter(|(_, t)| matches!(t, AgentType::Wholesaler | AgentType::Supplier | AgentType::Retailer))
            .filter_map(|(a, _)| {
                let snapshot = self.runtime.snapshot(a)?;
                Some((a.to_string(), snapshot.get("ledger").cloned().unwrap_or(snapshot)))
            })
            .collect()
    }

    pub fn log(&self) -> &Arc<EventLog> {
        self.runtime.log()
    }
}
