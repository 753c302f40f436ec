//! The system's external face: launching scenarios, placing orders and
//! projecting deliveries, reports and the event stream out of the event log.
//!
//! The gateway is not an agent. It steers agents through the runtime's
//! control interface and reads everything else back from the log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agents::{grams_from_kg, Control, Preference};
use crate::config::ScenarioKind;
use crate::events::{Event, EventKind, KindFilter};
use crate::messaging::{AgentAddress, Millis, ProtocolId};
use crate::protocol::{DialogueState, InitiatorState, Outcome, Role};
use crate::runtime::AgentType;
use crate::system::System;
use crate::telemetry::{summarize_records, SafeRange, SummaryReport, TelemetryRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("system not ready")]
    SystemNotReady,
    #[error("unknown buyer {0}")]
    UnknownBuyer(String),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("unknown tracking id {0}")]
    UnknownTrackingId(String),
    #[error("report not ready for {0}")]
    ReportNotReady(String),
}

impl GatewayError {
    /// Stable machine-readable name, used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::InvalidParameters(_) => "invalid_parameters",
            GatewayError::SystemNotReady => "system_not_ready",
            GatewayError::UnknownBuyer(_) => "unknown_buyer",
            GatewayError::InvalidOrder(_) => "invalid_order",
            GatewayError::UnknownScenario(_) => "unknown_scenario",
            GatewayError::UnknownTrackingId(_) => "unknown_tracking_id",
            GatewayError::ReportNotReady(_) => "report_not_ready",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioStatus {
    Running,
    Completed,
    Failed,
}

impl ScenarioStatus {
    pub fn is_terminal(self) -> bool {
        self != ScenarioStatus::Running
    }
}

/// Caller-supplied scenario parameters; anything absent takes the config's
/// default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParameters {
    pub sku: Option<String>,
    pub quantity_kg: Option<f64>,
    pub preference: Option<Preference>,
    pub seed: Option<u64>,
    pub speed: Option<f64>,
    /// The agent that starts the flow: a wholesaler for replenishment, a
    /// retailer for wholesale.
    #[serde(alias = "buyer")]
    pub agent: Option<String>,
    pub order_id: Option<String>,
}

/// Parameters as resolved at launch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub sku: String,
    pub quantity_kg: Option<f64>,
    pub preference: Preference,
    pub seed: u64,
    pub speed: f64,
    pub agent: String,
    pub order_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescriptor {
    pub scenario_id: String,
    pub kind: ScenarioKind,
    pub parameters: ResolvedParameters,
    pub status: ScenarioStatus,
    pub launched_at: Millis,
    pub finished_at: Option<Millis>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderAck {
    pub order_id: String,
    pub scenario_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRequest {
    pub buyer: String,
    pub sku: String,
    pub quantity_kg: f64,
    #[serde(default)]
    pub preference: Preference,
}

pub struct Gateway {
    system: System,
    scenarios: BTreeMap<String, ScenarioDescriptor>,
    next_scenario: u64,
}

fn telemetry_record(payload: &Value) -> Option<TelemetryRecord<f64>> {
    Some(TelemetryRecord {
        t_ms: payload.get("t_ms")?.as_u64()?,
        lat: payload.get("lat")?.as_f64()?,
        lon: payload.get("lon")?.as_f64()?,
        temp_c: payload.get("temp_c")?.as_f64()?,
        humidity_pct: payload.get("humidity_pct")?.as_f64()?,
    })
}

fn is_delivery(payload: &Value, tracking_id: &str) -> bool {
    payload.get("type").and_then(Value::as_str) == Some("delivery")
        && payload.get("tracking_id").and_then(Value::as_str) == Some(tracking_id)
}

impl Gateway {
    pub fn new(system: System) -> Self {
        Self { system, scenarios: BTreeMap::new(), next_scenario: 1 }
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn system_mut(&mut self) -> &mut System {
        &mut self.system
    }

    pub fn now(&self) -> Millis {
        self.system.runtime.now()
    }

    fn resolve(&self, kind: ScenarioKind, params: ScenarioParameters) -> Result<ResolvedParameters, GatewayError> {
        let config = &self.system.config;
        let invalid = |m: String| GatewayError::InvalidParameters(m);
        if params.seed.is_some_and(|s| s != config.seed) {
            return Err(invalid(format!("seed is fixed at boot to {}", config.seed)));
        }
        if params.speed.is_some_and(|s| s != config.speed) {
            return Err(invalid(format!("speed is fixed at boot to {}", config.speed)));
        }
        let defaults = config.scenario.as_ref().filter(|s| s.kind == kind);
        let launcher_type = match kind {
            ScenarioKind::Replenishment => AgentType::Wholesaler,
            ScenarioKind::Wholesale => AgentType::Retailer,
        };
        let agent = match params.agent.or_else(|| defaults.and_then(|d| d.buyer.clone())) {
            Some(a) => a,
            None => config
                .of_type(launcher_type)
                .next()
                .map(|a| a.address.clone())
                .ok_or_else(|| invalid(format!("no {} agent configured", launcher_type.as_str())))?,
        };
        if config.agent(&agent).map(|a| a.agent_type) != Some(launcher_type) {
            return Err(match kind {
                ScenarioKind::Wholesale => GatewayError::UnknownBuyer(agent),
                ScenarioKind::Replenishment => invalid(format!("{agent:?} is not a wholesaler")),
            });
        }
        let entry = config.agent(&agent).expect("checked above");
        let sku = params
            .sku
            .or_else(|| defaults.map(|d| d.sku.clone()))
            .or_else(|| entry.inventory.first().map(|l| l.sku.clone()))
            .or_else(|| config.products.first().map(|p| p.sku.clone()))
            .ok_or_else(|| invalid("no sku given and none configured".into()))?;
        if !self.system.catalog.contains_key(&sku) {
            return Err(invalid(format!("unknown sku {sku:?}")));
        }
        let quantity_kg = params.quantity_kg.or_else(|| defaults.and_then(|d| d.quantity_kg));
        match quantity_kg {
            Some(q) if grams_from_kg(q).is_none_or(|g| g == 0) => {
                return Err(invalid("quantity_kg must be positive".into()))
            }
            None if kind == ScenarioKind::Wholesale => return Err(invalid("quantity_kg is required".into())),
            _ => {}
        }
        let preference = params.preference.or_else(|| defaults.map(|d| d.preference)).unwrap_or_default();
        let order_id = params.order_id.unwrap_or_else(|| format!("order-{}", self.next_scenario));
        Ok(ResolvedParameters { sku, quantity_kg, preference, seed: config.seed, speed: config.speed, agent, order_id })
    }

    /// Starts a scenario by instructing its launching agent.
    pub fn launch_scenario(
        &mut self,
        kind: ScenarioKind,
        params: ScenarioParameters,
    ) -> Result<ScenarioDescriptor, GatewayError> {
        if !self.system.is_ready() {
            return Err(GatewayError::SystemNotReady);
        }
        let resolved = self.resolve(kind, params)?;
        let scenario_id = format!("sc-{}", self.next_scenario);
        self.next_scenario += 1;
        let quantity = resolved.quantity_kg.and_then(grams_from_kg);
        let control = match kind {
            ScenarioKind::Replenishment => Control::Replenish {
                scenario: scenario_id.clone(),
                order_id: Some(resolved.order_id.clone()),
                sku: resolved.sku.clone(),
                quantity,
                preference: resolved.preference,
            },
            ScenarioKind::Wholesale => Control::Purchase {
                scenario: scenario_id.clone(),
                order_id: Some(resolved.order_id.clone()),
                sku: resolved.sku.clone(),
                quantity: quantity.expect("resolved wholesale quantity"),
                preference: resolved.preference,
            },
        };
        let launcher = AgentAddress::new(&resolved.agent).expect("configured address");
        self.system
            .runtime
            .inject(&launcher, control)
            .map_err(|e| GatewayError::InvalidParameters(e.to_string()))?;
        let now = self.now();
        self.system.runtime.log().append(
            now,
            EventKind::Notification,
            json!({
                "agent": "gateway",
                "text": format!("launched {} scenario {scenario_id} via {}", kind.as_str(), resolved.agent),
            }),
        );
        let descriptor = ScenarioDescriptor {
            scenario_id: scenario_id.clone(),
            kind,
            parameters: resolved,
            status: ScenarioStatus::Running,
            launched_at: now,
            finished_at: None,
        };
        self.scenarios.insert(scenario_id, descriptor.clone());
        Ok(descriptor)
    }

    /// A retailer purchase, run as its own wholesale scenario.
    pub fn place_order(&mut self, order: OrderRequest) -> Result<OrderAck, GatewayError> {
        let is_retailer = self.system.config.agent(&order.buyer).map(|a| a.agent_type) == Some(AgentType::Retailer);
        if !is_retailer {
            return Err(GatewayError::UnknownBuyer(order.buyer));
        }
        if grams_from_kg(order.quantity_kg).is_none_or(|g| g == 0) {
            return Err(GatewayError::InvalidOrder("quantity_kg must be positive".into()));
        }
        if !self.system.catalog.contains_key(&order.sku) {
            return Err(GatewayError::InvalidOrder(format!("unknown sku {:?}", order.sku)));
        }
        let params = ScenarioParameters {
            sku: Some(order.sku),
            quantity_kg: Some(order.quantity_kg),
            preference: Some(order.preference),
            agent: Some(order.buyer),
            ..ScenarioParameters::default()
        };
        let d = self.launch_scenario(ScenarioKind::Wholesale, params).map_err(|e| match e {
            GatewayError::InvalidParameters(m) => GatewayError::InvalidOrder(m),
            other => other,
        })?;
        Ok(OrderAck { order_id: d.parameters.order_id, scenario_id: d.scenario_id })
    }

    /// Current descriptor, with its status brought up to date.
    pub fn scenario(&mut self, id: &str) -> Result<ScenarioDescriptor, GatewayError> {
        if !self.scenarios.contains_key(id) {
            return Err(GatewayError::UnknownScenario(id.to_string()));
        }
        self.refresh(id);
        Ok(self.scenarios[id].clone())
    }

    pub fn scenarios(&mut self) -> Vec<ScenarioDescriptor> {
        let ids: Vec<String> = self.scenarios.keys().cloned().collect();
        ids.iter().for_each(|id| self.refresh(id));
        self.scenarios.values().cloned().collect()
    }

    /// Status rule: a scenario settles once it has dialogues and all of them
    /// are absorbing, or once nothing is left to run. It completed iff every
    /// call its launcher made concluded successfully.
    fn refresh(&mut self, id: &str) {
        let Some(d) = self.scenarios.get(id) else { return };
        if d.status.is_terminal() {
            return;
        }
        let prefix = format!("{id}/");
        let runtime = &self.system.runtime;
        let mut any = false;
        let mut all_absorbing = true;
        let mut calls = 0;
        let mut calls_completed = 0;
        for (owner, dialogue) in runtime.all_dialogues() {
            if !dialogue.id.starts_with(&prefix) {
                continue;
            }
            any = true;
            all_absorbing &= dialogue.state.is_absorbing();
            if owner.as_str() == d.parameters.agent
                && dialogue.role == Role::Initiator
                && dialogue.protocol == ProtocolId::ContractNet
            {
                calls += 1;
                if dialogue.state == DialogueState::Initiator(InitiatorState::Concluded(Outcome::Completed)) {
                    calls_completed += 1;
                }
            }
        }
        let settled = any && all_absorbing;
        if !settled && !runtime.is_idle() {
            return;
        }
        let status = if settled && calls > 0 && calls == calls_completed {
            ScenarioStatus::Completed
        } else {
            ScenarioStatus::Failed
        };
        let now = runtime.now();
        let log = runtime.log().clone();
        let d = self.scenarios.get_mut(id).expect("present");
        d.status = status;
        d.finished_at = Some(now);
        log.append(
            now,
            EventKind::Status,
            json!({ "type": "scenario", "scenario_id": id, "kind": d.kind, "status": status }),
        );
    }

    /// Processes one work item and refreshes every running scenario.
    pub fn step(&mut self) -> bool {
        let stepped = self.system.runtime.step();
        let running: Vec<String> =
            self.scenarios.iter().filter(|(_, d)| !d.status.is_terminal()).map(|(k, _)| k.clone()).collect();
        running.iter().for_each(|id| self.refresh(id));
        stepped
    }

    /// Processes every item due at or before `t`.
    pub fn advance_to(&mut self, t: Millis) {
        while self.system.runtime.next_due().is_some_and(|at| at <= t) {
            self.step();
        }
        self.system.runtime.run_until(t);
        let running: Vec<String> =
            self.scenarios.iter().filter(|(_, d)| !d.status.is_terminal()).map(|(k, _)| k.clone()).collect();
        running.iter().for_each(|id| self.refresh(id));
    }

    /// Steps until the scenario is terminal or simulated time passes `t_end`.
    pub fn run_scenario(&mut self, id: &str, t_end: Millis) -> Result<ScenarioDescriptor, GatewayError> {
        loop {
            let d = self.scenario(id)?;
            if d.status.is_terminal() {
                return Ok(d);
            }
            match self.system.runtime.next_due() {
                Some(at) if at <= t_end => {
                    self.step();
                }
                _ => {
                    self.system.runtime.run_until(t_end);
                    self.refresh(id);
                    return self.scenario(id);
                }
            }
        }
    }

    /// Live agents with their types, plus the product catalog.
    pub fn agents(&self) -> Value {
        let agents: Vec<Value> = self
            .system
            .config
            .agents
            .iter()
            .filter(|a| AgentAddress::new(&a.address).is_ok_and(|addr| self.system.runtime.contains(&addr)))
            .map(|a| {
                let mut v = json!({ "address": a.address, "type": a.agent_type.as_str() });
                if let Some(l) = a.location {
                    v["location"] = json!({ "lat": l.lat, "lon": l.lon });
                }
                if let Some(name) = &a.carrier_name {
                    v["carrier_name"] = json!(name);
                }
                v
            })
            .collect();
        let catalog: Vec<Value> = self.system.catalog.values().map(|p| json!(p)).collect();
        json!({ "agents": agents, "catalog": catalog, "ready": self.system.is_ready() })
    }

    pub fn events(&self, from_seq: u64, filter: &KindFilter) -> Vec<Event> {
        self.system.log().since(from_seq, filter)
    }

    pub fn delivery(&self, tracking_id: &str) -> Result<Value, GatewayError> {
        project_delivery(&self.system.log().snapshot(), tracking_id)
    }

    pub fn report(&self, tracking_id: &str) -> Result<SummaryReport<f64>, GatewayError> {
        project_report(&self.system.log().snapshot(), tracking_id)
    }

    /// Tracking ids in order of first appearance.
    pub fn tracking_ids(&self) -> Vec<String> {
        tracking_ids(&self.system.log().snapshot())
    }
}

pub fn tracking_ids(events: &[Event]) -> Vec<String> {
    let mut seen = Vec::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Status) {
        if e.payload.get("type").and_then(Value::as_str) != Some("delivery") {
            continue;
        }
        if let Some(t) = e.payload.get("tracking_id").and_then(Value::as_str) {
            if !seen.iter().any(|s| s == t) {
                seen.push(t.to_string());
            }
        }
    }
    seen
}

fn delivery_records(events: &[Event], tracking_id: &str) -> Vec<TelemetryRecord<f64>> {
    events
        .iter()
        .filter(|e| e.kind == EventKind::Telemetry)
        .filter(|e| e.payload.get("tracking_id").and_then(Value::as_str) == Some(tracking_id))
        .filter_map(|e| telemetry_record(&e.payload))
        .collect()
}

fn latest_status<'a>(events: &'a [Event], tracking_id: &str) -> Option<&'a Value> {
    events.iter().rev().filter(|e| e.kind == EventKind::Status).map(|e| &e.payload).find(|p| is_delivery(p, tracking_id))
}

/// The current view of a delivery as projected from the event log.
pub fn project_delivery(events: &[Event], tracking_id: &str) -> Result<Value, GatewayError> {
    let status = latest_status(events, tracking_id).ok_or_else(|| GatewayError::UnknownTrackingId(tracking_id.into()))?;
    let records = delivery_records(events, tracking_id);
    let mut view = status.clone();
    if let Some(obj) = view.as_object_mut() {
        obj.remove("type");
        obj.remove("report");
        obj.insert("records_received".into(), json!(records.len()));
        if let Some(last) = records.last() {
            obj.insert("latest".into(), json!(last));
            obj.insert("position".into(), json!({ "lat": last.lat, "lon": last.lon }));
        }
    }
    Ok(view)
}

/// The summary report of a delivered job, recomputed from its telemetry
/// events and the safe range it was shipped under.
pub fn project_report(events: &[Event], tracking_id: &str) -> Result<SummaryReport<f64>, GatewayError> {
    let status = latest_status(events, tracking_id).ok_or_else(|| GatewayError::UnknownTrackingId(tracking_id.into()))?;
    let not_ready = || GatewayError::ReportNotReady(tracking_id.to_string());
    if status.get("status").and_then(Value::as_str) != Some("delivered") {
        return Err(not_ready());
    }
    let range = status.get("safe_range").ok_or_else(not_ready)?;
    let safe = SafeRange {
        min_c: range.get("min_c").and_then(Value::as_f64).ok_or_else(not_ready)?,
        max_c: range.get("max_c").and_then(Value::as_f64).ok_or_else(not_ready)?,
    };
    let threshold = status.get("quality_threshold").and_then(Value::as_f64).ok_or_else(not_ready)?;
    summarize_records(tracking_id, &delivery_records(events, tracking_id), safe, threshold).map_err(|_| not_ready())
}
