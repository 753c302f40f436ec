//! The third-party logistics carrier: issues tracking ids, replays delivery
//! telemetry on the simulated clock and publishes the summary report.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use super::common::{categories, content, location_from, location_json, register, request, respond, scenario_of, ACTION_REGISTER};
use super::{Catalog, Location};
use crate::events::EventKind;
use crate::messaging::{ontologies, AgentAddress, DialogueId, Envelope, Millis, Performative, ProtocolId};
use crate::protocol::{Decision, Dialogue, RequestKind};
use crate::runtime::{Agent, AgentEvent, Context};
use crate::telemetry::{
    generate_tracking_id, summarize, synthesize_route, DeliveryJob, SafeRange, SyntheticRoute, TelemetryRecord,
    DEFAULT_QUALITY_THRESHOLD,
};

/// Where a 3PL's telemetry comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TelemetrySource {
    /// A pre-collected dataset replayed verbatim for every delivery.
    Dataset(Arc<Vec<TelemetryRecord<f64>>>),
    /// A straight route between the endpoints, one record per cadence step
    /// over the option's eta.
    Synthetic { base_temp_c: f64, noise_c: f64, humidity_pct: f64, cadence_ms: Millis },
}

struct ActiveJob {
    job: DeliveryJob<f64>,
    plan: Vec<TelemetryRecord<f64>>,
    next: usize,
    feed: DialogueId,
    logistics: AgentAddress,
    sku: String,
    safe: SafeRange<f64>,
    threshold: f64,
}

pub struct ThreePl {
    admin: AgentAddress,
    pub carrier_name: String,
    epoch_ms: Millis,
    source: TelemetrySource,
    catalog: Arc<Catalog>,
    jobs: Vec<ActiveJob>,
    last_stamp: Option<Millis>,
    finished: BTreeMap<String, DeliveryJob<f64>>,
}

impl ThreePl {
    pub fn new(
        admin: AgentAddress,
        carrier_name: impl Into<String>,
        epoch_ms: Millis,
        source: TelemetrySource,
        catalog: Arc<Catalog>,
    ) -> Self {
        Self {
            admin,
            carrier_name: carrier_name.into(),
            epoch_ms,
            source,
            catalog,
            jobs: Vec::new(),
            last_stamp: None,
            finished: BTreeMap::new(),
        }
    }

    /// Epoch-millisecond stamps never repeat within one carrier.
    fn next_tracking_id(&mut self, now: Millis) -> Option<String> {
        let stamp = (self.epoch_ms + now).max(self.last_stamp.map_or(0, |s| s + 1));
        self.last_stamp = Some(stamp);
        generate_tracking_id(&self.carrier_name, stamp).ok()
    }

    fn plan(&self, ctx: &mut Context<'_>, origin: Location, destination: Location, eta_ms: Millis) -> Vec<TelemetryRecord<f64>> {
        match &self.source {
            TelemetrySource::Dataset(records) => records.as_ref().clone(),
            TelemetrySource::Synthetic { base_temp_c, noise_c, humidity_pct, cadence_ms } => {
                let cadence = (*cadence_ms).max(1);
                let params = SyntheticRoute {
                    n_points: (eta_ms / cadence) as usize + 1,
                    base_temp_c: *base_temp_c,
                    noise_c: *noise_c,
                    humidity_pct: *humidity_pct,
                    cadence_ms: cadence,
                };
                let params = SyntheticRoute { n_points: params.n_points.max(2), ..params };
                synthesize_route(origin, destination, &params, ctx.rng())
            }
        }
    }

    fn status_payload(&self, job: &ActiveJob) -> Value {
        json!({
            "type": "delivery",
            "tracking_id": job.job.tracking_id,
            "order_id": job.job.order_id,
            "status": job.job.status,
            "carrier": self.carrier_name,
            "carrier_3pl": job.job.carrier_3pl.as_str(),
            "logistics": job.logistics.as_str(),
            "sku": job.sku,
            "origin": location_json(&job.job.origin),
            "destination": location_json(&job.job.destination),
            "safe_range": { "min_c": job.safe.min_c, "max_c": job.safe.max_c },
            "quality_threshold": job.threshold,
            "planned_records": job.plan.len(),
        })
    }

    fn assign(&mut self, ctx: &mut Context<'_>, env: &Envelope) {
        let origin = location_from(env.content.get("origin"));
        let destination = location_from(env.content.get("destination"));
        let (Some(origin), Some(destination)) = (origin, destination) else {
            respond(ctx, &env.dialogue_id, json!({ "error": "origin and destination required" }));
            return;
        };
        let Some(tracking_id) = self.next_tracking_id(ctx.now()) else {
            respond(ctx, &env.dialogue_id, json!({ "error": "invalid carrier name" }));
            return;
        };
        let sku = env.text("sku").unwrap_or("").to_string();
        let (safe, threshold) = match self.catalog.get(&sku) {
            Some(p) => (SafeRange::new(p.safe_min_c, p.safe_max_c), p.quality_threshold),
            None => (SafeRange::new(f64::MIN, f64::MAX), DEFAULT_QUALITY_THRESHOLD),
        };
        let eta_ms = env.content.get("eta_ms").and_then(Value::as_u64).unwrap_or(3_600_000);
        let plan = self.plan(ctx, origin, destination, eta_ms);
        let order_id = env.text("order_id").unwrap_or("").to_string();
        let mut job = DeliveryJob::new(tracking_id.clone(), order_id, ctx.me().clone(), origin, destination);
        respond(
            ctx,
            &env.dialogue_id,
            json!({ "status": "assigned", "tracking_id": tracking_id, "carrier": ctx.me().as_str() }),
        );
        let feed = ctx.next_dialogue_id(scenario_of(&env.dialogue_id));
        let _ = job.start(ctx.now());
        let active = ActiveJob { job, plan, next: 0, feed, logistics: env.sender.clone(), sku, safe, threshold };
        ctx.publish(EventKind::Status, self.status_payload(&active));
        ctx.notify(format!("{} picked up order {} as {tracking_id}", ctx.me(), active.job.order_id));
        let index = self.jobs.len() as u64;
        let first = active.plan.first().map(|r| r.t_ms);
        self.jobs.push(active);
        match first {
            Some(t) => ctx.schedule(t, index),
            None => self.finish(ctx, index as usize),
        }
    }

    /// Records are due at `start + t_ms`; emits one and arms the next.
    fn emit(&mut self, ctx: &mut Context<'_>, index: usize) {
        let Some(active) = self.jobs.get_mut(index) else { return };
        let Some(record) = active.plan.get(active.next).copied() else { return };
        let last = active.next + 1 == active.plan.len();
        let mut body = json!({
            "tracking_id": active.job.tracking_id,
            "t_ms": record.t_ms,
            "lat": record.lat,
            "lon": record.lon,
            "temp_c": record.temp_c,
            "humidity_pct": record.humidity_pct,
        });
        if last {
            body["final"] = json!(true);
        }
        let sent = if active.next == 0 {
            let feed = Dialogue::feed(
                active.feed.clone(),
                ontologies::TELEMETRY,
                ctx.me().clone(),
                active.logistics.clone(),
                ctx.timeouts(),
            );
            ctx.open(feed, Decision::Notify(content(body.clone())))
        } else {
            ctx.drive(&active.feed, Decision::Notify(content(body.clone())))
        };
        if sent.is_err() {
            let _ = active.job.fail();
            self.finish(ctx, index);
            return;
        }
        let _ = active.job.push_record(record);
        active.next += 1;
        let next_delay = active.plan.get(active.next).map(|r| r.t_ms - record.t_ms);
        if last {
            let _ = active.job.finish();
        }
        body["carrier_3pl"] = json!(ctx.me().as_str());
        body.as_object_mut().expect("object").remove("final");
        ctx.publish(EventKind::Telemetry, body);
        match next_delay {
            Some(delay) => ctx.schedule(delay, index as u64),
            None => self.finish(ctx, index),
        }
    }

    fn finish(&mut self, ctx: &mut Context<'_>, index: usize) {
        let Some(active) = self.jobs.get_mut(index) else { return };
        if active.job.status.eq(&crate::telemetry::JobStatus::InTransit) {
            let _ = active.job.fail();
        }
        let mut payload = self.status_payload(&self.jobs[index]);
        let active = &self.jobs[index];
        let delivered = active.job.status == crate::telemetry::JobStatus::Delivered;
        if let Ok(report) = summarize(&active.job, active.safe, active.threshold) {
            payload["report"] = serde_json::to_value(&report).expect("report serializes");
        }
        ctx.publish(EventKind::Status, payload);
        let tracking_id = active.job.tracking_id.clone();
        ctx.notify(format!(
            "{} {} {tracking_id}",
            ctx.me(),
            if delivered { "delivered" } else { "failed to deliver" }
        ));
        let body = json!({
            "action": if delivered { "delivered" } else { "delivery_failed" },
            "order_id": active.job.order_id,
            "tracking_id": tracking_id,
            "status": active.job.status,
        });
        let (logistics, scope) = (active.logistics.clone(), scenario_of(&active.feed).to_string());
        self.finished.insert(tracking_id, active.job.clone());
        let _ = request(ctx, &scope, &logistics, ontologies::DELIVERY_SERVICE, RequestKind::Post, body);
    }
}

impl Agent for ThreePl {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        match event {
            AgentEvent::Behaviour { action, .. } if action == ACTION_REGISTER => {
                register(ctx, &self.admin, categories::THREE_PL, None);
            }
            AgentEvent::Message { envelope: env, .. } => match (env.protocol_id, env.performative) {
                (ProtocolId::RequestResponse, Performative::RequestPost) if env.text("action") == Some("assign") => {
                    self.assign(ctx, &env)
                }
                (ProtocolId::RequestResponse, Performative::RequestGet | Performative::RequestPost) => {
                    respond(ctx, &env.dialogue_id, json!({ "error": "unsupported request" }))
                }
                _ => {}
            },
            AgentEvent::Timer { tag } => self.emit(ctx, tag as usize),
            AgentEvent::Behaviour { .. } | AgentEvent::Control(_) | AgentEvent::Expired { .. } => {}
        }
    }

    fn snapshot(&self) -> Value {
        let active: Vec<_> = self
            .jobs
            .iter()
            .filter(|a| a.job.status == crate::telemetry::JobStatus::InTransit)
            .map(|a| json!({ "tracking_id": a.job.tracking_id, "emitted": a.next, "planned": a.plan.len() }))
            .collect();
        json!({ "carrier": self.carrier_name, "in_transit": active, "finished": self.finished.keys().collect::<Vec<_>>() })
    }
}
