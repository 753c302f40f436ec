use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use rand::Rng;
use serde_json::json;

use super::*;
use crate::discovery::{AdminAgent, Query, SharedRegistry};
use crate::messaging::{ontologies, wire};
use crate::protocol::{Decision, DialogueState, InitiatorState, Outcome, RequestKind, RequestState};

fn addr(s: &str) -> AgentAddress {
    AgentAddress::new(s).unwrap()
}

fn content(v: Value) -> Content {
    let Value::Object(m) = v else { panic!() };
    m
}

type Seen = Arc<Mutex<Vec<(Millis, Envelope)>>>;

/// Sends telemetry informs to `to` on its periodic or one-shot behaviours
/// and records everything delivered to it.
struct Probe {
    to: Option<AgentAddress>,
    per_run: usize,
    feed: Option<DialogueId>,
    sent: u64,
    runs: Arc<Mutex<Vec<Millis>>>,
    seen: Seen,
    draws: Vec<u32>,
}

impl Probe {
    fn new(to: Option<&str>, per_run: usize) -> Self {
        Self {
            to: to.map(addr),
            per_run,
            feed: None,
            sent: 0,
            runs: Arc::default(),
            seen: Arc::default(),
            draws: Vec::new(),
        }
    }

    fn reading(&self) -> Content {
        content(json!({
            "tracking_id": "T", "t_ms": self.sent, "lat": 0.0, "lon": 0.0, "temp_c": 1.0, "humidity_pct": 2.0
        }))
    }
}

impl Agent for Probe {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        match event {
            AgentEvent::Behaviour { .. } => {
                self.runs.lock().unwrap().push(ctx.now());
                self.draws.push(ctx.rng().random());
                let Some(to) = self.to.clone() else { return };
                for _ in 0..self.per_run {
                    let body = self.reading();
                    self.sent += 1;
                    match &self.feed {
                        Some(id) => ctx.drive(id, Decision::Notify(body)).unwrap(),
                        None => {
                            let id = ctx.next_dialogue_id("t");
                            let feed = Dialogue::feed(id.clone(), ontologies::TELEMETRY, ctx.me().clone(), to.clone(), ctx.timeouts());
                            ctx.open(feed, Decision::Notify(body)).unwrap();
                            self.feed = Some(id);
                        }
                    }
                }
            }
            AgentEvent::Message { envelope, .. } => self.seen.lock().unwrap().push((ctx.now(), envelope)),
            _ => {}
        }
    }

    fn snapshot(&self) -> Value {
        json!({ "draws": self.draws })
    }
}

fn probe_config(address: &str, behaviours: Vec<Behaviour>) -> AgentConfig {
    AgentConfig { address: addr(address), agent_type: AgentType::Retailer, behaviours, rng_seed: derive_seed(42, &addr(address)) }
}

fn listener() -> Vec<Behaviour> {
    vec![Behaviour::reactive_all(ProtocolId::ContractNet, "listen"), Behaviour::reactive_all(ProtocolId::RequestResponse, "listen")]
}

#[test]
fn empty_system_has_empty_trace() {
    let mut rt = Runtime::new(RuntimeOptions::default());
    assert!(rt.run_until(10_000).is_empty());
    assert_eq!(rt.now(), 10_000);
}

#[test]
fn duplicate_address_is_rejected() {
    let mut rt = Runtime::new(RuntimeOptions::default());
    rt.spawn(probe_config("a", vec![]), Box::new(Probe::new(None, 0))).unwrap();
    let err = rt.spawn(probe_config("a", vec![]), Box::new(Probe::new(None, 0))).unwrap_err();
    assert_eq!(err, RuntimeError::DuplicateAddress(addr("a")));
}

#[test]
fn agent_without_behaviours_does_nothing() {
    let mut rt = Runtime::new(RuntimeOptions::default());
    let probe = Probe::new(Some("b"), 1);
    let runs = probe.runs.clone();
    rt.spawn(probe_config("a", vec![]), Box::new(probe)).unwrap();
    assert!(rt.run_until(5_000).is_empty());
    assert!(runs.lock().unwrap().is_empty());
}

#[test]
fn per_pair_order_is_fifo() {
    let mut rt = Runtime::new(RuntimeOptions::default());
    let b = Probe::new(None, 0);
    let seen = b.seen.clone();
    rt.spawn(probe_config("b", listener()), Box::new(b)).unwrap();
    rt.spawn(probe_config("a", vec![Behaviour::periodic(7, "tick")]), Box::new(Probe::new(Some("b"), 3))).unwrap();
    rt.spawn(probe_config("c", vec![Behaviour::periodic(5, "tick")]), Box::new(Probe::new(Some("b"), 2))).unwrap();
    rt.run_until(100);
    let seen = seen.lock().unwrap();
    for sender in ["a", "c"] {
        let stamps: Vec<u64> = seen
            .iter()
            .filter(|(_, e)| e.sender.as_str() == sender)
            .map(|(_, e)| e.content["t_ms"].as_u64().unwrap())
            .collect();
        assert!(!stamps.is_empty());
        assert!(stamps.windows(2).all(|w| w[0] + 1 == w[1]), "{sender}: {stamps:?}");
    }
    assert!(seen.iter().all(|(at, e)| *at == e.sent_at + DEFAULT_LATENCY_MS));
    assert!(rt.violations().is_empty());
}

#[test]
fn no_message_is_lost_under_reordering() {
    let options = RuntimeOptions { reorder_jitter_ms: 50, fault_seed: 3, ..RuntimeOptions::default() };
    let mut rt = Runtime::new(options);
    let b = Probe::new(None, 0);
    let seen = b.seen.clone();
    rt.spawn(probe_config("b", listener()), Box::new(b)).unwrap();
    rt.spawn(probe_config("a", vec![Behaviour::one_shot("burst")]), Box::new(Probe::new(Some("b"), 20))).unwrap();
    rt.run_until(1_000);
    assert_eq!(rt.trace().len(), 20);
    assert_eq!(seen.lock().unwrap().len(), 20);
}

struct Asker {
    to: AgentAddress,
    protocol: ProtocolId,
    expired: Arc<Mutex<Vec<DialogueId>>>,
}

impl Agent for Asker {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent) {
        match event {
            AgentEvent::Behaviour { .. } => {
                let id = ctx.next_dialogue_id("t");
                let (ontology, decision) = match self.protocol {
                    ProtocolId::ContractNet => (
                        ontologies::MEAT_TRADE,
                        Decision::CallForProposals(content(json!({"sku": "beef-01", "quantity_kg": 5.0}))),
                    ),
                    ProtocolId::RequestResponse => (
                        ontologies::DISCOVERY,
                        Decision::Request { kind: RequestKind::Get, content: content(json!({"query": []})) },
                    ),
                };
                let d = Dialogue::initiator(id, self.protocol, ontology, ctx.me().clone(), [self.to.clone()], ctx.timeouts());
                ctx.open(d, decision).unwrap();
            }
            AgentEvent::Expired { dialogue_id } => self.expired.lock().unwrap().push(dialogue_id),
            _ => {}
        }
    }
}

fn ask(to: &str, protocol: ProtocolId) -> (Runtime, Arc<Mutex<Vec<DialogueId>>>) {
    let mut rt = Runtime::new(RuntimeOptions::default());
    let expired = Arc::new(Mutex::new(Vec::new()));
    let asker = Asker { to: addr(to), protocol, expired: expired.clone() };
    let mut behaviours = listener();
    behaviours.push(Behaviour::one_shot("ask"));
    rt.spawn(probe_config("asker", behaviours), Box::new(asker)).unwrap();
    rt.spawn(probe_config("mute", vec![]), Box::new(Probe::new(None, 0))).unwrap();
    rt.run_until(60_000);
    (rt, expired)
}

fn only_state(rt: &Runtime) -> DialogueState {
    let dialogues = rt.dialogues(&addr("asker")).unwrap();
    assert_eq!(dialogues.len(), 1);
    dialogues.values().next().unwrap().state
}

#[test]
fn unknown_receiver_gets_failure_on_contract_net() {
    let (rt, _) = ask("ghost", ProtocolId::ContractNet);
    assert_eq!(only_state(&rt), DialogueState::Initiator(InitiatorState::Concluded(Outcome::Failed)));
    let bounce = &rt.trace()[1];
    assert_eq!(bounce.performative, Performative::Failure);
    assert_eq!(bounce.sender, addr("ghost"));
    assert_eq!(bounce.in_reply_to, rt.trace()[0].reply_with);
    assert!(rt.violations().is_empty());
}

#[test]
fn unknown_receiver_gets_error_response() {
    let (rt, _) = ask("ghost", ProtocolId::RequestResponse);
    assert_eq!(only_state(&rt), DialogueState::Request(RequestState::Completed));
    assert_eq!(rt.trace()[1].content["error"], json!("unknown_receiver"));
}

#[test]
fn silent_receiver_lets_requests_expire() {
    let (rt, expired) = ask("mute", ProtocolId::RequestResponse);
    assert_eq!(only_state(&rt), DialogueState::Request(RequestState::Expired));
    assert_eq!(expired.lock().unwrap().len(), 1);
}

#[test]
fn silent_participants_time_out_a_call() {
    let (rt, expired) = ask("mute", ProtocolId::ContractNet);
    assert_eq!(only_state(&rt), DialogueState::Initiator(InitiatorState::Concluded(Outcome::TimedOut)));
    assert_eq!(expired.lock().unwrap().len(), 1);
}

#[test]
fn stray_envelope_is_a_violation_and_dropped() {
    let mut rt = Runtime::new(RuntimeOptions::default());
    let b = Probe::new(None, 0);
    let seen = b.seen.clone();
    rt.spawn(probe_config("b", listener()), Box::new(b)).unwrap();
    rt.send(Envelope {
        sender: addr("x"),
        receiver: addr("b"),
        protocol_id: ProtocolId::ContractNet,
        ontology_id: ontologies::MEAT_TRADE.into(),
        performative: Performative::Propose,
        dialogue_id: "t/x/1".into(),
        reply_with: Some("x#1".into()),
        in_reply_to: Some("b#1".into()),
        sent_at: 0,
        content: content(json!({
            "proposal_id": "p", "sku": "s", "quantity_kg": 1.0, "unit_price": 1.0, "delivery_options": [], "valid_until": 1
        })),
    });
    rt.run_until(100);
    assert_eq!(rt.violations().len(), 1);
    assert!(seen.lock().unwrap().is_empty());
    assert!(rt.dialogues(&addr("b")).unwrap().is_empty());
}

#[test]
fn registration_reaches_the_registry() {
    let registry = SharedRegistry::new();
    let mut rt = Runtime::new(RuntimeOptions::default());
    let admin = AgentConfig { address: addr("admin"), agent_type: AgentType::Admin, behaviours: AdminAgent::behaviours(), rng_seed: 0 };
    rt.spawn(admin, Box::new(AdminAgent::new(registry.clone()))).unwrap();
    let mut cfg = probe_config("s1", crate::agents::default_behaviours());
    cfg.agent_type = AgentType::Supplier;
    let supplier = crate::agents::Supplier::new(
        addr("admin"),
        crate::agents::InventoryLedger::new(),
        crate::agents::SellerDesk::new(crate::agents::Location::new(1.0, 2.0), addr("l1"), Default::default(), false),
    );
    rt.spawn(cfg, Box::new(supplier)).unwrap();
    rt.run_until(100);
    let q = Query::all().and("category", crate::discovery::Operator::Eq, "meat_supply");
    assert_eq!(registry.search(&q).unwrap(), vec![addr("s1")]);
    assert!(rt.violations().is_empty());
}

fn run_probes(seed: u64, extra: bool) -> (Vec<u8>, Value) {
    let mut rt = Runtime::new(RuntimeOptions::default());
    let mk = |a: &str| AgentConfig { rng_seed: derive_seed(seed, &addr(a)), ..probe_config(a, vec![Behaviour::periodic(3, "tick")]) };
    rt.spawn(mk("b"), Box::new(Probe::new(Some("a"), 1))).unwrap();
    if extra {
        rt.spawn(mk("c"), Box::new(Probe::new(Some("a"), 1))).unwrap();
    }
    let mut a = mk("a");
    a.behaviours.extend(listener());
    rt.spawn(a, Box::new(Probe::new(Some("b"), 2))).unwrap();
    rt.run_until(50);
    let bytes = crate::protocol::trace::encode_trace(rt.trace()).unwrap();
    (bytes, rt.snapshot(&addr("a")).unwrap())
}

#[test]
fn runs_are_deterministic() {
    assert_eq!(run_probes(7, false), run_probes(7, false));
    assert_ne!(run_probes(7, false).1, run_probes(8, false).1);
}

#[test]
fn adding_an_agent_leaves_other_streams_alone() {
    assert_eq!(run_probes(7, false).1, run_probes(7, true).1);
}

#[test]
fn trace_matches_message_events() {
    let mut rt = Runtime::new(RuntimeOptions::default());
    rt.spawn(probe_config("b", listener()), Box::new(Probe::new(None, 0))).unwrap();
    rt.spawn(probe_config("a", vec![Behaviour::periodic(10, "tick")]), Box::new(Probe::new(Some("b"), 1))).unwrap();
    rt.run_until(100);
    let messages: Vec<Envelope> = rt
        .log()
        .snapshot()
        .into_iter()
        .filter(|e| e.kind == EventKind::Message)
        .map(|e| serde_json::from_value(e.payload).unwrap())
        .collect();
    assert_eq!(messages, rt.trace());
    for e in rt.trace() {
        assert_eq!(wire::decode(&wire::encode(e).unwrap()).unwrap(), *e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodic_fidelity(interval in 1u64..500, t0 in 0u64..1000, span in 0u64..5000) {
        let mut rt = Runtime::new(RuntimeOptions::default());
        rt.run_until(t0);
        let probe = Probe::new(None, 0);
        let runs = probe.runs.clone();
        rt.spawn(probe_config("p", vec![Behaviour::periodic(interval, "tick")]), Box::new(probe)).unwrap();
        rt.run_until(t0 + span);
        let runs = runs.lock().unwrap();
        prop_assert_eq!(runs.len() as u64, span / interval + 1);
        prop_assert!(runs.iter().enumerate().all(|(k, t)| *t == t0 + k as u64 * interval));
    }

    #[test]
    fn one_shot_runs_once(span in 0u64..10_000) {
        let mut rt = Runtime::new(RuntimeOptions::default());
        let probe = Probe::new(None, 0);
        let runs = probe.runs.clone();
        rt.spawn(probe_config("p", vec![Behaviour::one_shot("go")]), Box::new(probe)).unwrap();
        rt.run_until(span);
        prop_assert_eq!(runs.lock().unwrap().clone(), vec![0]);
    }
}
