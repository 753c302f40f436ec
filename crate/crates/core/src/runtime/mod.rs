//! Agent hosting: mailbox delivery, behaviour scheduling and routing.
//!
//! The scheduler is strictly sequential. Work items are ordered by
//! `(time, agent address, insertion order)`, which makes a run a pure
//! function of the configuration and seeds.

mod behaviour;
mod clock;
mod context;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::Control;
use crate::events::{EventKind, EventLog};
use crate::messaging::{AgentAddress, Content, DialogueId, Envelope, Millis, Performative, ProtocolId};
use crate::protocol::{Dialogue, DialogueEvent, ProtocolError, Timeouts};

pub use behaviour::{Behaviour, BehaviourKind};
pub use clock::SimClock;
pub use context::Context;
use context::Effect;

pub const DEFAULT_LATENCY_MS: Millis = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    Wholesaler,
    Supplier,
    Retailer,
    Logistics,
    ThreePl,
    Admin,
}

impl AgentType {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentType::Wholesaler => "wholesaler",
            AgentType::Supplier => "supplier",
            AgentType::Retailer => "retailer",
            AgentType::Logistics => "logistics",
            AgentType::ThreePl => "three_pl",
            AgentType::Admin => "admin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentConfig {
    pub address: AgentAddress,
    pub agent_type: AgentType,
    pub behaviours: Vec<Behaviour>,
    pub rng_seed: u64,
}

/// What a handler is invoked with.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentEvent {
    /// A one-shot or periodic behaviour fired; `run` counts from 0.
    Behaviour { action: String, run: u64 },
    /// A reactive behaviour matched a delivered envelope.
    Message { action: String, envelope: Envelope },
    /// A dialogue owned by this agent moved on because its deadline passed.
    Expired { dialogue_id: DialogueId },
    Control(Control),
    Timer { tag: u64 },
}

pub trait Agent: Send {
    fn handle(&mut self, ctx: &mut Context<'_>, event: AgentEvent);

    /// Domain state as JSON, for inspection and assertions.
    fn snapshot(&self) -> Value {
        Value::Null
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentHandle {
    pub address: AgentAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("address {0} is already in use")]
    DuplicateAddress(AgentAddress),
    #[error("no agent at {0}")]
    UnknownAgent(AgentAddress),
}

/// A protocol violation observed while running; the offending envelope or
/// decision had no effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub at: Millis,
    pub agent: AgentAddress,
    pub dialogue_id: Option<DialogueId>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeOptions {
    pub latency_ms: Millis,
    /// Extra random delivery delay drawn from `0..=reorder_jitter_ms`. Any
    /// non-zero value breaks per-pair FIFO and exists for fault testing.
    pub reorder_jitter_ms: Millis,
    pub fault_seed: u64,
    pub timeouts: Timeouts,
    pub speed: f64,
}

impl Default for RuntimeOptions {
    fn default() -> Self {
        Self {
            latency_ms: DEFAULT_LATENCY_MS,
            reorder_jitter_ms: 0,
            fault_seed: 0,
            timeouts: Timeouts::default(),
            speed: 0.0,
        }
    }
}

/// Seed of an agent's private random stream, so that adding an agent leaves
/// every other stream untouched.
pub fn derive_seed(scenario_seed: u64, address: &AgentAddress) -> u64 {
    let digest = Sha256::digest(format!("{scenario_seed}:{address}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes)
}

#[derive(Debug)]
enum Work {
    Behaviour { index: usize, run: u64 },
    Deliver(Envelope),
    Expire { dialogue_id: DialogueId, deadline: Millis },
    Control(Control),
    Timer(u64),
}

#[derive(Debug)]
struct Scheduled {
    at: Millis,
    agent: AgentAddress,
    seq: u64,
    work: Work,
}

impl Scheduled {
    fn key(&self) -> (Millis, &AgentAddress, u64) {
        (self.at, &self.agent, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest item first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct Slot {
    config: AgentConfig,
    agent: Box<dyn Agent>,
    dialogues: BTreeMap<DialogueId, Dialogue>,
    rng: ChaCha8Rng,
    counter: u64,
    started_at: Millis,
}

pub struct Runtime {
    options: RuntimeOptions,
    clock: SimClock,
    agents: BTreeMap<AgentAddress, Slot>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    trace: Vec<Envelope>,
    violations: Vec<Violation>,
    log: Arc<EventLog>,
    fault_rng: ChaCha8Rng,
}

impl Runtime {
    pub fn new(options: RuntimeOptions) -> Self {
        Self::with_log(options, Arc::new(EventLog::new()))
    }

    pub fn with_log(options: RuntimeOptions, log: Arc<EventLog>) -> Self {
        Self {
            clock: SimClock::new(options.speed),
            fault_rng: ChaCha8Rng::seed_from_u64(options.fault_seed),
            options,
            agents: BTreeMap::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            trace: Vec::new(),
            violations: Vec::new(),
            log,
        }
    }

    pub fn now(&self) -> Millis {
        self.clock.now()
    }

    pub fn options(&self) -> &RuntimeOptions {
        &self.options
    }

    pub fn log(&self) -> &Arc<EventLog> {
        &self.log
    }

    /// Makes the agent live and queues its one-shot and periodic behaviours
    /// at the current time.
    pub fn spawn(&mut self, config: AgentConfig, agent: Box<dyn Agent>) -> Result<AgentHandle, RuntimeError> {
        if self.agents.contains_key(&config.address) {
            return Err(RuntimeError::DuplicateAddress(config.address));
        }
        let now = self.now();
        let address = config.address.clone();
        for (index, b) in config.behaviours.iter().enumerate() {
            if matches!(b.kind, BehaviourKind::OneShot | BehaviourKind::Periodic { .. }) {
                self.push(now, address.clone(), Work::Behaviour { index, run: 0 });
            }
        }
        let slot = Slot {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            config,
            agent,
            dialogues: BTreeMap::new(),
            counter: 0,
            started_at: now,
        };
        self.agents.insert(address.clone(), slot);
        Ok(AgentHandle { address })
    }

    /// Queues a control instruction for `address` at the current time.
    pub fn inject(&mut self, address: &AgentAddress, control: Control) -> Result<(), RuntimeError> {
        if !self.agents.contains_key(address) {
            return Err(RuntimeError::UnknownAgent(address.clone()));
        }
        self.push(self.now(), address.clone(), Work::Control(control));
        Ok(())
    }

    /// Validates and routes an envelope from outside any handler.
    pub fn send(&mut self, envelope: Envelope) {
        self.route(envelope);
    }

    /// Time of the earliest pending work item.
    pub fn next_due(&self) -> Option<Millis> {
        self.queue.peek().map(|s| s.at)
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    /// Processes every item due at or before `t_end`, then moves the clock to
    /// `t_end`. Returns the full trace so far.
    pub fn run_until(&mut self, t_end: Millis) -> &[Envelope] {
        while self.next_due().is_some_and(|at| at <= t_end) {
            self.step();
        }
        self.clock.advance_to(t_end);
        &self.trace
    }

    /// Processes the single earliest work item. Returns false if none.
    pub fn step(&mut self) -> bool {
        let Some(item) = self.queue.pop() else { return false };
        self.clock.advance_to(item.at);
        self.process(item);
        true
    }

    pub fn trace(&self) -> &[Envelope] {
        &self.trace
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn agents(&self) -> impl Iterator<Item = (&AgentAddress, AgentType)> {
        self.agents.iter().map(|(a, s)| (a, s.config.agent_type))
    }

    pub fn contains(&self, address: &AgentAddress) -> bool {
        self.agents.contains_key(address)
    }

    pub fn agent_type(&self, address: &AgentAddress) -> Option<AgentType> {
        self.agents.get(address).map(|s| s.config.agent_type)
    }

    pub fn snapshot(&self, address: &AgentAddress) -> Option<Value> {
        self.agents.get(address).map(|s| s.agent.snapshot())
    }

    pub fn dialogues(&self, address: &AgentAddress) -> Option<&BTreeMap<DialogueId, Dialogue>> {
        self.agents.get(address).map(|s| &s.dialogues)
    }

    /// Every dialogue of every agent, in address then id order.
    pub fn all_dialogues(&self) -> impl Iterator<Item = (&AgentAddress, &Dialogue)> {
        self.agents.iter().flat_map(|(a, s)| s.dialogues.values().map(move |d| (a, d)))
    }

    fn push(&mut self, at: Millis, agent: AgentAddress, work: Work) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Scheduled { at, agent, seq, work });
    }

    fn process(&mut self, item: Scheduled) {
        let Scheduled { agent, work, .. } = item;
        match work {
            Work::Behaviour { index, run } => {
                let Some(slot) = self.agents.get(&agent) else { return };
                let behaviour = slot.config.behaviours[index].clone();
                let started_at = slot.started_at;
                self.invoke(&agent, AgentEvent::Behaviour { action: behaviour.action, run });
                if let BehaviourKind::Periodic { interval_ms } = behaviour.kind {
                    let next = started_at.saturating_add(interval_ms.saturating_mul(run + 1));
                    self.push(next, agent, Work::Behaviour { index, run: run + 1 });
                }
            }
            Work::Deliver(envelope) => self.deliver(&agent, envelope),
            Work::Expire { dialogue_id, deadline } => self.expire(&agent, dialogue_id, deadline),
            Work::Control(control) => self.invoke(&agent, AgentEvent::Control(control)),
            Work::Timer(tag) => self.invoke(&agent, AgentEvent::Timer { tag }),
        }
    }

    fn deliver(&mut self, receiver: &AgentAddress, envelope: Envelope) {
        let now = self.now();
        let timeouts = self.options.timeouts;
        let Some(slot) = self.agents.get_mut(receiver) else { return };
        let id = envelope.dialogue_id.clone();
        let (result, before, deadline, live) = match slot.dialogues.get_mut(&id) {
            Some(dialogue) => {
                let before = dialogue.deadline;
                let result = dialogue.step(DialogueEvent::Received(envelope.clone()), now);
                (result, before, dialogue.deadline, !dialogue.is_terminated())
            }
            None => match Dialogue::for_opening(receiver, &envelope, timeouts) {
                Some(mut dialogue) => {
                    let result = dialogue.step(DialogueEvent::Received(envelope.clone()), now);
                    let out = (result, Millis::MAX, dialogue.deadline, !dialogue.is_terminated());
                    if out.0.is_ok() {
                        slot.dialogues.insert(id.clone(), dialogue);
                    }
                    out
                }
                None => (Err(ProtocolError::UnknownDialogue(id.clone())), Millis::MAX, Millis::MAX, false),
            },
        };
        if let Err(err) = result {
            self.record_violation(receiver, err);
            return;
        }
        if live && deadline != before && deadline != Millis::MAX {
            self.push(deadline, receiver.clone(), Work::Expire { dialogue_id: id, deadline });
        }
        let actions: Vec<String> = self.agents[receiver]
            .config
            .behaviours
            .iter()
            .filter(|b| b.matches(&envelope))
            .map(|b| b.action.clone())
            .collect();
        for action in actions {
            self.invoke(receiver, AgentEvent::Message { action, envelope: envelope.clone() });
        }
    }

    fn expire(&mut self, owner: &AgentAddress, dialogue_id: DialogueId, deadline: Millis) {
        let now = self.now();
        let Some(dialogue) = self.agents.get_mut(owner).and_then(|s| s.dialogues.get_mut(&dialogue_id)) else {
            return;
        };
        if dialogue.deadline != deadline || dialogue.is_terminated() {
            return;
        }
        let state = dialogue.state;
        dialogue.expire(now);
        if dialogue.state == state {
            return;
        }
        log::debug!("{owner}: dialogue {dialogue_id} expired {state} -> {}", dialogue.state);
        if !dialogue.is_terminated() && dialogue.deadline != deadline {
            let next = dialogue.deadline;
            self.push(next, owner.clone(), Work::Expire { dialogue_id: dialogue_id.clone(), deadline: next });
        }
        self.invoke(owner, AgentEvent::Expired { dialogue_id });
    }

    fn invoke(&mut self, address: &AgentAddress, event: AgentEvent) {
        let now = self.now();
        let timeouts = self.options.timeouts;
        let Some(slot) = self.agents.get_mut(address) else { return };
        let Slot { config, agent, dialogues, rng, counter, .. } = slot;
        let mut ctx = Context {
            now,
            me: &config.address,
            agent_type: config.agent_type,
            dialogues,
            rng,
            counter,
            timeouts,
            effects: Vec::new(),
        };
        agent.handle(&mut ctx, event);
        let effects = ctx.effects;
        for effect in effects {
            match effect {
                Effect::Send(envelope) => self.route(envelope),
                Effect::Publish(kind, payload) => {
                    self.log.append(now, kind, payload);
                }
                Effect::Timer { at, tag } => self.push(at, address.clone(), Work::Timer(tag)),
                Effect::Expiry { dialogue_id, deadline } => {
                    self.push(deadline, address.clone(), Work::Expire { dialogue_id, deadline })
                }
                Effect::Violation(err) => self.record_violation(address, err),
            }
        }
    }

    fn route(&mut self, envelope: Envelope) {
        let now = self.now();
        if let Err(err) = envelope.validate() {
            let reason = format!("invalid envelope dropped: {err}");
            self.record_violation(
                &envelope.sender.clone(),
                ProtocolError::Violation { dialogue_id: envelope.dialogue_id.clone(), reason },
            );
            return;
        }
        self.trace.push(envelope.clone());
        self.log.append(now, EventKind::Message, serde_json::to_value(&envelope).expect("envelope serializes"));
        if !self.agents.contains_key(&envelope.receiver) {
            self.bounce(envelope);
            return;
        }
        let mut at = now.saturating_add(self.options.latency_ms);
        if self.options.reorder_jitter_ms > 0 {
            at = at.saturating_add(self.fault_rng.random_range(0..=self.options.reorder_jitter_ms));
        }
        let receiver = envelope.receiver.clone();
        self.push(at, receiver, Work::Deliver(envelope));
    }

    /// Answers an envelope sent to an address nobody holds, on the sender's
    /// own dialogue, so that the sender's dialogue can still terminate.
    fn bounce(&mut self, original: Envelope) {
        if !self.agents.contains_key(&original.sender) {
            log::warn!("dropping {} between unknown agents", original.performative);
            return;
        }
        log::warn!("{} sent {} to unknown receiver {}", original.sender, original.performative, original.receiver);
        let mut content = Content::new();
        let performative = match original.protocol_id {
            ProtocolId::ContractNet => {
                content.insert("reason".into(), json!("unknown_receiver"));
                Performative::Failure
            }
            ProtocolId::RequestResponse if original.performative.is_request() => {
                content.insert("error".into(), json!("unknown_receiver"));
                Performative::Response
            }
            ProtocolId::RequestResponse => return,
        };
        let reply = Envelope {
            sender: original.receiver.clone(),
            receiver: original.sender.clone(),
            protocol_id: original.protocol_id,
            ontology_id: original.ontology_id.clone(),
            performative,
            dialogue_id: original.dialogue_id.clone(),
            reply_with: None,
            in_reply_to: original.reply_with.clone(),
            sent_at: self.now(),
            content,
        };
        self.route(reply);
    }

    fn record_violation(&mut self, agent: &AgentAddress, err: ProtocolError) {
        let (dialogue_id, reason) = match err {
            ProtocolError::UnknownDialogue(id) => (Some(id.clone()), format!("unknown dialogue {id}")),
            ProtocolError::Violation { dialogue_id, reason } => (Some(dialogue_id), reason),
        };
        log::warn!("{agent}: protocol violation: {reason}");
        self.violations.push(Violation { at: self.now(), agent: agent.clone(), dialogue_id, reason });
    }
}

#[cfg(test)]
mod tests;
