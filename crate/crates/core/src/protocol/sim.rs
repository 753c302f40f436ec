//! Randomized protocol sessions for stress testing.
//!
//! A session plays one dialogue between an initiator and its counterparties
//! over a simulated FIFO network, with random agent choices, random delays
//! that race the deadlines, and injected duplicate or misplaced events. It
//! only drives the state machines and records what happened; judging the
//! record is left to the caller.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Map, Value};

use super::{Decision, Dialogue, DialogueEvent, DialogueState, InitiatorState, ProtocolError, RequestKind, Timeouts};
use crate::messaging::{AgentAddress, Content, Envelope, Millis, ProtocolId};

/// Outcome of one injected out-of-protocol event.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub dialogue: usize,
    pub description: String,
    /// The step returned an error.
    pub rejected: bool,
    /// The dialogue was identical before and after.
    pub unchanged: bool,
}

/// A refused step during ordinary play, such as a reply that lost the race
/// against a deadline.
#[derive(Debug, Clone, PartialEq)]
pub struct Refusal {
    pub dialogue: usize,
    pub error: ProtocolError,
    pub unchanged: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub protocol: ProtocolId,
    /// Every envelope any party emitted, in emission order.
    pub sent: Vec<Envelope>,
    /// Index 0 is the initiator; the others are its counterparties.
    pub dialogues: Vec<Dialogue>,
    pub refusals: Vec<Refusal>,
    pub injections: Vec<Injection>,
    /// Simulated time when play stopped, before the final expiry sweep.
    pub ended_at: Millis,
}

#[derive(Debug, Clone)]
enum Action {
    Deliver { from: usize, to: usize },
    Decide(usize),
    Expire,
}

struct Net {
    parties: Vec<AgentAddress>,
    dialogues: Vec<Option<Dialogue>>,
    channels: BTreeMap<(usize, usize), VecDeque<Envelope>>,
    agenda: BinaryHeap<Reverse<(Millis, u64, usize)>>,
    actions: Vec<Action>,
    session: Session,
    max_delay: Millis,
}

fn body(v: Value) -> Content {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

impl Net {
    fn new(protocol: ProtocolId, parties: Vec<AgentAddress>, max_delay: Millis) -> Self {
        let n = parties.len();
        Self {
            parties,
            dialogues: vec![None; n],
            channels: BTreeMap::new(),
            agenda: BinaryHeap::new(),
            actions: Vec::new(),
            session: Session {
                protocol,
                sent: Vec::new(),
                dialogues: Vec::new(),
                refusals: Vec::new(),
                injections: Vec::new(),
                ended_at: 0,
            },
            max_delay,
        }
    }

    fn index(&self, address: &AgentAddress) -> usize {
        self.parties.iter().position(|p| p == address).expect("known party")
    }

    fn schedule(&mut self, at: Millis, action: Action) {
        let seq = self.actions.len() as u64;
        self.actions.push(action);
        self.agenda.push(Reverse((at, seq, seq as usize)));
    }

    fn post(&mut self, out: Vec<Envelope>, now: Millis, rng: &mut impl Rng) {
        for env in out {
            let (from, to) = (self.index(&env.sender), self.index(&env.receiver));
            self.session.sent.push(env.clone());
            self.channels.entry((from, to)).or_default().push_back(env);
            let delay = rng.random_range(1..=self.max_delay);
            self.schedule(now + delay, Action::Deliver { from, to });
        }
    }

    /// Steps dialogue `i`, recording refusals and whether they were clean.
    fn step(&mut self, i: usize, event: DialogueEvent, now: Millis, rng: &mut impl Rng) -> bool {
        let Some(d) = self.dialogues[i].as_mut() else { return false };
        let before = d.clone();
        match d.step(event, now) {
            Ok(out) => {
                let deadline = d.deadline;
                if deadline != before.deadline && deadline != Millis::MAX {
                    self.schedule(deadline, Action::Expire);
                }
                self.post(out, now, rng);
                true
            }
            Err(error) => {
                let unchanged = *d == before;
                self.session.refusals.push(Refusal { dialogue: i, error, unchanged });
                false
            }
        }
    }

    /// Feeds a copy of an already handled event back in; a correct machine
    /// refuses it without changing.
    fn inject(&mut self, i: usize, event: DialogueEvent, description: String, now: Millis) {
        let Some(d) = self.dialogues[i].as_mut() else { return };
        let before = d.clone();
        let rejected = d.step(event, now).is_err();
        let unchanged = *d == before;
        self.session.injections.push(Injection { dialogue: i, description, rejected, unchanged });
    }

    fn expire_all(&mut self, now: Millis) {
        for d in self.dialogues.iter_mut().flatten() {
            d.expire(now);
        }
    }

    fn finish(mut self, now: Millis) -> Session {
        self.session.ended_at = now;
        // Play has stopped; let every remaining deadline pass.
        for _ in 0..4 {
            let latest = self.dialogues.iter().flatten().map(|d| d.deadline).filter(|d| *d != Millis::MAX).max();
            self.expire_all(latest.unwrap_or(now).max(now));
        }
        self.session.dialogues = self.dialogues.into_iter().flatten().collect();
        self.session
    }
}

/// What a participant does when it gets the call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Answer {
    Propose,
    Refuse,
    Silent,
}

/// What the awarded participant does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Delivery {
    Complete,
    Fail,
    Silent,
}

/// A contract-net call from one initiator to `1..=max_participants`
/// participants.
pub fn contract_net_session(rng: &mut impl Rng, max_participants: usize) -> Session {
    let n = rng.random_range(1..=max_participants.max(1));
    let mut parties = vec![AgentAddress::new("initiator").expect("valid")];
    parties.extend((1..=n).map(|k| AgentAddress::new(format!("p{k}")).expect("valid")));
    let timeouts = Timeouts { reply_ms: rng.random_range(50..=500), result_ms: rng.random_range(200..=2000) };
    let max_delay = rng.random_range(5..=timeouts.reply_ms);
    let mut net = Net::new(ProtocolId::ContractNet, parties.clone(), max_delay);
    let answers: Vec<Answer> =
        (0..=n).map(|_| *[Answer::Propose, Answer::Propose, Answer::Refuse, Answer::Silent].choose(rng).expect("non-empty")).collect();
    let delivery = *[Delivery::Complete, Delivery::Complete, Delivery::Fail, Delivery::Silent].choose(rng).expect("non-empty");
    let noise = rng.random_bool(0.5);

    let id = "cn-1";
    let mut initiator =
        Dialogue::initiator(id, ProtocolId::ContractNet, "meat_trade", parties[0].clone(), parties[1..].iter().cloned(), timeouts);
    let out = initiator
        .step(DialogueEvent::Decision(Decision::CallForProposals(body(json!({"sku": "beef-01", "quantity_kg": 10})))), 0)
        .expect("initial call is legal");
    let deadline = initiator.deadline;
    net.dialogues[0] = Some(initiator);
    net.schedule(deadline, Action::Expire);
    net.post(out, 0, rng);
    let mut now = 0;
    let mut awarded = false;
    let mut delivered: Vec<(usize, Envelope)> = Vec::new();

    while let Some(Reverse((at, _, slot))) = net.agenda.pop() {
        now = at;
        net.expire_all(now);
        match net.actions[slot].clone() {
            Action::Deliver { from, to } => {
                let Some(env) = net.channels.get_mut(&(from, to)).and_then(VecDeque::pop_front) else { continue };
                if net.dialogues[to].is_none() {
                    net.dialogues[to] = Dialogue::for_opening(&net.parties[to], &env, timeouts);
                }
                let handled = net.step(to, DialogueEvent::Received(env.clone()), now, rng);
                if handled {
                    delivered.push((to, env));
                    if to == 0 {
                        net.schedule(now + rng.random_range(0..=max_delay), Action::Decide(0));
                    } else {
                        net.schedule(now + rng.random_range(0..=2 * max_delay), Action::Decide(to));
                    }
                }
            }
            Action::Decide(0) => {
                let Some(d) = net.dialogues[0].as_ref() else { continue };
                if awarded || d.state != DialogueState::Initiator(InitiatorState::Evaluating) {
                    continue;
                }
                let proposers: Vec<AgentAddress> = d.proposals().keys().cloned().collect();
                let winner = proposers.choose(rng).expect("evaluating implies proposals").clone();
                let reject = proposers
                    .iter()
                    .filter(|p| **p != winner)
                    .map(|p| (p.clone(), body(json!({"proposal_id": "other", "reason": "not_selected"}))))
                    .collect();
                let award = Decision::Award { winner, accept: body(json!({"proposal_id": "winning"})), reject };
                awarded = net.step(0, DialogueEvent::Decision(award), now, rng);
            }
            Action::Decide(i) => {
                let Some(d) = net.dialogues[i].as_ref() else { continue };
                let decision = match d.state {
                    DialogueState::Participant(super::ParticipantState::CfpReceived) => match answers[i] {
                        Answer::Propose => Decision::Propose(body(json!({
                            "proposal_id": format!("pr-{i}"), "sku": "beef-01", "quantity_kg": 10,
                            "unit_price": 6.5, "delivery_options": [], "valid_until": now + 10_000,
                        }))),
                        Answer::Refuse => Decision::Refuse(body(json!({"reason": "insufficient_stock"}))),
                        Answer::Silent => continue,
                    },
                    DialogueState::Participant(super::ParticipantState::Awarded) => match delivery {
                        Delivery::Complete => Decision::Complete(body(json!({"order_id": "o-1", "status": "delivered"}))),
                        Delivery::Fail => Decision::Fail(body(json!({"reason": "delivery_failed"}))),
                        Delivery::Silent => continue,
                    },
                    _ => continue,
                };
                net.step(i, DialogueEvent::Decision(decision), now, rng);
            }
            Action::Expire => {
                // The initiator may still award after the reply window closes.
                net.schedule(now + rng.random_range(0..=max_delay), Action::Decide(0));
            }
        }
        if noise && rng.random_bool(0.2) && !delivered.is_empty() {
            let (to, env) = delivered.choose(rng).expect("non-empty").clone();
            let description = format!("duplicate {} to {}", env.performative, env.receiver);
            net.inject(to, DialogueEvent::Received(env), description, now);
        }
        if noise && rng.random_bool(0.1) {
            // A second call for proposals is never legal once the first is out.
            let again = Decision::CallForProposals(body(json!({"sku": "beef-01", "quantity_kg": 10})));
            net.inject(0, DialogueEvent::Decision(again), "second call for proposals".into(), now);
        }
    }
    net.finish(now)
}

/// One request and its (possibly missing) response.
pub fn request_session(rng: &mut impl Rng) -> Session {
    let parties = vec![AgentAddress::new("client").expect("valid"), AgentAddress::new("server").expect("valid")];
    let timeouts = Timeouts { reply_ms: rng.random_range(50..=500), result_ms: 1000 };
    let max_delay = rng.random_range(5..=timeouts.reply_ms);
    let mut net = Net::new(ProtocolId::RequestResponse, parties.clone(), max_delay);
    let kind = if rng.random_bool(0.5) { RequestKind::Get } else { RequestKind::Post };
    let responds = rng.random_bool(0.8);
    let noise = rng.random_bool(0.5);

    let client = Dialogue::initiator("rr-1", ProtocolId::RequestResponse, "discovery", parties[0].clone(), [parties[1].clone()], timeouts);
    net.dialogues[0] = Some(client);
    let content = match kind {
        RequestKind::Get => body(json!({"query": []})),
        RequestKind::Post => body(json!({"action": "register", "attributes": {}})),
    };
    net.step(0, DialogueEvent::Decision(Decision::Request { kind, content }), 0, rng);
    let mut now = 0;
    let mut delivered: Vec<(usize, Envelope)> = Vec::new();
    while let Some(Reverse((at, _, slot))) = net.agenda.pop() {
        now = at;
        net.expire_all(now);
        match net.actions[slot].clone() {
            Action::Deliver { from, to } => {
                let Some(env) = net.channels.get_mut(&(from, to)).and_then(VecDeque::pop_front) else { continue };
                if net.dialogues[to].is_none() {
                    net.dialogues[to] = Dialogue::for_opening(&net.parties[to], &env, timeouts);
                }
                if net.step(to, DialogueEvent::Received(env.clone()), now, rng) {
                    delivered.push((to, env));
                    if to == 1 && responds {
                        net.schedule(now + rng.random_range(0..=2 * max_delay), Action::Decide(1));
                    }
                }
            }
            Action::Decide(i) => {
                net.step(i, DialogueEvent::Decision(Decision::Respond(body(json!({"agents": []})))), now, rng);
            }
            Action::Expire => {}
        }
        if noise && rng.random_bool(0.3) && !delivered.is_empty() {
            let (to, env) = delivered.choose(rng).expect("non-empty").clone();
            let description = format!("duplicate {} to {}", env.performative, env.receiver);
            net.inject(to, DialogueEvent::Received(env), description, now);
        }
        let answered = net.dialogues[1].as_ref().is_some_and(|d| d.state.is_absorbing());
        if noise && answered && rng.random_bool(0.2) {
            let again = Decision::Respond(body(json!({"status": "again"})));
            net.inject(1, DialogueEvent::Decision(again), "second response".into(), now);
        }
    }
    net.finish(now)
}
