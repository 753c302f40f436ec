use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::messaging::{AgentAddress, Content, DialogueId, Envelope, Millis, Performative, ProtocolId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Timeouts {
    pub reply_ms: Millis,
    pub result_ms: Millis,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self { reply_ms: super::DEFAULT_REPLY_MS, result_ms: super::DEFAULT_RESULT_MS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Initiator,
    Participant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    AllRefused,
    Failed,
    TimedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitiatorState {
    Start,
    CfpSent,
    Evaluating,
    AwaitingResult,
    Concluded(Outcome),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantState {
    Idle,
    CfpReceived,
    ProposalSent,
    Awarded,
    Refused,
    Rejected,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Get,
    Post,
}

impl RequestKind {
    fn performative(self) -> Performative {
        match self {
            RequestKind::Get => Performative::RequestGet,
            RequestKind::Post => Performative::RequestPost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Idle,
    /// Requester: awaiting the response. Responder: owes the response.
    Requested(RequestKind),
    Completed,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedState {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueState {
    Initiator(InitiatorState),
    Participant(ParticipantState),
    Request(RequestState),
    Feed(FeedState),
}

impl DialogueState {
    pub fn is_absorbing(&self) -> bool {
        match self {
            DialogueState::Initiator(s) => matches!(s, InitiatorState::Concluded(_)),
            DialogueState::Participant(s) => matches!(
                s,
                ParticipantState::Refused
                    | ParticipantState::Rejected
                    | ParticipantState::Done
                    | ParticipantState::Failed
            ),
            DialogueState::Request(s) => matches!(s, RequestState::Completed | RequestState::Expired),
            DialogueState::Feed(s) => *s == FeedState::Closed,
        }
    }
}

impl fmt::Display for DialogueState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DialogueState::Initiator(s) => write!(f, "{s:?}"),
            DialogueState::Participant(s) => write!(f, "{s:?}"),
            DialogueState::Request(s) => write!(f, "{s:?}"),
            DialogueState::Feed(s) => write!(f, "Feed{s:?}"),
        }
    }
}

/// Something the owning agent decided to do in a dialogue.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Initiator: send the call for proposals to every counterparty.
    CallForProposals(Content),
    /// Initiator: accept `winner`, reject every other proposer with the
    /// content keyed by its address.
    Award {
        winner: AgentAddress,
        accept: Content,
        reject: BTreeMap<AgentAddress, Content>,
    },
    Propose(Content),
    Refuse(Content),
    /// Participant: the awarded task finished.
    Complete(Content),
    /// Participant: the awarded task could not be finished.
    Fail(Content),
    Request { kind: RequestKind, content: Content },
    Respond(Content),
    /// Feed emitter: one more `inform`; `"final": true` in the content closes the feed.
    Notify(Content),
}

impl Decision {
    fn name(&self) -> &'static str {
        match self {
            Decision::CallForProposals(_) => "call_for_proposals",
            Decision::Award { .. } => "award",
            Decision::Propose(_) => "propose",
            Decision::Refuse(_) => "refuse",
            Decision::Complete(_) => "complete",
            Decision::Fail(_) => "fail",
            Decision::Request { .. } => "request",
            Decision::Respond(_) => "respond",
            Decision::Notify(_) => "notify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DialogueEvent {
    Received(Envelope),
    Timeout,
    Decision(Decision),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("unknown dialogue {0:?}")]
    UnknownDialogue(DialogueId),
    #[error("protocol violation in {dialogue_id}: {reason}")]
    Violation { dialogue_id: DialogueId, reason: String },
}

/// One agent's side of a conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub id: DialogueId,
    pub protocol: ProtocolId,
    pub ontology: String,
    pub role: Role,
    pub owner: AgentAddress,
    pub counterparties: BTreeSet<AgentAddress>,
    pub state: DialogueState,
    pub deadline: Millis,
    pub timeouts: Timeouts,
    pub transcript: Vec<Envelope>,
    next_token: u64,
    answered: BTreeSet<AgentAddress>,
    proposals: BTreeMap<AgentAddress, Envelope>,
    winner: Option<AgentAddress>,
}

impl Dialogue {
    fn blank(
        id: DialogueId,
        protocol: ProtocolId,
        ontology: &str,
        role: Role,
        owner: AgentAddress,
        counterparties: BTreeSet<AgentAddress>,
        state: DialogueState,
        timeouts: Timeouts,
    ) -> Self {
        Self {
            id,
            protocol,
            ontology: ontology.to_string(),
            role,
            owner,
            counterparties,
            state,
            deadline: Millis::MAX,
            timeouts,
            transcript: Vec::new(),
            next_token: 1,
            answered: BTreeSet::new(),
            proposals: BTreeMap::new(),
            winner: None,
        }
    }

    /// A dialogue this agent opens: a contract-net call or a request.
    pub fn initiator(
        id: impl Into<DialogueId>,
        protocol: ProtocolId,
        ontology: &str,
        owner: AgentAddress,
        counterparties: impl IntoIterator<Item = AgentAddress>,
        timeouts: Timeouts,
    ) -> Self {
        let state = match protocol {
            ProtocolId::ContractNet => DialogueState::Initiator(InitiatorState::Start),
            ProtocolId::RequestResponse => DialogueState::Request(RequestState::Idle),
        };
        let counterparties = counterparties.into_iter().collect();
        Self::blank(id.into(), protocol, ontology, Role::Initiator, owner, counterparties, state, timeouts)
    }

    /// A dialogue answering `initiator`.
    pub fn participant(
        id: impl Into<DialogueId>,
        protocol: ProtocolId,
        ontology: &str,
        owner: AgentAddress,
        initiator: AgentAddress,
        timeouts: Timeouts,
    ) -> Self {
        let state = match protocol {
            ProtocolId::ContractNet => DialogueState::Participant(ParticipantState::Idle),
            ProtocolId::RequestResponse => DialogueState::Request(RequestState::Idle),
        };
        Self::blank(
            id.into(),
            protocol,
            ontology,
            Role::Participant,
            owner,
            BTreeSet::from([initiator]),
            state,
            timeouts,
        )
    }

    /// The emitting side of a monitoring feed towards `receiver`.
    pub fn feed(id: impl Into<DialogueId>, ontology: &str, owner: AgentAddress, receiver: AgentAddress, timeouts: Timeouts) -> Self {
        Self::blank(
            id.into(),
            ProtocolId::ContractNet,
            ontology,
            Role::Initiator,
            owner,
            BTreeSet::from([receiver]),
            DialogueState::Feed(FeedState::Open),
            timeouts,
        )
    }

    /// Builds the receiving side for an envelope that opens a dialogue
    /// (`cfp`, `request_get`, `request_post`, or an unsolicited `inform`
    /// starting a feed). Returns `None` for any other envelope.
    pub fn for_opening(owner: &AgentAddress, envelope: &Envelope, timeouts: Timeouts) -> Option<Self> {
        if envelope.in_reply_to.is_some() || &envelope.receiver != owner {
            return None;
        }
        match envelope.performative {
            Performative::Cfp | Performative::RequestGet | Performative::RequestPost => Some(Self::participant(
                envelope.dialogue_id.clone(),
                envelope.protocol_id,
                &envelope.ontology_id,
                owner.clone(),
                envelope.sender.clone(),
                timeouts,
            )),
            Performative::Inform => {
                let mut d = Self::feed(
                    envelope.dialogue_id.clone(),
                    &envelope.ontology_id,
                    owner.clone(),
                    envelope.sender.clone(),
                    timeouts,
                );
                d.role = Role::Participant;
                Some(d)
            }
            _ => None,
        }
    }

    pub fn is_terminated(&self) -> bool {
        self.state.is_absorbing()
    }

    /// Proposals received so far, by proposer (initiator side).
    pub fn proposals(&self) -> &BTreeMap<AgentAddress, Envelope> {
        &self.proposals
    }

    pub fn winner(&self) -> Option<&AgentAddress> {
        self.winner.as_ref()
    }

    /// Last envelope received with the given performative.
    pub fn last_received(&self, performative: Performative) -> Option<&Envelope> {
        self.transcript
            .iter()
            .rev()
            .find(|e| e.performative == performative && e.receiver == self.owner)
    }

    /// Advances the dialogue. On error the dialogue is unchanged.
    pub fn step(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        match self.state {
            DialogueState::Initiator(_) => self.initiator_step(event, now),
            DialogueState::Participant(_) => self.participant_step(event, now),
            DialogueState::Request(_) => self.request_step(event, now),
            DialogueState::Feed(_) => self.feed_step(event, now),
        }
    }

    pub fn initiator_step(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        if !matches!(self.state, DialogueState::Initiator(_)) {
            return Err(self.violation("initiator step on a non-initiator dialogue"));
        }
        self.transact(event, now, Self::apply_initiator)
    }

    pub fn participant_step(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        if !matches!(self.state, DialogueState::Participant(_)) {
            return Err(self.violation("participant step on a non-participant dialogue"));
        }
        self.transact(event, now, Self::apply_participant)
    }

    pub fn request_step(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        if self.protocol != ProtocolId::RequestResponse {
            return Err(self.violation("request step on a non request-response dialogue"));
        }
        self.transact(event, now, Self::apply_request)
    }

    fn feed_step(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        self.transact(event, now, Self::apply_feed)
    }

    /// Applies deadline expiry. A no-op before the deadline or once absorbing.
    pub fn expire(&mut self, now: Millis) -> Vec<Envelope> {
        if now < self.deadline || self.is_terminated() {
            return Vec::new();
        }
        self.state = match self.state {
            DialogueState::Initiator(InitiatorState::CfpSent) if self.proposals.is_empty() => {
                DialogueState::Initiator(InitiatorState::Concluded(Outcome::TimedOut))
            }
            DialogueState::Initiator(InitiatorState::CfpSent) => {
                self.deadline = now.saturating_add(self.timeouts.reply_ms);
                DialogueState::Initiator(InitiatorState::Evaluating)
            }
            DialogueState::Initiator(InitiatorState::Evaluating) => {
                DialogueState::Initiator(InitiatorState::Concluded(Outcome::TimedOut))
            }
            DialogueState::Initiator(InitiatorState::AwaitingResult) => {
                DialogueState::Initiator(InitiatorState::Concluded(Outcome::Failed))
            }
            DialogueState::Participant(ParticipantState::CfpReceived) => {
                DialogueState::Participant(ParticipantState::Refused)
            }
            DialogueState::Participant(ParticipantState::ProposalSent) => {
                DialogueState::Participant(ParticipantState::Rejected)
            }
            DialogueState::Participant(ParticipantState::Awarded) => {
                DialogueState::Participant(ParticipantState::Failed)
            }
            DialogueState::Request(RequestState::Requested(_)) => DialogueState::Request(RequestState::Expired),
            DialogueState::Feed(FeedState::Open) => DialogueState::Feed(FeedState::Closed),
            other => other,
        };
        Vec::new()
    }

    fn transact(
        &mut self,
        event: DialogueEvent,
        now: Millis,
        apply: fn(&mut Self, DialogueEvent, Millis) -> Result<Vec<Envelope>, ProtocolError>,
    ) -> Result<Vec<Envelope>, ProtocolError> {
        if let DialogueEvent::Timeout = event {
            return Ok(self.expire(now));
        }
        let mut next = self.clone();
        let out = apply(&mut next, event, now)?;
        for envelope in &out {
            envelope
                .validate()
                .map_err(|e| self.violation(format!("outgoing {}: {e}", envelope.performative)))?;
        }
        *self = next;
        Ok(out)
    }

    fn apply_initiator(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        let DialogueState::Initiator(state) = self.state else { unreachable!() };
        match event {
            DialogueEvent::Received(env) => {
                self.check_incoming(&env)?;
                match (state, env.performative) {
                    (InitiatorState::CfpSent, Performative::Propose | Performative::Refuse | Performative::Failure) => {
                        if self.answered.contains(&env.sender) {
                            return Err(self.illegal(&env, "participant already answered"));
                        }
                        self.require_reply(&env, Performative::Cfp)?;
                        self.answered.insert(env.sender.clone());
                        if env.performative == Performative::Propose {
                            self.proposals.insert(env.sender.clone(), env.clone());
                        }
                        self.transcript.push(env);
                        if self.answered == self.counterparties {
                            let refused = self
                                .transcript
                                .iter()
                                .any(|m| m.receiver == self.owner && m.performative == Performative::Refuse);
                            self.state = if self.proposals.is_empty() && refused {
                                DialogueState::Initiator(InitiatorState::Concluded(Outcome::AllRefused))
                            } else if self.proposals.is_empty() {
                                DialogueState::Initiator(InitiatorState::Concluded(Outcome::Failed))
                            } else {
                                self.deadline = now.saturating_add(self.timeouts.reply_ms);
                                DialogueState::Initiator(InitiatorState::Evaluating)
                            };
                        }
                        Ok(Vec::new())
                    }
                    (InitiatorState::AwaitingResult, Performative::Inform | Performative::Failure)
                        if self.winner.as_ref() == Some(&env.sender) =>
                    {
                        self.require_reply(&env, Performative::AcceptProposal)?;
                        let outcome = if env.performative == Performative::Inform {
                            Outcome::Completed
                        } else {
                            Outcome::Failed
                        };
                        self.transcript.push(env);
                        self.state = DialogueState::Initiator(InitiatorState::Concluded(outcome));
                        Ok(Vec::new())
                    }
                    _ => Err(self.illegal(&env, "not expected in this state")),
                }
            }
            DialogueEvent::Decision(decision) => match (state, decision) {
                (InitiatorState::Start, Decision::CallForProposals(content)) => {
                    if self.counterparties.is_empty() {
                        return Err(self.violation("call for proposals with no counterparties"));
                    }
                    let targets: Vec<_> = self.counterparties.iter().cloned().collect();
                    let out = targets
                        .into_iter()
                        .map(|to| self.emit(to, Performative::Cfp, content.clone(), None, now))
                        .collect();
                    self.deadline = now.saturating_add(self.timeouts.reply_ms);
                    self.state = DialogueState::Initiator(InitiatorState::CfpSent);
                    Ok(out)
                }
                (InitiatorState::Evaluating, Decision::Award { winner, accept, mut reject }) => {
                    let Some(proposal) = self.proposals.get(&winner) else {
                        return Err(self.violation(format!("award to {winner}, who did not propose")));
                    };
                    let accept_token = proposal.reply_with.clone();
                    let losers: Vec<_> = self.proposals.keys().filter(|a| **a != winner).cloned().collect();
                    if reject.len() != losers.len() || losers.iter().any(|l| !reject.contains_key(l)) {
                        return Err(self.violation("award must reject exactly the other proposers"));
                    }
                    let mut out = vec![self.emit(winner.clone(), Performative::AcceptProposal, accept, accept_token, now)];
                    for loser in losers {
                        let token = self.proposals[&loser].reply_with.clone();
                        let content = reject.remove(&loser).unwrap_or_default();
                        out.push(self.emit(loser, Performative::RejectProposal, content, token, now));
                    }
                    self.winner = Some(winner);
                    self.deadline = now.saturating_add(self.timeouts.result_ms);
                    self.state = DialogueState::Initiator(InitiatorState::AwaitingResult);
                    Ok(out)
                }
                (_, d) => Err(self.illegal_decision(&d)),
            },
            DialogueEvent::Timeout => unreachable!("handled by transact"),
        }
    }

    fn apply_participant(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        let DialogueState::Participant(state) = self.state else { unreachable!() };
        match event {
            DialogueEvent::Received(env) => {
                self.check_incoming(&env)?;
                let next = match (state, env.performative) {
                    (ParticipantState::Idle, Performative::Cfp) => {
                        if env.in_reply_to.is_some() {
                            return Err(self.illegal(&env, "cfp must open the dialogue"));
                        }
                        let reply_by = env
                            .content
                            .get("reply_by")
                            .and_then(|v| v.as_u64())
                            .unwrap_or_else(|| now.saturating_add(self.timeouts.reply_ms));
                        self.deadline = reply_by.max(now).saturating_add(self.timeouts.reply_ms);
                        ParticipantState::CfpReceived
                    }
                    (ParticipantState::ProposalSent, Performative::AcceptProposal) => {
                        self.require_reply(&env, Performative::Propose)?;
                        self.deadline = now.saturating_add(self.timeouts.result_ms);
                        ParticipantState::Awarded
                    }
                    (ParticipantState::ProposalSent, Performative::RejectProposal) => {
                        self.require_reply(&env, Performative::Propose)?;
                        ParticipantState::Rejected
                    }
                    (
                        ParticipantState::CfpReceived | ParticipantState::ProposalSent | ParticipantState::Awarded,
                        Performative::Failure,
                    ) => {
                        self.require_any_reply(&env)?;
                        ParticipantState::Failed
                    }
                    _ => return Err(self.illegal(&env, "not expected in this state")),
                };
                self.transcript.push(env);
                self.state = DialogueState::Participant(next);
                Ok(Vec::new())
            }
            DialogueEvent::Decision(decision) => {
                let (performative, content, replying_to, next) = match (state, decision) {
                    (ParticipantState::CfpReceived, Decision::Propose(c)) => {
                        (Performative::Propose, c, Performative::Cfp, ParticipantState::ProposalSent)
                    }
                    (ParticipantState::CfpReceived, Decision::Refuse(c)) => {
                        (Performative::Refuse, c, Performative::Cfp, ParticipantState::Refused)
                    }
                    (ParticipantState::Awarded, Decision::Complete(c)) => {
                        (Performative::Inform, c, Performative::AcceptProposal, ParticipantState::Done)
                    }
                    (ParticipantState::Awarded, Decision::Fail(c)) => {
                        (Performative::Failure, c, Performative::AcceptProposal, ParticipantState::Failed)
                    }
                    (_, d) => return Err(self.illegal_decision(&d)),
                };
                let (to, token) = self.reply_target(replying_to)?;
                let out = vec![self.emit(to, performative, content, token, now)];
                self.state = DialogueState::Participant(next);
                Ok(out)
            }
            DialogueEvent::Timeout => unreachable!("handled by transact"),
        }
    }

    fn apply_request(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        let DialogueState::Request(state) = self.state else {
            return Err(self.violation("request step on a non request-response dialogue"));
        };
        match (self.role, event) {
            (Role::Initiator, DialogueEvent::Decision(Decision::Request { kind, content }))
                if state == RequestState::Idle =>
            {
                let mut targets = self.counterparties.iter();
                let (Some(to), None) = (targets.next().cloned(), targets.next()) else {
                    return Err(self.violation("a request needs exactly one counterparty"));
                };
                let out = vec![self.emit(to, kind.performative(), content, None, now)];
                self.deadline = now.saturating_add(self.timeouts.reply_ms);
                self.state = DialogueState::Request(RequestState::Requested(kind));
                Ok(out)
            }
            (Role::Initiator, DialogueEvent::Received(env)) => {
                self.check_incoming(&env)?;
                match (state, env.performative) {
                    (RequestState::Requested(kind), Performative::Response) => {
                        self.require_reply(&env, kind.performative())?;
                        self.transcript.push(env);
                        self.state = DialogueState::Request(RequestState::Completed);
                        Ok(Vec::new())
                    }
                    (RequestState::Idle, Performative::Response) => {
                        Err(self.illegal(&env, "response with no prior request"))
                    }
                    _ => Err(self.illegal(&env, "single-round dialogue admits one response")),
                }
            }
            (Role::Participant, DialogueEvent::Received(env)) => {
                self.check_incoming(&env)?;
                match (state, env.performative) {
                    (RequestState::Idle, p @ (Performative::RequestGet | Performative::RequestPost)) => {
                        if env.in_reply_to.is_some() {
                            return Err(self.illegal(&env, "request must open the dialogue"));
                        }
                        let kind = if p == Performative::RequestGet { RequestKind::Get } else { RequestKind::Post };
                        self.transcript.push(env);
                        self.deadline = now.saturating_add(self.timeouts.reply_ms);
                        self.state = DialogueState::Request(RequestState::Requested(kind));
                        Ok(Vec::new())
                    }
                    _ => Err(self.illegal(&env, "single-round dialogue admits one request")),
                }
            }
            (Role::Participant, DialogueEvent::Decision(Decision::Respond(content)))
                if matches!(state, RequestState::Requested(_)) =>
            {
                let RequestState::Requested(kind) = state else { unreachable!() };
                let (to, token) = self.reply_target(kind.performative())?;
                let out = vec![self.emit(to, Performative::Response, content, token, now)];
                self.state = DialogueState::Request(RequestState::Completed);
                Ok(out)
            }
            (_, DialogueEvent::Decision(d)) => Err(self.illegal_decision(&d)),
            (_, DialogueEvent::Timeout) => unreachable!("handled by transact"),
        }
    }

    fn apply_feed(&mut self, event: DialogueEvent, now: Millis) -> Result<Vec<Envelope>, ProtocolError> {
        let closed = self.state == DialogueState::Feed(FeedState::Closed);
        match (self.role, event) {
            (Role::Initiator, DialogueEvent::Decision(Decision::Notify(content))) if !closed => {
                let last = is_final(&content);
                let to = self.counterparties.iter().next().cloned().expect("feed has a receiver");
                let out = vec![self.emit(to, Performative::Inform, content, None, now)];
                self.deadline = now.saturating_add(self.timeouts.result_ms);
                if last {
                    self.state = DialogueState::Feed(FeedState::Closed);
                }
                Ok(out)
            }
            (Role::Initiator, DialogueEvent::Received(env)) if !closed && env.performative == Performative::Failure => {
                self.check_incoming(&env)?;
                self.require_any_reply(&env)?;
                self.transcript.push(env);
                self.state = DialogueState::Feed(FeedState::Closed);
                Ok(Vec::new())
            }
            (Role::Participant, DialogueEvent::Received(env)) if !closed && env.performative == Performative::Inform => {
                self.check_incoming(&env)?;
                let last = is_final(&env.content);
                self.transcript.push(env);
                self.deadline = now.saturating_add(self.timeouts.result_ms);
                if last {
                    self.state = DialogueState::Feed(FeedState::Closed);
                }
                Ok(Vec::new())
            }
            (_, DialogueEvent::Received(env)) => Err(self.illegal(&env, "not expected on this feed")),
            (_, DialogueEvent::Decision(d)) => Err(self.illegal_decision(&d)),
            (_, DialogueEvent::Timeout) => unreachable!("handled by transact"),
        }
    }

    fn check_incoming(&self, env: &Envelope) -> Result<(), ProtocolError> {
        if env.dialogue_id != self.id {
            return Err(ProtocolError::UnknownDialogue(env.dialogue_id.clone()));
        }
        if env.receiver != self.owner {
            return Err(self.violation(format!("envelope addressed to {}, not {}", env.receiver, self.owner)));
        }
        if env.protocol_id != self.protocol || env.ontology_id != self.ontology {
            return Err(self.violation(format!(
                "envelope uses {}/{}, dialogue uses {}/{}",
                env.protocol_id, env.ontology_id, self.protocol, self.ontology
            )));
        }
        if !self.counterparties.contains(&env.sender) {
            return Err(self.violation(format!("{} is not a party to this dialogue", env.sender)));
        }
        Ok(())
    }

    /// `env` must answer a `performative` this side sent to its sender.
    fn require_reply(&self, env: &Envelope, performative: Performative) -> Result<(), ProtocolError> {
        let matched = env.in_reply_to.as_ref().is_some_and(|token| {
            self.transcript.iter().any(|m| {
                m.sender == self.owner
                    && m.receiver == env.sender
                    && m.performative == performative
                    && m.reply_with.as_ref() == Some(token)
            })
        });
        if matched {
            Ok(())
        } else {
            Err(self.illegal(env, &format!("does not reply to a {performative} of this dialogue")))
        }
    }

    fn require_any_reply(&self, env: &Envelope) -> Result<(), ProtocolError> {
        let matched = env.in_reply_to.as_ref().is_some_and(|token| {
            self.transcript
                .iter()
                .any(|m| m.sender == self.owner && m.receiver == env.sender && m.reply_with.as_ref() == Some(token))
        });
        if matched {
            Ok(())
        } else {
            Err(self.illegal(env, "does not reply to a message of this dialogue"))
        }
    }

    fn reply_target(&self, performative: Performative) -> Result<(AgentAddress, Option<String>), ProtocolError> {
        self.last_received(performative)
            .map(|e| (e.sender.clone(), e.reply_with.clone()))
            .ok_or_else(|| self.violation(format!("no {performative} to reply to")))
    }

    fn emit(
        &mut self,
        to: AgentAddress,
        performative: Performative,
        content: Content,
        in_reply_to: Option<String>,
        now: Millis,
    ) -> Envelope {
        let token = format!("{}#{}", self.owner, self.next_token);
        self.next_token += 1;
        let envelope = Envelope {
            sender: self.owner.clone(),
            receiver: to,
            protocol_id: self.protocol,
            ontology_id: self.ontology.clone(),
            performative,
            dialogue_id: self.id.clone(),
            reply_with: Some(token),
            in_reply_to,
            sent_at: now,
            content,
        };
        self.transcript.push(envelope.clone());
        envelope
    }

    fn violation(&self, reason: impl Into<String>) -> ProtocolError {
        ProtocolError::Violation { dialogue_id: self.id.clone(), reason: reason.into() }
    }

    fn illegal(&self, env: &Envelope, why: &str) -> ProtocolError {
        self.violation(format!("{} from {} in state {}: {why}", env.performative, env.sender, self.state))
    }

    fn illegal_decision(&self, decision: &Decision) -> ProtocolError {
        self.violation(format!("decision {} is illegal in state {}", decision.name(), self.state))
    }
}

fn is_final(content: &Content) -> bool {
    content.get("final").and_then(|v| v.as_bool()).unwrap_or(false)
}
