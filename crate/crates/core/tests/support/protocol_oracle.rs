//! Independent judges for randomized protocol sessions. They look only at
//! the emitted envelopes and the final dialogue states.

use std::collections::{BTreeMap, BTreeSet};

use a2sc_core::messaging::{AgentAddress, Performative};
use a2sc_core::protocol::sim::Session;
use a2sc_core::protocol::{DialogueState, InitiatorState, Outcome, RequestState};

fn count(session: &Session, p: Performative) -> usize {
    session.sent.iter().filter(|e| e.performative == p).count()
}

fn clean_refusals(session: &Session) -> Result<(), String> {
    if let Some(r) = session.refusals.iter().find(|r| !r.unchanged) {
        return Err(format!("refused step mutated dialogue {}: {}", r.dialogue, r.error));
    }
    if let Some(i) = session.injections.iter().find(|i| !i.rejected || !i.unchanged) {
        return Err(format!("injected {} was {}", i.description, if i.rejected { "rejected but mutated" } else { "accepted" }));
    }
    Ok(())
}

fn all_absorbing(session: &Session) -> Result<(), String> {
    match session.dialogues.iter().find(|d| !d.state.is_absorbing()) {
        Some(d) => Err(format!("{} left in {}", d.owner, d.state)),
        None => Ok(()),
    }
}

/// Single award, fan-out completeness, termination and clean refusals.
pub fn check_contract_net(session: &Session) -> Result<(), String> {
    let initiator = &session.dialogues[0];
    let me = initiator.owner.clone();
    let participants: BTreeSet<AgentAddress> = initiator.counterparties.clone();

    let accepts = count(session, Performative::AcceptProposal);
    if accepts > 1 {
        return Err(format!("{accepts} accept_proposal messages"));
    }

    let cfp_to: Vec<&AgentAddress> =
        session.sent.iter().filter(|e| e.performative == Performative::Cfp).map(|e| &e.receiver).collect();
    if cfp_to.len() != participants.len() || cfp_to.iter().copied().collect::<BTreeSet<_>>() != participants.iter().collect() {
        return Err(format!("cfp fan-out {cfp_to:?} does not match counterparties {participants:?}"));
    }

    // Once an award is made, every proposal it saw gets exactly one verdict.
    let mut verdicts: BTreeMap<&AgentAddress, usize> = BTreeMap::new();
    for e in session.sent.iter().filter(|e| e.sender == me) {
        if matches!(e.performative, Performative::AcceptProposal | Performative::RejectProposal) {
            *verdicts.entry(&e.receiver).or_default() += 1;
        }
    }
    if accepts == 1 {
        let proposers: BTreeSet<&AgentAddress> = initiator.proposals().keys().collect();
        let judged: BTreeSet<&AgentAddress> = verdicts.keys().copied().collect();
        if proposers != judged || verdicts.values().any(|n| *n != 1) {
            return Err(format!("verdicts {verdicts:?} do not cover proposers {proposers:?} exactly once"));
        }
    } else if !verdicts.is_empty() {
        return Err("reject_proposal without an award".into());
    }

    let informs = session.sent.iter().filter(|e| e.performative == Performative::Inform && e.receiver == me).count();
    if informs > accepts {
        return Err(format!("{informs} informs for {accepts} awards"));
    }
    if initiator.state == DialogueState::Initiator(InitiatorState::Concluded(Outcome::Completed)) && accepts != 1 {
        return Err("completed without an award".into());
    }

    all_absorbing(session)?;
    clean_refusals(session)
}

/// Length two, request before response, termination and clean refusals.
pub fn check_request(session: &Session) -> Result<(), String> {
    let client = &session.dialogues[0];
    let sent = &session.sent;
    if sent.is_empty() || sent.len() > 2 {
        return Err(format!("{} envelopes in a single-round dialogue", sent.len()));
    }
    if !matches!(sent[0].performative, Performative::RequestGet | Performative::RequestPost) {
        return Err(format!("opened with {}", sent[0].performative));
    }
    if let Some(reply) = sent.get(1) {
        if reply.performative != Performative::Response || reply.in_reply_to != sent[0].reply_with {
            return Err("second envelope is not a response to the request".into());
        }
    }
    let completed = client.state == DialogueState::Request(RequestState::Completed);
    if completed && sent.len() != 2 {
        return Err("client completed without a response".into());
    }
    all_absorbing(session)?;
    clean_refusals(session)
}
