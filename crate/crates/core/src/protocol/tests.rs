use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::trace::{decode_trace, encode_trace};
use super::*;
use crate::messaging::{AgentAddress, Content, Envelope, Performative, ProtocolId};

fn addr(s: &str) -> AgentAddress {
    AgentAddress::new(s).unwrap()
}

fn body(v: Value) -> Content {
    v.as_object().unwrap().clone()
}

fn cfp_body() -> Content {
    body(json!({"sku": "beef-01", "quantity_kg": 50}))
}

fn proposal(id: &str) -> Content {
    body(json!({
        "proposal_id": id, "sku": "beef-01", "quantity_kg": 50, "unit_price": 5.0,
        "delivery_options": [], "valid_until": 9000
    }))
}

fn initiator(participants: &[&str]) -> Dialogue {
    Dialogue::initiator(
        "d1",
        ProtocolId::ContractNet,
        "meat_trade",
        addr("W"),
        participants.iter().map(|p| addr(p)),
        Timeouts::default(),
    )
}

fn receive(d: &mut Dialogue, env: &Envelope, now: u64) -> Result<Vec<Envelope>, ProtocolError> {
    d.step(DialogueEvent::Received(env.clone()), now)
}

fn decide(d: &mut Dialogue, decision: Decision, now: u64) -> Result<Vec<Envelope>, ProtocolError> {
    d.step(DialogueEvent::Decision(decision), now)
}

/// Initiator W with S1, S2; returns (W, S1, S2, cfps).
fn two_supplier_call() -> (Dialogue, Dialogue, Dialogue, Vec<Envelope>) {
    let mut w = initiator(&["S1", "S2"]);
    let cfps = decide(&mut w, Decision::CallForProposals(cfp_body()), 0).unwrap();
    let mut s1 = Dialogue::for_opening(&addr("S1"), &cfps[0], Timeouts::default()).unwrap();
    let mut s2 = Dialogue::for_opening(&addr("S2"), &cfps[1], Timeouts::default()).unwrap();
    receive(&mut s1, &cfps[0], 10).unwrap();
    receive(&mut s2, &cfps[1], 10).unwrap();
    (w, s1, s2, cfps)
}

#[test]
fn cfp_fans_out_to_every_counterparty() {
    let (w, s1, _, cfps) = two_supplier_call();
    assert_eq!(cfps.len(), 2);
    assert_eq!(cfps[0].receiver, addr("S1"));
    assert_eq!(cfps[1].receiver, addr("S2"));
    assert!(cfps.iter().all(|e| e.dialogue_id == "d1" && e.performative == Performative::Cfp));
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::CfpSent));
    assert_eq!(w.deadline, DEFAULT_REPLY_MS);
    assert_eq!(s1.state, DialogueState::Participant(ParticipantState::CfpReceived));
}

#[test]
fn proposals_recorded_until_all_answer() {
    let (mut w, mut s1, mut s2, _) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    assert_eq!(p1[0].in_reply_to.as_deref(), Some("W#1"));
    assert!(receive(&mut w, &p1[0], 30).unwrap().is_empty());
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::CfpSent));
    assert!(w.proposals().contains_key(&addr("S1")));

    let p2 = decide(&mut s2, Decision::Propose(proposal("p2")), 20).unwrap();
    receive(&mut w, &p2[0], 30).unwrap();
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Evaluating));
}

#[test]
fn award_accepts_winner_and_rejects_the_rest() {
    let (mut w, mut s1, mut s2, _) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    let p2 = decide(&mut s2, Decision::Propose(proposal("p2")), 20).unwrap();
    receive(&mut w, &p1[0], 30).unwrap();
    receive(&mut w, &p2[0], 30).unwrap();

    let reject = BTreeMap::from([(addr("S2"), body(json!({"proposal_id": "p2"})))]);
    let out = decide(
        &mut w,
        Decision::Award { winner: addr("S1"), accept: body(json!({"proposal_id": "p1"})), reject },
        40,
    )
    .unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!((out[0].performative, &out[0].receiver), (Performative::AcceptProposal, &addr("S1")));
    assert_eq!((out[1].performative, &out[1].receiver), (Performative::RejectProposal, &addr("S2")));
    assert_eq!(out[0].in_reply_to, p1[0].reply_with);
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::AwaitingResult));

    assert!(receive(&mut s2, &out[1], 50).unwrap().is_empty());
    assert_eq!(s2.state, DialogueState::Participant(ParticipantState::Rejected));
    receive(&mut s1, &out[0], 50).unwrap();
    assert_eq!(s1.state, DialogueState::Participant(ParticipantState::Awarded));

    let done = decide(
        &mut s1,
        Decision::Complete(body(json!({"order_id": "o1", "status": "delivered"}))),
        60,
    )
    .unwrap();
    assert_eq!(done[0].performative, Performative::Inform);
    assert_eq!(s1.state, DialogueState::Participant(ParticipantState::Done));
    receive(&mut w, &done[0], 70).unwrap();
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Concluded(Outcome::Completed)));

    // Concluded is absorbing.
    let before = w.clone();
    assert!(receive(&mut w, &p1[0], 80).is_err());
    assert_eq!(w, before);
}

#[test]
fn award_must_cover_every_loser() {
    let (mut w, mut s1, mut s2, _) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    let p2 = decide(&mut s2, Decision::Propose(proposal("p2")), 20).unwrap();
    receive(&mut w, &p1[0], 30).unwrap();
    receive(&mut w, &p2[0], 30).unwrap();
    let award = Decision::Award {
        winner: addr("S1"),
        accept: body(json!({"proposal_id": "p1"})),
        reject: BTreeMap::new(),
    };
    assert!(decide(&mut w, award, 40).is_err());
    let award = Decision::Award {
        winner: addr("S9"),
        accept: body(json!({"proposal_id": "p1"})),
        reject: BTreeMap::new(),
    };
    assert!(decide(&mut w, award, 40).is_err());
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Evaluating));
}

#[test]
fn propose_after_evaluation_closed_is_violation() {
    let (mut w, mut s1, mut s2, _) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    receive(&mut w, &p1[0], 30).unwrap();
    w.expire(DEFAULT_REPLY_MS);
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Evaluating));
    let late = decide(&mut s2, Decision::Propose(proposal("p2")), DEFAULT_REPLY_MS + 1).unwrap();
    assert!(matches!(receive(&mut w, &late[0], DEFAULT_REPLY_MS + 2), Err(ProtocolError::Violation { .. })));
    assert_eq!(w.proposals().len(), 1);
}

#[test]
fn all_refusals_conclude_all_refused() {
    let (mut w, mut s1, mut s2, _) = two_supplier_call();
    for s in [&mut s1, &mut s2] {
        let r = decide(s, Decision::Refuse(body(json!({"reason": "insufficient_stock"}))), 20).unwrap();
        assert_eq!(s.state, DialogueState::Participant(ParticipantState::Refused));
        receive(&mut w, &r[0], 30).unwrap();
    }
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Concluded(Outcome::AllRefused)));
}

#[test]
fn duplicate_answer_and_forged_reply_are_rejected() {
    let (mut w, mut s1, _, _) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    receive(&mut w, &p1[0], 30).unwrap();
    assert!(receive(&mut w, &p1[0], 31).is_err());

    let mut forged = p1[0].clone();
    forged.sender = addr("S2");
    forged.in_reply_to = Some("W#9".into());
    assert!(receive(&mut w, &forged, 32).is_err());

    let mut outsider = p1[0].clone();
    outsider.sender = addr("X");
    assert!(receive(&mut w, &outsider, 33).is_err());

    let mut elsewhere = p1[0].clone();
    elsewhere.dialogue_id = "other".into();
    assert_eq!(receive(&mut w, &elsewhere, 34), Err(ProtocolError::UnknownDialogue("other".into())));
}

#[test]
fn participant_refuse_and_fail_paths() {
    let (_, mut s1, _, _) = two_supplier_call();
    let out = decide(&mut s1, Decision::Refuse(body(json!({"reason": "out of stock"}))), 20).unwrap();
    assert_eq!(out[0].performative, Performative::Refuse);
    assert_eq!(s1.state, DialogueState::Participant(ParticipantState::Refused));
    assert!(decide(&mut s1, Decision::Propose(proposal("p1")), 21).is_err());
}

#[test]
fn participant_rejects_out_of_order_award() {
    let (w, mut s1, _, _) = two_supplier_call();
    // accept_proposal before any proposal was sent
    let mut accept = s1.transcript[0].clone();
    accept.performative = Performative::AcceptProposal;
    accept.in_reply_to = Some("S1#1".into());
    accept.content = body(json!({"proposal_id": "p1"}));
    assert!(receive(&mut s1, &accept, 15).is_err());
    assert_eq!(s1.state, DialogueState::Participant(ParticipantState::CfpReceived));
    drop(w);
}

#[test]
fn expire_rules() {
    // zero proposals
    let (mut w, _, _, _) = two_supplier_call();
    assert!(w.expire(DEFAULT_REPLY_MS - 1).is_empty());
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::CfpSent));
    w.expire(DEFAULT_REPLY_MS);
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Concluded(Outcome::TimedOut)));

    // awaiting a result that never comes
    let (mut w, mut s1, mut s2, _) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    let r2 = decide(&mut s2, Decision::Refuse(body(json!({"reason": "x"}))), 20).unwrap();
    receive(&mut w, &p1[0], 30).unwrap();
    receive(&mut w, &r2[0], 30).unwrap();
    decide(
        &mut w,
        Decision::Award { winner: addr("S1"), accept: body(json!({"proposal_id": "p1"})), reject: BTreeMap::new() },
        40,
    )
    .unwrap();
    assert_eq!(w.deadline, 40 + DEFAULT_RESULT_MS);
    w.step(DialogueEvent::Timeout, 40 + DEFAULT_RESULT_MS).unwrap();
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Concluded(Outcome::Failed)));
}

#[test]
fn failure_from_unreachable_participant_counts_as_answer() {
    let (mut w, mut s1, _, cfps) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    receive(&mut w, &p1[0], 30).unwrap();
    let failure = Envelope {
        sender: addr("S2"),
        receiver: addr("W"),
        performative: Performative::Failure,
        in_reply_to: cfps[1].reply_with.clone(),
        reply_with: None,
        content: body(json!({"reason": "unknown_receiver"})),
        ..cfps[1].clone()
    };
    receive(&mut w, &failure, 31).unwrap();
    assert_eq!(w.state, DialogueState::Initiator(InitiatorState::Evaluating));
}

fn request_pair(kind: RequestKind) -> (Dialogue, Dialogue, Envelope) {
    let mut req = Dialogue::initiator(
        "r1",
        ProtocolId::RequestResponse,
        "discovery",
        addr("W"),
        [addr("admin")],
        Timeouts::default(),
    );
    let content = match kind {
        RequestKind::Get => body(json!({"query": []})),
        RequestKind::Post => body(json!({"action": "register"})),
    };
    let out = decide(&mut req, Decision::Request { kind, content }, 0).unwrap();
    let mut resp = Dialogue::for_opening(&addr("admin"), &out[0], Timeouts::default()).unwrap();
    receive(&mut resp, &out[0], 10).unwrap();
    (req, resp, out[0].clone())
}

#[test]
fn request_get_then_response_terminates() {
    let (mut req, mut resp, request) = request_pair(RequestKind::Get);
    assert_eq!(request.performative, Performative::RequestGet);
    let out = decide(&mut resp, Decision::Respond(body(json!({"agents": []}))), 11).unwrap();
    assert_eq!(out[0].in_reply_to, request.reply_with);
    assert!(resp.is_terminated());
    receive(&mut req, &out[0], 20).unwrap();
    assert_eq!(req.state, DialogueState::Request(RequestState::Completed));
    assert_eq!(req.transcript.len(), 2);
    assert_eq!(resp.transcript.len(), 2);
}

#[test]
fn response_without_request_is_violation() {
    let mut req = Dialogue::initiator(
        "r1",
        ProtocolId::RequestResponse,
        "discovery",
        addr("W"),
        [addr("admin")],
        Timeouts::default(),
    );
    let stray = Envelope {
        sender: addr("admin"),
        receiver: addr("W"),
        protocol_id: ProtocolId::RequestResponse,
        ontology_id: "discovery".into(),
        performative: Performative::Response,
        dialogue_id: "r1".into(),
        reply_with: None,
        in_reply_to: Some("W#1".into()),
        sent_at: 0,
        content: Content::new(),
    };
    assert!(receive(&mut req, &stray, 1).is_err());
}

#[test]
fn second_response_is_violation() {
    let (mut req, mut resp, _) = request_pair(RequestKind::Post);
    let out = decide(&mut resp, Decision::Respond(body(json!({"status": "ok"}))), 11).unwrap();
    receive(&mut req, &out[0], 20).unwrap();
    assert!(receive(&mut req, &out[0], 21).is_err());
    assert!(decide(&mut resp, Decision::Respond(Content::new()), 22).is_err());
    assert_eq!(req.transcript.len(), 2);
}

#[test]
fn feed_streams_until_final() {
    let mut tx = Dialogue::feed("f1", "telemetry", addr("P"), addr("L"), Timeouts::default());
    let record = |final_: bool| {
        body(json!({"tracking_id": "T1", "t_ms": 0, "lat": 1.0, "lon": 2.0, "temp_c": 3.0,
                    "humidity_pct": 50.0, "final": final_}))
    };
    let a = decide(&mut tx, Decision::Notify(record(false)), 0).unwrap();
    let mut rx = Dialogue::for_opening(&addr("L"), &a[0], Timeouts::default()).unwrap();
    receive(&mut rx, &a[0], 1).unwrap();
    assert!(!rx.is_terminated());
    let b = decide(&mut tx, Decision::Notify(record(true)), 2).unwrap();
    assert!(tx.is_terminated());
    receive(&mut rx, &b[0], 3).unwrap();
    assert!(rx.is_terminated());
    assert!(decide(&mut tx, Decision::Notify(record(false)), 4).is_err());
}

proptest::proptest! {
    #[test]
    fn expire_before_deadline_is_a_no_op(now in 0u64..DEFAULT_REPLY_MS) {
        let (mut w, _, _, _) = two_supplier_call();
        let before = w.clone();
        proptest::prop_assert!(w.expire(now).is_empty());
        proptest::prop_assert_eq!(w, before);
    }
}

#[test]
fn trace_round_trip() {
    let (mut w, mut s1, _, mut all) = two_supplier_call();
    let p1 = decide(&mut s1, Decision::Propose(proposal("p1")), 20).unwrap();
    receive(&mut w, &p1[0], 30).unwrap();
    all.extend(p1);
    let bytes = encode_trace(&all).unwrap();
    assert_eq!(decode_trace(&bytes).unwrap(), all);
    assert!(decode_trace(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_trace(b"").unwrap().is_empty());
}
