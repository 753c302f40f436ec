use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::events::EventKind;
use crate::messaging::{AgentAddress, DialogueId, Envelope, Millis};
use crate::protocol::{Decision, Dialogue, DialogueEvent, ProtocolError, Timeouts};

use super::AgentType;

/// Side effects a handler produced, applied by the runtime in order once
/// the handler returns.
#[derive(Debug, Clone)]
pub(crate) enum Effect {
    Send(Envelope),
    Publish(EventKind, Value),
    Timer { at: Millis, tag: u64 },
    Expiry { dialogue_id: DialogueId, deadline: Millis },
    Violation(ProtocolError),
}

/// What a handler may see and do while it runs.
pub struct Context<'a> {
    pub(crate) now: Millis,
    pub(crate) me: &'a AgentAddress,
    pub(crate) agent_type: AgentType,
    pub(crate) dialogues: &'a mut BTreeMap<DialogueId, Dialogue>,
    pub(crate) rng: &'a mut ChaCha8Rng,
    pub(crate) counter: &'a mut u64,
    pub(crate) timeouts: Timeouts,
    pub(crate) effects: Vec<Effect>,
}

impl<'a> Context<'a> {
    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn me(&self) -> &AgentAddress {
        self.me
    }

    pub fn agent_type(&self) -> AgentType {
        self.agent_type
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    pub fn timeouts(&self) -> Timeouts {
        self.timeouts
    }

    /// A fresh dialogue id `{scope}/{me}/{n}`.
    pub fn next_dialogue_id(&mut self, scope: &str) -> DialogueId {
        *self.counter += 1;
        format!("{scope}/{}/{}", self.me, self.counter)
    }

    pub fn dialogue(&self, id: &str) -> Option<&Dialogue> {
        self.dialogues.get(id)
    }

    /// Registers `dialogue` and applies its opening decision.
    pub fn open(&mut self, dialogue: Dialogue, first: Decision) -> Result<(), ProtocolError> {
        let id = dialogue.id.clone();
        if self.dialogues.contains_key(&id) {
            let err = ProtocolError::Violation { dialogue_id: id, reason: "dialogue id already in use".into() };
            self.effects.push(Effect::Violation(err.clone()));
            return Err(err);
        }
        self.dialogues.insert(id.clone(), dialogue);
        let result = self.drive(&id, first);
        if result.is_err() {
            self.dialogues.remove(&id);
        }
        result
    }

    /// Applies a local decision to an existing dialogue and queues whatever
    /// it emits. Errors are also recorded as violations.
    pub fn drive(&mut self, id: &str, decision: Decision) -> Result<(), ProtocolError> {
        let Some(dialogue) = self.dialogues.get_mut(id) else {
            let err = ProtocolError::UnknownDialogue(id.to_string());
            self.effects.push(Effect::Violation(err.clone()));
            return Err(err);
        };
        let before = dialogue.deadline;
        match dialogue.step(DialogueEvent::Decision(decision), self.now) {
            Ok(out) => {
                let deadline = dialogue.deadline;
                let live = !dialogue.is_terminated();
                self.effects.extend(out.into_iter().map(Effect::Send));
                if live && deadline != before && deadline != Millis::MAX {
                    self.effects.push(Effect::Expiry { dialogue_id: id.to_string(), deadline });
                }
                Ok(())
            }
            Err(err) => {
                self.effects.push(Effect::Violation(err.clone()));
                Err(err)
            }
        }
    }

    /// Delivers `Timer { tag }` to this agent `delay` ms from now.
    pub fn schedule(&mut self, delay: Millis, tag: u64) {
        self.effects.push(Effect::Timer { at: self.now.saturating_add(delay), tag });
    }

    pub fn publish(&mut self, kind: EventKind, payload: Value) {
        self.effects.push(Effect::Publish(kind, payload));
    }

    /// A human-readable notification attributed to this agent.
    pub fn notify(&mut self, text: impl Into<String>) {
        let payload = serde_json::json!({ "agent": self.me.as_str(), "text": text.into() });
        self.effects.push(Effect::Publish(EventKind::Notification, payload));
    }
}
