use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::messaging::{Envelope, Millis, Performative, ProtocolId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BehaviourKind {
    OneShot,
    Periodic { interval_ms: Millis },
    Reactive { protocol: ProtocolId, performatives: BTreeSet<Performative> },
}

/// A unit of agent activity. `action` names the handler the agent runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Behaviour {
    #[serde(flatten)]
    pub kind: BehaviourKind,
    pub action: String,
}

impl Behaviour {
    pub fn one_shot(action: impl Into<String>) -> Self {
        Self { kind: BehaviourKind::OneShot, action: action.into() }
    }

    pub fn periodic(interval_ms: Millis, action: impl Into<String>) -> Self {
        assert!(interval_ms > 0, "periodic interval must be positive");
        Self { kind: BehaviourKind::Periodic { interval_ms }, action: action.into() }
    }

    pub fn reactive(
        protocol: ProtocolId,
        performatives: impl IntoIterator<Item = Performative>,
        action: impl Into<String>,
    ) -> Self {
        Self {
            kind: BehaviourKind::Reactive { protocol, performatives: performatives.into_iter().collect() },
            action: action.into(),
        }
    }

    /// Reacts to every performative of `protocol`.
    pub fn reactive_all(protocol: ProtocolId, action: impl Into<String>) -> Self {
        let all = Performative::ALL.into_iter().filter(|p| protocol.allows(*p));
        Self::reactive(protocol, all, action)
    }

    pub fn matches(&self, envelope: &Envelope) -> bool {
        match &self.kind {
            BehaviourKind::Reactive { protocol, performatives } => {
                *protocol == envelope.protocol_id && performatives.contains(&envelope.performative)
            }
            _ => false,
        }
    }
}
