//! Dialogue-tracked protocol state machines.
//!
//! A [`Dialogue`] is one side's view of a conversation. It is advanced by
//! [`Dialogue::step`] with a received envelope, a timeout, or a local
//! [`Decision`]; the step either returns the envelopes the protocol mandates
//! or a [`ProtocolError`], in which case the dialogue is left untouched.
//!
//! Besides contract-net and request-response, dialogues support a one-way
//! monitoring *feed* (a stream of `inform`s closed by a final message), which
//! carries live telemetry from a carrier to its logistics provider.

mod dialogue;
pub mod sim;
pub mod trace;

pub use dialogue::{
    Decision, Dialogue, DialogueEvent, DialogueState, FeedState, InitiatorState, Outcome,
    ParticipantState, ProtocolError, RequestKind, RequestState, Role, Timeouts,
};

/// Default reply window for calls for proposals and requests.
pub const DEFAULT_REPLY_MS: crate::messaging::Millis = 5_000;

/// Default window for an awarded task to report completion.
pub const DEFAULT_RESULT_MS: crate::messaging::Millis = 6 * 60 * 60 * 1_000;

#[cfg(test)]
mod tests;
