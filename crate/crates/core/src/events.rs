//! The ordered event log observed by the gateway.
//!
//! A single writer appends; readers always see a prefix of the log. Every
//! routed envelope becomes exactly one `message` event, so the log is a
//! faithful projection of the runtime trace interleaved with telemetry,
//! notifications and status changes.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::messaging::{canonical, Millis, UnknownName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Message,
    Telemetry,
    Notification,
    Status,
}

impl EventKind {
    pub const ALL: [EventKind; 4] =
        [EventKind::Message, EventKind::Telemetry, EventKind::Notification, EventKind::Status];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Message => "message",
            EventKind::Telemetry => "telemetry",
            EventKind::Notification => "notification",
            EventKind::Status => "status",
        }
    }
}

impl FromStr for EventKind {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownName { kind: "event kind", name: s.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: Millis,
    pub kind: EventKind,
    pub payload: Value,
}

impl Event {
    pub fn to_json(&self) -> String {
        canonical::to_canonical(self).expect("event serializes")
    }
}

/// Set of kinds to include; empty means all.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KindFilter(BTreeSet<EventKind>);

impl KindFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn only(kinds: impl IntoIterator<Item = EventKind>) -> Self {
        Self(kinds.into_iter().collect())
    }

    /// Parses a comma-separated list such as `message,telemetry`.
    pub fn parse_csv(csv: &str) -> Result<Self, UnknownName> {
        csv.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(EventKind::from_str)
            .collect::<Result<BTreeSet<_>, _>>()
            .map(Self)
    }

    pub fn matches(&self, kind: EventKind) -> bool {
        self.0.is_empty() || self.0.contains(&kind)
    }
}

#[derive(Debug, Default)]
pub struct EventLog {
    events: Mutex<Vec<Event>>,
    grew: Condvar,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&self, at: Millis, kind: EventKind, payload: Value) -> u64 {
        let mut events = self.events.lock().expect("event log lock");
        let seq = events.len() as u64;
        events.push(Event { seq, at, kind, payload });
        self.grew.notify_all();
        seq
    }

    pub fn len(&self) -> u64 {
        self.events.lock().expect("event log lock").len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Retained events with `seq >= from_seq` matching `filter`, in seq order.
    pub fn since(&self, from_seq: u64, filter: &KindFilter) -> Vec<Event> {
        let events = self.events.lock().expect("event log lock");
        let start = (from_seq as usize).min(events.len());
        events[start..].iter().filter(|e| filter.matches(e.kind)).cloned().collect()
    }

    /// Like [`EventLog::since`], also returning the seq the next read should
    /// start from, so filtered readers can follow the log without gaps.
    pub fn read_from(&self, from_seq: u64, filter: &KindFilter) -> (Vec<Event>, u64) {
        let events = self.events.lock().expect("event log lock");
        let start = (from_seq as usize).min(events.len());
        let matching = events[start..].iter().filter(|e| filter.matches(e.kind)).cloned().collect();
        (matching, (events.len() as u64).max(from_seq))
    }

    pub fn snapshot(&self) -> Vec<Event> {
        self.events.lock().expect("event log lock").clone()
    }

    /// Blocks until the log holds more than `seen` events or `timeout` passes.
    /// Returns the log length.
    pub fn wait_past(&self, seen: u64, timeout: Duration) -> u64 {
        let events = self.events.lock().expect("event log lock");
        let (events, _) = self
            .grew
            .wait_timeout_while(events, timeout, |e| e.len() as u64 <= seen)
            .expect("event log lock");
        events.len() as u64
    }

    /// One canonical JSON event per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in self.events.lock().expect("event log lock").iter() {
            out.push_str(&event.to_json());
            out.push('\n');
        }
        out
    }
}
