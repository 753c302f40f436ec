use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::query::{AttrValue, InvalidQuery, Query};
use crate::messaging::{AgentAddress, Millis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescription {
    pub agent: AgentAddress,
    pub attributes: BTreeMap<String, AttrValue>,
    pub registered_at: Millis,
}

impl ServiceDescription {
    pub fn new(agent: AgentAddress, registered_at: Millis) -> Self {
        Self { agent, attributes: BTreeMap::new(), registered_at }
    }

    pub fn with(mut self, name: &str, value: impl Into<AttrValue>) -> Self {
        self.attributes.insert(name.to_string(), value.into());
        self
    }
}

/// At most one live description per agent.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: BTreeMap<AgentAddress, ServiceDescription>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Upserts; empty attribute names are dropped.
    pub fn register(&mut self, mut desc: ServiceDescription) {
        desc.attributes.retain(|name, _| !name.is_empty());
        self.entries.insert(desc.agent.clone(), desc);
    }

    pub fn deregister(&mut self, agent: &AgentAddress) {
        self.entries.remove(agent);
    }

    pub fn get(&self, agent: &AgentAddress) -> Option<&ServiceDescription> {
        self.entries.get(agent)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Agents whose description satisfies every constraint, in address order.
    pub fn search(&self, query: &Query) -> Result<Vec<AgentAddress>, InvalidQuery> {
        let mut compiled = Vec::with_capacity(query.constraints.len());
        for constraint in &query.constraints {
            let operands = constraint.operands()?;
            for desc in self.entries.values() {
                if let Some(value) = desc.attributes.get(&constraint.attribute) {
                    constraint.check_kind(&operands, value)?;
                }
            }
            compiled.push((constraint, operands));
        }
        Ok(self
            .entries
            .values()
            .filter(|desc| {
                compiled.iter().all(|(c, operands)| {
                    desc.attributes.get(&c.attribute).is_some_and(|v| c.holds(operands, v))
                })
            })
            .map(|desc| desc.agent.clone())
            .collect())
    }

    /// Registry contents as a JSON document keyed by agent address.
    pub fn snapshot(&self) -> Value {
        serde_json::to_value(&self.entries).expect("registry serializes")
    }
}

/// Registry shared between the admin agent and observers. Mutations take the
/// write lock, so a search never observes a half-applied registration.
#[derive(Debug, Clone, Default)]
pub struct SharedRegistry(Arc<RwLock<Registry>>);

impl SharedRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, desc: ServiceDescription) {
        self.0.write().expect("registry lock").register(desc);
    }

    pub fn deregister(&self, agent: &AgentAddress) {
        self.0.write().expect("registry lock").deregister(agent);
    }

    pub fn search(&self, query: &Query) -> Result<Vec<AgentAddress>, InvalidQuery> {
        self.0.read().expect("registry lock").search(query)
    }

    pub fn snapshot(&self) -> Value {
        self.0.read().expect("registry lock").snapshot()
    }

    pub fn read<R>(&self, f: impl FnOnce(&Registry) -> R) -> R {
        f(&self.0.read().expect("registry lock"))
    }
}
