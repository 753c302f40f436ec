use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a live agent.
///
/// Restricted to ASCII alphanumerics plus `-`, `_` and `.` so an address can
/// be embedded in header lines, dialogue ids (`/`-separated) and message
/// tokens (`#`-separated) without escaping.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AgentAddress(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("agent address is empty")]
    Empty,
    #[error("agent address {address:?} contains illegal character {ch:?}")]
    IllegalChar { address: String, ch: char },
}

impl AgentAddress {
    pub fn new(value: impl Into<String>) -> Result<Self, AddressError> {
        let value = value.into();
        if value.is_empty() {
            return Err(AddressError::Empty);
        }
        if let Some(ch) = value
            .chars()
            .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')))
        {
            return Err(AddressError::IllegalChar { address: value, ch });
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for AgentAddress {
    type Error = AddressError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl TryFrom<&str> for AgentAddress {
    type Error = AddressError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AgentAddress> for String {
    fn from(value: AgentAddress) -> Self {
        value.0
    }
}

impl fmt::Display for AgentAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for AgentAddress {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_plain_names() {
        assert_eq!(AgentAddress::new("3pl-hermes").unwrap().as_str(), "3pl-hermes");
        assert!(AgentAddress::new("supplier_1.eu").is_ok());
    }

    #[test]
    fn rejects_empty_and_separators() {
        assert_eq!(AgentAddress::new(""), Err(AddressError::Empty));
        assert!(matches!(
            AgentAddress::new("a/b"),
            Err(AddressError::IllegalChar { ch: '/', .. })
        ));
        assert!(AgentAddress::new("a\nb").is_err());
        assert!(AgentAddress::new("a#1").is_err());
    }

    #[test]
    fn total_order_is_lexicographic() {
        let a = AgentAddress::new("S1").unwrap();
        let b = AgentAddress::new("S2").unwrap();
        assert!(a < b);
    }
}
