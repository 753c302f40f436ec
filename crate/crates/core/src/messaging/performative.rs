use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Interaction protocols understood by the runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolId {
    /// Multi-party call for proposals with award and completion.
    ContractNet,
    /// Single-round request (get or post) answered by one response.
    RequestResponse,
}

/// Communicative acts. Each belongs to exactly one protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Performative {
    Cfp,
    Propose,
    Refuse,
    AcceptProposal,
    RejectProposal,
    Inform,
    Failure,
    RequestGet,
    RequestPost,
    Response,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} {name:?}")]
pub struct UnknownName {
    pub kind: &'static str,
    pub name: String,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 2] = [ProtocolId::ContractNet, ProtocolId::RequestResponse];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::ContractNet => "contract_net",
            ProtocolId::RequestResponse => "request_response",
        }
    }

    /// The fixed legality table: a performative is legal for exactly the
    /// protocol it belongs to.
    pub fn allows(self, performative: Performative) -> bool {
        performative.protocol() == self
    }
}

impl Performative {
    pub const ALL: [Performative; 10] = [
        Performative::Cfp,
        Performative::Propose,
        Performative::Refuse,
        Performative::AcceptProposal,
        Performative::RejectProposal,
        Performative::Inform,
        Performative::Failure,
        Performative::RequestGet,
        Performative::RequestPost,
        Performative::Response,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Performative::Cfp => "cfp",
            Performative::Propose => "propose",
            Performative::Refuse => "refuse",
            Performative::AcceptProposal => "accept_proposal",
            Performative::RejectProposal => "reject_proposal",
            Performative::Inform => "inform",
            Performative::Failure => "failure",
            Performative::RequestGet => "request_get",
            Performative::RequestPost => "request_post",
            Performative::Response => "response",
        }
    }

    pub fn protocol(self) -> ProtocolId {
        match self {
            Performative::RequestGet | Performative::RequestPost | Performative::Response => {
                ProtocolId::RequestResponse
            }
            _ => ProtocolId::ContractNet,
        }
    }

    pub fn is_request(self) -> bool {
        matches!(self, Performative::RequestGet | Performative::RequestPost)
    }
}

impl FromStr for ProtocolId {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownName { kind: "protocol", name: s.to_string() })
    }
}

impl FromStr for Performative {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Performative::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownName { kind: "performative", name: s.to_string() })
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legality_table() {
        let contract_net = [
            Performative::Cfp,
            Performative::Propose,
            Performative::Refuse,
            Performative::AcceptProposal,
            Performative::RejectProposal,
            Performative::Inform,
            Performative::Failure,
        ];
        for p in Performative::ALL {
            let in_cnp = contract_net.contains(&p);
            assert_eq!(ProtocolId::ContractNet.allows(p), in_cnp, "{p}");
            assert_eq!(ProtocolId::RequestResponse.allows(p), !in_cnp, "{p}");
        }
    }

    #[test]
    fn names_round_trip() {
        for p in Performative::ALL {
            assert_eq!(p.as_str().parse::<Performative>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.as_str()));
        }
        for p in ProtocolId::ALL {
            assert_eq!(p.as_str().parse::<ProtocolId>().unwrap(), p);
        }
        assert!("request".parse::<Performative>().is_err());
    }
}
