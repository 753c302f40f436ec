//! Yellow-page registration and matchmaking.
//!
//! Providers register a [`ServiceDescription`]; requesters find them with a
//! conjunctive [`Query`]. The registry is reached by other agents only through
//! envelopes addressed to the admin agent (see [`admin`]).

pub mod admin;
mod query;
mod registry;

pub use admin::AdminAgent;
pub use query::{AttrValue, Constraint, InvalidQuery, Operator, Query};
pub use registry::{Registry, ServiceDescription, SharedRegistry};
