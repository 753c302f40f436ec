#![allow(dead_code)]

pub mod protocol_oracle;
pub mod registry_oracle;
pub mod telemetry_oracle;
