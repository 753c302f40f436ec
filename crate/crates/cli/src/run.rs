//! One deterministic headless run: boot, launch the configured scenario,
//! step until it settles and write the artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use a2sc_core::config::{ConfigError, ScenarioConfig, ScenarioKind};
use a2sc_core::gateway::{Gateway, GatewayError, ScenarioDescriptor, ScenarioParameters, ScenarioStatus};
use a2sc_core::protocol::trace::{encode_trace, TraceError};
use a2sc_core::runtime::Violation;
use a2sc_core::system::{BootError, BootOptions, System};

pub const TRACE_FILE: &str = "run.trace";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const LEDGER_DIR: &str = "ledgers";
pub const REPORT_DIR: &str = "reports";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Boot(#[from] BootError),
    #[error("discovery registration did not complete")]
    NotReady,
    #[error(transparent)]
    Launch(#[from] GatewayError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => crate::EXIT_CONFIG,
            RunError::Boot(BootError::Config(_) | BootError::Dataset { .. }) => crate::EXIT_CONFIG,
            _ => crate::EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: ScenarioDescriptor,
    pub violations: Vec<Violation>,
    pub tracking_ids: Vec<String>,
    pub trace_len: usize,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.scenario.status == ScenarioStatus::Completed && self.violations.is_empty() {
            crate::EXIT_OK
        } else {
            crate::EXIT_FAILURE
        }
    }
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| RunError::Io { path: parent.to_path_buf(), source })?;
    }
    fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    text
}

/// Runs the config's scenario (replenishment with defaults when it names
/// none) and writes every artifact into `out_dir`.
pub fn run(config_path: &Path, out_dir: &Path, overrides: &BootOptions) -> Result<RunOutcome, RunError> {
    let config = ScenarioConfig::load(config_path)?;
    let kind = config.scenario.as_ref().map_or(ScenarioKind::Replenishment, |s| s.kind);
    let mut system = System::boot(config, overrides)?;
    let t_end = system.config.t_end_ms;
    if !system.run_until_ready() {
        return Err(RunError::NotReady);
    }
    let mut gateway = Gateway::new(system);
    let launched = gateway.launch_scenario(kind, ScenarioParameters::default())?;
    log::info!("launched {} as {}", kind.as_str(), launched.scenario_id);
    let scenario = gateway.run_scenario(&launched.scenario_id, t_end)?;
    log::info!("{} finished {:?} at {} ms", scenario.scenario_id, scenario.status, gateway.now());

    let system = gateway.system();
    let runtime = &system.runtime;
    write(out_dir.join(TRACE_FILE), encode_trace(runtime.trace())?)?;
    write(out_dir.join(EVENTS_FILE), system.log().to_jsonl())?;
    for (address, ledger) in system.ledgers() {
        write(out_dir.join(LEDGER_DIR).join(format!("{address}.json")), pretty(&ledger))?;
    }
    let tracking_ids = gateway.tracking_ids();
    for id in &tracking_ids {
        match gateway.report(id) {
            Ok(report) => {
                let value = serde_json::to_value(&report).expect("report serializes");
                write(out_dir.join(REPORT_DIR).join(format!("{id}.json")), pretty(&value))?;
            }
            Err(e) => log::warn!("no report for {id}: {e}"),
        }
    }
    let violations = runtime.violations().to_vec();
    let summary = json!({
        "scenario": scenario,
        "finished_at": gateway.now(),
        "messages": runtime.trace().len(),
        "tracking_ids": tracking_ids,
        "violations": violations,
    });
    write(out_dir.join(SCENARIO_FILE), pretty(&summary))?;
    for v in &violations {
        log::warn!("protocol violation at {} ms by {}: {}", v.at, v.agent, v.reason);
    }
    Ok(RunOutcome { trace_len: runtime.trace().len(), scenario, violations, tracking_ids })
}
