use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use a2sc_cli::{EXIT_CONFIG, EXIT_FAILURE};
use a2sc_core::system::BootOptions;

#[derive(Debug, Parser)]
#[command(name = "a2sc", version, about = "Agent-based meat supply chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the config's scenario headless and write traces and reports.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<u64>,
    },
    /// Boot the agents and serve the HTTP gateway.
    Serve {
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("A2SC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match cli.command {
        Command::Run { config, out, seed, speed, t_end } => {
            let overrides = BootOptions { seed, speed, t_end_ms: t_end, external_pacing: false };
            match a2sc_cli::run(&config, &out, &overrides) {
                Ok(outcome) => {
                    println!(
                        "{} {}: {:?}, {} messages, {} violations, deliveries: {}",
                        outcome.scenario.kind.as_str(),
                        outcome.scenario.scenario_id,
                        outcome.scenario.status,
                        outcome.trace_len,
                        outcome.violations.len(),
                        if outcome.tracking_ids.is_empty() { "none".to_string() } else { outcome.tracking_ids.join(", ") },
                    );
                    exit(outcome.exit_code())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(e.exit_code())
                }
            }
        }
        Command::Serve { config, listen } => {
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit(EXIT_FAILURE);
                }
            };
            match runtime.block_on(a2sc_cli::serve(&config, &listen)) {
                Ok(()) => exit(0),
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(e.exit_code())
                }
            }
        }
    }
}
