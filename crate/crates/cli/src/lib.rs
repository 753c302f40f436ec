//! Headless runner and HTTP gateway server for the a2sc supply chain.

pub mod run;
pub mod server;

pub use run::{run, RunError, RunOutcome};
pub use server::{router, serve, ServeError, Shared};

/// Exit code for a completed scenario with a clean protocol log.
pub const EXIT_OK: i32 = 0;
/// Exit code for a failed scenario, protocol violations or I/O trouble.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for a config that does not parse or validate.
pub const EXIT_CONFIG: i32 = 2;
