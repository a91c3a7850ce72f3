//! Scenario files, runners and reports behind the `calogero` binary.

pub mod demo;
pub mod error;
pub mod report;
pub mod run;
pub mod scenario;
pub mod table;

pub use error::CliError;
pub use report::VerificationReport;
pub use run::{run_scenario, verify_all, verify_scenario, RunOptions};
pub use scenario::{parse_scenario, Scenario};

/// Exit status when every check passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status when a check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status when the run could not finish.
pub const EXIT_ERROR: i32 = 2;
