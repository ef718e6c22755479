//! Configuration, orchestration and reporting for the `mblab` binary.

pub mod config;
pub mod report;
mod run;

pub use config::{Format, Mode, PermutationSource, RunConfig, SweepAxis, SweepConfig};
pub use report::{Cell, Item, Report, Table};
pub use run::{run, sweep};

/// Exit status for a run whose assertions all held.
pub const EXIT_PASS: i32 = 0;
/// Exit status when a checked bound failed.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for configuration or runtime errors.
pub const EXIT_ERROR: i32 = 2;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MBLAB_THREADS";
