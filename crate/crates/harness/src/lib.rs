//! Scenario runner and verification suite for the `sixs` simulator.

pub mod checks;
pub mod report;
pub mod run;
pub mod scenario;
pub mod svg;

pub use checks::{run_check, verify};
pub use report::{emit_report, Formats, VerdictFile};
pub use run::{run_scenario, sweep_n, RunResult, Verdict};
pub use scenario::{all_builtin, builtin, resolve, Scenario};
