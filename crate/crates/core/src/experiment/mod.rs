//! Config-driven experiments: single runs, grid sweeps, re-aggregation and
//! the invariant suite. These back the `ordered-async` binary.
//!
//! Outputs of a run or sweep directory:
//!
//! * `traces/<method>_g<grid>_s<seed>.csv`: per-step records (run only),
//!   columns [`crate::simulator::CSV_HEADER`];
//! * `runs.csv`: one [`RunSummary`] per (grid point, seed);
//! * `robustness.csv`: metric mean/std per grid point;
//! * `summary.json`: the [`SummaryReport`].

mod config;
mod report;
mod runner;
mod validate;

pub use config::{
    EtaAxis, ExperimentConfig, GridPoint, ProblemConfig, ReportConfig, RunSpec, SweepConfig,
    OUTPUT_DIR_ENV,
};
pub use report::{
    build_summary, read_runs_csv, write_robustness_csv, write_runs_csv, Check, CheckResult,
    MethodSummary, RobustnessRow, Stat, SummaryReport,
};
pub use runner::{
    cmd_report, cmd_run, cmd_sweep, execute, summarize, trace_file_name, CommandOutcome,
    RunStatus, RunSummary,
};
pub use validate::{cmd_validate, invariant_suite, InvariantResult, Mutation};

/// Process exit codes of the binary.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG_ERROR: i32 = 1;
    pub const ACCEPTANCE_FAILURE: i32 = 2;
}
