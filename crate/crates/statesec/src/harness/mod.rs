//! Scenario configuration, Monte-Carlo execution, CSV persistence, and the
//! empirical secrecy verdict.
//!
//! The pipeline: [`Scenario`] describes the system, channel, code variant,
//! and run parameters; [`run_monte_carlo`] simulates every trial in parallel
//! and replayably; [`verify_secrecy`] condenses the records into the
//! three-condition secrecy verdict; [`emit_csv`] persists per-step error
//! covariances for plotting.

mod csv;
mod scenario;
mod trial;
mod verify;

pub use csv::{
    csv_header, emit_bound_csv, emit_compare_csv, emit_csv, parse_csv, render_bound_csv,
    render_csv, CsvRow,
};
pub use scenario::Scenario;
pub use trial::{
    run_monte_carlo, run_trial, run_trial_on_trace, trial_seed, MonteCarloSummary, StepRecord,
    TrialRecord,
};
pub use verify::{
    verify_secrecy, ConditionReport, SecrecyReport, DIVERGENCE_MIN_FIT_STEPS,
    DIVERGENCE_RATE_REL_TOL, DIVERGENCE_RATIO_FLOOR, DIVERGENCE_RATIO_MIN_STEPS,
    STABLE_GAP_MIN_STEPS, STABLE_GAP_TOL, USER_EXACT_REL_TOL,
};
