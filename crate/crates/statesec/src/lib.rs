//! Secrecy-preserving linear state encoding and estimation over
//! packet-dropping channels.
//!
//! A sensor observes a linear dynamical system x_{k+1} = A·x_k + w_{k+1} and
//! transmits state packets to a user over a lossy link while an eavesdropper
//! intercepts a random subset of the same packets. Instead of sending x_k
//! directly, the sensor sends the weighted difference
//!
//! ```text
//! z_k = x_k − L^(k−t) · x_t
//! ```
//!
//! against the latest acknowledged reception x_t. With the weighting
//! L = A + Q(A')⁻¹Y∞ built from the open-loop steady-state information
//! matrix Y∞, one *critical event* — a step the user receives but the
//! eavesdropper misses — makes the eavesdropper's estimation error diverge
//! for unstable states and no better than open-loop prediction for stable
//! ones, while the user keeps decoding the exact state.
//!
//! The crate provides:
//! - [`matops`]: dense matrix kernels (Lyapunov solve, Riccati and
//!   information-form recursion steps, inversion identities, matrix powers);
//! - [`sysmodel`]: system validation/partitioning and open-loop prediction
//!   in covariance and information form;
//! - [`codec`]: weighting design (full, block-diagonal baseline, and
//!   uncoded passthrough) plus the sensor encoder / user decoder state
//!   machines, including unreliable-acknowledgment operation;
//! - [`channel`]: the joint packet-drop channel, replayable traces, and
//!   critical-event detection;
//! - [`estimators`]: user, open-loop, and exact eavesdropper filters, plus
//!   the anchored bound recursions with divergence/convergence diagnostics;
//! - [`harness`]: scenario files, the Monte-Carlo runner, CSV output, and
//!   the empirical secrecy verdict.
//!
//! Start with the `examples/` directory: each example exercises one
//! capability end to end. The `statesec` binary wraps the same library
//! behind a small scenario-driven CLI.

pub mod channel;
pub mod codec;
mod comp;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod matops;
pub mod sysmodel;
#[cfg(test)]
pub(crate) mod testkit;

pub use channel::{effective_user_outcome, ChannelModel, ChannelTrace, StepOutcome};
pub use codec::{
    decode, decode_lossy, design_code, encode, process_ack, CodeVariant, DecoderState,
    EncoderState, Packet, SecrecyCode,
};
pub use error::{Error, Result};
pub use estimators::{
    bound_trajectory, divergence_rate_check, stable_gap_check, user_cov_step, BoundTrajectory,
    EavesdropperFilter, GaussBelief, StableStateReport, UnstableStateReport,
};
pub use harness::{
    emit_csv, run_monte_carlo, run_trial, verify_secrecy, MonteCarloSummary, Scenario,
    SecrecyReport, TrialRecord,
};
pub use matops::{Mat, Vector};
pub use sysmodel::{
    gain_limit_diagnostics, open_loop_cov_step, open_loop_info_step, perturb_singular,
    steady_info_matrix, validate_system, GainLimits, PartitionedSystem, SteadyInfo,
};
