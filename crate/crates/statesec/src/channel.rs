//! The joint packet-dropping channel and its replayable outcome traces.
//!
//! Each step produces a pair (γ_u, γ_e): whether the user received the
//! packet and whether the eavesdropper intercepted it, drawn i.i.d. from the
//! joint distribution {p11, p10, p01, p00} (first index γ_u, second γ_e).
//! An optional reverse channel drops acknowledgments with probability
//! 1 − p_ack; reliable operation fixes γ_a = 1.
//!
//! A *critical event* is a step with γ_u = 1 and γ_e = 0: the user refreshes
//! its reference with a state the eavesdropper never saw. The
//! `force_critical_at_zero` flag models bootstrapping that event at k = 0
//! (e.g. by encrypting only the first packet) by overwriting step 0 with
//! (γ_u, γ_e, γ_a) = (1, 0, 1).
//!
//! Traces are sampled with a ChaCha8 generator keyed by the seed, so an
//! identical (model, horizon, seed) triple reproduces an identical trace
//! bit for bit, and trace randomness never mixes with process-noise
//! randomness (the simulator derives disjoint generator seeds per trial).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Joint per-step outcome distribution plus acknowledgment reliability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// P(γ_u=1, γ_e=1).
    pub p11: f64,
    /// P(γ_u=1, γ_e=0) — the per-step critical-event probability.
    pub p10: f64,
    /// P(γ_u=0, γ_e=1).
    pub p01: f64,
    /// P(γ_u=0, γ_e=0).
    pub p00: f64,
    /// P(γ_a=1); 1.0 in reliable-acknowledgment operation.
    pub p_ack: f64,
    /// Overwrite step 0 with (γ_u, γ_e, γ_a) = (1, 0, 1).
    pub force_critical_at_zero: bool,
}

impl ChannelModel {
    /// Model with reliable acknowledgments and no forcing.
    pub fn reliable(p11: f64, p10: f64, p01: f64, p00: f64) -> Self {
        ChannelModel {
            p11,
            p10,
            p01,
            p00,
            p_ack: 1.0,
            force_critical_at_zero: false,
        }
    }

    /// Probabilities must lie in [0, 1] and the joint ones must sum to
    /// 1 ± 1e-12.
    pub fn validate(&self) -> Result<()> {
        let joint = [self.p11, self.p10, self.p01, self.p00];
        if joint
            .iter()
            .any(|p| !(0.0..=1.0).contains(p) || !p.is_finite())
        {
            return Err(Error::BadProbabilities(format!(
                "joint probabilities must lie in [0, 1], got {joint:?}"
            )));
        }
        let sum: f64 = joint.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadProbabilities(format!(
                "joint probabilities sum to {sum}, expected 1"
            )));
        }
        if !(0.0..=1.0).contains(&self.p_ack) || !self.p_ack.is_finite() {
            return Err(Error::BadProbabilities(format!(
                "p_ack must lie in [0, 1], got {}",
                self.p_ack
            )));
        }
        Ok(())
    }
}

/// One step's outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    /// User received the packet.
    pub gamma_u: bool,
    /// Eavesdropper intercepted the packet.
    pub gamma_e: bool,
    /// Acknowledgment reached the sensor.
    pub gamma_a: bool,
}

/// γ̄_u = γ_u·γ_a: the user outcome as the sensor (and an
/// acknowledgment-intercepting eavesdropper) sees it. Reliable operation
/// always passes γ_a = true.
pub fn effective_user_outcome(gamma_u: bool, gamma_a: bool) -> bool {
    gamma_u && gamma_a
}

/// Immutable per-step outcomes for k = 0..=horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelTrace {
    seed: u64,
    steps: Vec<StepOutcome>,
}

impl ChannelTrace {
    /// Sample a trace of horizon + 1 steps from the joint distribution with
    /// a ChaCha8 generator keyed by `seed`.
    pub fn sample(model: &ChannelModel, horizon: usize, seed: u64) -> Result<ChannelTrace> {
        model.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut steps = Vec::with_capacity(horizon + 1);
        for _ in 0..=horizon {
            let u: f64 = rng.random();
            let (gamma_u, gamma_e) = if u < model.p11 {
                (true, true)
            } else if u < model.p11 + model.p10 {
                (true, false)
            } else if u < model.p11 + model.p10 + model.p01 {
                (false, true)
            } else {
                (false, false)
            };
            let gamma_a = rng.random::<f64>() < model.p_ack;
            steps.push(StepOutcome {
                gamma_u,
                gamma_e,
                gamma_a,
            });
        }
        if model.force_critical_at_zero {
            steps[0] = StepOutcome {
                gamma_u: true,
                gamma_e: false,
                gamma_a: true,
            };
        }
        Ok(ChannelTrace { seed, steps })
    }

    /// Wrap hand-written outcomes (seed recorded as provided, for bookkeeping).
    pub fn from_outcomes(steps: Vec<StepOutcome>, seed: u64) -> ChannelTrace {
        ChannelTrace { seed, steps }
    }

    /// Seed the trace was sampled with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of steps (horizon + 1).
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn get(&self, k: usize) -> StepOutcome {
        self.steps[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &StepOutcome> {
        self.steps.iter()
    }

    /// Smallest k with γ_u = 1 and γ_e = 0.
    pub fn first_critical_time(&self) -> Option<usize> {
        self.steps.iter().position(|s| s.gamma_u && !s.gamma_e)
    }

    /// Smallest k with γ̄_u = γ_u·γ_a = 1 and γ_e = 0: the critical event as
    /// it affects the reference chain when acknowledgments can drop. Equal
    /// to [`Self::first_critical_time`] whenever γ_a ≡ 1.
    pub fn first_effective_critical_time(&self) -> Option<usize> {
        self.steps
            .iter()
            .position(|s| effective_user_outcome(s.gamma_u, s.gamma_a) && !s.gamma_e)
    }

    /// Count of steps with γ_u = 1 and γ_e = 0.
    pub fn critical_event_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.gamma_u && !s.gamma_e)
            .count()
    }

    /// Serialize as plain text: a header comment, then one step per line as
    /// `k,gamma_u,gamma_e,gamma_a` with 0/1 flags.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# channel trace, seed {}", self.seed);
        let _ = writeln!(out, "# k,gamma_u,gamma_e,gamma_a");
        for (k, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{k},{},{},{}",
                u8::from(s.gamma_u),
                u8::from(s.gamma_e),
                u8::from(s.gamma_a)
            );
        }
        out
    }

    /// Parse the [`Self::to_text`] form. Lines starting with `#` are
    /// comments; steps must appear in order k = 0, 1, 2, ...
    pub fn from_text(text: &str) -> Result<ChannelTrace> {
        let mut seed = 0_u64;
        let mut steps = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(s) = rest.trim().strip_prefix("channel trace, seed ") {
                    seed = s.trim().parse().unwrap_or(0);
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::InvalidArgument(format!(
                    "trace line needs 4 fields, got {line:?}"
                )));
            }
            let k: usize = fields[0]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad step index in {line:?}")))?;
            if k != steps.len() {
                return Err(Error::InvalidArgument(format!(
                    "trace steps out of order: expected {}, got {k}",
                    steps.len()
                )));
            }
            let bit = |f: &str| -> Result<bool> {
                match f {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::InvalidArgument(format!(
                        "trace flag must be 0 or 1, got {other:?}"
                    ))),
                }
            };
            steps.push(StepOutcome {
                gamma_u: bit(fields[1])?,
                gamma_e: bit(fields[2])?,
                gamma_a: bit(fields[3])?,
            });
        }
        Ok(ChannelTrace { seed, steps })
    }
}
