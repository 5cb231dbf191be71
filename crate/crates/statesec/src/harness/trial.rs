//! Monte-Carlo trial execution.
//!
//! Each trial is replayable from (scenario, trial index) alone: the trial
//! seed is a splitmix64 output of the base seed, and the channel and process
//! noise draw from two generator streams derived from it with distinct tags,
//! keeping channel outcomes independent of the noise by construction.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::{effective_user_outcome, ChannelTrace};
use crate::codec::{
    decode, decode_lossy, design_code, encode, process_ack, DecoderState, EncoderState,
};
use crate::error::{Error, Result};
use crate::estimators::{bound_trajectory, user_cov_step, EavesdropperFilter};
use crate::harness::scenario::Scenario;
use crate::harness::verify::{verify_secrecy, SecrecyReport};
use crate::matops::{self, Mat, Vector};

const GOLDEN: u64 = 0x9E3779B97F4A7C15;
const CHANNEL_TAG: u64 = 0xC3A5C85C97CB3127;
const NOISE_TAG: u64 = 0x9AE16A3B2F90404F;

/// splitmix64 output mixer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// The trial_index-th output of a splitmix64 stream seeded at base_seed.
pub fn trial_seed(base_seed: u64, trial_index: u64) -> u64 {
    mix64(base_seed.wrapping_add(trial_index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

fn channel_seed(trial: u64) -> u64 {
    mix64(trial ^ CHANNEL_TAG)
}

fn noise_seed(trial: u64) -> u64 {
    mix64(trial ^ NOISE_TAG)
}

/// Everything recorded about one simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub gamma_u: bool,
    pub gamma_e: bool,
    pub gamma_a: bool,
    /// User error-covariance diagonal (zero at receptions).
    pub user_cov_diag: Vec<f64>,
    /// Eavesdropper error-covariance diagonal.
    pub eav_cov_diag: Vec<f64>,
    /// Open-loop prediction covariance diagonal.
    pub open_cov_diag: Vec<f64>,
    /// Anchored bound diagonal; present from the first critical step on.
    pub bound_cov_diag: Option<Vec<f64>>,
    /// Squared estimation errors against the true simulated state.
    pub user_sq_err: Vec<f64>,
    pub eav_sq_err: Vec<f64>,
    /// ‖x̂ − x‖∞ / max(1, ‖x‖∞) at receptions.
    pub user_rel_err: Option<f64>,
}

/// One simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// First step where the user (effectively) received and the
    /// eavesdropper missed.
    pub first_critical: Option<usize>,
    pub steps: Vec<StepRecord>,
    /// Eavesdropper covariance at the first critical step: the bound anchor.
    pub anchor_cov: Option<Mat>,
}

/// Simulate one trial with a freshly sampled channel trace.
pub fn run_trial(scenario: &Scenario, trial_index: usize) -> Result<TrialRecord> {
    let seed = trial_seed(scenario.base_seed, trial_index as u64);
    let trace = ChannelTrace::sample(&scenario.channel, scenario.horizon, channel_seed(seed))?;
    run_trial_inner(scenario, &trace, trial_index, seed)
}

/// Simulate one trial over a caller-supplied trace (adversarial outcome
/// sequences, replays). The trace must cover steps 0..=horizon.
pub fn run_trial_on_trace(
    scenario: &Scenario,
    trial_index: usize,
    trace: &ChannelTrace,
) -> Result<TrialRecord> {
    if trace.len() != scenario.horizon + 1 {
        return Err(Error::InvalidArgument(format!(
            "trace covers {} steps, scenario horizon needs {}",
            trace.len(),
            scenario.horizon + 1
        )));
    }
    let seed = trial_seed(scenario.base_seed, trial_index as u64);
    run_trial_inner(scenario, trace, trial_index, seed)
}

fn run_trial_inner(
    scenario: &Scenario,
    trace: &ChannelTrace,
    trial_index: usize,
    seed: u64,
) -> Result<TrialRecord> {
    let sys = &scenario.sys;
    let n = sys.n();
    let code = design_code(sys, scenario.variant)?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed(seed));
    let chol_sigma0 =
        matops::cholesky_lower(sys.sigma0(), 1e-12).ok_or(Error::NotPositiveDefinite {
            context: "initial covariance factor",
        })?;
    let chol_q = matops::cholesky_lower(sys.q(), 1e-12).ok_or(Error::NotPositiveDefinite {
        context: "noise covariance factor",
    })?;

    let first_critical = trace.first_effective_critical_time();
    let mut enc = EncoderState::new(n);
    let mut dec = DecoderState::new(n);
    let mut filter = EavesdropperFilter::new(n);
    let mut x = Vector::zeros(n);
    let mut user_mean = Vector::zeros(n);
    let mut user_cov = sys.sigma0().clone();
    let mut open_cov = sys.sigma0().clone();
    let mut anchor_cov: Option<Mat> = None;
    let mut steps = Vec::with_capacity(scenario.horizon + 1);

    for k in 0..=scenario.horizon {
        let draw: Vector = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut noise_rng));
        x = if k == 0 {
            &chol_sigma0 * draw
        } else {
            sys.a() * &x + &chol_q * draw
        };
        let out = trace.get(k);
        let gamma_u_eff = effective_user_outcome(out.gamma_u, out.gamma_a);

        if k > 0 {
            open_cov = crate::sysmodel::open_loop_cov_step(&open_cov, sys)?;
        }

        let in_band_t = enc.t();
        let z = encode(&enc, &x, k as i64, &code)?;

        // User side: decode exactly at receptions, predict otherwise.
        let mut user_rel_err = None;
        if out.gamma_u {
            let (decoded, next) = if scenario.lossy_acks() {
                decode_lossy(&dec, &z, k as i64, in_band_t, true, &code)?
            } else {
                decode(&dec, &z, k as i64, true, &code)?
            };
            dec = next;
            let estimate = decoded.expect("reception always yields an estimate");
            user_rel_err = Some((&estimate - &x).amax() / x.amax().max(1.0));
            user_mean = estimate;
            user_cov = Mat::zeros(n, n);
        } else {
            if k > 0 {
                user_mean = sys.a() * &user_mean;
                user_cov = user_cov_step(&user_cov, false, sys)?;
            }
            // At k = 0 without a reception the estimate is the prior:
            // zero mean, covariance Σ₀ — already initialized.
        }

        let packet_view = out.gamma_e.then(|| z.value().clone());
        filter = filter.step(
            packet_view.as_ref(),
            out.gamma_e,
            gamma_u_eff,
            k as i64,
            &code,
            sys,
        )?;
        if first_critical == Some(k) {
            anchor_cov = Some(filter.state_cov());
        }

        enc = process_ack(&enc, k as i64, &x, out.gamma_u, out.gamma_a);

        let eav_mean = filter.state_mean();
        let eav_cov = filter.state_cov();
        steps.push(StepRecord {
            k,
            gamma_u: out.gamma_u,
            gamma_e: out.gamma_e,
            gamma_a: out.gamma_a,
            user_cov_diag: (0..n).map(|i| user_cov[(i, i)]).collect(),
            eav_cov_diag: (0..n).map(|i| eav_cov[(i, i)]).collect(),
            open_cov_diag: (0..n).map(|i| open_cov[(i, i)]).collect(),
            bound_cov_diag: None,
            user_sq_err: (0..n).map(|i| (user_mean[i] - x[i]).powi(2)).collect(),
            eav_sq_err: (0..n).map(|i| (eav_mean[i] - x[i]).powi(2)).collect(),
            user_rel_err,
        });
    }

    // Attach the anchored bound along the post-critical suffix. The
    // passthrough weighting is singular and admits no bound recursion.
    if let (Some(k0), Some(anchor)) = (first_critical, anchor_cov.as_ref()) {
        if code.has_invertible_weighting() {
            let traj = bound_trajectory(anchor, k0, scenario.horizon, &code, sys)?;
            for (j, p) in traj.pbar.iter().enumerate() {
                steps[k0 + j].bound_cov_diag = Some((0..n).map(|i| p[(i, i)]).collect());
            }
        }
    }

    Ok(TrialRecord {
        trial: trial_index,
        seed,
        first_critical,
        steps,
        anchor_cov,
    })
}

/// Batch statistics plus the embedded secrecy verdict.
#[derive(Debug)]
pub struct MonteCarloSummary {
    pub trials_requested: usize,
    pub trials_run: usize,
    /// (trial index, error) for trials that failed numerically.
    pub failures: Vec<(usize, Error)>,
    pub critical_trials: usize,
    pub mean_first_critical: Option<f64>,
    /// Histogram of first critical times.
    pub first_critical_counts: BTreeMap<usize, usize>,
    pub secrecy: SecrecyReport,
}

/// Run every trial of the scenario in parallel and aggregate.
///
/// Individual trial failures (overflow on a pathological trace, say) are
/// collected rather than aborting the batch; the secrecy verdict is computed
/// over the trials that completed.
pub fn run_monte_carlo(scenario: &Scenario) -> Result<(MonteCarloSummary, Vec<TrialRecord>)> {
    let outcomes: Vec<std::result::Result<TrialRecord, (usize, Error)>> = (0..scenario.trials)
        .into_par_iter()
        .map(|i| run_trial(scenario, i).map_err(|e| (i, e)))
        .collect();
    let mut records = Vec::with_capacity(scenario.trials);
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(record) => records.push(record),
            Err(pair) => failures.push(pair),
        }
    }

    let mut first_critical_counts = BTreeMap::new();
    for record in &records {
        if let Some(k0) = record.first_critical {
            *first_critical_counts.entry(k0).or_insert(0usize) += 1;
        }
    }
    let critical_trials: usize = first_critical_counts.values().sum();
    let mean_first_critical = (critical_trials > 0).then(|| {
        let total: usize = first_critical_counts
            .iter()
            .map(|(k, count)| k * count)
            .sum();
        total as f64 / critical_trials as f64
    });

    let secrecy = if records.is_empty() {
        SecrecyReport::empty()
    } else {
        verify_secrecy(&records, scenario)?
    };

    Ok((
        MonteCarloSummary {
            trials_requested: scenario.trials,
            trials_run: records.len(),
            failures,
            critical_trials,
            mean_first_critical,
            first_critical_counts,
            secrecy,
        },
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModel, StepOutcome};
    use crate::codec::CodeVariant;
    use crate::sysmodel::validate_system;

    fn demo_scenario(trials: usize, horizon: usize) -> Scenario {
        let a = Mat::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.7]);
        let q = Mat::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
        let sys = validate_system(&a, &q, &q.clone()).unwrap();
        let channel = ChannelModel::reliable(0.7, 0.1, 0.1, 0.1);
        Scenario::new(sys, channel, CodeVariant::Full, horizon, trials, 7).unwrap()
    }

    #[test]
    fn zero_horizon_trial_has_one_row() {
        let record = run_trial(&demo_scenario(1, 0), 0).unwrap();
        assert_eq!(record.steps.len(), 1);
        assert_eq!(record.steps[0].k, 0);
    }

    #[test]
    fn trials_replay_bit_identically() {
        let scenario = demo_scenario(1, 40);
        let a = run_trial(&scenario, 3).unwrap();
        let b = run_trial(&scenario, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_trials_use_distinct_seeds() {
        assert_ne!(trial_seed(7, 0), trial_seed(7, 1));
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
        let scenario = demo_scenario(2, 20);
        let a = run_trial(&scenario, 0).unwrap();
        let b = run_trial(&scenario, 1).unwrap();
        assert_ne!(a.seed, b.seed);
        // Different channel and noise streams: the step records diverge.
        assert_ne!(a.steps, b.steps);
    }

    #[test]
    fn covariance_diagonals_stay_above_negative_dust() {
        let (_, records) = run_monte_carlo(&demo_scenario(20, 60)).unwrap();
        for record in &records {
            for step in &record.steps {
                for group in [&step.user_cov_diag, &step.eav_cov_diag, &step.open_cov_diag] {
                    assert!(group.iter().all(|v| *v >= -1e-9), "step {}", step.k);
                }
            }
        }
    }

    #[test]
    fn bound_attaches_from_first_critical_step() {
        let scenario = demo_scenario(10, 50);
        let (_, records) = run_monte_carlo(&scenario).unwrap();
        let with_critical = records.iter().find(|r| r.first_critical.is_some()).unwrap();
        let k0 = with_critical.first_critical.unwrap();
        for step in &with_critical.steps {
            if step.k < k0 {
                assert!(step.bound_cov_diag.is_none());
            } else {
                assert!(step.bound_cov_diag.is_some());
            }
        }
        // The anchor equals the recorded eavesdropper covariance at k0.
        let anchor = with_critical.anchor_cov.as_ref().unwrap();
        let diag = &with_critical.steps[k0].eav_cov_diag;
        for i in 0..2 {
            assert!((anchor[(i, i)] - diag[i]).abs() <= 1e-12);
        }
        assert_eq!(
            with_critical.steps[k0].bound_cov_diag.as_deref(),
            Some(&diag[..])
        );
    }

    #[test]
    fn mean_first_critical_matches_geometry() {
        // P(critical) = p10 = 0.1 per step, so first critical times are
        // geometric with mean 1/0.1 − 1 = 9.
        let scenario = demo_scenario(2000, 80);
        let (summary, _) = run_monte_carlo(&scenario).unwrap();
        assert!(summary.failures.is_empty());
        let mean = summary.mean_first_critical.unwrap();
        assert!((mean - 9.0).abs() < 0.8, "mean {mean}");
    }

    #[test]
    fn no_critical_events_without_p10() {
        let a = Mat::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.7]);
        let q = Mat::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
        let sys = validate_system(&a, &q, &q.clone()).unwrap();
        let channel = ChannelModel::reliable(0.8, 0.0, 0.1, 0.1);
        let scenario = Scenario::new(sys, channel, CodeVariant::Full, 40, 50, 3).unwrap();
        let (summary, records) = run_monte_carlo(&scenario).unwrap();
        assert_eq!(summary.critical_trials, 0);
        assert!(records.iter().all(|r| r.first_critical.is_none()));
        assert!(summary.secrecy.no_critical_trials);
        assert!(!summary.secrecy.overall_pass);
    }

    #[test]
    fn handcrafted_trace_controls_the_critical_time() {
        let scenario = demo_scenario(1, 6);
        let mut outcomes = vec![
            StepOutcome {
                gamma_u: true,
                gamma_e: true,
                gamma_a: true,
            };
            7
        ];
        outcomes[4].gamma_e = false; // critical at 4
        let trace = ChannelTrace::from_outcomes(outcomes, 0);
        let record = run_trial_on_trace(&scenario, 0, &trace).unwrap();
        assert_eq!(record.first_critical, Some(4));
        assert!(record.anchor_cov.is_some());
    }

    #[test]
    fn trace_length_must_match_horizon() {
        let scenario = demo_scenario(1, 6);
        let trace = ChannelTrace::sample(&scenario.channel, 3, 1).unwrap();
        assert!(matches!(
            run_trial_on_trace(&scenario, 0, &trace),
            Err(Error::InvalidArgument(_))
        ));
    }
}
