//! The empirical secrecy verdict over a batch of trials.
//!
//! Restricted to trials where a critical event occurred (the user received
//! a packet the eavesdropper missed), three conditions are checked:
//!
//! 1. user exactness — decoded states match the truth to 1e-10 relative at
//!    every reception;
//! 2. unstable divergence — each unstable diagonal of the eavesdropper's
//!    covariance ends at least 100× its value at the critical step (given
//!    15 post-critical steps), and on trials where the eavesdropper
//!    intercepted every post-critical packet its growth factor matches
//!    |λ_i|² within 2%;
//! 3. stable convergence — each stable diagonal ends within 1e-3 of the
//!    open-loop prediction (given 60 post-critical steps).
//!
//! A batch with no critical trials cannot witness secrecy: the report
//! carries a warning and an overall failure.

use std::fmt;

use crate::error::{Error, Result};
use crate::estimators::fit_growth_factor;
use crate::harness::scenario::Scenario;
use crate::harness::trial::TrialRecord;

/// Reconstruction error allowed at a reception, relative to the state scale.
pub const USER_EXACT_REL_TOL: f64 = 1e-10;
/// Relative tolerance on the fitted growth factor against |λ_i|².
pub const DIVERGENCE_RATE_REL_TOL: f64 = 0.02;
/// Post-critical steps needed before fitting a growth rate.
pub const DIVERGENCE_MIN_FIT_STEPS: usize = 16;
/// Required ratio of final to critical-step unstable covariance.
pub const DIVERGENCE_RATIO_FLOOR: f64 = 100.0;
/// Post-critical steps needed before applying the ratio floor.
pub const DIVERGENCE_RATIO_MIN_STEPS: usize = 15;
/// Final gap to open-loop allowed per stable state.
pub const STABLE_GAP_TOL: f64 = 1e-3;
/// Post-critical steps needed before applying the stable gap check.
pub const STABLE_GAP_MIN_STEPS: usize = 60;

/// One verified condition: how many checks ran and how many failed.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub name: &'static str,
    pub pass: bool,
    pub checked: usize,
    pub failures: usize,
    pub detail: String,
}

impl ConditionReport {
    fn vacuous(name: &'static str) -> Self {
        ConditionReport {
            name,
            pass: true,
            checked: 0,
            failures: 0,
            detail: "nothing to check".into(),
        }
    }
}

/// The three-condition secrecy verdict.
#[derive(Debug, Clone)]
pub struct SecrecyReport {
    pub total_trials: usize,
    pub critical_trials: usize,
    pub user_exact: ConditionReport,
    pub unstable_divergence: ConditionReport,
    pub stable_convergence: ConditionReport,
    /// No trial witnessed a critical event, so secrecy was never tested.
    pub no_critical_trials: bool,
    pub overall_pass: bool,
}

impl SecrecyReport {
    /// The report for an empty batch: nothing checked, nothing passes.
    pub fn empty() -> Self {
        SecrecyReport {
            total_trials: 0,
            critical_trials: 0,
            user_exact: ConditionReport::vacuous("user exactness"),
            unstable_divergence: ConditionReport::vacuous("unstable divergence"),
            stable_convergence: ConditionReport::vacuous("stable convergence"),
            no_critical_trials: true,
            overall_pass: false,
        }
    }

    pub fn conditions(&self) -> [&ConditionReport; 3] {
        [
            &self.user_exact,
            &self.unstable_divergence,
            &self.stable_convergence,
        ]
    }
}

impl fmt::Display for SecrecyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "critical trials: {}/{}",
            self.critical_trials, self.total_trials
        )?;
        if self.no_critical_trials {
            writeln!(
                f,
                "warning: no critical event occurred in any trial; secrecy was never exercised"
            )?;
        }
        for c in self.conditions() {
            writeln!(
                f,
                "{} {:22} checked {:6}, failed {:4}  ({})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.checked,
                c.failures,
                c.detail
            )?;
        }
        write!(
            f,
            "overall: {}",
            if self.overall_pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Check the three secrecy conditions over completed trials.
pub fn verify_secrecy(records: &[TrialRecord], scenario: &Scenario) -> Result<SecrecyReport> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "secrecy verification needs at least one trial record".into(),
        ));
    }
    let sys = &scenario.sys;
    let critical: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.first_critical.is_some())
        .collect();
    let no_critical_trials = critical.is_empty();

    // (i) user exactness at every reception of critical trials.
    let mut user = ConditionReport::vacuous("user exactness");
    let mut worst_rel: f64 = 0.0;
    for record in &critical {
        for step in &record.steps {
            if let Some(rel) = step.user_rel_err {
                user.checked += 1;
                worst_rel = worst_rel.max(rel);
                if rel > USER_EXACT_REL_TOL {
                    user.failures += 1;
                }
            }
        }
    }
    user.pass = user.failures == 0;
    if user.checked > 0 {
        user.detail = format!("worst relative error {worst_rel:.3e}");
    }

    // (ii) unstable divergence: ratio floor on every critical trial, exact
    // rate fit on all-intercept suffixes.
    let mut unstable = ConditionReport::vacuous("unstable divergence");
    let mut rate_fits = 0usize;
    let mut worst_ratio = f64::INFINITY;
    let mut worst_rate_dev: f64 = 0.0;
    for record in &critical {
        let k0 = record.first_critical.unwrap();
        let last = scenario.horizon;
        let span = last - k0;
        if span >= DIVERGENCE_RATIO_MIN_STEPS {
            for i in 0..sys.n_u() {
                unstable.checked += 1;
                let at_k0 = record.steps[k0].eav_cov_diag[i];
                let at_end = record.steps[last].eav_cov_diag[i];
                let ratio = at_end / at_k0.max(f64::MIN_POSITIVE);
                worst_ratio = worst_ratio.min(ratio);
                if ratio < DIVERGENCE_RATIO_FLOOR {
                    unstable.failures += 1;
                }
            }
        }
        let all_intercepted = record.steps[k0 + 1..].iter().all(|s| s.gamma_e);
        if all_intercepted && span >= DIVERGENCE_MIN_FIT_STEPS {
            for i in 0..sys.n_u() {
                unstable.checked += 1;
                rate_fits += 1;
                let target = sys.eig_mags()[i].powi(2);
                let diag: Vec<f64> = record.steps[k0..=last]
                    .iter()
                    .map(|s| s.eav_cov_diag[i])
                    .collect();
                let fitted = fit_growth_factor(&diag[span / 2..]);
                let dev = (fitted - target).abs() / target;
                worst_rate_dev = worst_rate_dev.max(dev);
                if dev > DIVERGENCE_RATE_REL_TOL {
                    unstable.failures += 1;
                }
            }
        }
    }
    unstable.pass = unstable.failures == 0;
    if unstable.checked > 0 {
        unstable.detail = format!(
            "worst final/critical ratio {worst_ratio:.3e}; {rate_fits} rate fits, worst deviation {worst_rate_dev:.3e}"
        );
    }

    // (iii) stable convergence to open-loop prediction.
    let mut stable = ConditionReport::vacuous("stable convergence");
    let mut worst_gap: f64 = 0.0;
    for record in &critical {
        let k0 = record.first_critical.unwrap();
        let last = scenario.horizon;
        if last - k0 >= STABLE_GAP_MIN_STEPS {
            let step = &record.steps[last];
            for i in sys.n_u()..sys.n() {
                stable.checked += 1;
                let gap = (step.eav_cov_diag[i] - step.open_cov_diag[i]).abs();
                worst_gap = worst_gap.max(gap);
                if gap > STABLE_GAP_TOL {
                    stable.failures += 1;
                }
            }
        }
    }
    stable.pass = stable.failures == 0;
    if stable.checked > 0 {
        stable.detail = format!("worst final gap to open loop {worst_gap:.3e}");
    }

    let overall_pass = !no_critical_trials && user.pass && unstable.pass && stable.pass;
    Ok(SecrecyReport {
        total_trials: records.len(),
        critical_trials: critical.len(),
        user_exact: user,
        unstable_divergence: unstable,
        stable_convergence: stable,
        no_critical_trials,
        overall_pass,
    })
}
