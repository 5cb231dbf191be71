//! Channel traces are first-class: sample one from the joint drop model,
//! round-trip it through the text format, inspect its critical events, and
//! replay a full trial on a hand-edited trace. Replaying lets experiments
//! pin the exact interception pattern instead of sampling it.

use statesec::harness::run_trial_on_trace;
use statesec::{
    validate_system, ChannelModel, ChannelTrace, CodeVariant, Mat, Scenario, StepOutcome,
};

fn main() -> statesec::Result<()> {
    let channel = ChannelModel::reliable(0.7, 0.1, 0.1, 0.1);
    let trace = ChannelTrace::sample(&channel, 20, 99)?;
    println!("sampled trace (seed 99), {} steps:", trace.len());
    let text = trace.to_text();
    print!("{text}");
    println!(
        "first critical step: {:?}, critical events: {}",
        trace.first_critical_time(),
        trace.critical_event_count()
    );

    let parsed = ChannelTrace::from_text(&text)?;
    assert_eq!(parsed.len(), trace.len());
    println!("text round-trip preserves all {} outcomes\n", trace.len());

    // A designed trace: the user receives every step, the eavesdropper
    // intercepts everything until it misses step 3 — one critical event,
    // then full interception again.
    let steps: Vec<StepOutcome> = (0..=40)
        .map(|k| StepOutcome {
            gamma_u: true,
            gamma_e: k != 3,
            gamma_a: true,
        })
        .collect();
    let designed = ChannelTrace::from_outcomes(steps, 0);

    let a = Mat::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.7]);
    let q = Mat::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
    let sys = validate_system(&a, &q, &q)?;
    let scenario = Scenario::new(sys, channel, CodeVariant::Full, 40, 1, 7)?;
    let record = run_trial_on_trace(&scenario, 0, &designed)?;

    println!("replay on the designed trace (miss only at k = 3):");
    println!("   k   eavesdropper var(x0)   step ratio");
    for k in [4, 8, 16, 24, 32, 40] {
        let step = &record.steps[k];
        let prev = &record.steps[k - 1];
        println!(
            "  {k:>2}      {:>12.5e}      {:>8.5}",
            step.eav_cov_diag[0],
            step.eav_cov_diag[0] / prev.eav_cov_diag[0]
        );
    }
    println!("\none missed packet is unrecoverable: every later interception still");
    println!("references the step the eavesdropper never saw, so the unstable");
    println!("variance growth settles onto 1.44 = 1.2^2 per step");
    Ok(())
}
