//! Scenario-driven command line over the library: design a code, run
//! Monte-Carlo batches, emit bound trajectories, check the secrecy verdict,
//! compare weightings, and print gain-limit diagnostics.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use statesec::harness::{emit_bound_csv, emit_compare_csv, emit_csv, run_monte_carlo, run_trial};
use statesec::{
    bound_trajectory, design_code, gain_limit_diagnostics, steady_info_matrix, Error, Mat, Result,
    Scenario,
};

#[derive(Parser)]
#[command(
    name = "statesec",
    version,
    about = "Design and evaluate state-secrecy codes for linear systems over lossy channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the designed weighting L, H = A − L, Y∞, P_s∞, and eig(L).
    Design(ScenarioArgs),
    /// Run the Monte-Carlo batch and write per-step error covariances to CSV.
    Simulate {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Write one trial's anchored bound trajectory (covariance and dual
    /// information diagonals, plus the open-loop reference) to CSV.
    Bound {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Trial whose channel trace anchors the bound.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Anchor step; must equal the trial's first critical step.
        #[arg(long)]
        k0: Option<usize>,
    },
    /// Run the batch and print the three-condition secrecy verdict.
    Verify(ScenarioArgs),
    /// Run the full and diagonal-baseline weightings on the same scenario
    /// and write a side-by-side CSV (ignores the scenario's own variant).
    Compare {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the open-loop gain limits K∞ = −(L')⁻¹H' and (L')⁻¹ and how
    /// closely the information recursion approaches them by the horizon.
    Diagnostics(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Override the scenario's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the scenario's horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Override the scenario's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the code variant: full, diagonal_baseline, or passthrough.
    #[arg(long)]
    variant: Option<String>,
    /// Force a critical event at step 0 (user receives and is acknowledged,
    /// eavesdropper misses).
    #[arg(long)]
    force_critical: bool,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let mut scenario = Scenario::load(&self.scenario)?;
        if let Some(trials) = self.trials {
            if trials == 0 {
                return Err(Error::InvalidArgument("--trials must be at least 1".into()));
            }
            scenario.trials = trials;
        }
        if let Some(horizon) = self.horizon {
            if horizon == 0 {
                return Err(Error::InvalidArgument(
                    "--horizon must be at least 1".into(),
                ));
            }
            scenario.horizon = horizon;
        }
        if let Some(seed) = self.seed {
            scenario.base_seed = seed;
        }
        if let Some(variant) = &self.variant {
            scenario.variant = variant.parse()?;
        }
        if self.force_critical {
            scenario.channel.force_critical_at_zero = true;
        }
        Ok(scenario)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Design(args) => design(&args.load()?),
        Command::Simulate { args, output } => simulate(&args.load()?, &output),
        Command::Bound {
            args,
            output,
            trial,
            k0,
        } => bound(&args.load()?, &output, trial, k0),
        Command::Verify(args) => verify(&args.load()?),
        Command::Compare { args, output } => compare(&args.load()?, &output),
        Command::Diagnostics(args) => diagnostics(&args.load()?),
    }
}

fn print_mat(label: &str, m: &Mat) {
    println!("{label} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:>10.6}", m[(i, j)]))
            .collect();
        println!("  [ {} ]", row.join(" "));
    }
}

fn design(scenario: &Scenario) -> Result<ExitCode> {
    let code = design_code(&scenario.sys, scenario.variant)?;
    let steady = steady_info_matrix(&scenario.sys)?;
    println!("variant: {}", code.variant().as_str());
    print_mat("L", code.l());
    print_mat("H = A - L", code.h());
    print_mat("Y_inf", code.y_inf());
    print_mat("P_s_inf", &steady.p_s_inf);
    let mut eigs: Vec<_> = code.l().complex_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let rendered: Vec<String> = eigs
        .iter()
        .map(|z| {
            if z.im.abs() < 1e-12 {
                format!("{:.6}", z.re)
            } else {
                format!("{:.6}{:+.6}i", z.re, z.im)
            }
        })
        .collect();
    println!("eig(L) = {}", rendered.join(", "));
    Ok(ExitCode::SUCCESS)
}

/// Surface an all-trials-failed batch as the underlying numerical error.
fn first_failure(failures: Vec<(usize, Error)>) -> Error {
    failures
        .into_iter()
        .next()
        .map(|(_, e)| e)
        .expect("caller checked failures is nonempty")
}

fn simulate(scenario: &Scenario, output: &Path) -> Result<ExitCode> {
    let (summary, records) = run_monte_carlo(scenario)?;
    if records.is_empty() {
        return Err(first_failure(summary.failures));
    }
    let rows = emit_csv(&records, output)?;
    println!(
        "trials run: {}/{}",
        summary.trials_run, summary.trials_requested
    );
    if !summary.failures.is_empty() {
        println!("failed trials: {}", summary.failures.len());
    }
    println!("critical trials: {}", summary.critical_trials);
    if let Some(mean) = summary.mean_first_critical {
        println!("mean first critical step: {mean:.3}");
    }
    println!("wrote {rows} rows to {}", output.display());
    Ok(ExitCode::SUCCESS)
}

fn bound(scenario: &Scenario, output: &Path, trial: usize, k0: Option<usize>) -> Result<ExitCode> {
    if trial >= scenario.trials {
        return Err(Error::InvalidArgument(format!(
            "--trial {trial} out of range: scenario has {} trials",
            scenario.trials
        )));
    }
    let code = design_code(&scenario.sys, scenario.variant)?;
    if !code.has_invertible_weighting() {
        return Err(Error::InvalidArgument(
            "the passthrough variant has a singular weighting and no bound recursion".into(),
        ));
    }
    let record = run_trial(scenario, trial)?;
    let anchor_step = record.first_critical.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "trial {trial} has no critical event within horizon {}; \
             try --force-critical or another --trial",
            scenario.horizon
        ))
    })?;
    if let Some(requested) = k0 {
        if requested != anchor_step {
            return Err(Error::InvalidArgument(format!(
                "--k0 {requested} does not match trial {trial}'s first critical step \
                 {anchor_step}; omit --k0 or pass --k0 {anchor_step}"
            )));
        }
    }
    let anchor = record
        .anchor_cov
        .as_ref()
        .expect("critical trials record an anchor covariance");
    let traj = bound_trajectory(anchor, anchor_step, scenario.horizon, &code, &scenario.sys)?;
    let rows = emit_bound_csv(&traj, &scenario.sys, output)?;
    println!("trial {trial}: first critical step k0 = {anchor_step}");
    println!("wrote {rows} rows to {}", output.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(scenario: &Scenario) -> Result<ExitCode> {
    let (summary, records) = run_monte_carlo(scenario)?;
    if records.is_empty() {
        return Err(first_failure(summary.failures));
    }
    if !summary.failures.is_empty() {
        println!(
            "note: {} of {} trials failed numerically",
            summary.failures.len(),
            summary.trials_requested
        );
    }
    println!("{}", summary.secrecy);
    if summary.secrecy.overall_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn compare(scenario: &Scenario, output: &Path) -> Result<ExitCode> {
    use statesec::CodeVariant;
    let mut runs = Vec::new();
    for variant in [CodeVariant::Full, CodeVariant::DiagonalBaseline] {
        let mut sc = scenario.clone();
        sc.variant = variant;
        let (summary, records) = run_monte_carlo(&sc)?;
        if records.is_empty() {
            return Err(first_failure(summary.failures));
        }
        runs.push((variant, summary, records));
    }
    let batches: Vec<(&str, &[statesec::TrialRecord])> = runs
        .iter()
        .map(|(v, _, r)| (v.as_str(), r.as_slice()))
        .collect();
    let rows = emit_compare_csv(&batches, output)?;
    for (variant, summary, _) in &runs {
        println!("=== {} ===", variant.as_str());
        println!("{}", summary.secrecy);
    }
    println!("wrote {rows} rows to {}", output.display());
    Ok(ExitCode::SUCCESS)
}

fn diagnostics(scenario: &Scenario) -> Result<ExitCode> {
    let limits = gain_limit_diagnostics(&scenario.sys, scenario.horizon)?;
    println!("horizon: {}", scenario.horizon);
    print_mat("K at horizon", &limits.k_gain);
    print_mat("K_inf = -(L')^-1 H'", &limits.k_limit);
    print_mat("(L')^-1", &limits.closed_map_limit);
    println!("|K - K_inf|_max            = {:.3e}", limits.k_gain_error);
    println!(
        "|(F - K F) - (L')^-1|_max  = {:.3e}",
        limits.closed_map_error
    );
    Ok(ExitCode::SUCCESS)
}
