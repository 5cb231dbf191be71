//! The open-loop information recursion Y_k drives a time-varying gain
//! K_k = G_k (G_k + W)⁻¹. As Y_k → Y∞ the gain converges to the closed form
//! K∞ = −(L')⁻¹H' and the closed map F − K_k F to (L')⁻¹ — the same L the
//! code is built from. Watch both errors shrink with the horizon.

use statesec::{gain_limit_diagnostics, validate_system, Mat};

fn main() -> statesec::Result<()> {
    let a = Mat::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.7]);
    let q = Mat::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
    let sys = validate_system(&a, &q, &q)?;

    println!(" horizon   |K - K_inf|     |(F - K F) - (L')^-1|");
    for horizon in [1, 2, 5, 10, 20, 40, 80] {
        let limits = gain_limit_diagnostics(&sys, horizon)?;
        println!(
            "  {horizon:>5}    {:>11.4e}    {:>11.4e}",
            limits.k_gain_error, limits.closed_map_error
        );
    }

    let limits = gain_limit_diagnostics(&sys, 80)?;
    println!("\nK at horizon 80 =");
    for i in 0..2 {
        println!(
            "  [ {:>9.6} {:>9.6} ]",
            limits.k_gain[(i, 0)],
            limits.k_gain[(i, 1)]
        );
    }
    println!("K_inf row for the unstable state is exactly zero: interceptions");
    println!("carry no fresh information about unstable states in the limit");
    Ok(())
}
