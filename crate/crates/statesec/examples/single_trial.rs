//! Walk one trial step by step with the raw building blocks: propagate the
//! state, encode a packet against the last acknowledged reception, decode on
//! the user side, and run the eavesdropper's exact filter on intercepted
//! packets. Prints a per-step table of what each party knows.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use statesec::estimators::EavesdropperFilter;
use statesec::{
    decode, design_code, effective_user_outcome, encode, process_ack, validate_system,
    ChannelModel, ChannelTrace, CodeVariant, DecoderState, EncoderState, Mat, Vector,
};

fn main() -> statesec::Result<()> {
    let a = Mat::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.7]);
    let q = Mat::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
    let sys = validate_system(&a, &q, &q)?;
    let code = design_code(&sys, CodeVariant::Full)?;
    let horizon = 14;

    let channel = ChannelModel::reliable(0.7, 0.1, 0.1, 0.1);
    let trace = ChannelTrace::sample(&channel, horizon, 42)?;
    println!(
        "channel trace (seed 42): first critical step = {:?}\n",
        trace.first_critical_time()
    );

    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let chol = q.clone().cholesky().unwrap().l();
    let mut x = Vector::zeros(2);
    let mut enc = EncoderState::new(2);
    let mut dec = DecoderState::new(2);
    let mut filter = EavesdropperFilter::new(2);

    println!("   k  u e      packet z_k        user error   eavesdropper cov diag");
    for k in 0..=horizon {
        let w: Vector = Vector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
        x = if k == 0 {
            &chol * w
        } else {
            &a * &x + &chol * w
        };

        let out = trace.get(k);
        let z = encode(&enc, &x, k as i64, &code)?;

        let mut user_err = f64::NAN;
        if out.gamma_u {
            let (decoded, next) = decode(&dec, &z, k as i64, true, &code)?;
            dec = next;
            user_err = (decoded.unwrap() - &x).amax();
        }

        let view = out.gamma_e.then(|| z.value().clone());
        filter = filter.step(
            view.as_ref(),
            out.gamma_e,
            effective_user_outcome(out.gamma_u, out.gamma_a),
            k as i64,
            &code,
            &sys,
        )?;
        enc = process_ack(&enc, k as i64, &x, out.gamma_u, out.gamma_a);

        let cov = filter.state_cov();
        println!(
            "  {k:>2}  {} {}  [{:>8.3} {:>8.3}]   {:>11}   [{:>9.3} {:>8.3}]",
            out.gamma_u as u8,
            out.gamma_e as u8,
            z.value()[0],
            z.value()[1],
            if user_err.is_nan() {
                "dropped".to_string()
            } else {
                format!("{user_err:.1e}")
            },
            cov[(0, 0)],
            cov[(1, 1)],
        );
    }
    println!(
        "\nafter a critical event the eavesdropper's unstable variance grows ~1.44x\n\
         per step while the user decodes exactly at every reception"
    );
    Ok(())
}
