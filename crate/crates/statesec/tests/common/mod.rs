//! Helpers shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use statesec::{
    matops, validate_system, ChannelModel, CodeVariant, Mat, PartitionedSystem, Scenario,
};

/// The pinned two-state demonstration system: one unstable mode (1.2), one
/// stable mode (0.7), strongly cross-correlated noise.
pub fn demo_system() -> PartitionedSystem {
    let a = Mat::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.7]);
    let q = Mat::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
    validate_system(&a, &q, &q).unwrap()
}

/// The demo system over the pinned joint channel (p11 = 0.7, others 0.1).
pub fn demo_scenario(variant: CodeVariant, horizon: usize, trials: usize, seed: u64) -> Scenario {
    let channel = ChannelModel::reliable(0.7, 0.1, 0.1, 0.1);
    Scenario::new(demo_system(), channel, variant, horizon, trials, seed).unwrap()
}

/// Random symmetric positive-definite matrix with eigenvalues in roughly
/// [0.5, n + 0.5].
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let r = Mat::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    matops::symmetrize(&(&r * r.transpose())) + Mat::identity(n, n) * 0.5
}

/// Random valid system of dimension 1..=4: real-Jordan block-diagonal A
/// with unstable magnitudes in [1.05, 1.6] and stable ones in [0.25, 0.95],
/// occasionally as 2×2 rotation blocks.
pub fn random_system(rng: &mut ChaCha8Rng) -> PartitionedSystem {
    let n = rng.random_range(1..=4);
    let n_u = rng.random_range(0..=n);
    let mut a = Mat::zeros(n, n);
    let mut i = 0;
    while i < n {
        let unstable = i < n_u;
        let left_in_block = if unstable { n_u - i } else { n - i };
        let mag = if unstable {
            rng.random_range(1.05..1.6)
        } else {
            rng.random_range(0.25..0.95)
        };
        if left_in_block >= 2 && rng.random::<f64>() < 0.3 {
            let theta: f64 = rng.random_range(0.3..2.8);
            let (re, im) = (mag * theta.cos(), mag * theta.sin());
            a[(i, i)] = re;
            a[(i, i + 1)] = im;
            a[(i + 1, i)] = -im;
            a[(i + 1, i + 1)] = re;
            i += 2;
        } else {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            a[(i, i)] = sign * mag;
            i += 1;
        }
    }
    let q = random_spd(rng, n);
    let sigma0 = random_spd(rng, n);
    validate_system(&a, &q, &sigma0).unwrap()
}
