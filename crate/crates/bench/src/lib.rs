//! Inputs shared by the kernel benchmarks.

use exosir_core::ode::{CompartmentState, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RATES: ModelParams = ModelParams {
    beta_x: 0.01,
    beta_e: 0.3,
    gamma: 0.1,
};

pub fn seeded_start() -> CompartmentState {
    CompartmentState::new(0.999, 0.0009, 0.0001, 0.0).unwrap()
}

/// Three covariates in (0, 1) and a noisy linear response.
pub fn ols_dataset(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.gen()).collect()).collect();
    let y = (0..n)
        .map(|i| 0.2 + 0.6 * xs[0][i] + 0.6 * xs[1][i] - 0.4 * xs[2][i] + rng.gen_range(-0.1..0.1))
        .collect();
    (xs, y)
}
