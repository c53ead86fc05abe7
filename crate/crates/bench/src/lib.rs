//! Instance fixtures shared by the benchmarks.

use psp_core::harness::generate_demands;
use psp_core::{DemandSet, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Non-ideal pair.
pub const NON_IDEAL: (f64, f64) = (0.3571, 0.43103);
/// Near-ideal pair.
pub const NEAR_IDEAL: (f64, f64) = (0.35714, 0.75758);

pub fn params((ell, r): (f64, f64)) -> SystemParams {
    SystemParams::new(ell, r).expect("valid benchmark parameters")
}

pub fn instance(n: usize, pair: (f64, f64), seed: u64) -> (SystemParams, DemandSet) {
    let params = params(pair);
    let demands =
        generate_demands(n, &params, &mut ChaCha8Rng::seed_from_u64(seed)).expect("n >= 1");
    (params, demands)
}
