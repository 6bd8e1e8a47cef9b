//! Shared fixtures for the criterion benches.

use coordpolar::model::{derive_marginals, reference_model};
use coordpolar::polar::PairSource;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// (U,S) pair source of the reference model.
pub fn reference_pair_us() -> PairSource {
    derive_marginals(&reference_model()).pair_us()
}

/// Deterministic side-information block of length n for the reference model.
pub fn reference_side_block(n: usize, seed: u64) -> Vec<usize> {
    let source = reference_pair_us();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| source.sample(&mut rng).1).collect()
}
