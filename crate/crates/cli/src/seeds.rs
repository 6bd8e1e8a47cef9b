//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is keyed by (master_seed, role, n, k,
//! trial) through a SplitMix64-style mix, so adding trials or sweep points
//! never shifts the streams of existing ones.

/// The independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Monte-Carlo set construction (trial-independent: pass trial = 0)
    Construction = 1,
    /// source block draws
    Source = 2,
    /// shared randomness C1, C2and the last-block spec
    Shared = 3,
    /// encoder-private stream M
    EncoderLocal = 4,
    /// DMC noise
    Channel = 5,
    /// decoder-side Ŝ draws
    Decoder = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the seed for one stream.
pub fn derive_seed(master: u64, role: Role, n: usize, k: usize, trial: u64) -> u64 {
    let mut h = splitmix(master);
    for v in [role as u64, n as u64, k as u64, trial] {
        h = splitmix(h ^ v);
    }
    h
}
