//! Polar-coded empirical coordination over a noisy channel.
//!
//! The crate is organized bottom-up:
//!
//! - [`polar`]: the transform, exact successive-cancellation posteriors for
//!   iid pair sources, randomized sampling / ML decoding, and a brute-force
//!   enumeration oracle.
//! - [`model`]: the two-node coordination model (source S, auxiliary U,
//!   channel input X, output Y, reconstruction Ŝ), derived marginals and the
//!   inner-bound membership test.
//! - [`construction`]: per-position entropy profiles, the polarized index
//!   sets A1..A4 with the chaining injection, and the versioned construction
//!   cache.
//! - [`metrics`]: empirical types, total variation (unhalved L1), KL, the
//!   mixing / contraction lemma checks and the finite-n bound proxies.
//! - [`asym`]: the last-block polar channel code with input shaping.
//! - [`chain`]: block-Markov chaining encoder/decoder and the common
//!   randomness ledger.

pub mod asym;
pub mod chain;
pub mod construction;
pub mod metrics;
pub mod model;
pub mod polar;

pub use asym::{
    channel_decode, channel_decode_full, channel_encode, AsymError, ChannelCodeSpec,
    ChannelDecodeResult, PositionRole,
};
pub use chain::{
    common_randomness_rate, decode_chain, encode_chain, encode_chain_genie, BlockChain,
    BlockTrace, ChainError, DecoderOutput, EncoderOutput, LastBlockMode, RandomnessLedger,
    RandomnessSources,
};
pub use construction::{
    build_sets, build_sets_forced, build_x_sets, construct, construct_with, delta_n,
    estimate_profile, model_hash, pair_profile, ChannelConstruction, ConstructionCache,
    ConstructionError, EntropyProfile, IndexSets,
};
pub use metrics::{
    is_typical, kl_divergence, lemma1_proxy, lemma_mixing_check, marginal_contraction_check,
    mixed_type, pinsker_block_bound, pinsker_bound, tv_distance, EmpiricalType, MetricsError,
};
pub use model::{
    bsc_chain_model, build_model, check_region_membership, derive_marginals, identity_model,
    reference_model, Alphabets, CoordinationModel, DerivedMarginals, ModelError, RegionCheck,
};
pub use polar::{
    binary_entropy, brute_posterior, polar_transform, polar_transform_inplace, sc_decode,
    sc_posterior, sc_posterior_sweep, sc_sample, BitBlock, FrozenMap, PairSource, PolarError,
    ScSweep,
};
