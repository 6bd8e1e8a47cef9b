//! Per-position conditional entropy estimation and polarized index sets.
//!
//! For each position j the estimator averages the binary entropy of the exact
//! SC posterior over realized prefixes, either by Monte Carlo or (at small n)
//! by full enumeration. Thresholding at `delta_n = 2^{-n^beta}` yields the
//! very-high-entropy sets (h > 1 - delta_n) and the high-entropy set
//! (h > delta_n), whose intersections partition the block into A1..A4.
//!
//! Sets are built offline once per (model, n) and cached so encoder and
//! decoder provably share identical sets; a set mismatch silently breaks
//! chaining.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{derive_marginals, CoordinationModel};
use crate::polar::{binary_entropy, polar_transform, sc_posterior_sweep, PairSource};

#[derive(Error, Debug)]
pub enum ConstructionError {
    #[error("chaining infeasible: |A3| = {a3} exceeds |A2| = {a2}")]
    ChainingInfeasible { a3: usize, a2: usize },
    #[error("channel input alphabet of size {0} unsupported (binary X only)")]
    UnsupportedAlphabet(usize),
    #[error("beta must lie in (0, 1/2), got {0}")]
    InvalidBeta(f64),
    #[error("block length {0} is not a power of two")]
    InvalidBlockLength(usize),
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),
}

/// Threshold `delta_n = 2^{-n^beta}`.
pub fn delta_n(n: usize, beta: f64) -> f64 {
    2f64.powf(-((n as f64).powf(beta)))
}

/// Per-position conditional entropy estimates for the auxiliary bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyProfile {
    /// estimates of H(V^j | V^{1:j-1}, S^{1:n})
    pub h_given_s: Vec<f64>,
    /// estimates of H(V^j | V^{1:j-1}, Y^{1:n})
    pub h_given_y: Vec<f64>,
    /// estimates of H(V^j | V^{1:j-1})
    pub h_unconditional: Vec<f64>,
    pub sample_count: usize,
    pub n: usize,
}

const EXACT_ENUM_LIMIT: u128 = 1 << 22;

fn exact_feasible(n: usize, w_size: usize) -> bool {
    if n > 8 {
        return false;
    }
    let combos = (w_size as u128).pow(n as u32) * (1u128 << n);
    combos <= EXACT_ENUM_LIMIT
}

/// Exact per-position entropies by enumerating every (b, w) block.
fn exact_pair_profile(source: &PairSource, n: usize) -> Vec<f64> {
    let w_size = source.w_alphabet_size();
    let mut acc = vec![0.0; n];
    let mut w = vec![0usize; n];
    let mut bits = vec![0u8; n];
    let w_combos = (w_size as u64).pow(n as u32);
    for w_pattern in 0..w_combos {
        let mut rem = w_pattern;
        for slot in w.iter_mut() {
            *slot = (rem % w_size as u64) as usize;
            rem /= w_size as u64;
        }
        'bits: for b_pattern in 0u64..(1 << n) {
            let mut weight = 1.0;
            for i in 0..n {
                bits[i] = ((b_pattern >> i) & 1) as u8;
                weight *= source.prob(bits[i], w[i]);
                if weight == 0.0 {
                    continue 'bits;
                }
            }
            let v = polar_transform(&bits).expect("n is a power of two");
            let posts = sc_posterior_sweep(&v, &w, source).expect("consistent lengths");
            for (a, p) in acc.iter_mut().zip(&posts) {
                *a += weight * binary_entropy(*p);
            }
        }
    }
    acc
}

/// Monte-Carlo per-position entropies: each sample is one realized block and
/// contributes an entropy observation to every position at once.
fn mc_pair_profile(source: &PairSource, n: usize, samples: usize, seed: u64) -> Vec<f64> {
    // fixed chunking keeps the result independent of worker count
    const CHUNK: usize = 128;
    let chunks: Vec<(usize, u64)> = (0..samples.div_ceil(CHUNK))
        .map(|c| (CHUNK.min(samples - c * CHUNK), seed.wrapping_add(c as u64)))
        .collect();
    let partials: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(count, chunk_seed)| {
            let mut rng = ChaCha12Rng::seed_from_u64(chunk_seed);
            let mut acc = vec![0.0; n];
            let mut bits = vec![0u8; n];
            let mut w = vec![0usize; n];
            for _ in 0..count {
                for i in 0..n {
                    let (b, wi) = source.sample(&mut rng);
                    bits[i] = b;
                    w[i] = wi;
                }
                let v = polar_transform(&bits).expect("n is a power of two");
                let posts = sc_posterior_sweep(&v, &w, source).expect("consistent lengths");
                for (a, p) in acc.iter_mut().zip(&posts) {
                    *a += binary_entropy(*p);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for partial in partials {
        for (t, p) in total.iter_mut().zip(partial) {
            *t += p;
        }
    }
    total.iter_mut().for_each(|t| *t /= samples as f64);
    total
}

/// Per-position entropy profile for one pair source; exact at small n.
pub fn pair_profile(source: &PairSource, n: usize, samples: usize, seed: u64) -> Vec<f64> {
    if exact_feasible(n, source.w_alphabet_size()) {
        exact_pair_profile(source, n)
    } else {
        mc_pair_profile(source, n, samples, seed)
    }
}

/// Estimate all three conditionings for the auxiliary bits of a model.
pub fn estimate_profile<R: Rng + ?Sized>(
    model: &CoordinationModel,
    n: usize,
    samples: usize,
    rng: &mut R,
) -> Result<EntropyProfile, ConstructionError> {
    if !n.is_power_of_two() {
        return Err(ConstructionError::InvalidBlockLength(n));
    }
    let marg = derive_marginals(model);
    let seeds: [u64; 3] = [rng.random(), rng.random(), rng.random()];
    Ok(EntropyProfile {
        h_given_s: pair_profile(&marg.pair_us(), n, samples, seeds[0]),
        h_given_y: pair_profile(&marg.pair_uy(), n, samples, seeds[1]),
        h_unconditional: pair_profile(&marg.pair_u(), n, samples, seeds[2]),
        sample_count: samples,
        n,
    })
}

/// Polarized index sets and the A1..A4 partition (0-based positions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    pub n: usize,
    pub beta: f64,
    pub delta_n: f64,
    pub v_v: Vec<usize>,
    pub v_v_given_s: Vec<usize>,
    pub v_v_given_y: Vec<usize>,
    pub h_v_given_y: Vec<usize>,
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub a3: Vec<usize>,
    pub a4: Vec<usize>,
    /// injective image of a3 inside a2; the chaining pad carriers,
    /// paired with a3 positionally
    pub a3_prime: Vec<usize>,
}

fn above(values: &[f64], threshold: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter_map(|(j, &h)| (h > threshold).then_some(j))
        .collect()
}

/// Apply the entropy thresholds and build the partition with the chaining
/// injection. A2 members with the largest h-given-y values are picked as the
/// pad carriers: they are the hardest to decode from Y alone and thus the
/// cheapest to sacrifice. Ties break toward the lower index.
pub fn build_sets(profile: &EntropyProfile, beta: f64) -> Result<IndexSets, ConstructionError> {
    let mut sets = build_sets_unchecked(profile, beta)?;
    if sets.a3.len() > sets.a2.len() {
        return Err(ConstructionError::ChainingInfeasible {
            a3: sets.a3.len(),
            a2: sets.a2.len(),
        });
    }
    sets.a3_prime = rank_by_h_given_y(&sets.a2, &profile.h_given_y, sets.a3.len());
    Ok(sets)
}

/// Like [`build_sets`], but an infeasible partition (|A3| > |A2|) is not an
/// error: the chaining injection is truncated to |A2| carriers and the excess
/// A3 positions are simply never conveyed. Decoders then have to guess them,
/// which is the failure mode negative-control experiments document. Never use
/// this for a model inside the region.
pub fn build_sets_forced(
    profile: &EntropyProfile,
    beta: f64,
) -> Result<IndexSets, ConstructionError> {
    let mut sets = build_sets_unchecked(profile, beta)?;
    let carriers = sets.a2.len().min(sets.a3.len());
    sets.a3_prime = rank_by_h_given_y(&sets.a2, &profile.h_given_y, carriers);
    Ok(sets)
}

/// The `count` members of `candidates` with the largest h-given-y, sorted
/// ascending by index; ties break toward the lower index.
fn rank_by_h_given_y(candidates: &[usize], h_given_y: &[f64], count: usize) -> Vec<usize> {
    let mut ranked: Vec<usize> = candidates.to_vec();
    ranked.sort_by(|&i, &j| {
        h_given_y[j]
            .partial_cmp(&h_given_y[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut picked = ranked[..count].to_vec();
    picked.sort_unstable();
    picked
}

/// Partition without the feasibility check; a3_prime left empty.
fn build_sets_unchecked(
    profile: &EntropyProfile,
    beta: f64,
) -> Result<IndexSets, ConstructionError> {
    if !(0.0 < beta && beta < 0.5) {
        return Err(ConstructionError::InvalidBeta(beta));
    }
    let n = profile.n;
    let delta = delta_n(n, beta);
    let v_v = above(&profile.h_unconditional, 1.0 - delta);
    let v_v_given_s = above(&profile.h_given_s, 1.0 - delta);
    let v_v_given_y = above(&profile.h_given_y, 1.0 - delta);
    let h_v_given_y = above(&profile.h_given_y, delta);
    let in_vs = membership(n, &v_v_given_s);
    let in_hy = membership(n, &h_v_given_y);
    let (mut a1, mut a2, mut a3, mut a4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for j in 0..n {
        match (in_vs[j], in_hy[j]) {
            (true, true) => a1.push(j),
            (true, false) => a2.push(j),
            (false, true) => a3.push(j),
            (false, false) => a4.push(j),
        }
    }
    Ok(IndexSets {
        n,
        beta,
        delta_n: delta,
        v_v,
        v_v_given_s,
        v_v_given_y,
        h_v_given_y,
        a1,
        a2,
        a3,
        a4,
        a3_prime: Vec::new(),
    })
}

pub fn membership(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &j in set {
        m[j] = true;
    }
    m
}

/// Index sets for the last-block channel code over the pair (X, Y) with
/// Z = X * G_n: the very-high-entropy set of Z, the high-entropy set given Y,
/// and the information set V_X ∩ H_{X|Y}^c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConstruction {
    pub n: usize,
    pub beta: f64,
    pub delta_n: f64,
    pub v_x: Vec<usize>,
    pub h_x_given_y: Vec<usize>,
    pub info_set: Vec<usize>,
    /// per-position H(Z^j | Z^{1:j-1}, Y^{1:n}) estimates, kept for
    /// reliability-ordering the information set
    pub h_given_y: Vec<f64>,
    pub h_unconditional: Vec<f64>,
}

/// Same machinery applied to (X, Y); binary X only.
pub fn build_x_sets<R: Rng + ?Sized>(
    model: &CoordinationModel,
    n: usize,
    samples: usize,
    beta: f64,
    rng: &mut R,
) -> Result<ChannelConstruction, ConstructionError> {
    if !(0.0 < beta && beta < 0.5) {
        return Err(ConstructionError::InvalidBeta(beta));
    }
    if !n.is_power_of_two() {
        return Err(ConstructionError::InvalidBlockLength(n));
    }
    let marg = derive_marginals(model);
    let pair_xy = marg
        .pair_xy()
        .ok_or(ConstructionError::UnsupportedAlphabet(model.sizes().x))?;
    let pair_x = marg.pair_x().expect("binary X checked above");
    let h_given_y = pair_profile(&pair_xy, n, samples, rng.random());
    let h_unconditional = pair_profile(&pair_x, n, samples, rng.random());
    let delta = delta_n(n, beta);
    let v_x = above(&h_unconditional, 1.0 - delta);
    let h_x_given_y = above(&h_given_y, delta);
    let in_h = membership(n, &h_x_given_y);
    let info_set: Vec<usize> = v_x.iter().copied().filter(|&j| !in_h[j]).collect();
    Ok(ChannelConstruction { n, beta, delta_n: delta, v_x, h_x_given_y, info_set, h_given_y, h_unconditional })
}

/// Versioned construction record shared between encoder and decoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionCache {
    pub schema_version: u32,
    pub model_hash: String,
    pub n: usize,
    pub beta: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub profile: EntropyProfile,
    pub sets: IndexSets,
    /// absent when X is non-binary (chain-only runs with genie decoding)
    pub x_sets: Option<ChannelConstruction>,
}

pub const CACHE_SCHEMA_VERSION: u32 = 1;

/// Stable hash of the model tables (canonical JSON, SHA-256 hex).
pub fn model_hash(model: &CoordinationModel) -> String {
    let bytes = serde_json::to_vec(model).expect("model serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Build the full construction record for a (model, n) pair.
pub fn construct(
    model: &CoordinationModel,
    n: usize,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<ConstructionCache, ConstructionError> {
    construct_with(model, n, beta, samples, seed, false)
}

/// [`construct`] with an escape hatch: `forced` uses [`build_sets_forced`]
/// so negative-control models outside the region can still be run.
pub fn construct_with(
    model: &CoordinationModel,
    n: usize,
    beta: f64,
    samples: usize,
    seed: u64,
    forced: bool,
) -> Result<ConstructionCache, ConstructionError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let profile = estimate_profile(model, n, samples, &mut rng)?;
    let sets = if forced {
        build_sets_forced(&profile, beta)?
    } else {
        build_sets(&profile, beta)?
    };
    let x_sets = match build_x_sets(model, n, samples, beta, &mut rng) {
        Ok(x) => Some(x),
        Err(ConstructionError::UnsupportedAlphabet(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ConstructionCache {
        schema_version: CACHE_SCHEMA_VERSION,
        model_hash: model_hash(model),
        n,
        beta,
        sample_count: samples,
        seed,
        profile,
        sets,
        x_sets,
    })
}

impl ConstructionCache {
    pub fn save(&self, path: &std::path::Path) -> Result<(), ConstructionError> {
        let data = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, data)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConstructionError> {
        let data = std::fs::read(path)?;
        let cache: Self = serde_json::from_slice(&data)?;
        if cache.schema_version != CACHE_SCHEMA_VERSION {
            return Err(ConstructionError::CacheMismatch(format!(
                "schema version {} (expected {})",
                cache.schema_version, CACHE_SCHEMA_VERSION
            )));
        }
        Ok(cache)
    }

    /// Verify this cache matches a model and parameters before reuse.
    pub fn validate_for(
        &self,
        model: &CoordinationModel,
        n: usize,
        beta: f64,
    ) -> Result<(), ConstructionError> {
        if self.model_hash != model_hash(model) {
            return Err(ConstructionError::CacheMismatch("model hash differs".into()));
        }
        if self.n != n || self.beta != beta {
            return Err(ConstructionError::CacheMismatch(format!(
                "built for (n={}, beta={}), requested (n={n}, beta={beta})",
                self.n, self.beta
            )));
        }
        Ok(())
    }
}
