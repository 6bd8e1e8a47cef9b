//! Block-Markov chaining encoder and reverse-order decoder.
//!
//! The encoder processes k source blocks. In every block the frozen picture
//! is: A1 carries the shared bits C1 (the same bits in every block), A'3
//! carries the previous block's A3 one-time-padded with C2, the rest of A2
//! carries encoder-local uniform bits, and A3 ∪ A4 is sampled from the exact
//! SC posterior given the source block. Block k+1 is the channel code of
//! [`crate::asym`] carrying the payload Ṽ_k[A3].
//!
//! The decoder runs in reverse: it first decodes block k+1 to recover
//! Ṽ_k[A3], then walks i = k..1 with A1 and A3 frozen and A2 ∪ A4 decided by
//! ML successive cancellation against Y_i; block i-1's A3 is unpadded from
//! block i's decoded A'3.
//!
//! Every bit drawn from C1, C2 or the local stream M is recorded in a ledger
//! so randomness rates can be measured instead of estimated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asym::{channel_decode, channel_encode, AsymError, ChannelCodeSpec};
use crate::construction::{ConstructionCache, IndexSets};
use crate::model::{derive_marginals, CoordinationModel};
use crate::polar::{polar_transform, sc_decode, sc_sample, FrozenMap, PolarError};

#[derive(Error, Debug)]
pub enum ChainError {
    #[error("need {expected} source blocks of length {n}, got block {block} with length {got}")]
    SourceLengthMismatch { block: usize, got: usize, expected: usize, n: usize },
    #[error("expected {expected} received blocks, got {got}")]
    BlockCountMismatch { got: usize, expected: usize },
    #[error("c1 has {c1} bits (|A1| = {a1}), c2 has {c2} bits (|A3| = {a3})")]
    RandomnessSizeMismatch { c1: usize, a1: usize, c2: usize, a3: usize },
    #[error("payload |A3| = {need} exceeds last-block capacity {capacity}; use genie mode or larger n")]
    LastBlockInfeasible { need: usize, capacity: usize },
    #[error("construction cache has no channel code (non-binary X); use genie mode")]
    MissingChannelCode,
    #[error("genie payload has {got} bits, |A3| = {expected}")]
    GeniePayloadMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Asym(#[from] AsymError),
    #[error(transparent)]
    Polar(#[from] PolarError),
}

/// Shared and local randomness for one chain run.
///
/// `c1` and `c2` are identical at both nodes; `local_seed` drives the
/// encoder-private stream M, which the decoder never reads; `shared_seed`
/// lets both nodes instantiate the identical last-block [`ChannelCodeSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomnessSources {
    pub c1: Vec<u8>,
    pub c2: Vec<u8>,
    pub local_seed: u64,
    pub shared_seed: u64,
}

impl RandomnessSources {
    /// Draw C1 and C2 uniformly, sized for the given sets.
    pub fn draw<R: Rng + ?Sized>(sets: &IndexSets, rng_shared: &mut R, local_seed: u64) -> Self {
        Self {
            c1: (0..sets.a1.len()).map(|_| u8::from(rng_shared.random::<bool>())).collect(),
            c2: (0..sets.a3.len()).map(|_| u8::from(rng_shared.random::<bool>())).collect(),
            local_seed,
            shared_seed: rng_shared.random(),
        }
    }

    fn check(&self, sets: &IndexSets) -> Result<(), ChainError> {
        if self.c1.len() != sets.a1.len() || self.c2.len() != sets.a3.len() {
            return Err(ChainError::RandomnessSizeMismatch {
                c1: self.c1.len(),
                a1: sets.a1.len(),
                c2: self.c2.len(),
                a3: sets.a3.len(),
            });
        }
        Ok(())
    }
}

/// Where a batch of random bits came from and where it went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RandStream {
    C1,
    C2,
    LocalM,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stream: RandStream,
    /// 1-based block index; block k+1 entries come from the channel code
    pub block: usize,
    pub destination: String,
    pub bits: usize,
}

/// Exact record of randomness consumption across a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomnessLedger {
    pub entries: Vec<LedgerEntry>,
}

impl RandomnessLedger {
    fn push(&mut self, stream: RandStream, block: usize, destination: &str, bits: usize) {
        if bits > 0 {
            self.entries.push(LedgerEntry {
                stream,
                block,
                destination: destination.to_owned(),
                bits,
            });
        }
    }

    /// Total bits charged to a stream. C1 is counted once even though its
    /// bits are reused every block.
    pub fn total(&self, stream: RandStream) -> usize {
        let mut seen_c1 = false;
        self.entries
            .iter()
            .filter(|e| e.stream == stream)
            .filter(|e| {
                if e.stream == RandStream::C1 {
                    let first = !seen_c1;
                    seen_c1 = true;
                    first
                } else {
                    true
                }
            })
            .map(|e| e.bits)
            .sum()
    }
}

/// Everything produced and consumed along one run; encoder fields are filled
/// by [`encode_chain`], decoder fields by [`decode_chain`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BlockChain {
    pub n: usize,
    pub k: usize,
    /// k source blocks
    pub s: Vec<Vec<usize>>,
    /// k encoder bit blocks Ṽ_i and Ũ_i = Ṽ_i·G_n
    pub v_tilde: Vec<Vec<u8>>,
    pub u_tilde: Vec<Vec<u8>>,
    /// k+1 channel input blocks (symbols)
    pub x: Vec<Vec<usize>>,
    /// k+1 received blocks (symbols)
    pub y: Vec<Vec<usize>>,
    /// k decoder bit blocks V̂_i and Û_i
    pub v_hat: Vec<Vec<u8>>,
    pub u_hat: Vec<Vec<u8>>,
    /// k+1 reconstruction blocks (block k+1 uses the all-zeros Û placeholder)
    pub s_hat: Vec<Vec<usize>>,
    pub ledger: RandomnessLedger,
}

/// Encoder output: the partially filled chain plus the k+1 channel inputs.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    pub chain: BlockChain,
    /// `None` when the last block was genie-filled instead of channel-coded
    pub spec: Option<ChannelCodeSpec>,
}

fn build_channel_spec(
    cache: &ConstructionCache,
    rand: &RandomnessSources,
) -> Result<ChannelCodeSpec, ChainError> {
    let x_sets = cache.x_sets.as_ref().ok_or(ChainError::MissingChannelCode)?;
    let need = cache.sets.a3.len();
    let capacity = x_sets.info_set.len();
    if need > capacity {
        return Err(ChainError::LastBlockInfeasible { need, capacity });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(rand.shared_seed);
    Ok(ChannelCodeSpec::new(x_sets.clone(), need, &mut rng)?)
}

fn sample_symbol<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> usize {
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for (sym, &p) in pmf.iter().enumerate() {
        acc += p;
        if draw < acc {
            return sym;
        }
    }
    pmf.len() - 1
}

/// Algorithm 1: encode k source blocks and the chained channel-code block.
pub fn encode_chain(
    model: &CoordinationModel,
    cache: &ConstructionCache,
    source_blocks: &[Vec<usize>],
    rand: &RandomnessSources,
) -> Result<EncoderOutput, ChainError> {
    encode_chain_inner(model, cache, source_blocks, rand, true)
}

/// [`encode_chain`] without the last-block channel code: block k+1 is filled
/// iid from the X marginal. Encoder counterpart of [`LastBlockMode::Genie`],
/// usable even when the channel code is infeasible for the model.
pub fn encode_chain_genie(
    model: &CoordinationModel,
    cache: &ConstructionCache,
    source_blocks: &[Vec<usize>],
    rand: &RandomnessSources,
) -> Result<EncoderOutput, ChainError> {
    encode_chain_inner(model, cache, source_blocks, rand, false)
}

fn encode_chain_inner(
    model: &CoordinationModel,
    cache: &ConstructionCache,
    source_blocks: &[Vec<usize>],
    rand: &RandomnessSources,
    channel_code: bool,
) -> Result<EncoderOutput, ChainError> {
    let sets = &cache.sets;
    let n = sets.n;
    let k = source_blocks.len();
    rand.check(sets)?;
    for (i, block) in source_blocks.iter().enumerate() {
        if block.len() != n {
            return Err(ChainError::SourceLengthMismatch {
                block: i + 1,
                got: block.len(),
                expected: k,
                n,
            });
        }
    }
    let spec = if channel_code { Some(build_channel_spec(cache, rand)?) } else { None };
    let marg = derive_marginals(model);
    let pair_us = marg.pair_us();
    let mut rng = ChaCha12Rng::seed_from_u64(rand.local_seed);
    let mut chain = BlockChain { n, k, s: source_blocks.to_vec(), ..Default::default() };

    let mut prev_a3: Vec<u8> = Vec::new();
    for (i, source_block) in source_blocks.iter().enumerate() {
        let mut frozen = FrozenMap::new(n);
        for (&j, &bit) in sets.a1.iter().zip(&rand.c1) {
            frozen.set(j, bit)?;
        }
        chain.ledger.push(RandStream::C1, i + 1, "A1", sets.a1.len());
        let mut padded = vec![false; n];
        if i > 0 {
            for ((&j, &prev), &key) in sets.a3_prime.iter().zip(&prev_a3).zip(&rand.c2) {
                frozen.set(j, prev ^ key)?;
                padded[j] = true;
            }
            chain.ledger.push(RandStream::C2, i + 1, "A3' pad", sets.a3.len());
        }
        let mut local_bits = 0usize;
        for &j in &sets.a2 {
            if !padded[j] {
                frozen.set(j, u8::from(rng.random::<bool>()))?;
                local_bits += 1;
            }
        }
        chain.ledger.push(RandStream::LocalM, i + 1, "A2 free fill", local_bits);
        let v = sc_sample(&frozen, source_block, &pair_us, &mut rng)?;
        chain
            .ledger
            .push(RandStream::LocalM, i + 1, "SC sampling A3 ∪ A4", sets.a3.len() + sets.a4.len());
        prev_a3 = sets.a3.iter().map(|&j| v[j]).collect();
        let u = polar_transform(&v)?;
        let x: Vec<usize> = (0..n)
            .map(|t| sample_symbol(model.p_x_given_us(u[t], source_block[t]), &mut rng))
            .collect();
        chain.ledger.push(RandStream::LocalM, i + 1, "X symbol draws", n);
        chain.v_tilde.push(v);
        chain.u_tilde.push(u);
        chain.x.push(x);
    }

    // block k+1: the payload is Ṽ_k[A3]
    match &spec {
        Some(spec) => {
            let x_last = channel_encode(&prev_a3, spec, model, &mut rng)?;
            chain.ledger.push(RandStream::LocalM, k + 1, "channel-code local fill", {
                spec.payload_capacity() - prev_a3.len()
            });
            chain.x.push(x_last.iter().map(|&b| b as usize).collect());
        }
        None => {
            // genie mode: the payload reaches the decoder out-of-band, so the
            // last block only has to look like the X marginal on the channel
            let p_x = marg.p_x.clone();
            chain.x.push((0..n).map(|_| sample_symbol(&p_x, &mut rng)).collect());
            chain.ledger.push(RandStream::LocalM, k + 1, "genie block X draws", n);
        }
    }
    Ok(EncoderOutput { chain, spec })
}

/// How the decoder obtains Ṽ_k[A3].
#[derive(Debug, Clone)]
pub enum LastBlockMode<'a> {
    /// decode block k+1 with the channel code
    Channel,
    /// test hook: the true payload handed over out-of-band, isolating
    /// chaining/SC behavior from last-block errors
    Genie(&'a [u8]),
}

/// Decoder output for one run.
#[derive(Debug, Clone)]
pub struct DecoderOutput {
    pub v_hat: Vec<Vec<u8>>,
    pub u_hat: Vec<Vec<u8>>,
    /// k+1 reconstruction blocks
    pub s_hat: Vec<Vec<usize>>,
}

/// Algorithm 2: decode k+1 received blocks in reverse order.
///
/// `rng_dec` drives only the symbol-by-symbol Ŝ draws; the bit decisions are
/// deterministic given Y and the shared randomness.
pub fn decode_chain<R: Rng + ?Sized>(
    model: &CoordinationModel,
    cache: &ConstructionCache,
    y_blocks: &[Vec<usize>],
    rand: &RandomnessSources,
    mode: LastBlockMode<'_>,
    rng_dec: &mut R,
) -> Result<DecoderOutput, ChainError> {
    let sets = &cache.sets;
    let n = sets.n;
    rand.check(sets)?;
    if y_blocks.len() < 2 {
        return Err(ChainError::BlockCountMismatch { got: y_blocks.len(), expected: 2 });
    }
    let k = y_blocks.len() - 1;
    for (i, block) in y_blocks.iter().enumerate() {
        if block.len() != n {
            return Err(ChainError::SourceLengthMismatch {
                block: i + 1,
                got: block.len(),
                expected: k + 1,
                n,
            });
        }
    }
    let payload_k: Vec<u8> = match mode {
        LastBlockMode::Channel => {
            let spec = build_channel_spec(cache, rand)?;
            channel_decode(&y_blocks[k], &spec, model)?
        }
        LastBlockMode::Genie(bits) => {
            if bits.len() != sets.a3.len() {
                return Err(ChainError::GeniePayloadMismatch {
                    got: bits.len(),
                    expected: sets.a3.len(),
                });
            }
            bits.to_vec()
        }
    };

    let marg = derive_marginals(model);
    let pair_uy = marg.pair_uy();
    let mut v_hat_rev: Vec<Vec<u8>> = Vec::with_capacity(k);
    let mut a3_bits = payload_k;
    for i in (0..k).rev() {
        let mut frozen = FrozenMap::new(n);
        for (&j, &bit) in sets.a1.iter().zip(&rand.c1) {
            frozen.set(j, bit)?;
        }
        for (&j, &bit) in sets.a3.iter().zip(&a3_bits) {
            frozen.set(j, bit)?;
        }
        let v = sc_decode(&frozen, &y_blocks[i], &pair_uy)?;
        if i > 0 {
            // unpad: block i-1's A3 sits one-time-padded in this block's A'3
            a3_bits = sets
                .a3_prime
                .iter()
                .zip(&rand.c2)
                .map(|(&j, &key)| v[j] ^ key)
                .collect();
        }
        v_hat_rev.push(v);
    }
    v_hat_rev.reverse();
    let v_hat = v_hat_rev;
    let u_hat: Vec<Vec<u8>> = v_hat
        .iter()
        .map(|v| polar_transform(v).expect("n is a power of two"))
        .collect();
    let mut s_hat: Vec<Vec<usize>> = Vec::with_capacity(k + 1);
    for i in 0..k {
        s_hat.push(
            (0..n)
                .map(|t| sample_symbol(model.p_shat_given_uy(u_hat[i][t], y_blocks[i][t]), rng_dec))
                .collect(),
        );
    }
    // block k+1 carries no coordination payload; Û is an all-zeros
    // placeholder so the aggregate type stays computable over all blocks
    s_hat.push(
        (0..n)
            .map(|t| sample_symbol(model.p_shat_given_uy(0, y_blocks[k][t]), rng_dec))
            .collect(),
    );
    Ok(DecoderOutput { v_hat, u_hat, s_hat })
}

/// Rate of the shared randomness C = (C1, C2): |A1 ∪ A3| / (k·n) bits per
/// symbol. The channel code's own shared bits are reported separately by
/// [`ChannelCodeSpec::shared_bit_cost`].
pub fn common_randomness_rate(sets: &IndexSets, k: usize) -> f64 {
    (sets.a1.len() + sets.a3.len()) as f64 / (k as f64 * sets.n as f64)
}

/// Versioned dump of a full run for replay and debugging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockTrace {
    pub schema_version: u32,
    pub model_hash: String,
    pub rand: RandomnessSources,
    pub chain: BlockChain,
}

pub const TRACE_SCHEMA_VERSION: u32 = 1;

impl BlockTrace {
    pub fn new(model_hash: String, rand: RandomnessSources, chain: BlockChain) -> Self {
        Self { schema_version: TRACE_SCHEMA_VERSION, model_hash, rand, chain }
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self).expect("trace serializes"))
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        let data = std::fs::read(path)?;
        serde_json::from_slice(&data)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
