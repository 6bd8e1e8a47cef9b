//! Last-block polar channel code for the asymmetric channel P(Y|X).
//!
//! The payload rides on Z = X * G_n. Information positions are
//! V_X ∩ H_{X|Y}^c: high entropy unconditionally (so the encoder is free to
//! choose them) and low entropy given Y (so the decoder recovers them
//! reliably). Positions in V_X ∩ H_{X|Y} are filled from shared uniform
//! randomness; positions outside V_X carry almost no entropy and are sampled
//! from the exact SC prior with a shared seed, which shapes the empirical
//! distribution of X toward P_X and lets the decoder replay the same draws.
//!
//! The payload is whitened with a one-time pad so the information bits are
//! uniform regardless of the message.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construction::{membership, ChannelConstruction};
use crate::model::{derive_marginals, CoordinationModel};
use crate::polar::{polar_transform, PairSource, ScSweep};

#[derive(Error, Debug)]
pub enum AsymError {
    #[error("payload of {payload} bits exceeds capacity {capacity}")]
    PayloadTooLarge { payload: usize, capacity: usize },
    #[error("payload has {got} bits, spec carries {expected}")]
    PayloadLengthMismatch { got: usize, expected: usize },
    #[error("received block has length {got}, expected {expected}")]
    BlockLengthMismatch { got: usize, expected: usize },
    #[error("channel input alphabet of size {0} unsupported (binary X only)")]
    UnsupportedAlphabet(usize),
    #[error(transparent)]
    Polar(#[from] crate::polar::PolarError),
}

/// How the encoder fills each position of Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositionRole {
    /// carries payload bit `idx` XOR pad_key[idx]
    Payload { idx: usize },
    /// information position left over after the payload; encoder-local
    /// uniform fill, ML-decoded and discarded
    LocalInfo,
    /// V_X ∩ H_{X|Y}: shared uniform bit `idx`
    SharedFrozen { idx: usize },
    /// outside V_X: sampled from the SC prior with the shared shaping seed
    Shaping,
}

/// Frozen instance of the last-block code: index sets plus every shared
/// random choice, so encoder and decoder agree bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelCodeSpec {
    pub construction: ChannelConstruction,
    /// role of each position j in 0..n
    pub roles: Vec<PositionRole>,
    /// payload carrier positions, ascending; `roles` points back into this
    pub payload_positions: Vec<usize>,
    /// one-time pad over the payload
    pub pad_key: Vec<u8>,
    /// shared uniform bits for V_X ∩ H_{X|Y}
    pub shared_frozen: Vec<u8>,
    /// shared seed driving the shaping draws
    pub shaping_seed: u64,
}

impl ChannelCodeSpec {
    /// Instantiate the code for `payload_len` bits, drawing the pad, the
    /// shared frozen bits and the shaping seed from the shared randomness.
    ///
    /// The payload occupies the most reliable information positions: smallest
    /// estimated entropy given Y, ties toward the lower index.
    pub fn new<R: Rng + ?Sized>(
        construction: ChannelConstruction,
        payload_len: usize,
        rng_shared: &mut R,
    ) -> Result<Self, AsymError> {
        let capacity = construction.info_set.len();
        if payload_len > capacity {
            return Err(AsymError::PayloadTooLarge { payload: payload_len, capacity });
        }
        let n = construction.n;
        let mut ranked: Vec<usize> = construction.info_set.clone();
        ranked.sort_by(|&i, &j| {
            construction.h_given_y[i]
                .partial_cmp(&construction.h_given_y[j])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        let mut payload_positions: Vec<usize> = ranked[..payload_len].to_vec();
        payload_positions.sort_unstable();

        let in_vx = membership(n, &construction.v_x);
        let in_h = membership(n, &construction.h_x_given_y);
        let in_payload = membership(n, &payload_positions);
        let mut roles = Vec::with_capacity(n);
        let mut payload_idx = 0usize;
        let mut frozen_idx = 0usize;
        for j in 0..n {
            let role = if in_payload[j] {
                let r = PositionRole::Payload { idx: payload_idx };
                payload_idx += 1;
                r
            } else if in_vx[j] && in_h[j] {
                let r = PositionRole::SharedFrozen { idx: frozen_idx };
                frozen_idx += 1;
                r
            } else if in_vx[j] {
                PositionRole::LocalInfo
            } else {
                PositionRole::Shaping
            };
            roles.push(role);
        }
        let pad_key: Vec<u8> = (0..payload_len).map(|_| u8::from(rng_shared.random::<bool>())).collect();
        let shared_frozen: Vec<u8> = (0..frozen_idx).map(|_| u8::from(rng_shared.random::<bool>())).collect();
        Ok(Self {
            construction,
            roles,
            payload_positions,
            pad_key,
            shared_frozen,
            shaping_seed: rng_shared.random(),
        })
    }

    pub fn payload_capacity(&self) -> usize {
        self.construction.info_set.len()
    }

    /// Shared random bits this code consumes beyond the chain's C1/C2: pad,
    /// frozen fill, and the shaping seed.
    pub fn shared_bit_cost(&self) -> usize {
        self.pad_key.len() + self.shared_frozen.len() + 64
    }
}

fn binary_x_sources(model: &CoordinationModel) -> Result<(PairSource, PairSource), AsymError> {
    let marg = derive_marginals(model);
    let pair_xy = marg
        .pair_xy()
        .ok_or(AsymError::UnsupportedAlphabet(model.sizes().x))?;
    let pair_x = marg.pair_x().expect("binary X checked above");
    Ok((pair_xy, pair_x))
}

/// Encode `payload` into a channel-input block X^{1:n}.
///
/// `rng_local` fills only the leftover information positions; everything the
/// decoder must reproduce comes from the spec's shared material.
pub fn channel_encode<R: Rng + ?Sized>(
    payload: &[u8],
    spec: &ChannelCodeSpec,
    model: &CoordinationModel,
    rng_local: &mut R,
) -> Result<Vec<u8>, AsymError> {
    if payload.len() != spec.pad_key.len() {
        return Err(AsymError::PayloadLengthMismatch {
            got: payload.len(),
            expected: spec.pad_key.len(),
        });
    }
    let (_, pair_x) = binary_x_sources(model)?;
    let n = spec.construction.n;
    let w_dummy = vec![0usize; n];
    let mut sweep = ScSweep::from_source(&pair_x, &w_dummy)?;
    let mut shaping_rng = ChaCha12Rng::seed_from_u64(spec.shaping_seed);
    for j in 0..n {
        let bit = match spec.roles[j] {
            PositionRole::Payload { idx } => payload[idx] ^ spec.pad_key[idx],
            PositionRole::LocalInfo => u8::from(rng_local.random::<bool>()),
            PositionRole::SharedFrozen { idx } => spec.shared_frozen[idx],
            PositionRole::Shaping => {
                let p0 = sweep.posterior();
                u8::from(shaping_rng.random::<f64>() >= p0)
            }
        };
        sweep.decide(bit);
    }
    Ok(polar_transform(sweep.decided())?)
}

/// Full decoder output: the recovered payload plus the decoded Z block
/// (useful for verifying shaping reproducibility).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelDecodeResult {
    pub payload: Vec<u8>,
    pub z: Vec<u8>,
}

/// Decode the payload from a received block Y^{1:n}.
///
/// Two SC sweeps run in lockstep: the Y-conditioned sweep supplies ML
/// decisions at information positions, while an unconditional sweep replays
/// the encoder's shaping draws (identical seed, identical prior posteriors as
/// long as the decoded prefix matches the encoder's).
pub fn channel_decode_full(
    y_block: &[usize],
    spec: &ChannelCodeSpec,
    model: &CoordinationModel,
) -> Result<ChannelDecodeResult, AsymError> {
    let n = spec.construction.n;
    if y_block.len() != n {
        return Err(AsymError::BlockLengthMismatch { got: y_block.len(), expected: n });
    }
    let (pair_xy, pair_x) = binary_x_sources(model)?;
    let w_dummy = vec![0usize; n];
    let mut y_sweep = ScSweep::from_source(&pair_xy, y_block)?;
    let mut unc_sweep = ScSweep::from_source(&pair_x, &w_dummy)?;
    let mut shaping_rng = ChaCha12Rng::seed_from_u64(spec.shaping_seed);
    let mut payload = vec![0u8; spec.pad_key.len()];
    for j in 0..n {
        let bit = match spec.roles[j] {
            PositionRole::Payload { .. } | PositionRole::LocalInfo => {
                u8::from(y_sweep.posterior() < 0.5)
            }
            PositionRole::SharedFrozen { idx } => spec.shared_frozen[idx],
            PositionRole::Shaping => {
                let p0 = unc_sweep.posterior();
                u8::from(shaping_rng.random::<f64>() >= p0)
            }
        };
        if let PositionRole::Payload { idx } = spec.roles[j] {
            payload[idx] = bit ^ spec.pad_key[idx];
        }
        y_sweep.decide(bit);
        unc_sweep.decide(bit);
    }
    Ok(ChannelDecodeResult { payload, z: y_sweep.decided().to_vec() })
}

/// Decode the payload only.
pub fn channel_decode(
    y_block: &[usize],
    spec: &ChannelCodeSpec,
    model: &CoordinationModel,
) -> Result<Vec<u8>, AsymError> {
    Ok(channel_decode_full(y_block, spec, model)?.payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::build_x_sets;
    use crate::metrics::tv_distance;
    use crate::model::{build_model, bsc_chain_model};
    use crate::metrics::EmpiricalType;

    /// S uniform, U independent with P(U=1) = u1, X = U, Y = BSC(p)(X).
    fn independent_x_model(u1: f64, p: f64) -> CoordinationModel {
        build_model(
            vec![0.5, 0.5],
            vec![vec![1.0 - u1, u1], vec![1.0 - u1, u1]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    fn transmit(x: &[u8]) -> Vec<usize> {
        x.iter().map(|&b| b as usize).collect()
    }

    #[test]
    fn noiseless_uniform_round_trip_at_full_capacity() {
        let model = independent_x_model(0.5, 0.0);
        let n = 128;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let xs = build_x_sets(&model, n, 400, 0.25, &mut rng).unwrap();
        // Y = X: conditioning on Y makes every position deterministic
        assert!(xs.h_x_given_y.is_empty());
        assert_eq!(xs.info_set.len(), n);
        let spec = ChannelCodeSpec::new(xs, n, &mut rng).unwrap();
        for trial in 0..5 {
            let payload: Vec<u8> =
                (0..n).map(|i| ((i * 7 + trial) % 3 == 0) as u8).collect();
            let x = channel_encode(&payload, &spec, &model, &mut rng).unwrap();
            let decoded = channel_decode(&transmit(&x), &spec, &model).unwrap();
            assert_eq!(decoded, payload);
        }
    }

    #[test]
    fn empty_payload_noiseless_round_trip() {
        let model = independent_x_model(0.5, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let xs = build_x_sets(&model, 64, 400, 0.25, &mut rng).unwrap();
        let spec = ChannelCodeSpec::new(xs, 0, &mut rng).unwrap();
        let x = channel_encode(&[], &spec, &model, &mut rng).unwrap();
        let decoded = channel_decode_full(&transmit(&x), &spec, &model).unwrap();
        assert!(decoded.payload.is_empty());
        assert_eq!(polar_transform(&decoded.z).unwrap(), x);
    }

    #[test]
    fn oversized_payload_rejected() {
        let model = bsc_chain_model(0.11, 0.5); // Y independent of X
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let xs = build_x_sets(&model, 64, 400, 0.25, &mut rng).unwrap();
        // useless channel: information set empty up to estimator noise
        assert!(xs.info_set.len() < 4, "info set {:?}", xs.info_set);
        let err = ChannelCodeSpec::new(xs, 32, &mut rng).unwrap_err();
        assert!(matches!(err, AsymError::PayloadTooLarge { .. }));
    }

    #[test]
    fn zero_capacity_channel_is_chance_level() {
        // Y independent of X; force one payload bit onto a V_X position and
        // measure recovery across trials
        let model = independent_x_model(0.5, 0.5);
        let n = 64;
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let xs = build_x_sets(&model, n, 400, 0.25, &mut rng).unwrap();
        assert!(xs.info_set.is_empty());
        let forced = xs.v_x[xs.v_x.len() / 2];
        let mut construction = xs.clone();
        construction.info_set = vec![forced];
        let spec = ChannelCodeSpec::new(construction, 1, &mut rng).unwrap();
        let trials = 400;
        let mut correct = 0;
        for t in 0..trials {
            let payload = vec![(t % 2) as u8];
            let x = channel_encode(&payload, &spec, &model, &mut rng).unwrap();
            // channel output independent of x
            let y: Vec<usize> = (0..n).map(|_| usize::from(rng.random::<bool>())).collect();
            let _ = x;
            let decoded = channel_decode(&y, &spec, &model).unwrap();
            if decoded == payload {
                correct += 1;
            }
        }
        let acc = correct as f64 / trials as f64;
        assert!((acc - 0.5).abs() < 0.1, "accuracy {acc} not chance-level");
    }

    #[test]
    fn shaping_reproducible_and_shapes_input() {
        // nonuniform X over a noiseless channel: shaping positions dominate
        let model = independent_x_model(0.3, 0.0);
        let n = 256;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let xs = build_x_sets(&model, n, 600, 0.25, &mut rng).unwrap();
        assert!(xs.info_set.len() < n, "some positions must be shaping");
        let payload_len = xs.info_set.len().min(n / 8);
        let spec = ChannelCodeSpec::new(xs, payload_len, &mut rng).unwrap();
        let payload: Vec<u8> = (0..payload_len).map(|i| (i % 2) as u8).collect();
        let x = channel_encode(&payload, &spec, &model, &mut rng).unwrap();
        let z = {
            let mut v = x.clone();
            crate::polar::polar_transform_inplace(&mut v).unwrap();
            v
        };
        let decoded = channel_decode_full(&transmit(&x), &spec, &model).unwrap();
        assert_eq!(decoded.payload, payload);
        // noiseless: the decoder's Z, including every shaping draw, matches
        assert_eq!(decoded.z, z);
        // empirical type of X near P_X = (0.7, 0.3)
        let x_sym: Vec<usize> = x.iter().map(|&b| b as usize).collect();
        let t = EmpiricalType::from_sequences(&[&x_sym], &[2]).unwrap();
        let tv = tv_distance(&t.probs(), &[0.7, 0.3]).unwrap();
        assert!(tv < 0.15, "TV to P_X = {tv}");
    }

    #[test]
    fn pad_whitening_changes_carried_bits_not_payload() {
        let model = independent_x_model(0.5, 0.0);
        let n = 64;
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let xs = build_x_sets(&model, n, 400, 0.25, &mut rng).unwrap();
        let mut spec = ChannelCodeSpec::new(xs, 8, &mut rng).unwrap();
        let payload = vec![1, 0, 1, 1, 0, 0, 1, 0];
        let x_a = channel_encode(&payload, &spec, &model, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
        spec.pad_key.iter_mut().for_each(|b| *b ^= 1);
        let x_b = channel_encode(&payload, &spec, &model, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
        assert_ne!(x_a, x_b, "flipping the pad must change the carried bits");
        let decoded = channel_decode(&transmit(&x_b), &spec, &model).unwrap();
        assert_eq!(decoded, payload);
    }
}
