//! Empirical types, distances and typicality checks.
//!
//! Total variation uses the unhalved L1 convention, `V(p,q) = Σ|p-q|`, with
//! maximum value 2. Halved conventions are common elsewhere; every bound in
//! this crate assumes the L1 form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, PartialEq)]
pub enum MetricsError {
    #[error("sequences have mismatched lengths")]
    LengthMismatch,
    #[error("empty input")]
    Empty,
    #[error("distributions defined on different supports ({0} vs {1})")]
    SupportMismatch(usize, usize),
    #[error("q assigns zero mass where p does not (index {0})")]
    AbsoluteContinuityViolation(usize),
    #[error("symbol {0} out of range for alphabet of size {1}")]
    SymbolOutOfRange(usize, usize),
}

/// Joint histogram over tuples from a finite product alphabet.
///
/// Keys are dense mixed-radix integers (first coordinate is the most
/// significant digit), so counting is O(1) per tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalType {
    counts: Vec<u64>,
    total: u64,
    sizes: Vec<usize>,
}

impl EmpiricalType {
    /// Per-position tuple counting over aligned sequences.
    pub fn from_sequences(seqs: &[&[usize]], sizes: &[usize]) -> Result<Self, MetricsError> {
        if seqs.is_empty() || sizes.len() != seqs.len() {
            return Err(MetricsError::Empty);
        }
        let len = seqs[0].len();
        if len == 0 {
            return Err(MetricsError::Empty);
        }
        if seqs.iter().any(|s| s.len() != len) {
            return Err(MetricsError::LengthMismatch);
        }
        let cells: usize = sizes.iter().product();
        let mut counts = vec![0u64; cells];
        for pos in 0..len {
            let mut key = 0usize;
            for (seq, &size) in seqs.iter().zip(sizes) {
                let sym = seq[pos];
                if sym >= size {
                    return Err(MetricsError::SymbolOutOfRange(sym, size));
                }
                key = key * size + sym;
            }
            counts[key] += 1;
        }
        Ok(Self { counts, total: len as u64, sizes: sizes.to_vec() })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Probabilities counts/total; sums to 1 exactly up to division rounding.
    pub fn probs(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Pool counts with another type over the same alphabet (aggregate type
    /// across blocks; equal-length blocks give the uniform mixture).
    pub fn merge(&mut self, other: &EmpiricalType) -> Result<(), MetricsError> {
        if self.sizes != other.sizes {
            return Err(MetricsError::SupportMismatch(self.counts.len(), other.counts.len()));
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total += other.total;
        Ok(())
    }

    /// Marginal type over the given coordinate.
    pub fn marginal(&self, coord: usize) -> Vec<f64> {
        marginalize(&self.probs(), &self.sizes, coord)
    }
}

/// Marginalize a flat mixed-radix joint onto one coordinate.
pub fn marginalize(joint: &[f64], sizes: &[usize], coord: usize) -> Vec<f64> {
    let mut out = vec![0.0; sizes[coord]];
    let trailing: usize = sizes[coord + 1..].iter().product();
    for (key, &p) in joint.iter().enumerate() {
        out[(key / trailing) % sizes[coord]] += p;
    }
    out
}

/// Unhalved total variation `Σ|p - q|`, in [0, 2].
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::SupportMismatch(p.len(), q.len()));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Kullback-Leibler divergence `Σ p log2(p/q)` in bits.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::SupportMismatch(p.len(), q.len()));
    }
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(MetricsError::AbsoluteContinuityViolation(i));
            }
            d += a * (a / b).log2();
        }
    }
    Ok(d)
}

/// Pinsker bound for the L1 convention: `V <= sqrt(2 ln2 * D)` with D in bits.
pub fn pinsker_bound(kl_bits: f64) -> f64 {
    (2.0 * std::f64::consts::LN_2 * kl_bits).sqrt()
}

/// True iff the sequence's type is within `epsilon` of the target in TV.
pub fn is_typical(sequence: &[usize], target: &[f64], epsilon: f64) -> Result<bool, MetricsError> {
    let t = EmpiricalType::from_sequences(&[sequence], &[target.len()])?;
    Ok(tv_distance(&t.probs(), target)? <= epsilon)
}

/// Averaged type of two equal-length sequences over the same alphabet.
pub fn mixed_type(
    seq_a: &[usize],
    seq_b: &[usize],
    alphabet: usize,
) -> Result<EmpiricalType, MetricsError> {
    if seq_a.len() != seq_b.len() {
        return Err(MetricsError::LengthMismatch);
    }
    let mut t = EmpiricalType::from_sequences(&[seq_a], &[alphabet])?;
    t.merge(&EmpiricalType::from_sequences(&[seq_b], &[alphabet])?)?;
    Ok(t)
}

/// Mixing inequality: the averaged type is no farther from the target than
/// the average of the individual distances.
pub fn lemma_mixing_check(
    seq_a: &[usize],
    seq_b: &[usize],
    target: &[f64],
) -> Result<bool, MetricsError> {
    let alphabet = target.len();
    let mixed = mixed_type(seq_a, seq_b, alphabet)?;
    let ta = EmpiricalType::from_sequences(&[seq_a], &[alphabet])?;
    let tb = EmpiricalType::from_sequences(&[seq_b], &[alphabet])?;
    let lhs = tv_distance(&mixed.probs(), target)?;
    let rhs = 0.5 * tv_distance(&ta.probs(), target)? + 0.5 * tv_distance(&tb.probs(), target)?;
    Ok(lhs <= rhs + 1e-12)
}

/// Marginal contraction: the TV of marginals never exceeds the TV of joints.
pub fn marginal_contraction_check(
    joint_type: &[f64],
    joint_target: &[f64],
    sizes: &[usize],
) -> Result<bool, MetricsError> {
    let joint_tv = tv_distance(joint_type, joint_target)?;
    for coord in 0..sizes.len() {
        let tv = tv_distance(
            &marginalize(joint_type, sizes, coord),
            &marginalize(joint_target, sizes, coord),
        )?;
        if tv > joint_tv + 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Finite-n analogue of the encoder-distribution chain bound:
/// `sqrt(2 ln2) * sqrt(Σ_{j ∈ A1 ∪ A2} (1 - h_given_s(j)))`.
///
/// The sum collects the per-position entropy deficits of the positions the
/// encoder freezes uniformly instead of sampling, exactly the KL mass that
/// separates the encoder's block law from the target law.
pub fn pinsker_block_bound(
    profile: &crate::construction::EntropyProfile,
    sets: &crate::construction::IndexSets,
) -> f64 {
    let deficit: f64 = sets
        .a1
        .iter()
        .chain(&sets.a2)
        .map(|&j| 1.0 - profile.h_given_s[j])
        .sum();
    (2.0 * std::f64::consts::LN_2 * deficit.max(0.0)).sqrt()
}

/// Encode-only trials measuring how often the joint type of (S, U~) lands
/// within `epsilon0` of the target in TV; returns the hit fraction.
///
/// Each trial draws a fresh source block, freezes A1 ∪ A2 with uniform bits
/// and SC-samples the remaining positions, mirroring a single chain block.
/// The per-trial target is `T_S(s) * P(u|s)` — the realized source type paired
/// with the true conditional — so the statistic isolates the discrepancy the
/// encoder introduces rather than the source's own sampling fluctuation.
pub fn lemma1_proxy<R: rand::Rng + ?Sized>(
    model: &crate::model::CoordinationModel,
    sets: &crate::construction::IndexSets,
    trials: usize,
    epsilon0: f64,
    rng: &mut R,
) -> f64 {
    use crate::polar::{polar_transform, sc_sample, FrozenMap};
    let marg = crate::model::derive_marginals(model);
    let source = marg.pair_us();
    let n = sets.n;
    let s_size = model.sizes().s;
    let p_s: Vec<f64> = (0..s_size)
        .map(|si| marg.p_us[si] + marg.p_us[s_size + si])
        .collect();
    // P(u|s); rows u, cols s, zero where P_S(s) = 0
    let u_given_s: Vec<f64> = (0..2 * s_size)
        .map(|i| {
            let si = i % s_size;
            if p_s[si] > 0.0 {
                marg.p_us[i] / p_s[si]
            } else {
                0.0
            }
        })
        .collect();
    let mut hits = 0usize;
    let mut s_block = vec![0usize; n];
    for _ in 0..trials {
        for slot in s_block.iter_mut() {
            // keep only W: its marginal under the pair source is P_S
            *slot = source.sample(rng).1;
        }
        let mut s_type = vec![0.0; s_size];
        for &si in &s_block {
            s_type[si] += 1.0 / n as f64;
        }
        let target: Vec<f64> = (0..2 * s_size)
            .map(|i| s_type[i % s_size] * u_given_s[i])
            .collect();
        let mut frozen = FrozenMap::new(n);
        for &j in sets.a1.iter().chain(&sets.a2) {
            frozen.set(j, u8::from(rng.random::<bool>())).expect("disjoint sets");
        }
        let v = sc_sample(&frozen, &s_block, &source, rng).expect("valid block");
        let u = polar_transform(&v).expect("power-of-two length");
        let u_sym: Vec<usize> = u.iter().map(|&b| b as usize).collect();
        let t = EmpiricalType::from_sequences(&[&u_sym, &s_block], &[2, s_size])
            .expect("aligned sequences");
        let tv = tv_distance(&t.probs(), &target).expect("matching supports");
        if tv <= epsilon0 {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}
