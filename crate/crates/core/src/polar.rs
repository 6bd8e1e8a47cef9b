//! Polarization transform and exact successive-cancellation inference.
//!
//! The transform is `v = u * G_n` over GF(2), where `G_n = [[1,0],[1,1]]^{⊗m}`
//! in natural index order (no bit-reversal permutation). For a block of i.i.d.
//! pairs `(B^i, W^i)` with `V = B * G_n`, the [`ScSweep`] state machine walks
//! positions `j = 1..n` and produces the exact conditional probability
//! `P(V^j = 0 | V^{1:j-1}, W^{1:n})` in `O(n log n)` per full sweep.
//!
//! Correctness of the sweep is pinned to [`brute_posterior`], which enumerates
//! all `2^n` bit sequences.

use rand::Rng;
use thiserror::Error;

/// A block of binary symbols; block lengths are powers of two.
pub type BitBlock = Vec<u8>;

#[derive(Error, Debug, PartialEq)]
pub enum PolarError {
    #[error("block length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
    #[error("position {0} out of range for block length {1}")]
    IndexOutOfRange(usize, usize),
    #[error("symbol {0} outside side-information alphabet of size {1}")]
    AlphabetMismatch(usize, usize),
    #[error("position {0} frozen twice")]
    FrozenOverlap(usize),
    #[error("block length {0} too large for exhaustive enumeration (max {1})")]
    TooLarge(usize, usize),
    #[error("prefix length {0} does not match position {1}")]
    PrefixLengthMismatch(usize, usize),
}

/// Binary entropy in bits, with the convention `0·log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    for q in [p, 1.0 - p] {
        if q > 0.0 {
            h -= q * q.log2();
        }
    }
    h
}

fn check_power_of_two(n: usize) -> Result<(), PolarError> {
    if n == 0 || !n.is_power_of_two() {
        Err(PolarError::LengthNotPowerOfTwo(n))
    } else {
        Ok(())
    }
}

/// In-place `v = u * G_n` over GF(2). Length must be a power of two.
///
/// The transform is an involution: applying it twice is the identity.
pub fn polar_transform_inplace(bits: &mut [u8]) -> Result<(), PolarError> {
    check_power_of_two(bits.len())?;
    let n = bits.len();
    let mut block = n;
    while block > 1 {
        let half = block / 2;
        for start in (0..n).step_by(block) {
            for i in start..start + half {
                bits[i] ^= bits[i + half];
            }
        }
        block = half;
    }
    Ok(())
}

/// `v = u * G_n` over GF(2), returning a new block.
pub fn polar_transform(u: &[u8]) -> Result<BitBlock, PolarError> {
    let mut v = u.to_vec();
    polar_transform_inplace(&mut v)?;
    Ok(v)
}

/// Joint law of an i.i.d. pair `(B, W)` with binary `B` and finite `W`.
///
/// This is the per-symbol law underlying the SC conditional entropies:
/// `P_{US}` when encoding against the source, `P_{UY}` when decoding against
/// the channel output, or the bare `B`-marginal when no side information is
/// available (`w_alphabet_size = 1`).
#[derive(Debug, Clone)]
pub struct PairSource {
    /// joint[b * w_size + w] = P(B = b, W = w)
    joint: Vec<f64>,
    w_size: usize,
}

impl PairSource {
    /// Build from a joint table `joint[b][w]`; rows must jointly sum to 1.
    pub fn new(joint_b0: &[f64], joint_b1: &[f64]) -> Result<Self, PolarError> {
        if joint_b0.len() != joint_b1.len() || joint_b0.is_empty() {
            return Err(PolarError::AlphabetMismatch(joint_b1.len(), joint_b0.len()));
        }
        let w_size = joint_b0.len();
        let mut joint = Vec::with_capacity(2 * w_size);
        joint.extend_from_slice(joint_b0);
        joint.extend_from_slice(joint_b1);
        Ok(Self { joint, w_size })
    }

    /// Degenerate source with no usable side information.
    pub fn marginal(p_b0: f64) -> Self {
        Self { joint: vec![p_b0, 1.0 - p_b0], w_size: 1 }
    }

    pub fn w_alphabet_size(&self) -> usize {
        self.w_size
    }

    pub fn prob(&self, b: u8, w: usize) -> f64 {
        self.joint[b as usize * self.w_size + w]
    }

    /// P(B = 0 | W = w); uniform if the conditioning event has zero mass.
    pub fn prior_b0(&self, w: usize) -> Result<f64, PolarError> {
        if w >= self.w_size {
            return Err(PolarError::AlphabetMismatch(w, self.w_size));
        }
        let p0 = self.joint[w];
        let p1 = self.joint[self.w_size + w];
        let s = p0 + p1;
        Ok(if s > 0.0 { p0 / s } else { 0.5 })
    }

    /// Conditional entropy H(B|W) in bits.
    pub fn h_b_given_w(&self) -> f64 {
        (0..self.w_size)
            .map(|w| {
                let p0 = self.joint[w];
                let p1 = self.joint[self.w_size + w];
                let s = p0 + p1;
                if s > 0.0 {
                    s * binary_entropy(p0 / s)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Draw one (b, w) pair.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u8, usize) {
        let mut u: f64 = rng.random();
        for (idx, &p) in self.joint.iter().enumerate() {
            u -= p;
            if u < 0.0 {
                return ((idx / self.w_size) as u8, idx % self.w_size);
            }
        }
        (1, self.w_size - 1)
    }

    fn leaf_priors(&self, w: &[usize]) -> Result<Vec<f64>, PolarError> {
        w.iter().map(|&wi| self.prior_b0(wi)).collect()
    }
}

fn normalized(p0: f64, p1: f64) -> [f64; 2] {
    let s = p0 + p1;
    if s > 0.0 {
        [p0 / s, p1 / s]
    } else {
        // zero-mass (impossible) conditioning event; uniform by convention
        [0.5, 0.5]
    }
}

/// Stepwise successive-cancellation sweep over one block.
///
/// Positions are visited in order; at each one the caller may query the exact
/// posterior `P(V^j = 0 | decided prefix, W)` and must then commit a decision
/// bit. The stepwise interface is what lets the asymmetric-channel decoder run
/// two sweeps (with and without channel observations) in lockstep.
pub struct ScSweep {
    n: usize,
    m: usize,
    /// weights[l]: per-leaf probability pairs of the active node at level l
    /// (node size 2^l); weights[m] holds the root leaf priors.
    weights: Vec<Vec<[f64; 2]>>,
    /// left_tf[l]: transform-domain bits of the finished left child of the
    /// active node at level l (length 2^{l-1}); index 0 unused.
    left_tf: Vec<Vec<u8>>,
    /// completed[l]: transform-domain bits of the most recently finished
    /// subtree at level l.
    completed: Vec<Vec<u8>>,
    decided: Vec<u8>,
    next_pos: usize,
    ready: bool,
}

impl ScSweep {
    /// `priors[i] = P(B^i = 0)` for each leaf, given the side information.
    pub fn new(priors: &[f64]) -> Result<Self, PolarError> {
        check_power_of_two(priors.len())?;
        let n = priors.len();
        let m = n.trailing_zeros() as usize;
        let mut weights: Vec<Vec<[f64; 2]>> =
            (0..=m).map(|l| vec![[0.0; 2]; 1 << l]).collect();
        for (i, &p) in priors.iter().enumerate() {
            weights[m][i] = [p, 1.0 - p];
        }
        Ok(Self {
            n,
            m,
            weights,
            left_tf: (0..=m).map(|l| vec![0u8; (1 << l) / 2]).collect(),
            completed: (0..=m).map(|l| vec![0u8; 1 << l]).collect(),
            decided: Vec::with_capacity(n),
            next_pos: 0,
            ready: false,
        })
    }

    pub fn from_source(source: &PairSource, w: &[usize]) -> Result<Self, PolarError> {
        Self::new(&source.leaf_priors(w)?)
    }

    pub fn position(&self) -> usize {
        self.next_pos
    }

    pub fn is_finished(&self) -> bool {
        self.next_pos >= self.n
    }

    pub fn decided(&self) -> &[u8] {
        &self.decided
    }

    /// Check-node combination: marginalize the second operand's bit.
    fn minus(&mut self, l: usize) {
        let half = (1 << l) / 2;
        for i in 0..half {
            let a = self.weights[l][i];
            let b = self.weights[l][i + half];
            self.weights[l - 1][i] =
                normalized(a[0] * b[0] + a[1] * b[1], a[0] * b[1] + a[1] * b[0]);
        }
    }

    /// Variable-node combination given the left child's transform bits.
    fn plus(&mut self, l: usize) {
        let half = (1 << l) / 2;
        for i in 0..half {
            let a = self.weights[l][i];
            let b = self.weights[l][i + half];
            let t = self.left_tf[l][i] as usize;
            self.weights[l - 1][i] = normalized(a[t] * b[0], a[t ^ 1] * b[1]);
        }
    }

    fn compute(&mut self) {
        if self.ready || self.next_pos >= self.n {
            return;
        }
        let j = self.next_pos;
        if j == 0 {
            for l in (1..=self.m).rev() {
                self.minus(l);
            }
        } else {
            let t = j.trailing_zeros() as usize;
            // Propagate finished subtrees upward: at level l, the node's
            // transform is (left ^ right, right).
            for l in 1..=t {
                let half = 1 << (l - 1);
                for i in 0..half {
                    self.completed[l][i] = self.left_tf[l][i] ^ self.completed[l - 1][i];
                    self.completed[l][i + half] = self.completed[l - 1][i];
                }
            }
            // The subtree finished at level t is the left child of the node
            // at level t+1; enter that node's right child.
            let finished = &self.completed[t];
            let dst = &mut self.left_tf[t + 1];
            dst.copy_from_slice(finished);
            self.plus(t + 1);
            for l in (1..=t).rev() {
                self.minus(l);
            }
        }
        self.ready = true;
    }

    /// Exact posterior `P(V^j = 0 | decided prefix, W)` at the current position.
    pub fn posterior(&mut self) -> f64 {
        assert!(self.next_pos < self.n, "sweep already finished");
        self.compute();
        self.weights[0][0][0]
    }

    /// Commit the bit at the current position and advance.
    pub fn decide(&mut self, bit: u8) {
        assert!(self.next_pos < self.n, "sweep already finished");
        self.compute();
        self.decided.push(bit & 1);
        self.completed[0][0] = bit & 1;
        self.next_pos += 1;
        self.ready = false;
    }
}

/// Partial assignment of positions to frozen bit values.
#[derive(Debug, Clone)]
pub struct FrozenMap {
    slots: Vec<Option<u8>>,
}

impl FrozenMap {
    pub fn new(n: usize) -> Self {
        Self { slots: vec![None; n] }
    }

    pub fn set(&mut self, pos: usize, bit: u8) -> Result<(), PolarError> {
        if pos >= self.slots.len() {
            return Err(PolarError::IndexOutOfRange(pos, self.slots.len()));
        }
        if self.slots[pos].is_some() {
            return Err(PolarError::FrozenOverlap(pos));
        }
        self.slots[pos] = Some(bit & 1);
        Ok(())
    }

    pub fn get(&self, pos: usize) -> Option<u8> {
        self.slots[pos]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// `P(V^j = 0 | V^{1:j-1} = prefix, W^{1:n} = w)` with `j` 1-based.
pub fn sc_posterior(
    j: usize,
    prefix: &[u8],
    w: &[usize],
    source: &PairSource,
) -> Result<f64, PolarError> {
    let n = w.len();
    check_power_of_two(n)?;
    if j < 1 || j > n {
        return Err(PolarError::IndexOutOfRange(j, n));
    }
    if prefix.len() != j - 1 {
        return Err(PolarError::PrefixLengthMismatch(prefix.len(), j));
    }
    let mut sweep = ScSweep::from_source(source, w)?;
    for &b in prefix {
        sweep.decide(b);
    }
    Ok(sweep.posterior())
}

/// Posteriors at every position along a realized block `v`.
///
/// One `O(n log n)` sweep yields, for each `j`, the conditional probability of
/// `V^j = 0` given the realized prefix `v^{1:j-1}` — the per-position entropy
/// samples used by the Monte-Carlo set construction.
pub fn sc_posterior_sweep(
    v: &[u8],
    w: &[usize],
    source: &PairSource,
) -> Result<Vec<f64>, PolarError> {
    if v.len() != w.len() {
        return Err(PolarError::PrefixLengthMismatch(v.len(), w.len()));
    }
    let mut sweep = ScSweep::from_source(source, w)?;
    let mut out = Vec::with_capacity(v.len());
    for &b in v {
        out.push(sweep.posterior());
        sweep.decide(b);
    }
    Ok(out)
}

/// Randomized SC encoding: frozen positions copied, free positions drawn
/// Bernoulli from the exact posterior at the realized prefix.
pub fn sc_sample<R: Rng + ?Sized>(
    frozen: &FrozenMap,
    w: &[usize],
    source: &PairSource,
    rng: &mut R,
) -> Result<BitBlock, PolarError> {
    let n = w.len();
    check_power_of_two(n)?;
    if frozen.len() != n {
        return Err(PolarError::PrefixLengthMismatch(frozen.len(), n));
    }
    let mut sweep = ScSweep::from_source(source, w)?;
    for j in 0..n {
        let bit = match frozen.get(j) {
            Some(b) => b,
            None => {
                let p0 = sweep.posterior();
                u8::from(rng.random::<f64>() >= p0)
            }
        };
        sweep.decide(bit);
    }
    Ok(sweep.decided().to_vec())
}

/// Deterministic ML-rule SC decoding: free position j is 0 iff the likelihood
/// ratio is at least one, i.e. iff the posterior of 0 is at least 1/2.
pub fn sc_decode(
    frozen: &FrozenMap,
    w: &[usize],
    source: &PairSource,
) -> Result<BitBlock, PolarError> {
    let n = w.len();
    check_power_of_two(n)?;
    if frozen.len() != n {
        return Err(PolarError::PrefixLengthMismatch(frozen.len(), n));
    }
    let mut sweep = ScSweep::from_source(source, w)?;
    for j in 0..n {
        let bit = match frozen.get(j) {
            Some(b) => b,
            None => {
                let p0 = sweep.posterior();
                u8::from(p0 < 0.5)
            }
        };
        sweep.decide(bit);
    }
    Ok(sweep.decided().to_vec())
}

/// Maximum block length accepted by [`brute_posterior`].
pub const BRUTE_MAX_N: usize = 16;

/// Exhaustive-enumeration oracle with the same contract as [`sc_posterior`].
pub fn brute_posterior(
    j: usize,
    prefix: &[u8],
    w: &[usize],
    source: &PairSource,
) -> Result<f64, PolarError> {
    let n = w.len();
    check_power_of_two(n)?;
    if n > BRUTE_MAX_N {
        return Err(PolarError::TooLarge(n, BRUTE_MAX_N));
    }
    if j < 1 || j > n {
        return Err(PolarError::IndexOutOfRange(j, n));
    }
    if prefix.len() != j - 1 {
        return Err(PolarError::PrefixLengthMismatch(prefix.len(), j));
    }
    for &wi in w {
        if wi >= source.w_alphabet_size() {
            return Err(PolarError::AlphabetMismatch(wi, source.w_alphabet_size()));
        }
    }
    let mut mass0 = 0.0;
    let mut total = 0.0;
    let mut bits = vec![0u8; n];
    'outer: for pattern in 0u64..(1u64 << n) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = ((pattern >> i) & 1) as u8;
        }
        let mut weight = 1.0;
        for i in 0..n {
            weight *= source.prob(bits[i], w[i]);
            if weight == 0.0 {
                continue 'outer;
            }
        }
        let v = polar_transform(&bits)?;
        if v[..j - 1] != *prefix {
            continue;
        }
        total += weight;
        if v[j - 1] == 0 {
            mass0 += weight;
        }
    }
    Ok(if total > 0.0 { mass0 / total } else { 0.5 })
}
