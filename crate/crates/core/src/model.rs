//! Target joint distribution in factored form and the information quantities
//! that gate the coordination scheme.
//!
//! The target factorizes as `P_S P_{U|S} P_{X|US} P_{Y|X} P_{Ŝ|UY}` with a
//! binary auxiliary variable `U`. A model is accepted by the scheme iff
//! `I(U;S) <= I(U;Y)`.
//!
//! Alphabets are contiguous integer ranges `0..|A|-1`. Rows indexed by a pair
//! `(U, A)` use the flat index `u * |A| + a`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polar::PairSource;

/// Row-sum tolerance for input tables.
pub const ROW_TOLERANCE: f64 = 1e-12;
/// Tolerance for derived quantities (accumulated error).
pub const DERIVED_TOLERANCE: f64 = 1e-10;

#[derive(Error, Debug, PartialEq)]
pub enum ModelError {
    #[error("row {row} of {table} sums to {sum}, not 1")]
    NonStochasticRow { table: &'static str, row: usize, sum: f64 },
    #[error("negative entry in row {row} of {table}")]
    NegativeEntry { table: &'static str, row: usize },
    #[error("{table} has {got} rows, expected {expected}")]
    AlphabetMismatch { table: &'static str, expected: usize, got: usize },
    #[error("auxiliary variable U must be binary, got {0} columns")]
    NonBinaryAuxiliary(usize),
    #[error("empty table {0}")]
    EmptyTable(&'static str),
}

/// Alphabet sizes of the model; `U` is always binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    pub s: usize,
    pub x: usize,
    pub y: usize,
    pub s_hat: usize,
}

/// The factored target distribution `P_S P_{U|S} P_{X|US} P_{Y|X} P_{Ŝ|UY}`.
///
/// Immutable after construction; safe to share across workers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinationModel {
    p_s: Vec<f64>,
    /// rows indexed by s, columns by u in {0,1}
    p_u_given_s: Vec<Vec<f64>>,
    /// rows indexed by (u, s) as u*|S|+s, columns by x
    p_x_given_us: Vec<Vec<f64>>,
    /// rows indexed by x, columns by y (the DMC)
    p_y_given_x: Vec<Vec<f64>>,
    /// rows indexed by (u, y) as u*|Y|+y, columns by ŝ
    p_shat_given_uy: Vec<Vec<f64>>,
    sizes: Alphabets,
}

fn validate_table(
    name: &'static str,
    table: &[Vec<f64>],
    rows: usize,
    cols: usize,
) -> Result<(), ModelError> {
    if table.is_empty() || cols == 0 {
        return Err(ModelError::EmptyTable(name));
    }
    if table.len() != rows {
        return Err(ModelError::AlphabetMismatch { table: name, expected: rows, got: table.len() });
    }
    for (r, row) in table.iter().enumerate() {
        if row.len() != cols {
            return Err(ModelError::AlphabetMismatch { table: name, expected: cols, got: row.len() });
        }
        if row.iter().any(|&p| p < 0.0) {
            return Err(ModelError::NegativeEntry { table: name, row: r });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(ModelError::NonStochasticRow { table: name, row: r, sum });
        }
    }
    Ok(())
}

/// Validate raw probability tables and assemble a model.
pub fn build_model(
    p_s: Vec<f64>,
    p_u_given_s: Vec<Vec<f64>>,
    p_x_given_us: Vec<Vec<f64>>,
    p_y_given_x: Vec<Vec<f64>>,
    p_shat_given_uy: Vec<Vec<f64>>,
) -> Result<CoordinationModel, ModelError> {
    let s = p_s.len();
    validate_table("p_s", std::slice::from_ref(&p_s), 1, s)?;
    if let Some(row) = p_u_given_s.iter().find(|r| r.len() != 2) {
        return Err(ModelError::NonBinaryAuxiliary(row.len()));
    }
    validate_table("p_u_given_s", &p_u_given_s, s, 2)?;
    let x = p_x_given_us.first().map_or(0, Vec::len);
    validate_table("p_x_given_us", &p_x_given_us, 2 * s, x)?;
    let y = p_y_given_x.first().map_or(0, Vec::len);
    validate_table("p_y_given_x", &p_y_given_x, x, y)?;
    let s_hat = p_shat_given_uy.first().map_or(0, Vec::len);
    validate_table("p_shat_given_uy", &p_shat_given_uy, 2 * y, s_hat)?;
    Ok(CoordinationModel {
        p_s,
        p_u_given_s,
        p_x_given_us,
        p_y_given_x,
        p_shat_given_uy,
        sizes: Alphabets { s, x, y, s_hat },
    })
}

impl CoordinationModel {
    pub fn sizes(&self) -> Alphabets {
        self.sizes
    }

    pub fn p_s(&self) -> &[f64] {
        &self.p_s
    }

    pub fn p_u_given_s(&self, s: usize, u: u8) -> f64 {
        self.p_u_given_s[s][u as usize]
    }

    pub fn p_x_given_us(&self, u: u8, s: usize) -> &[f64] {
        &self.p_x_given_us[u as usize * self.sizes.s + s]
    }

    pub fn p_y_given_x(&self) -> &[Vec<f64>] {
        &self.p_y_given_x
    }

    pub fn p_shat_given_uy(&self, u: u8, y: usize) -> &[f64] {
        &self.p_shat_given_uy[u as usize * self.sizes.y + y]
    }

    /// Full joint probability `p(s, u, x, y, ŝ)` from the factorization.
    pub fn joint(&self, s: usize, u: u8, x: usize, y: usize, s_hat: usize) -> f64 {
        self.p_s[s]
            * self.p_u_given_s[s][u as usize]
            * self.p_x_given_us[u as usize * self.sizes.s + s][x]
            * self.p_y_given_x[x][y]
            * self.p_shat_given_uy[u as usize * self.sizes.y + y][s_hat]
    }

    /// Iterate over all tuples of the joint support with their probabilities.
    pub fn joint_iter(&self) -> impl Iterator<Item = (usize, u8, usize, usize, usize, f64)> + '_ {
        let Alphabets { s, x, y, s_hat } = self.sizes;
        (0..s).flat_map(move |si| {
            (0..2u8).flat_map(move |u| {
                (0..x).flat_map(move |xi| {
                    (0..y).flat_map(move |yi| {
                        (0..s_hat)
                            .map(move |shi| (si, u, xi, yi, shi, self.joint(si, u, xi, yi, shi)))
                    })
                })
            })
        })
    }

    /// Marginal target `P_{SXYŜ}` as a flat mixed-radix table
    /// (s-major order: index = ((s*|X| + x)*|Y| + y)*|Ŝ| + ŝ).
    pub fn target_sxys(&self) -> Vec<f64> {
        let Alphabets { s, x, y, s_hat } = self.sizes;
        let mut out = vec![0.0; s * x * y * s_hat];
        for (si, _, xi, yi, shi, p) in self.joint_iter() {
            out[((si * x + xi) * y + yi) * s_hat + shi] += p;
        }
        out
    }
}

/// Marginals and mutual informations derived from a model by exact summation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedMarginals {
    /// joint over (U,S), index u*|S|+s
    pub p_us: Vec<f64>,
    /// joint over (U,Y), index u*|Y|+y
    pub p_uy: Vec<f64>,
    /// marginal over X
    pub p_x: Vec<f64>,
    /// joint over (X,Y), index x*|Y|+y
    pub p_xy: Vec<f64>,
    /// mutual informations in bits
    pub i_us: f64,
    pub i_uy: f64,
    pub i_xy: f64,
}

/// `Σ p log2(p / (p1 p2))` with `0 log 0 = 0`; joint indexed a*cols+b.
fn mutual_information(joint: &[f64], rows: usize, cols: usize) -> f64 {
    let mut ma = vec![0.0; rows];
    let mut mb = vec![0.0; cols];
    for a in 0..rows {
        for b in 0..cols {
            ma[a] += joint[a * cols + b];
            mb[b] += joint[a * cols + b];
        }
    }
    let mut mi = 0.0;
    for a in 0..rows {
        for b in 0..cols {
            let p = joint[a * cols + b];
            if p > 0.0 {
                mi += p * (p / (ma[a] * mb[b])).log2();
            }
        }
    }
    mi
}

/// Exact marginals and mutual informations by summation over the joint.
pub fn derive_marginals(model: &CoordinationModel) -> DerivedMarginals {
    let Alphabets { s, x, y, .. } = model.sizes();
    let mut p_us = vec![0.0; 2 * s];
    let mut p_uy = vec![0.0; 2 * y];
    let mut p_x = vec![0.0; x];
    let mut p_xy = vec![0.0; x * y];
    for (si, u, xi, yi, _, p) in model.joint_iter() {
        p_us[u as usize * s + si] += p;
        p_uy[u as usize * y + yi] += p;
        p_x[xi] += p;
        p_xy[xi * y + yi] += p;
    }
    let i_us = mutual_information(&p_us, 2, s);
    let i_uy = mutual_information(&p_uy, 2, y);
    let i_xy = mutual_information(&p_xy, x, y);
    DerivedMarginals { p_us, p_uy, p_x, p_xy, i_us, i_uy, i_xy }
}

impl DerivedMarginals {
    /// Pair source (B = U, W = S) used by the SC encoder.
    pub fn pair_us(&self) -> PairSource {
        let s = self.p_us.len() / 2;
        PairSource::new(&self.p_us[..s], &self.p_us[s..]).expect("valid joint")
    }

    /// Pair source (B = U, W = Y) used by the SC decoder.
    pub fn pair_uy(&self) -> PairSource {
        let y = self.p_uy.len() / 2;
        PairSource::new(&self.p_uy[..y], &self.p_uy[y..]).expect("valid joint")
    }

    /// Pair source (B = U) with no side information.
    pub fn pair_u(&self) -> PairSource {
        let s = self.p_us.len() / 2;
        PairSource::marginal(self.p_us[..s].iter().sum())
    }

    /// Pair source (B = X, W = Y) for the last-block channel code; X binary.
    pub fn pair_xy(&self) -> Option<PairSource> {
        if self.p_x.len() != 2 {
            return None;
        }
        let y = self.p_xy.len() / 2;
        Some(PairSource::new(&self.p_xy[..y], &self.p_xy[y..]).expect("valid joint"))
    }

    /// Pair source (B = X) with no side information; X binary.
    pub fn pair_x(&self) -> Option<PairSource> {
        if self.p_x.len() != 2 {
            return None;
        }
        Some(PairSource::marginal(self.p_x[0]))
    }
}

/// Outcome of the inner-bound membership test `I(U;S) <= I(U;Y)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegionCheck {
    pub inside: bool,
    /// I(U;Y) - I(U;S) in bits
    pub margin: f64,
    /// |S||X||Y||Ŝ|+1; trivially satisfied by binary U
    pub cardinality_bound: usize,
    pub cardinality_ok: bool,
}

/// Membership in the inner bound: true iff `I(U;S) <= I(U;Y)`.
pub fn check_region_membership(model: &CoordinationModel) -> RegionCheck {
    let m = derive_marginals(model);
    let sizes = model.sizes();
    let bound = sizes.s * sizes.x * sizes.y * sizes.s_hat + 1;
    RegionCheck {
        inside: m.i_us <= m.i_uy,
        margin: m.i_uy - m.i_us,
        cardinality_bound: bound,
        cardinality_ok: 2 <= bound,
    }
}

/// The reference model used throughout the experiments: S uniform binary,
/// U = S xor Bernoulli(0.11), X = U, Y = BSC(0.05)(X), Ŝ = U.
pub fn reference_model() -> CoordinationModel {
    bsc_chain_model(0.11, 0.05)
}

/// S uniform binary, U = S xor Bernoulli(q), X = U, Y = BSC(p)(X), Ŝ = U.
pub fn bsc_chain_model(q: f64, p: f64) -> CoordinationModel {
    build_model(
        vec![0.5, 0.5],
        vec![vec![1.0 - q, q], vec![q, 1.0 - q]],
        // rows (u,s): X = U deterministically
        vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ],
        vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
        // rows (u,y): Ŝ = U deterministically
        vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ],
    )
    .expect("reference tables are stochastic")
}

/// Identity pipeline: Ŝ = U = S over a noiseless binary channel.
pub fn identity_model() -> CoordinationModel {
    bsc_chain_model(0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::binary_entropy;

    #[test]
    fn identity_model_is_valid() {
        let m = identity_model();
        assert_eq!(m.sizes(), Alphabets { s: 2, x: 2, y: 2, s_hat: 2 });
    }

    #[test]
    fn non_stochastic_row_rejected() {
        let err = build_model(
            vec![0.5, 0.4],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0]; 4],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0]; 4],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NonStochasticRow { table: "p_s", .. }));
    }

    #[test]
    fn negative_entry_rejected() {
        let err = build_model(
            vec![0.5, 0.5],
            vec![vec![1.2, -0.2], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0]; 4],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0]; 4],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NegativeEntry { table: "p_u_given_s", .. }));
    }

    #[test]
    fn alphabet_mismatch_rejected() {
        let err = build_model(
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0]; 3], // needs 2*|S| = 4 rows
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0]; 4],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::AlphabetMismatch { table: "p_x_given_us", .. }));
    }

    #[test]
    fn joint_sums_to_one() {
        for m in [identity_model(), reference_model(), bsc_chain_model(0.0, 0.1)] {
            let total: f64 = m.joint_iter().map(|t| t.5).sum();
            assert!((total - 1.0).abs() < DERIVED_TOLERANCE);
        }
    }

    #[test]
    fn independent_u_has_zero_mi() {
        // U independent of S: replace P_{U|S} with a constant row
        let m = build_model(
            vec![0.5, 0.5],
            vec![vec![0.7, 0.3], vec![0.7, 0.3]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0]; 4],
        )
        .unwrap();
        let d = derive_marginals(&m);
        assert!(d.i_us.abs() < DERIVED_TOLERANCE);
        let check = check_region_membership(&m);
        assert!(check.inside);
        assert!(check.margin >= -DERIVED_TOLERANCE);
    }

    #[test]
    fn identity_channel_mi_is_one_bit() {
        let m = identity_model();
        let d = derive_marginals(&m);
        assert!((d.i_us - 1.0).abs() < DERIVED_TOLERANCE);
        assert!((d.i_uy - 1.0).abs() < DERIVED_TOLERANCE);
        let check = check_region_membership(&m);
        assert!(check.inside);
        assert!(check.margin.abs() < DERIVED_TOLERANCE);
    }

    #[test]
    fn bsc_mi_matches_closed_form_and_brute_force() {
        // U = S uniform, X = U, Y = BSC(0.1): I(U;Y) = 1 - h2(0.1)
        let m = bsc_chain_model(0.0, 0.1);
        let d = derive_marginals(&m);
        let expected = 1.0 - binary_entropy(0.1);
        assert!((d.i_uy - expected).abs() < DERIVED_TOLERANCE);
        assert!((d.i_us - 1.0).abs() < DERIVED_TOLERANCE);

        // brute-force oracle: recompute I(U;Y) from the enumerated joint
        let y_size = m.sizes().y;
        let mut joint_uy = vec![0.0; 2 * y_size];
        for (_, u, _, yi, _, p) in m.joint_iter() {
            joint_uy[u as usize * y_size + yi] += p;
        }
        let brute = mutual_information(&joint_uy, 2, y_size);
        assert!((d.i_uy - brute).abs() < 1e-14);

        // region check fails: margin = -(1 - I(U;Y)) ~ -0.469
        let check = check_region_membership(&m);
        assert!(!check.inside);
        assert!((check.margin - (expected - 1.0)).abs() < DERIVED_TOLERANCE);
        assert!((check.margin + 0.469).abs() < 1e-3);
    }

    #[test]
    fn data_processing_inequality_holds() {
        for (q, p) in [(0.11, 0.05), (0.2, 0.1), (0.0, 0.3), (0.4, 0.0)] {
            let d = derive_marginals(&bsc_chain_model(q, p));
            assert!(d.i_uy <= d.i_xy + DERIVED_TOLERANCE, "q={q} p={p}");
        }
    }

    #[test]
    fn marginal_consistency() {
        let m = reference_model();
        let d = derive_marginals(&m);
        let s = m.sizes().s;
        let y = m.sizes().y;
        for u in 0..2 {
            let from_us: f64 = d.p_us[u * s..(u + 1) * s].iter().sum();
            let from_uy: f64 = d.p_uy[u * y..(u + 1) * y].iter().sum();
            assert!((from_us - from_uy).abs() < ROW_TOLERANCE * 10.0);
        }
        let reference_margin = (1.0 - binary_entropy(0.05)) - (1.0 - binary_entropy(0.11));
        let check = check_region_membership(&m);
        assert!((check.margin - reference_margin).abs() < DERIVED_TOLERANCE);
        assert!((check.margin - 0.21).abs() < 0.01);
    }
}
