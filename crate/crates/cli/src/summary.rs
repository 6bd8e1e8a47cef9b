//! Aggregation of run records into per-(n, k) summary rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::run::RunRecord;

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("no records to summarize")]
    Empty,
}

/// One summary row per (n, k) sweep point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// fraction of trials with tv_aggregate > epsilon
    pub frac_tv_above_eps: f64,
    pub median_tv: f64,
    pub mean_tv: f64,
    pub frac_decode_success: f64,
    pub mean_cr_rate_chain: f64,
    pub mean_cr_rate_total: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Group records by (n, k), ordered by n then k.
pub fn summarize(records: &[RunRecord], epsilon: f64) -> Result<Vec<SummaryRow>, SummaryError> {
    if records.is_empty() {
        return Err(SummaryError::Empty);
    }
    let mut keys: Vec<(usize, usize)> = records.iter().map(|r| (r.n, r.k)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut rows = Vec::with_capacity(keys.len());
    for (n, k) in keys {
        let group: Vec<&RunRecord> =
            records.iter().filter(|r| r.n == n && r.k == k).collect();
        let mut tvs: Vec<f64> = group.iter().map(|r| r.tv_aggregate).collect();
        tvs.sort_by(|a, b| a.total_cmp(b));
        let trials = group.len();
        rows.push(SummaryRow {
            n,
            k,
            trials,
            frac_tv_above_eps: group.iter().filter(|r| r.tv_aggregate > epsilon).count() as f64
                / trials as f64,
            median_tv: median(&tvs),
            mean_tv: tvs.iter().sum::<f64>() / trials as f64,
            frac_decode_success: group.iter().filter(|r| r.decode_success).count() as f64
                / trials as f64,
            mean_cr_rate_chain: group.iter().map(|r| r.cr_rate_chain).sum::<f64>()
                / trials as f64,
            mean_cr_rate_total: group.iter().map(|r| r.cr_rate_total).sum::<f64>()
                / trials as f64,
        });
    }
    Ok(rows)
}
