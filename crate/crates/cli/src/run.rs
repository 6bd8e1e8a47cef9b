//! Experiment driver: construct, simulate, measure, write CSV.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use coordpolar::{
    common_randomness_rate, construct_with, decode_chain, encode_chain, encode_chain_genie,
    model_hash, tv_distance,
    ConstructionCache, ConstructionError, CoordinationModel, EmpiricalType, LastBlockMode,
    RandomnessSources,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::seeds::{derive_seed, Role};
use crate::sim::simulate_dmc;

/// One CSV row: a single (n, k, trial) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub k: usize,
    pub trial: u64,
    /// master seed the per-stream seeds were derived from
    pub seed: u64,
    /// unhalved TV between the aggregate (S,X,Y,Ŝ) type and the conditional
    /// target T_S ⊗ P(X,Y,Ŝ|S) built from the realized source type
    pub tv_aggregate: f64,
    /// per-block TV values, semicolon-joined
    pub tv_per_block: String,
    /// true iff every decoded bit block matches the encoder's (all k blocks)
    pub decode_success: bool,
    /// (|A1| + |A3|) / (k·n)
    pub cr_rate_chain: f64,
    /// last-block channel-code shared bits / ((k+1)·n)
    pub cr_rate_last_block: f64,
    /// everything shared, over all (k+1)·n symbols
    pub cr_rate_total: f64,
    pub runtime_ms: u128,
}

fn beta_tag(beta: f64) -> u32 {
    (beta * 10_000.0).round() as u32
}

/// Deterministic cache file name keyed by model, n, beta and construction mode.
pub fn cache_path(dir: &Path, model: &CoordinationModel, n: usize, beta: f64, forced: bool) -> PathBuf {
    let hash = model_hash(model);
    let suffix = if forced { "-forced" } else { "" };
    dir.join(format!("cache-{}-n{}-b{}{}.json", &hash[..12], n, beta_tag(beta), suffix))
}

/// Load a bit-exact cached construction or build and save one.
pub fn ensure_cache(
    model: &CoordinationModel,
    n: usize,
    beta: f64,
    samples: usize,
    seed: u64,
    forced: bool,
    cache_dir: &Path,
) -> Result<ConstructionCache> {
    std::fs::create_dir_all(cache_dir)?;
    let path = cache_path(cache_dir, model, n, beta, forced);
    if path.exists() {
        let cache = ConstructionCache::load(&path)
            .with_context(|| format!("loading construction cache {}", path.display()))?;
        cache.validate_for(model, n, beta)?;
        return Ok(cache);
    }
    let cache = match construct_with(model, n, beta, samples, seed, forced) {
        Ok(c) => c,
        Err(ConstructionError::ChainingInfeasible { a3, a2 }) => bail!(
            "chaining infeasible at n = {n}, beta = {beta}: |A3| = {a3} > |A2| = {a2}; \
             lower beta for this n (beta_by_n) or set force_infeasible = true"
        ),
        Err(e) => return Err(e.into()),
    };
    cache.save(&path)?;
    Ok(cache)
}

fn draw_source_block<R: Rng + ?Sized>(p_s: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let draw: f64 = rng.random();
            let mut acc = 0.0;
            for (sym, &p) in p_s.iter().enumerate() {
                acc += p;
                if draw < acc {
                    return sym;
                }
            }
            p_s.len() - 1
        })
        .collect()
}

/// Conditional coordination target: `q(s,x,y,ŝ) = t_s(s) · P(x,y,ŝ | s)` for
/// a realized source type `t_s`, flattened in (s,x,y,ŝ) mixed-radix order.
pub fn conditional_target(model: &CoordinationModel, source_type: &[f64]) -> Vec<f64> {
    let sizes = model.sizes();
    let joint = model.target_sxys();
    let p_s = model.p_s();
    let cell = sizes.x * sizes.y * sizes.s_hat;
    let mut out = vec![0.0; joint.len()];
    for s in 0..sizes.s {
        if p_s[s] <= 0.0 {
            continue;
        }
        for c in 0..cell {
            out[s * cell + c] = source_type[s] * joint[s * cell + c] / p_s[s];
        }
    }
    out
}

struct TrialMetrics {
    tv_aggregate: f64,
    tv_per_block: Vec<f64>,
}

fn measure(
    model: &CoordinationModel,
    s: &[Vec<usize>],
    x: &[Vec<usize>],
    y: &[Vec<usize>],
    s_hat: &[Vec<usize>],
    blocks: usize,
) -> Result<TrialMetrics> {
    let sizes = model.sizes();
    let dims = [sizes.s, sizes.x, sizes.y, sizes.s_hat];
    let mut aggregate: Option<EmpiricalType> = None;
    let mut tv_per_block = Vec::with_capacity(blocks);
    for i in 0..blocks {
        let t = EmpiricalType::from_sequences(
            &[s[i].as_slice(), x[i].as_slice(), y[i].as_slice(), s_hat[i].as_slice()],
            &dims,
        )?;
        let target = conditional_target(model, &t.marginal(0));
        tv_per_block.push(tv_distance(&t.probs(), &target)?);
        match aggregate.as_mut() {
            Some(agg) => agg.merge(&t)?,
            None => aggregate = Some(t),
        }
    }
    let agg = aggregate.expect("at least one block");
    let target = conditional_target(model, &agg.marginal(0));
    Ok(TrialMetrics { tv_aggregate: tv_distance(&agg.probs(), &target)?, tv_per_block })
}

/// Run one (n, k, trial) point end to end.
pub fn run_trial(
    model: &CoordinationModel,
    cache: &ConstructionCache,
    k: usize,
    master_seed: u64,
    trial: u64,
    genie: bool,
    include_last_block: bool,
) -> Result<RunRecord> {
    let start = Instant::now();
    let n = cache.n;
    let sets = &cache.sets;

    let mut src_rng =
        ChaCha12Rng::seed_from_u64(derive_seed(master_seed, Role::Source, n, k, trial));
    // one extra block: block k+1 carries no coordination payload, but when it
    // is included in the type we pair it with an independent source block
    let source_blocks: Vec<Vec<usize>> =
        (0..=k).map(|_| draw_source_block(model.p_s(), n, &mut src_rng)).collect();

    let mut shared_rng =
        ChaCha12Rng::seed_from_u64(derive_seed(master_seed, Role::Shared, n, k, trial));
    let local_seed = derive_seed(master_seed, Role::EncoderLocal, n, k, trial);
    let rand = RandomnessSources::draw(sets, &mut shared_rng, local_seed);

    let enc = if genie {
        encode_chain_genie(model, cache, &source_blocks[..k], &rand)?
    } else {
        encode_chain(model, cache, &source_blocks[..k], &rand)?
    };

    let mut ch_rng =
        ChaCha12Rng::seed_from_u64(derive_seed(master_seed, Role::Channel, n, k, trial));
    let mut y_blocks = Vec::with_capacity(k + 1);
    for x in &enc.chain.x {
        y_blocks.push(simulate_dmc(x, model.p_y_given_x(), &mut ch_rng)?);
    }

    let genie_bits: Vec<u8>;
    let mode = if genie {
        genie_bits = sets.a3.iter().map(|&j| enc.chain.v_tilde[k - 1][j]).collect();
        LastBlockMode::Genie(&genie_bits)
    } else {
        LastBlockMode::Channel
    };
    let mut dec_rng =
        ChaCha12Rng::seed_from_u64(derive_seed(master_seed, Role::Decoder, n, k, trial));
    let dec = decode_chain(model, cache, &y_blocks, &rand, mode, &mut dec_rng)?;

    let decode_success = dec.v_hat == enc.chain.v_tilde;
    let blocks = if include_last_block { k + 1 } else { k };
    let metrics = measure(model, &source_blocks, &enc.chain.x, &y_blocks, &dec.s_hat, blocks)?;

    let cr_chain = common_randomness_rate(sets, k);
    let last_bits = enc.spec.as_ref().map_or(0, |s| s.shared_bit_cost()) as f64;
    let total_syms = ((k + 1) * n) as f64;
    Ok(RunRecord {
        n,
        k,
        trial,
        seed: master_seed,
        tv_aggregate: metrics.tv_aggregate,
        tv_per_block: metrics
            .tv_per_block
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(";"),
        decode_success,
        cr_rate_chain: cr_chain,
        cr_rate_last_block: last_bits / total_syms,
        cr_rate_total: ((sets.a1.len() + sets.a3.len()) as f64 + last_bits) / total_syms,
        runtime_ms: start.elapsed().as_millis(),
    })
}

/// Run the full sweep described by a config and write `runs.csv`-style output.
///
/// Returns the CSV path together with the records, in the deterministic
/// (n, k, trial) loop order they were written in.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, Vec<RunRecord>)> {
    let model = config.model.build()?;
    std::fs::create_dir_all(out_dir)?;
    let cache_dir = out_dir.join("cache");
    let mut records = Vec::new();
    for &m in &config.m_exponents {
        let n = 1usize << m;
        let beta = config.beta_for(n);
        let cache = ensure_cache(
            &model,
            n,
            beta,
            config.mc_samples,
            derive_seed(config.master_seed, Role::Construction, n, 0, 0),
            config.force_infeasible,
            &cache_dir,
        )?;
        for &k in &config.k_values {
            for trial in 0..config.trials_per_point as u64 {
                records.push(run_trial(
                    &model,
                    &cache,
                    k,
                    config.master_seed,
                    trial,
                    config.genie_mode,
                    config.include_last_block_in_type,
                )?);
            }
        }
    }
    let csv_path = out_dir.join(&config.output);
    write_records(&csv_path, &records)?;
    Ok((csv_path, records))
}

/// Serialize records to CSV with a header row.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Read records back from CSV.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
