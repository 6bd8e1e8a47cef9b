//! `coordpolar` command-line entry point.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use coordpolar::{
    bsc_chain_model, check_region_membership, derive_marginals, identity_model, lemma1_proxy,
    model_hash, reference_model, sc_posterior_sweep, tv_distance, CoordinationModel, PairSource,
};
use coordpolar_cli::config::ExperimentConfig;
use coordpolar_cli::run::{ensure_cache, read_records, run_experiment};
use coordpolar_cli::seeds::{derive_seed, Role};
use coordpolar_cli::summary::summarize;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Environment variable overriding the output directory for all subcommands.
const OUT_DIR_ENV: &str = "COORDPOLAR_OUT_DIR";

#[derive(Parser)]
#[command(name = "coordpolar", version, about = "Polar coordination-coding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Built-in model: reference | identity | bsc-chain
    #[arg(long, default_value = "reference")]
    model: String,
    /// Source flip probability for bsc-chain
    #[arg(long, default_value_t = 0.11)]
    q: f64,
    /// Channel crossover probability for bsc-chain
    #[arg(long, default_value_t = 0.05)]
    p: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<CoordinationModel> {
        match self.model.as_str() {
            "reference" => Ok(reference_model()),
            "identity" => Ok(identity_model()),
            "bsc-chain" => Ok(bsc_chain_model(self.q, self.p)),
            other => bail!("unknown built-in model {other:?}"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build (or refresh) a construction cache for one block length
    Construct {
        #[command(flatten)]
        model: ModelArgs,
        /// Block length exponent m (n = 2^m)
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 0.25)]
        beta: f64,
        /// Monte-Carlo samples per entropy profile
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep going when |A3| > |A2| by truncating the injection
        #[arg(long)]
        force: bool,
        /// Cache directory (default: <out-dir>/cache)
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Run the sweep described by a TOML experiment config
    Run {
        /// Experiment config path
        config: PathBuf,
        /// Output directory (default: current dir, overridable via COORDPOLAR_OUT_DIR)
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also dump a JSON block trace of the first trial of each sweep point
        #[arg(long)]
        trace: bool,
    },
    /// Aggregate a runs CSV into per-(n, k) summary rows
    Summarize {
        /// runs.csv produced by `run`
        csv: PathBuf,
        /// TV threshold for the exceedance fraction
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
    },
    /// Print a model's information quantities and region membership
    CheckModel {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Quick end-to-end sanity checks (exact-oracle agreement, mixing lemma)
    Selftest,
}

fn out_dir(cli_choice: Option<PathBuf>) -> PathBuf {
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        return PathBuf::from(dir);
    }
    cli_choice.unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Construct { model, m, beta, samples, seed, force, cache_dir } => {
            let model = model.build()?;
            let dir = cache_dir.unwrap_or_else(|| out_dir(None).join("cache"));
            let n = 1usize << m;
            let cache = ensure_cache(&model, n, beta, samples, seed, force, &dir)?;
            let s = &cache.sets;
            println!(
                "model {} n = {n} beta = {beta} delta_n = {:.3e}",
                &model_hash(&model)[..12],
                s.delta_n
            );
            println!(
                "|V_V|S| = {} |H_V|Y| = {} A1 = {} A2 = {} A3 = {} A4 = {}",
                s.v_v_given_s.len(),
                s.h_v_given_y.len(),
                s.a1.len(),
                s.a2.len(),
                s.a3.len(),
                s.a4.len()
            );
            if let Some(x) = &cache.x_sets {
                println!(
                    "channel code: |V_X| = {} |H_X|Y| = {} info = {}",
                    x.v_x.len(),
                    x.h_x_given_y.len(),
                    x.info_set.len()
                );
            }
        }
        Command::Run { config, out_dir: dir, trace } => {
            let config = ExperimentConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            let dir = out_dir(dir);
            if trace {
                eprintln!("note: --trace dumps per-point traces under {}/traces", dir.display());
            }
            let (csv_path, records) = run_experiment(&config, &dir)?;
            if trace {
                write_traces(&config, &dir)?;
            }
            println!("{} records -> {}", records.len(), csv_path.display());
            for row in summarize(&records, 0.25)? {
                println!(
                    "n = {:>5} k = {} trials = {:>3} median TV = {:.4} frac > 0.25 = {:.2} decode ok = {:.2}",
                    row.n, row.k, row.trials, row.median_tv, row.frac_tv_above_eps,
                    row.frac_decode_success
                );
            }
        }
        Command::Summarize { csv, epsilon } => {
            let records = read_records(&csv)?;
            println!(
                "n,k,trials,frac_tv_above_eps,median_tv,mean_tv,frac_decode_success,mean_cr_rate_chain,mean_cr_rate_total"
            );
            for r in summarize(&records, epsilon)? {
                println!(
                    "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                    r.n,
                    r.k,
                    r.trials,
                    r.frac_tv_above_eps,
                    r.median_tv,
                    r.mean_tv,
                    r.frac_decode_success,
                    r.mean_cr_rate_chain,
                    r.mean_cr_rate_total
                );
            }
        }
        Command::CheckModel { model } => {
            let model = model.build()?;
            let m = derive_marginals(&model);
            let check = check_region_membership(&model);
            println!("model hash      {}", model_hash(&model));
            println!("I(U;S)          {:.6} bits", m.i_us);
            println!("I(U;Y)          {:.6} bits", m.i_uy);
            println!("I(X;Y)          {:.6} bits", m.i_xy);
            println!("margin I(U;Y) - I(U;S) = {:.6}", check.margin);
            println!(
                "inside achievable region: {} (|U| bound {}: {})",
                check.inside,
                check.cardinality_bound,
                if check.cardinality_ok { "ok" } else { "violated" }
            );
            if !check.inside {
                std::process::exit(1);
            }
        }
        Command::Selftest => selftest()?,
    }
    Ok(())
}

/// Dump one JSON trace per sweep point (trial 0) for offline replay.
fn write_traces(config: &ExperimentConfig, dir: &std::path::Path) -> Result<()> {
    use coordpolar::{encode_chain, model_hash, BlockTrace, RandomnessSources};
    let model = config.model.build()?;
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces)?;
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
            &dir.join("cache"),
        )?;
        for &k in &config.k_values {
            let mut shared =
                ChaCha12Rng::seed_from_u64(derive_seed(config.master_seed, Role::Shared, n, k, 0));
            let local = derive_seed(config.master_seed, Role::EncoderLocal, n, k, 0);
            let rand = RandomnessSources::draw(&cache.sets, &mut shared, local);
            let mut src =
                ChaCha12Rng::seed_from_u64(derive_seed(config.master_seed, Role::Source, n, k, 0));
            let blocks: Vec<Vec<usize>> = (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            use rand::Rng;
                            usize::from(src.random::<f64>() >= model.p_s()[0])
                        })
                        .collect()
                })
                .collect();
            let enc = encode_chain(&model, &cache, &blocks, &rand)?;
            let trace = BlockTrace {
                schema_version: 1,
                model_hash: model_hash(&model),
                rand: rand.clone(),
                chain: enc.chain,
            };
            trace.save(&traces.join(format!("trace-n{n}-k{k}.json")))?;
        }
    }
    Ok(())
}

/// Cheap invariants that catch a broken build or profile quickly.
fn selftest() -> Result<()> {
    // 1. SC posteriors match the brute-force oracle on a small block
    let model = reference_model();
    let marg = derive_marginals(&model);
    let source: PairSource = marg.pair_us();
    let n = 8;
    let v = vec![0u8; n];
    let w = vec![1usize; n];
    let sweep = sc_posterior_sweep(&v, &w, &source)?;
    for (j, &p) in sweep.iter().enumerate() {
        let brute = coordpolar::brute_posterior(j + 1, &v[..j], &w, &source)?;
        if (p - brute).abs() > 1e-9 {
            bail!("selftest: SC posterior {j} = {p} differs from oracle {brute}");
        }
    }
    println!("ok: SC posteriors match brute-force oracle (n = {n})");

    // 2. degenerate model mixes perfectly
    let degenerate = bsc_chain_model(0.0, 0.0);
    let cache = ensure_cache(
        &degenerate,
        64,
        0.3,
        400,
        1,
        false,
        &std::env::temp_dir().join("coordpolar-selftest"),
    )?;
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let frac = lemma1_proxy(&degenerate, &cache.sets, 20, 0.1, &mut rng);
    if frac < 1.0 {
        bail!("selftest: degenerate model mixing fraction {frac} < 1");
    }
    println!("ok: degenerate model achieves exact mixing");

    // 3. reference model sits inside the achievable region
    let check = check_region_membership(&model);
    if !check.inside {
        bail!("selftest: reference model left the achievable region");
    }
    println!("ok: reference model inside region (margin {:.4} bits)", check.margin);

    // 4. type of an iid draw concentrates on the marginal
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let p_s = model.p_s();
    let seq: Vec<usize> = (0..20_000)
        .map(|_| {
            use rand::Rng;
            usize::from(rng.random::<f64>() >= p_s[0])
        })
        .collect();
    let t = coordpolar::EmpiricalType::from_sequences(&[&seq], &[2])?;
    let tv = tv_distance(&t.probs(), p_s)?;
    if tv > 0.02 {
        bail!("selftest: source type TV {tv} too large");
    }
    println!("ok: source sampler concentrates (TV = {tv:.4})");
    println!("selftest passed");
    Ok(())
}
