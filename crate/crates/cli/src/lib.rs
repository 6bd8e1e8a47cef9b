//! Experiment harness around the `coordpolar` library: TOML-configured
//! sweeps, construction caching, DMC simulation, CSV output and summaries.

pub mod config;
pub mod run;
pub mod seeds;
pub mod sim;
pub mod summary;

pub use config::{ExperimentConfig, ModelConfig, CONFIG_SCHEMA};
pub use run::{
    cache_path, conditional_target, ensure_cache, read_records, run_experiment, run_trial,
    write_records, RunRecord,
};
pub use seeds::{derive_seed, Role};
pub use sim::{simulate_dmc, SimError};
pub use summary::{summarize, SummaryError, SummaryRow};
