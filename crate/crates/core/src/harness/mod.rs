//! Experiment orchestration: equivalence and ablation suites, timing, and
//! result persistence.
//!
//! Every emitted row carries the code version and a hash of the full
//! configuration; JSON output additionally embeds the configuration itself.

pub mod bench;
pub mod config;
pub mod report;
pub mod suite;

use sha2::{Digest, Sha256};

pub use bench::{run_benchmark, BenchResult, TimingRow};
pub use config::{ExperimentConfig, OutputFormat};
pub use suite::{run_ablation_suite, run_equivalence_suite, Expectation, SuiteResult, SuiteRow};

/// Crate version plus the git revision it was built from.
pub fn code_version() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("ZIL_GIT_HASH"))
}

/// Short SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}
