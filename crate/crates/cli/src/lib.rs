//! Experiment pipeline: `generate → select → train → report`.
//!
//! Every phase reads and writes plain files under one output directory:
//!
//! - `config.toml`: the resolved configuration of the run
//! - `generate/repNNN/`: `ledger.csv`, `archive.jsonl`, `checkpoint.json`, `summary.json`
//! - `select/repNNN/`: `filtered.csv`, `front.csv`, `picks.json`, pick genome and design files, `report.txt`
//! - `train/.../<task>/runNN/`: `curve.csv`, `best_params.json`, `result.json`; `train/summary.csv`
//! - `report/`: `designs.csv`, `components.csv`, `train.csv`, `timing.csv`, `report.txt`

pub mod config;
pub mod error;
pub mod files;
pub mod generate;
pub mod report;
pub mod select;
pub mod timing;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
