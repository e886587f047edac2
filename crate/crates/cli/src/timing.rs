//! Per-phase wall-time accounting.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use crate::error::CliResult;
use crate::files::{read_json, write_json};

pub const PHASES: [&str; 4] = ["generate", "select", "train", "report"];

fn timing_path(out: &Path) -> std::path::PathBuf {
    out.join("timing.json")
}

/// Accumulated wall time per phase in milliseconds.
pub fn load(out: &Path) -> CliResult<BTreeMap<String, u64>> {
    let p = timing_path(out);
    if p.exists() {
        read_json(&p)
    } else {
        Ok(BTreeMap::new())
    }
}

/// Add `elapsed` to the phase total; resumed phases accumulate.
pub fn record(out: &Path, phase: &str, elapsed: Duration) -> CliResult<()> {
    let mut t = load(out)?;
    *t.entry(phase.to_string()).or_insert(0) += elapsed.as_millis() as u64;
    write_json(&timing_path(out), &t)
}
