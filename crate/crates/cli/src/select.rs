//! `select`: threshold filter, Pareto front and the three picks per replicate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mehk_core::evolution::Individual;
use mehk_core::selection::{front_csv, pareto_front, pick_three, score_designs, threshold_filter, Picks, ScoredDesign};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, write_atomic, write_json};
use crate::generate::read_archive;

pub const ROLES: [&str; 3] = ["best_fitness", "median", "best_sparsity"];

pub fn select_dir(out: &Path, replicate: usize) -> PathBuf {
    out.join("select").join(format!("rep{replicate:03}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickRecord {
    pub role: String,
    pub individual_id: u64,
    pub design_id: String,
    pub fitness: f64,
    pub sparsity: f64,
    pub genome_file: String,
    pub design_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub replicate: usize,
    pub seed: u64,
    pub threshold: f64,
    pub filtered: usize,
    pub front_size: usize,
    /// Set when the picks are not three distinct designs.
    pub duplicates: bool,
    pub picks: Vec<PickRecord>,
}

/// Scored filtered designs and their Pareto front.
pub fn front_of(cfg: &ExperimentConfig, archive: &[Individual]) -> CliResult<(Vec<ScoredDesign>, Vec<ScoredDesign>)> {
    let filtered = threshold_filter(archive, cfg.threshold());
    let scored = score_designs(&filtered, archive, cfg.selection.sparsity_pool, cfg.selection.sparsity_k)?;
    let front = pareto_front(&scored);
    Ok((scored, front))
}

fn report_text(sel: &Selection, front: &[ScoredDesign]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "replicate {} (seed {})", sel.replicate, sel.seed);
    let _ = writeln!(s, "threshold {}: {} designs pass, {} on the front", sel.threshold, sel.filtered, front.len());
    if sel.duplicates {
        let _ = writeln!(s, "note: the picks are not three distinct designs");
    }
    for p in &sel.picks {
        let _ = writeln!(
            s,
            "{:<14} individual {:>6}  design {}  fitness {:.4}  sparsity {:.4}  genome {}  design {}",
            p.role, p.individual_id, p.design_id, p.fitness, p.sparsity, p.genome_file, p.design_file
        );
    }
    s
}

/// Select from one replicate's archive. `Ok(None)` when nothing passes the threshold.
pub fn select_replicate(cfg: &ExperimentConfig, out: &Path, replicate: usize) -> CliResult<Option<Selection>> {
    let archive = read_archive(out, replicate)?;
    let dir = select_dir(out, replicate);
    create_dir(&dir)?;
    let (scored, front) = front_of(cfg, &archive)?;
    write_atomic(&dir.join("filtered.csv"), front_csv(&scored))?;
    write_atomic(&dir.join("front.csv"), front_csv(&front))?;
    let Some(picks) = pick_three(&front) else {
        write_atomic(
            &dir.join("report.txt"),
            format!(
                "replicate {replicate}: no design has fitness above {}; lower `selection.threshold` and rerun select\n",
                cfg.threshold()
            ),
        )?;
        return Ok(None);
    };
    let Picks { best_fitness, median, best_sparsity, duplicates } = picks;
    let mut records = Vec::with_capacity(3);
    for (role, p) in ROLES.iter().zip([best_fitness, median, best_sparsity]) {
        let ind = archive
            .iter()
            .find(|i| i.id == p.individual_id)
            .expect("picks come from the archive");
        let genome_file = format!("{role}.genome.json");
        let design_file = format!("{role}.design.json");
        write_atomic(&dir.join(&genome_file), ind.genome.to_json()?)?;
        write_atomic(&dir.join(&design_file), ind.design.to_json()?)?;
        records.push(PickRecord {
            role: role.to_string(),
            individual_id: p.individual_id,
            design_id: ind.design.id_hex(),
            fitness: p.fitness,
            sparsity: p.sparsity,
            genome_file,
            design_file,
        });
    }
    let sel = Selection {
        replicate,
        seed: cfg.replicate_seed(replicate),
        threshold: cfg.threshold(),
        filtered: scored.len(),
        front_size: front.len(),
        duplicates,
        picks: records,
    };
    write_json(&dir.join("picks.json"), &sel)?;
    write_atomic(&dir.join("report.txt"), report_text(&sel, &front))?;
    Ok(Some(sel))
}

/// Select for every replicate; replicates with an empty filtered set are
/// reported together after the others are written.
pub fn cmd_select(cfg: &ExperimentConfig, out: &Path) -> CliResult<Vec<Selection>> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut done = Vec::new();
    let mut empty = Vec::new();
    for r in 0..cfg.replicates {
        match select_replicate(cfg, out, r)? {
            Some(s) => done.push(s),
            None => empty.push(r),
        }
    }
    crate::timing::record(out, "select", t0.elapsed())?;
    if empty.is_empty() {
        Ok(done)
    } else {
        Err(CliError::EmptySelection { theta: cfg.threshold(), replicates: empty })
    }
}
