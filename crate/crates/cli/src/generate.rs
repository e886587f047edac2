//! `generate`: AME runs with ledgers, archives and checkpoints.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mehk_core::evolution::{episode_evaluator, Ame, AmeState, Evaluator, Individual};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, read_json, read_string, write_atomic, write_json};

pub const LEDGER_HEADER: &str = "eval_index,individual_id,parent_id,fitness,seed,wall_time_ms,mode\n";

pub fn replicate_dir(out: &Path, replicate: usize) -> PathBuf {
    out.join("generate").join(format!("rep{replicate:03}"))
}

pub fn ledger_row(ind: &Individual, mode: &str) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        ind.eval_index.unwrap_or(0),
        ind.id,
        ind.parent.map(|p| p.to_string()).unwrap_or_default(),
        ind.fitness.unwrap_or(0.0),
        ind.seed,
        ind.wall_time_ms,
        mode
    )
}

fn archive_line(ind: &Individual, threshold: f64) -> String {
    let mut s = ind.to_record(threshold).to_string();
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub replicate: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub next_id: u64,
    pub population: Vec<u64>,
    /// Bytes of ledger and archive covered by this checkpoint.
    pub ledger_bytes: u64,
    pub ledger_sha256: String,
    pub archive_bytes: u64,
    pub archive_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub best_fitness: f64,
    pub best_individual: u64,
    pub faults: usize,
    pub wall_ms: u64,
}

/// Options that tests use to interrupt a run.
#[derive(Clone, Default)]
pub struct GenerateOptions {
    pub resume: bool,
    /// Stop (as if killed) once this many evaluations are recorded.
    pub stop_after: Option<usize>,
    /// Replaces the episode evaluator.
    pub evaluator: Option<Evaluator>,
}

/// Appends to a file while hashing everything it has written.
struct HashedAppender {
    file: BufWriter<File>,
    hasher: Sha256,
    bytes: u64,
    path: PathBuf,
}

impl HashedAppender {
    fn create(path: &Path, header: &str) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut a = Self { file: BufWriter::new(file), hasher: Sha256::new(), bytes: 0, path: path.to_path_buf() };
        a.write(header)?;
        Ok(a)
    }

    /// Reopen `path`, keeping only its first `bytes` bytes after checking
    /// their digest.
    fn resume(path: &Path, bytes: u64, sha: &str) -> CliResult<Self> {
        let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        if (data.len() as u64) < bytes {
            return Err(CliError::Checkpoint(format!("{} is shorter than its checkpoint", path.display())));
        }
        let prefix = &data[..bytes as usize];
        let mut hasher = Sha256::new();
        hasher.update(prefix);
        if hex::encode(hasher.clone().finalize()) != sha {
            return Err(CliError::Checkpoint(format!("{} does not match its checkpoint digest", path.display())));
        }
        // Rows after the checkpoint belong to evaluations that will be redone.
        let file = OpenOptions::new().write(true).open(path).map_err(|e| CliError::io(path, e))?;
        file.set_len(bytes).map_err(|e| CliError::io(path, e))?;
        let file = OpenOptions::new().append(true).open(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self { file: BufWriter::new(file), hasher, bytes, path: path.to_path_buf() })
    }

    fn write(&mut self, s: &str) -> CliResult<()> {
        self.file.write_all(s.as_bytes()).map_err(|e| CliError::io(&self.path, e))?;
        self.hasher.update(s.as_bytes());
        self.bytes += s.len() as u64;
        Ok(())
    }

    fn flush(&mut self) -> CliResult<()> {
        self.file.flush().map_err(|e| CliError::io(&self.path, e))
    }

    fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

fn load_archive(path: &Path) -> CliResult<Vec<Individual>> {
    read_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(Individual::from_record(serde_json::from_str(l)?)?))
        .collect()
}

/// Every evaluated individual of a finished (or checkpointed) replicate.
pub fn read_archive(out: &Path, replicate: usize) -> CliResult<Vec<Individual>> {
    let path = replicate_dir(out, replicate).join("archive.jsonl");
    if !path.exists() {
        return Err(CliError::Missing(format!("{} (run `generate` first)", path.display())));
    }
    load_archive(&path)
}

fn summarise(replicate: usize, seed: u64, archive: &[Individual], wall_ms: u64) -> ReplicateSummary {
    let best = archive.iter().fold(None::<&Individual>, |b, i| match b {
        Some(b) if b.fitness.unwrap_or(0.0) >= i.fitness.unwrap_or(0.0) => Some(b),
        _ => Some(i),
    });
    ReplicateSummary {
        replicate,
        seed,
        evaluations: archive.len(),
        best_fitness: best.and_then(|b| b.fitness).unwrap_or(0.0),
        best_individual: best.map_or(0, |b| b.id),
        faults: archive.iter().filter(|i| i.fault).count(),
        wall_ms,
    }
}

/// Run (or resume) one replicate.
pub fn generate_replicate(
    cfg: &ExperimentConfig,
    out: &Path,
    replicate: usize,
    opts: &GenerateOptions,
) -> CliResult<ReplicateSummary> {
    let t0 = Instant::now();
    let dir = replicate_dir(out, replicate);
    create_dir(&dir)?;
    let summary_path = dir.join("summary.json");
    let ledger_path = dir.join("ledger.csv");
    let archive_path = dir.join("archive.jsonl");
    let checkpoint_path = dir.join("checkpoint.json");
    let ame_cfg = cfg.ame_for(replicate);
    let theta = ame_cfg.content_threshold;
    let mode = cfg.mode.name();

    if opts.resume && summary_path.exists() {
        return read_json(&summary_path);
    }
    if !opts.resume && (ledger_path.exists() || summary_path.exists()) {
        return Err(CliError::Config(format!("{} already holds a run; pass --resume to continue it", dir.display())));
    }

    let evaluator = opts.evaluator.clone().unwrap_or_else(|| episode_evaluator(&ame_cfg));
    let (mut ledger, mut archive_file, mut ame) = if opts.resume && checkpoint_path.exists() {
        let cp: Checkpoint = read_json(&checkpoint_path)?;
        if cp.replicate != replicate || cp.seed != ame_cfg.master_seed {
            return Err(CliError::Checkpoint("checkpoint belongs to a different replicate or seed".into()));
        }
        let ledger = HashedAppender::resume(&ledger_path, cp.ledger_bytes, &cp.ledger_sha256)?;
        let archive_file = HashedAppender::resume(&archive_path, cp.archive_bytes, &cp.archive_sha256)?;
        let archive = load_archive(&archive_path)?;
        if archive.len() != cp.evaluations {
            return Err(CliError::Checkpoint("archive length differs from the checkpoint".into()));
        }
        let population = cp
            .population
            .iter()
            .map(|id| {
                archive.iter().find(|i| i.id == *id).cloned().ok_or_else(|| {
                    CliError::Checkpoint(format!("population member {id} is not in the archive"))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let state = AmeState { population, archive, next_id: cp.next_id };
        (ledger, archive_file, Ame::resume(ame_cfg.clone(), state, evaluator)?)
    } else {
        let ledger = HashedAppender::create(&ledger_path, LEDGER_HEADER)?;
        let archive_file = HashedAppender::create(&archive_path, "")?;
        (ledger, archive_file, Ame::with_evaluator(ame_cfg.clone(), evaluator)?)
    };

    let mut since_checkpoint = 0usize;
    let mut failure: Option<CliError> = None;
    let mut record = |state: &AmeState, fresh: &[Individual]| -> CliResult<bool> {
        for ind in fresh {
            ledger.write(&ledger_row(ind, mode))?;
            archive_file.write(&archive_line(ind, theta))?;
        }
        since_checkpoint += fresh.len();
        if since_checkpoint >= cfg.checkpoint_every {
            since_checkpoint = 0;
            ledger.flush()?;
            archive_file.flush()?;
            let cp = Checkpoint {
                replicate,
                seed: ame_cfg.master_seed,
                evaluations: state.archive.len(),
                next_id: state.next_id,
                population: state.population.iter().map(|i| i.id).collect(),
                ledger_bytes: ledger.bytes,
                ledger_sha256: ledger.digest(),
                archive_bytes: archive_file.bytes,
                archive_sha256: archive_file.digest(),
            };
            write_json(&checkpoint_path, &cp)?;
        }
        Ok(opts.stop_after.is_some_and(|n| state.archive.len() >= n))
    };
    let result = ame.run(|state, fresh| match record(state, fresh) {
        Ok(false) => Ok(()),
        Ok(true) => Err(mehk_core::Error::Config("interrupted".into())),
        Err(e) => {
            failure = Some(e);
            Err(mehk_core::Error::Config("output failed".into()))
        }
    });
    drop(record);
    ledger.flush()?;
    archive_file.flush()?;
    if let Some(e) = failure {
        return Err(e);
    }
    if let Err(e) = result {
        return Err(CliError::Checkpoint(format!("replicate {replicate} stopped after a partial run: {e}")));
    }

    let wall_ms = if cfg.sync_mode { 0 } else { t0.elapsed().as_millis() as u64 };
    let summary = summarise(replicate, ame_cfg.master_seed, &ame.state().archive, wall_ms);
    write_json(&summary_path, &summary)?;
    Ok(summary)
}

pub fn summary_csv(rows: &[ReplicateSummary]) -> String {
    let mut s = String::from("replicate,seed,evaluations,best_fitness,best_individual,faults,wall_ms\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.replicate, r.seed, r.evaluations, r.best_fitness, r.best_individual, r.faults, r.wall_ms
        ));
    }
    s
}

/// Every replicate of the configuration, then the summary table.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path, opts: &GenerateOptions) -> CliResult<Vec<ReplicateSummary>> {
    cfg.validate()?;
    let t0 = Instant::now();
    create_dir(out)?;
    write_atomic(&out.join("config.toml"), cfg.to_toml())?;
    let mut rows = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates {
        rows.push(generate_replicate(cfg, out, r, opts)?);
    }
    write_atomic(&out.join("generate").join("summary.csv"), summary_csv(&rows))?;
    crate::timing::record(out, "generate", t0.elapsed())?;
    Ok(rows)
}
