//! `train`: NCMA-ES on every (design, task, training replicate) cell.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mehk_core::controllers::{ControllerFamily, ControllerParamsFile};
use mehk_core::morphology::RobotDesign;
use mehk_core::ncmaes::{curve_csv, random_baseline, train};
use mehk_core::seeds;
use mehk_core::sim::{build_body, EpisodeConfig, TaskKind};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::files::{read_json, read_string, write_atomic, write_json};
use crate::select::{select_dir, Selection};

/// A design to train, with where its results go.
#[derive(Clone, Debug)]
pub struct TrainTarget {
    /// Generation replicate the design came from, if any.
    pub replicate: Option<usize>,
    pub role: String,
    pub design: RobotDesign,
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub replicate: Option<usize>,
    pub role: String,
    pub design_id: String,
    pub task: TaskKind,
    pub run: usize,
    pub seed: u64,
    pub best_task: f64,
    pub baseline_task: f64,
    pub evaluations: usize,
    pub wall_ms: u64,
    pub status: String,
}

#[derive(Serialize, Deserialize)]
struct BestParams {
    design_id: String,
    task: TaskKind,
    seed: u64,
    best_task: f64,
    controller: ControllerParamsFile,
}

/// Targets from the picks of every selected replicate.
pub fn selected_targets(cfg: &ExperimentConfig, out: &Path) -> CliResult<Vec<TrainTarget>> {
    let mut targets = Vec::new();
    for r in 0..cfg.replicates {
        let dir = select_dir(out, r);
        let picks = dir.join("picks.json");
        if !picks.exists() {
            continue;
        }
        let sel: Selection = read_json(&picks)?;
        for p in sel.picks {
            let design = RobotDesign::from_json(&read_string(&dir.join(&p.design_file))?)?;
            targets.push(TrainTarget {
                replicate: Some(r),
                dir: out.join("train").join(format!("rep{r:03}")).join(&p.role),
                role: p.role,
                design,
            });
        }
    }
    if targets.is_empty() {
        return Err(CliError::Missing("no picks found (run `select` first)".into()));
    }
    Ok(targets)
}

/// Targets from explicit design files.
pub fn file_targets(out: &Path, files: &[PathBuf]) -> CliResult<Vec<TrainTarget>> {
    files
        .iter()
        .map(|f| {
            let design = RobotDesign::from_json(&read_string(f)?)?;
            let role = f
                .file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.trim_end_matches(".json").trim_end_matches(".design").to_string())
                .unwrap_or_else(|| design.id_hex());
            Ok(TrainTarget { replicate: None, dir: out.join("train").join("custom").join(&role), role, design })
        })
        .collect()
}

fn cell_seed(cfg: &ExperimentConfig, t: &TrainTarget, task: TaskKind, run: usize) -> u64 {
    let task_index = [TaskKind::Exploration, TaskKind::HillClimb, TaskKind::LocoFlat, TaskKind::LocoRough, TaskKind::Manipulation]
        .iter()
        .position(|k| *k == task)
        .unwrap_or(0) as u64;
    seeds::derive(cfg.master_seed, &[seeds::STREAM_TRAIN, t.design.id(), task_index, run as u64])
}

/// Train one cell, or reload it when its results already exist.
pub fn train_cell(cfg: &ExperimentConfig, t: &TrainTarget, task: TaskKind, run: usize) -> CliResult<CellResult> {
    let dir = t.dir.join(task.name()).join(format!("run{run:02}"));
    let result_path = dir.join("result.json");
    if result_path.exists() {
        return read_json(&result_path);
    }
    let t0 = Instant::now();
    let seed = cell_seed(cfg, t, task, run);
    let ncma = cfg.ncma();
    let episode = EpisodeConfig::for_task(task);
    let r = train(&t.design, task, &ncma, &cfg.ame.body, &episode, seed)?;
    let baseline = random_baseline(&t.design, task, &ncma, &cfg.ame.body, &episode, seed);
    let body = build_body(&t.design, &cfg.ame.body);
    write_atomic(&dir.join("curve.csv"), curve_csv(&r.curve))?;
    write_json(
        &dir.join("best_params.json"),
        &BestParams {
            design_id: t.design.id_hex(),
            task,
            seed,
            best_task: r.best_task,
            controller: ControllerParamsFile {
                family: ControllerFamily::Elman,
                n: body.layout.n(),
                m: body.layout.m(),
                params: r.best_params,
            },
        },
    )?;
    let cell = CellResult {
        replicate: t.replicate,
        role: t.role.clone(),
        design_id: t.design.id_hex(),
        task,
        run,
        seed,
        best_task: r.best_task,
        baseline_task: baseline,
        evaluations: r.evaluations,
        wall_ms: if cfg.sync_mode { 0 } else { t0.elapsed().as_millis() as u64 },
        status: "ok".into(),
    };
    write_json(&result_path, &cell)?;
    Ok(cell)
}

pub fn summary_csv(cells: &[CellResult]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "replicate", "role", "design_id", "task", "run", "seed", "best_task", "baseline_task", "evaluations",
        "wall_ms", "status",
    ])
    .map_err(|e| CliError::Config(e.to_string()))?;
    for c in cells {
        w.write_record([
            c.replicate.map(|r| r.to_string()).unwrap_or_default(),
            c.role.clone(),
            c.design_id.clone(),
            c.task.name().to_string(),
            c.run.to_string(),
            c.seed.to_string(),
            c.best_task.to_string(),
            c.baseline_task.to_string(),
            c.evaluations.to_string(),
            c.wall_ms.to_string(),
            c.status.clone(),
        ])
        .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Train every target on every configured task; failing cells are recorded
/// and the rest proceed.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, targets: &[TrainTarget]) -> CliResult<Vec<CellResult>> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut cells = Vec::new();
    let mut failed = 0;
    for t in targets {
        for &task in &cfg.train.tasks {
            for run in 0..cfg.train.replicates {
                match train_cell(cfg, t, task, run) {
                    Ok(c) => cells.push(c),
                    Err(e) => {
                        failed += 1;
                        cells.push(CellResult {
                            replicate: t.replicate,
                            role: t.role.clone(),
                            design_id: t.design.id_hex(),
                            task,
                            run,
                            seed: cell_seed(cfg, t, task, run),
                            best_task: f64::NAN,
                            baseline_task: f64::NAN,
                            evaluations: 0,
                            wall_ms: 0,
                            status: format!("failed: {e}"),
                        });
                    }
                }
            }
        }
    }
    write_atomic(&out.join("train").join("summary.csv"), summary_csv(&cells)?)?;
    crate::timing::record(out, "train", t0.elapsed())?;
    if failed > 0 {
        return Err(CliError::TrainFailures { failed });
    }
    Ok(cells)
}
