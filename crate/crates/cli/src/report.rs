//! `report`: tables joining designs, component counts, scores and wall time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use mehk_core::morphology::{ComponentKind, RobotDesign};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, write_atomic};
use crate::generate::read_archive;
use crate::timing::{self, PHASES};

pub const DESIGN_COLUMNS: &str = "replicate,seed,individual_id,design_id,fitness,fault,components,wheels,limbs,sensors,castors,chassis_width,chassis_depth,chassis_height,chassis_voxels";

/// Component and chassis columns of a design, in `DESIGN_COLUMNS` order.
pub fn design_counts(d: &RobotDesign) -> [usize; 9] {
    let (w, depth, h, voxels) = d.chassis_extent();
    [
        d.components().len(),
        d.count(ComponentKind::Wheel),
        d.count(ComponentKind::Limb),
        d.count(ComponentKind::Sensor),
        d.count(ComponentKind::Castor),
        w,
        depth,
        h,
        voxels,
    ]
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportSummary {
    pub designs: usize,
    /// Phases or replicates without data.
    pub gaps: Vec<String>,
    pub total_ms: u64,
}

/// Write the report tables under `out/report`. Missing inputs leave gaps
/// that are listed in `report.txt` instead of failing the command.
pub fn cmd_report(cfg: &ExperimentConfig, out: &Path) -> CliResult<ReportSummary> {
    let t0 = Instant::now();
    let dir = out.join("report");
    create_dir(&dir)?;
    let mut summary = ReportSummary::default();

    let mut designs = format!("{DESIGN_COLUMNS}\n");
    let mut by_count = String::from("replicate,seed,components,designs,percent,median_fitness,max_fitness\n");
    for r in 0..cfg.replicates {
        let archive = match read_archive(out, r) {
            Ok(a) => a,
            Err(CliError::Missing(_)) => {
                summary.gaps.push(format!("generate: replicate {r} has no archive"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let seed = cfg.replicate_seed(r);
        let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for ind in &archive {
            let c = design_counts(&ind.design);
            let fitness = ind.fitness.unwrap_or(0.0);
            let counts = c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            let _ = writeln!(
                designs,
                "{r},{seed},{},{},{fitness},{},{counts}",
                ind.id,
                ind.design.id_hex(),
                ind.fault
            );
            groups.entry(c[0]).or_default().push(fitness);
        }
        summary.designs += archive.len();
        for (components, mut f) in groups {
            let n = f.len();
            let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(
                by_count,
                "{r},{seed},{components},{n},{},{},{max}",
                100.0 * n as f64 / archive.len() as f64,
                median(&mut f)
            );
        }
    }
    write_atomic(&dir.join("designs.csv"), designs)?;
    write_atomic(&dir.join("components.csv"), by_count)?;

    let train_summary = out.join("train").join("summary.csv");
    if train_summary.exists() {
        std::fs::copy(&train_summary, dir.join("train.csv")).map_err(|e| CliError::io(&train_summary, e))?;
    } else {
        summary.gaps.push("train: no summary.csv".into());
    }
    for r in 0..cfg.replicates {
        if !crate::select::select_dir(out, r).join("picks.json").exists() {
            summary.gaps.push(format!("select: replicate {r} has no picks"));
        }
    }

    timing::record(out, "report", t0.elapsed())?;
    let times = timing::load(out)?;
    let mut timing_csv = String::from("phase,wall_ms\n");
    for phase in PHASES {
        match times.get(phase) {
            Some(ms) => {
                summary.total_ms += ms;
                let _ = writeln!(timing_csv, "{phase},{ms}");
            }
            None => summary.gaps.push(format!("{phase}: no timing recorded")),
        }
    }
    let _ = writeln!(timing_csv, "total,{}", summary.total_ms);
    write_atomic(&dir.join("timing.csv"), timing_csv)?;

    let mut text = format!("designs evaluated: {}\ntotal wall time: {} ms\n", summary.designs, summary.total_ms);
    if summary.gaps.is_empty() {
        text.push_str("all phases present\n");
    } else {
        text.push_str("gaps:\n");
        for g in &summary.gaps {
            let _ = writeln!(text, "  {g}");
        }
    }
    write_atomic(&dir.join("report.txt"), text)?;
    Ok(summary)
}
