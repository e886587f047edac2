//! Post-hoc design selection: threshold filter, fitness/sparsity Pareto front
//! and the three picks sent to downstream training.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::Individual;
use crate::morphology::{sparsity_scores, MorphDescriptor};

pub const DEFAULT_SPARSITY_K: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredDesign {
    pub individual_id: u64,
    pub design_id: u64,
    pub fitness: f64,
    pub sparsity: f64,
}

/// Which designs the sparsity of a filtered design is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsityPool {
    /// The other designs that passed the threshold.
    #[default]
    Filtered,
    /// Every distinct design in the archive.
    Archive,
}

/// Evaluated members with fitness strictly above `theta`, one per design id
/// (the fittest; ties go to the earliest birth), in birth order.
pub fn threshold_filter(archive: &[Individual], theta: f64) -> Vec<&Individual> {
    let mut best: HashMap<u64, &Individual> = HashMap::new();
    for ind in archive {
        let Some(f) = ind.fitness else { continue };
        if f <= theta {
            continue;
        }
        best.entry(ind.design.id())
            .and_modify(|cur| {
                let cf = cur.fitness.unwrap_or(f64::NEG_INFINITY);
                if f > cf || (f == cf && ind.id < cur.id) {
                    *cur = ind;
                }
            })
            .or_insert(ind);
    }
    let mut out: Vec<&Individual> = best.into_values().collect();
    out.sort_by_key(|i| i.id);
    out
}

/// Distinct designs of the archive, keeping the fittest individual per design.
fn distinct_designs(archive: &[Individual]) -> Vec<&Individual> {
    threshold_filter(archive, f64::NEG_INFINITY)
}

/// kNN sparsity where `k` shrinks to the pool size for small pools and a
/// lone design scores zero.
fn knn_sparsity(descs: &[MorphDescriptor], k: usize) -> Result<Vec<f64>> {
    match descs.len() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![0.0]),
        n => sparsity_scores(descs, k.min(n - 1)),
    }
}

/// Attach fitness and sparsity to each filtered design.
pub fn score_designs(
    filtered: &[&Individual],
    archive: &[Individual],
    pool: SparsityPool,
    k: usize,
) -> Result<Vec<ScoredDesign>> {
    let sparsity = match pool {
        SparsityPool::Filtered => {
            let descs: Vec<MorphDescriptor> = filtered.iter().map(|i| MorphDescriptor::from_design(&i.design)).collect();
            knn_sparsity(&descs, k)?
        }
        SparsityPool::Archive => {
            let all = distinct_designs(archive);
            let descs: Vec<MorphDescriptor> = all.iter().map(|i| MorphDescriptor::from_design(&i.design)).collect();
            let scores = knn_sparsity(&descs, k)?;
            let by_design: HashMap<u64, f64> = all.iter().map(|i| i.design.id()).zip(scores).collect();
            filtered.iter().map(|i| by_design.get(&i.design.id()).copied().unwrap_or(0.0)).collect()
        }
    };
    Ok(filtered
        .iter()
        .zip(sparsity)
        .map(|(i, s)| ScoredDesign {
            individual_id: i.id,
            design_id: i.design.id(),
            fitness: i.fitness.unwrap_or(0.0),
            sparsity: s,
        })
        .collect())
}

/// `p` dominates `q` when it is at least as good in both objectives and
/// strictly better in one.
pub fn dominates(p: &ScoredDesign, q: &ScoredDesign) -> bool {
    p.fitness >= q.fitness && p.sparsity >= q.sparsity && (p.fitness > q.fitness || p.sparsity > q.sparsity)
}

/// Non-dominated subset, in input order. Points with identical coordinates
/// are all kept.
pub fn pareto_front(points: &[ScoredDesign]) -> Vec<ScoredDesign> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b].fitness.total_cmp(&points[a].fitness).then(points[b].sparsity.total_cmp(&points[a].sparsity))
    });
    // Sweep by decreasing fitness; a point survives when its sparsity beats
    // every point of strictly higher fitness and ties the best of its own
    // fitness group.
    let mut keep = vec![false; points.len()];
    let mut best_above = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let f = points[order[i]].fitness;
        let mut j = i;
        while j < order.len() && points[order[j]].fitness == f {
            j += 1;
        }
        let group_best = points[order[i]].sparsity;
        if group_best > best_above {
            for &idx in &order[i..j] {
                if points[idx].sparsity == group_best {
                    keep[idx] = true;
                }
            }
            best_above = group_best;
        }
        i = j;
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p.clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Picks {
    pub best_fitness: ScoredDesign,
    pub median: ScoredDesign,
    pub best_sparsity: ScoredDesign,
    /// Set when the three picks are not three distinct designs.
    pub duplicates: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Both edges of the front and the member nearest to its per-objective
/// median point, after min-max normalising each objective over the front.
/// Returns `None` for an empty front.
pub fn pick_three(front: &[ScoredDesign]) -> Option<Picks> {
    let first = front.first()?;
    let mut best_f = first;
    let mut best_s = first;
    for p in &front[1..] {
        if p.fitness > best_f.fitness || (p.fitness == best_f.fitness && p.sparsity > best_f.sparsity) {
            best_f = p;
        }
        if p.sparsity > best_s.sparsity || (p.sparsity == best_s.sparsity && p.fitness > best_s.fitness) {
            best_s = p;
        }
    }
    let norm = |vals: Vec<f64>| -> Vec<f64> {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        vals.into_iter().map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect()
    };
    let nf = norm(front.iter().map(|p| p.fitness).collect());
    let ns = norm(front.iter().map(|p| p.sparsity).collect());
    let (mf, ms) = (median(&mut nf.clone()), median(&mut ns.clone()));
    let mut centre = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..front.len() {
        let d = (nf[i] - mf).hypot(ns[i] - ms);
        if d < best_d {
            best_d = d;
            centre = i;
        }
    }
    let median = front[centre].clone();
    let ids = [best_f.individual_id, median.individual_id, best_s.individual_id];
    let duplicates = ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2];
    Some(Picks { best_fitness: best_f.clone(), median, best_sparsity: best_s.clone(), duplicates })
}

/// Front as CSV `id,fitness,sparsity` where `id` is the individual id.
pub fn front_csv(front: &[ScoredDesign]) -> String {
    let mut s = String::from("id,fitness,sparsity\n");
    for p in front {
        let _ = writeln!(s, "{},{},{}", p.individual_id, p.fitness, p.sparsity);
    }
    s
}
