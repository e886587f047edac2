//! Novelty-augmented CMA-ES (NCMA-ES) for downstream controller learning.
//!
//! Candidates are ranked by `w_novelty · novelty + w_task · task`, both
//! min-max normalised within the generation. The novelty weight starts at one
//! and drops by 0.05 per generation until the objective is the task alone.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::ElmanController;
use crate::error::{Error, Result};
use crate::morphology::RobotDesign;
use crate::seeds;
use crate::sim::{build_body, run_episode, ArenaSpec, BodyParams, ControllerSpec, EpisodeConfig, TaskKind, Vec2};

pub const WEIGHT_STEP: f64 = 0.05;
pub const DEFAULT_NOVELTY_K: usize = 15;
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Novelty weight at generation `g`.
pub fn novelty_weight(g: u64) -> f64 {
    (1.0 - WEIGHT_STEP * g as f64).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub w_novelty: f64,
    pub w_task: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self::at_generation(0)
    }
}

impl ObjectiveWeights {
    pub fn at_generation(g: u64) -> Self {
        let w_novelty = novelty_weight(g);
        Self { w_novelty, w_task: 1.0 - w_novelty }
    }

    pub fn task_only() -> Self {
        Self { w_novelty: 0.0, w_task: 1.0 }
    }

    /// Number of 0.05 steps taken from `(1, 0)`.
    fn steps(&self) -> u64 {
        ((1.0 - self.w_novelty) / WEIGHT_STEP).round().max(0.0) as u64
    }

    /// Shift 0.05 of weight from novelty to task, clamped at `(0, 1)`.
    pub fn update(&self) -> Self {
        Self::at_generation(self.steps() + 1)
    }

    pub fn combine(&self, novelty: f64, task: f64) -> f64 {
        self.w_novelty * novelty + self.w_task * task
    }
}

/// How the weights evolve over generations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSchedule {
    /// Start at `(1, 0)` and update once per generation.
    #[default]
    Annealed,
    Fixed(ObjectiveWeights),
}

impl WeightSchedule {
    pub fn weights(&self, g: u64) -> ObjectiveWeights {
        match self {
            Self::Annealed => ObjectiveWeights::at_generation(g),
            Self::Fixed(w) => *w,
        }
    }
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Mean distance from `b` to its `k` nearest members of `pool` (all of them
/// when the pool is smaller); zero for an empty pool.
pub fn novelty_score(b: Vec2, pool: &[Vec2], k: usize) -> f64 {
    if pool.is_empty() || k == 0 {
        return 0.0;
    }
    let mut d: Vec<f64> = pool.iter().map(|&p| dist(b, p)).collect();
    let k = k.min(d.len());
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    d[..k].iter().sum::<f64>() / k as f64
}

/// Append-only archive of behaviours.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoveltyArchive {
    pub behaviors: Vec<Vec2>,
    pub add_probability: f64,
    pub k: usize,
}

impl NoveltyArchive {
    pub fn new(add_probability: f64, k: usize) -> Self {
        Self { behaviors: Vec::new(), add_probability, k }
    }

    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }

    /// Novelty of each behaviour against the rest of the generation plus the archive.
    pub fn score_generation(&self, behaviors: &[Vec2]) -> Vec<f64> {
        let mut pool: Vec<Vec2> = Vec::with_capacity(behaviors.len() + self.behaviors.len());
        (0..behaviors.len())
            .map(|i| {
                pool.clear();
                pool.extend(behaviors.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &b)| b));
                pool.extend_from_slice(&self.behaviors);
                novelty_score(behaviors[i], &pool, self.k)
            })
            .collect()
    }
}

/// Standard CMA-ES strategy parameters for dimension `d` and population `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct CmaParams {
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mueff: f64,
    pub cc: f64,
    pub cs: f64,
    pub c1: f64,
    pub cmu: f64,
    pub damps: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(d: usize, lambda: usize) -> Self {
        let n = d as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
        let cs = (mueff + 2.0) / (n + mueff + 5.0);
        let c1 = 2.0 / ((n + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self { lambda, mu, weights, mueff, cc, cs, c1, cmu, damps, chi_n }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: u64,
    pub params: CmaParams,
    /// Eigenvectors of `cov`.
    basis: DMatrix<f64>,
    /// Square roots of the eigenvalues of `cov`.
    scale: DVector<f64>,
    /// Times the covariance had to be repaired.
    pub repairs: u32,
}

impl CmaState {
    pub fn new(mean: Vec<f64>, sigma: f64, lambda: usize) -> Result<Self> {
        let d = mean.len();
        if d == 0 || lambda < 2 || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config("CMA-ES needs d > 0, lambda ≥ 2 and a positive step size".into()));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            sigma,
            cov: DMatrix::identity(d, d),
            p_sigma: DVector::zeros(d),
            p_c: DVector::zeros(d),
            generation: 0,
            params: CmaParams::new(d, lambda),
            basis: DMatrix::identity(d, d),
            scale: DVector::from_element(d, 1.0),
            repairs: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draw `lambda` candidates from `N(mean, sigma² C)`.
    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<DVector<f64>> {
        let d = self.dim();
        (0..self.params.lambda)
            .map(|_| {
                let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &self.basis * z.component_mul(&self.scale);
                &self.mean + y * self.sigma
            })
            .collect()
    }

    /// Update from candidates listed best first.
    pub fn tell(&mut self, ranked: &[&DVector<f64>]) {
        let p = self.params.clone();
        let n = self.dim() as f64;
        let mu = p.mu.min(ranked.len());
        let ys: Vec<DVector<f64>> = ranked[..mu].iter().map(|x| (*x - &self.mean) / self.sigma).collect();
        let mut y_w = DVector::zeros(self.dim());
        for (w, y) in p.weights.iter().zip(&ys) {
            y_w += y * *w;
        }
        self.mean += &y_w * self.sigma;

        // C^{-1/2} y_w through the cached eigendecomposition.
        let inv_sqrt = self.basis.transpose() * &y_w;
        let inv_sqrt = &self.basis * inv_sqrt.component_div(&self.scale);
        self.p_sigma = &self.p_sigma * (1.0 - p.cs) + inv_sqrt * (p.cs * (2.0 - p.cs) * p.mueff).sqrt();
        let g = self.generation as f64 + 1.0;
        let ps_norm = self.p_sigma.norm();
        let hsig = ps_norm / (1.0 - (1.0 - p.cs).powf(2.0 * g)).sqrt() / p.chi_n < 1.4 + 2.0 / (n + 1.0);
        let h = if hsig { 1.0 } else { 0.0 };
        self.p_c = &self.p_c * (1.0 - p.cc) + &y_w * (h * (p.cc * (2.0 - p.cc) * p.mueff).sqrt());

        let mut rank_mu = DMatrix::zeros(self.dim(), self.dim());
        for (w, y) in p.weights.iter().zip(&ys) {
            rank_mu += y * y.transpose() * *w;
        }
        let rank_one = &self.p_c * self.p_c.transpose() + &self.cov * ((1.0 - h) * p.cc * (2.0 - p.cc));
        self.cov = &self.cov * (1.0 - p.c1 - p.cmu) + rank_one * p.c1 + rank_mu * p.cmu;

        self.sigma *= ((p.cs / p.damps) * (ps_norm / p.chi_n - 1.0)).exp();
        if !self.sigma.is_finite() {
            self.sigma = SIGMA_FLOOR;
        }
        self.sigma = self.sigma.max(SIGMA_FLOOR);
        self.generation += 1;
        self.decompose();
    }

    /// Symmetrise the covariance and refresh its eigendecomposition, lifting
    /// non-positive eigenvalues when rounding has broken definiteness.
    fn decompose(&mut self) {
        let d = self.dim();
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        if sym.iter().any(|v| !v.is_finite()) {
            self.repairs += 1;
            self.cov = DMatrix::identity(d, d);
            self.basis = DMatrix::identity(d, d);
            self.scale = DVector::from_element(d, 1.0);
            return;
        }
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.max().max(f64::MIN_POSITIVE);
        let floor = top * 1e-14;
        let mut vals = eig.eigenvalues.clone();
        if vals.iter().any(|&v| v < floor) {
            self.repairs += 1;
            vals.apply(|v| *v = v.max(floor));
        }
        self.cov = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        self.scale = vals.map(f64::sqrt);
        self.basis = eig.eigenvectors;
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.cov.clone()).eigenvalues.min()
    }
}

/// Outcome of evaluating one candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub task: f64,
    pub behavior: Vec2,
    pub fault: bool,
}

/// Candidate order (best first) under `weights`. Faulted candidates rank
/// last; ties keep sampling order.
pub fn rank(evals: &[Evaluation], novelty: &[f64], weights: ObjectiveWeights) -> Vec<usize> {
    let ok: Vec<usize> = (0..evals.len()).filter(|&i| !evals[i].fault).collect();
    let normalise = |vals: Vec<f64>| -> Vec<f64> {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        vals.into_iter().map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect()
    };
    let nn = normalise(ok.iter().map(|&i| novelty[i]).collect());
    let nt = normalise(ok.iter().map(|&i| evals[i].task).collect());
    let mut combined = vec![f64::NEG_INFINITY; evals.len()];
    for (j, &i) in ok.iter().enumerate() {
        combined[i] = weights.combine(nn[j], nt[j]);
    }
    let mut order: Vec<usize> = (0..evals.len()).collect();
    order.sort_by(|&a, &b| {
        evals[a].fault.cmp(&evals[b].fault).then(combined[b].total_cmp(&combined[a]))
    });
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NcmaConfig {
    pub budget: usize,
    pub lambda: usize,
    pub sigma0: f64,
    /// Initial mean of every parameter.
    pub mean0: f64,
    pub novelty_k: usize,
    pub archive_add_probability: f64,
    pub schedule: WeightSchedule,
    pub workers: usize,
}

impl Default for NcmaConfig {
    fn default() -> Self {
        Self {
            budget: 10_000,
            lambda: 50,
            sigma0: 0.5,
            mean0: 0.0,
            novelty_k: DEFAULT_NOVELTY_K,
            archive_add_probability: 0.02,
            schedule: WeightSchedule::Annealed,
            workers: 1,
        }
    }
}

impl NcmaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 2 || self.budget < self.lambda {
            return Err(Error::Config("NCMA-ES needs lambda ≥ 2 and budget ≥ lambda".into()));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite() && self.mean0.is_finite()) {
            return Err(Error::Config("NCMA-ES sigma0 must be positive and mean0 finite".into()));
        }
        if !(0.0..=1.0).contains(&self.archive_add_probability) || self.workers == 0 {
            return Err(Error::Config("archive add probability must lie in [0, 1] and workers be positive".into()));
        }
        Ok(())
    }

    pub fn generations(&self) -> usize {
        self.budget / self.lambda
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub generation: u64,
    /// Best task score seen so far.
    pub best_task: f64,
    /// Mean task score of this generation's candidates.
    pub mean_task: f64,
    pub w_novelty: f64,
    pub archive_size: usize,
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("generation,best_task,mean_task,w_novelty,archive_size\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.generation, r.best_task, r.mean_task, r.w_novelty, r.archive_size);
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainResult {
    pub best_params: Vec<f64>,
    pub best_task: f64,
    pub curve: Vec<CurveRow>,
    pub archive: NoveltyArchive,
    pub evaluations: usize,
}

/// NCMA-ES optimiser over an arbitrary evaluation function.
pub struct Ncma {
    pub cfg: NcmaConfig,
    pub cma: CmaState,
    pub archive: NoveltyArchive,
    rng: rand_chacha::ChaCha8Rng,
    best_params: Vec<f64>,
    best_task: f64,
    curve: Vec<CurveRow>,
    evaluations: usize,
}

impl Ncma {
    pub fn new(dim: usize, cfg: NcmaConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let cma = CmaState::new(vec![cfg.mean0; dim], cfg.sigma0, cfg.lambda)?;
        Ok(Self {
            archive: NoveltyArchive::new(cfg.archive_add_probability, cfg.novelty_k),
            cfg,
            cma,
            rng: seeds::rng(seed),
            best_params: vec![0.0; dim],
            best_task: f64::NEG_INFINITY,
            curve: Vec::new(),
            evaluations: 0,
        })
    }

    /// Start from an explicit mean.
    pub fn with_mean(mean: Vec<f64>, cfg: NcmaConfig, seed: u64) -> Result<Self> {
        let mut s = Self::new(mean.len(), cfg, seed)?;
        s.cma.mean = DVector::from_vec(mean);
        Ok(s)
    }

    pub fn weights(&self) -> ObjectiveWeights {
        self.cfg.schedule.weights(self.cma.generation)
    }

    pub fn best_task(&self) -> f64 {
        self.best_task
    }

    /// One generation: sample, evaluate (in parallel), rank, update the
    /// archive and the search distribution.
    pub fn step<F>(&mut self, eval: &F) -> &CurveRow
    where
        F: Fn(&[f64]) -> Evaluation + Sync,
    {
        let weights = self.weights();
        let xs = self.cma.ask(&mut self.rng);
        let evals = evaluate_all(&xs, eval, self.cfg.workers);
        self.evaluations += xs.len();

        let behaviors: Vec<Vec2> = evals.iter().map(|e| e.behavior).collect();
        let novelty = self.archive.score_generation(&behaviors);
        let order = rank(&evals, &novelty, weights);

        let mut task_sum = 0.0;
        for (x, e) in xs.iter().zip(&evals) {
            task_sum += e.task;
            if !e.fault && e.task > self.best_task {
                self.best_task = e.task;
                self.best_params = x.as_slice().to_vec();
            }
        }

        let most_novel = (0..evals.len())
            .filter(|&i| !evals[i].fault)
            .max_by(|&a, &b| novelty[a].total_cmp(&novelty[b]).then(b.cmp(&a)));
        if let Some(i) = most_novel {
            self.archive.behaviors.push(behaviors[i]);
        }
        for (i, b) in behaviors.iter().enumerate() {
            let draw: f64 = self.rng.random();
            if Some(i) != most_novel && !evals[i].fault && draw < self.archive.add_probability {
                self.archive.behaviors.push(*b);
            }
        }

        let generation = self.cma.generation;
        let ranked: Vec<&DVector<f64>> = order.iter().map(|&i| &xs[i]).collect();
        self.cma.tell(&ranked);
        self.curve.push(CurveRow {
            generation,
            best_task: self.best_task,
            mean_task: task_sum / evals.len() as f64,
            w_novelty: weights.w_novelty,
            archive_size: self.archive.len(),
        });
        self.curve.last().expect("row just pushed")
    }

    /// Run every generation the budget allows.
    pub fn run<F>(mut self, eval: &F) -> TrainResult
    where
        F: Fn(&[f64]) -> Evaluation + Sync,
    {
        for _ in 0..self.cfg.generations() {
            self.step(eval);
        }
        self.finish()
    }

    pub fn finish(self) -> TrainResult {
        TrainResult {
            best_params: self.best_params,
            best_task: self.best_task,
            curve: self.curve,
            archive: self.archive,
            evaluations: self.evaluations,
        }
    }
}

fn evaluate_all<F>(xs: &[DVector<f64>], eval: &F, workers: usize) -> Vec<Evaluation>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    if workers <= 1 {
        return xs.iter().map(|x| eval(x.as_slice())).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
    match pool {
        Ok(pool) => pool.install(|| xs.par_iter().map(|x| eval(x.as_slice())).collect()),
        Err(_) => xs.iter().map(|x| eval(x.as_slice())).collect(),
    }
}

/// Episode-based evaluation of Elman parameters on `design` for `task`.
pub fn task_evaluator(
    design: &RobotDesign,
    task: TaskKind,
    body_params: &BodyParams,
    episode: &EpisodeConfig,
) -> (usize, impl Fn(&[f64]) -> Evaluation + Sync) {
    let body = build_body(design, body_params);
    let dim = ElmanController::param_count(body.layout.n(), body.layout.m());
    let arena = ArenaSpec::for_task(task);
    let episode = EpisodeConfig { duration: task.default_duration(), ..*episode };
    let eval = move |x: &[f64]| match run_episode(&body, &ControllerSpec::Elman(x.to_vec()), &arena, &episode, 0) {
        Ok(r) => Evaluation { task: r.score, behavior: r.behavior, fault: r.fault },
        Err(_) => Evaluation { task: 0.0, behavior: [arena.start.x, arena.start.y], fault: true },
    };
    (dim, eval)
}

/// Train an Elman controller for `design` on `task`.
pub fn train(
    design: &RobotDesign,
    task: TaskKind,
    cfg: &NcmaConfig,
    body_params: &BodyParams,
    episode: &EpisodeConfig,
    seed: u64,
) -> Result<TrainResult> {
    let (dim, eval) = task_evaluator(design, task, body_params, episode);
    let ncma = Ncma::new(dim, cfg.clone(), seed)?;
    Ok(ncma.run(&eval))
}

/// Task score of Elman parameters drawn from the initial search distribution.
pub fn random_baseline(
    design: &RobotDesign,
    task: TaskKind,
    cfg: &NcmaConfig,
    body_params: &BodyParams,
    episode: &EpisodeConfig,
    seed: u64,
) -> f64 {
    let (dim, eval) = task_evaluator(design, task, body_params, episode);
    let mut rng = seeds::rng(seed);
    let x: Vec<f64> = (0..dim).map(|_| cfg.mean0 + cfg.sigma0 * rng.sample::<f64, _>(StandardNormal)).collect();
    eval(&x).task
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_update() {
        let w = ObjectiveWeights::default().update();
        assert_eq!(w, ObjectiveWeights { w_novelty: 0.95, w_task: 1.0 - 0.95 });
    }

    #[test]
    fn schedule_clamps_after_twenty_updates() {
        let mut w = ObjectiveWeights::default();
        for _ in 0..20 {
            w = w.update();
        }
        assert_eq!(w, ObjectiveWeights::task_only());
        assert_eq!(w.update(), w);
    }

    #[test]
    fn halfway_weights_average() {
        let w = ObjectiveWeights::at_generation(10);
        assert!((w.combine(0.2, 0.6) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn novelty_trivial_pools() {
        assert_eq!(novelty_score([1.0, 1.0], &[[1.0, 1.0]; 20], 15), 0.0);
        assert_eq!(novelty_score([0.0, 0.0], &[[2.0, 0.0]], 15), 2.0);
        assert_eq!(novelty_score([0.0, 0.0], &[], 15), 0.0);
    }

    #[test]
    fn faults_rank_last() {
        let e = |task, fault| Evaluation { task, behavior: [0.0, 0.0], fault };
        let evals = [e(0.9, true), e(0.1, false), e(0.5, false)];
        assert_eq!(rank(&evals, &[0.0; 3], ObjectiveWeights::task_only()), vec![2, 1, 0]);
    }

    #[test]
    fn sigma_floor_holds() {
        let mut s = CmaState::new(vec![0.0; 3], 1e-300, 4).unwrap();
        let x = DVector::zeros(3);
        s.tell(&[&x, &x]);
        assert!(s.sigma >= SIGMA_FLOOR);
    }
}
