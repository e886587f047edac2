//! Asynchronous morpho-evolution (AME).
//!
//! A single coordinator owns the population and the archive; workers only
//! evaluate. Genomes, evaluation seeds and reproduction streams derive from
//! `(master seed, birth index)`, so scores never depend on scheduling. In
//! sync mode the run proceeds in fixed-size batches and is a pure function
//! of the configuration.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::HkParams;
use crate::cppn::{CppnGenome, MutationParams};
use crate::error::{Error, Result};
use crate::morphology::{decode, RobotDesign, DEFAULT_CONTENT_THRESHOLD};
use crate::seeds;
use crate::sim::{build_body, run_episode, ArenaSpec, BodyParams, ControllerSpec, EpisodeConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    /// Homeokinetic controller, fresh per episode.
    #[default]
    #[serde(rename = "MEHK")]
    Mehk,
    /// Random fixed feed-forward controller, redrawn per episode.
    #[serde(rename = "MEFC")]
    Mefc,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mehk => "MEHK",
            Self::Mefc => "MEFC",
        }
    }

    /// Published selection threshold for the mode.
    pub fn default_threshold(self) -> f64 {
        match self {
            Self::Mehk => 0.4,
            Self::Mefc => 0.2,
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MEHK" => Ok(Self::Mehk),
            "MEFC" => Ok(Self::Mefc),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected MEHK or MEFC)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmeConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    /// Total number of evaluations.
    pub budget: usize,
    // Run parameters, supplied by the caller rather than a config file.
    #[serde(skip)]
    pub mode: EvalMode,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub master_seed: u64,
    #[serde(skip)]
    pub sync_mode: bool,
    /// Evaluations per batch in sync mode. Independent of `workers` so that
    /// results do not depend on the worker count.
    pub sync_batch: usize,
    pub content_threshold: f64,
    pub mutation: MutationParams,
    pub hk: HkParams,
    pub body: BodyParams,
    pub episode: EpisodeConfig,
    pub arena: ArenaSpec,
}

impl Default for AmeConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            tournament_size: 4,
            budget: 10_000,
            mode: EvalMode::Mehk,
            workers: 1,
            master_seed: 0,
            sync_mode: false,
            sync_batch: 8,
            content_threshold: DEFAULT_CONTENT_THRESHOLD,
            mutation: MutationParams::default(),
            hk: HkParams::default(),
            body: BodyParams::default(),
            episode: EpisodeConfig::default(),
            arena: ArenaSpec::exploration(),
        }
    }
}

impl AmeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tournament_size == 0 || self.population_size < self.tournament_size {
            return Err(Error::Config("population_size must be at least tournament_size (> 0)".into()));
        }
        if self.budget < self.population_size {
            return Err(Error::Config("budget must be at least population_size".into()));
        }
        if self.workers == 0 || self.sync_batch == 0 {
            return Err(Error::Config("workers and sync_batch must be positive".into()));
        }
        self.mutation.validate()?;
        self.hk.validate()?;
        self.episode.validate()?;
        self.arena.validate()
    }

    pub fn controller_spec(&self) -> ControllerSpec {
        match self.mode {
            EvalMode::Mehk => ControllerSpec::Homeokinetic(self.hk),
            EvalMode::Mefc => ControllerSpec::Fixed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    /// Birth index, unique within a run.
    pub id: u64,
    pub parent: Option<u64>,
    pub genome: CppnGenome,
    pub design: RobotDesign,
    /// Present once evaluated.
    pub fitness: Option<f64>,
    pub seed: u64,
    pub fault: bool,
    /// Position in the archive, i.e. completion order.
    pub eval_index: Option<u64>,
    pub wall_time_ms: u64,
}

#[derive(Serialize, Deserialize)]
struct IndividualRecord {
    id: u64,
    parent: Option<u64>,
    genome: CppnGenome,
    threshold: f64,
    design_id: String,
    fitness: Option<f64>,
    seed: u64,
    fault: bool,
    eval_index: Option<u64>,
    wall_time_ms: u64,
}

impl Individual {
    pub fn new(id: u64, parent: Option<u64>, genome: CppnGenome, threshold: f64, seed: u64) -> Self {
        let design = decode(&genome, threshold);
        Self { id, parent, genome, design, fitness: None, seed, fault: false, eval_index: None, wall_time_ms: 0 }
    }

    pub fn is_evaluated(&self) -> bool {
        self.fitness.is_some()
    }

    /// JSON record; the design is re-decoded from the genome on load.
    pub fn to_record(&self, threshold: f64) -> serde_json::Value {
        serde_json::to_value(IndividualRecord {
            id: self.id,
            parent: self.parent,
            genome: self.genome.clone(),
            threshold,
            design_id: self.design.id_hex(),
            fitness: self.fitness,
            seed: self.seed,
            fault: self.fault,
            eval_index: self.eval_index,
            wall_time_ms: self.wall_time_ms,
        })
        .expect("individual records serialise")
    }

    pub fn from_record(v: serde_json::Value) -> Result<Self> {
        let r: IndividualRecord = serde_json::from_value(v)?;
        let mut ind = Self::new(r.id, r.parent, r.genome, r.threshold, r.seed);
        if ind.design.id_hex() != r.design_id {
            return Err(Error::InvalidDesign(format!(
                "individual {}: genome decodes to {} but the record says {}",
                r.id,
                ind.design.id_hex(),
                r.design_id
            )));
        }
        ind.fitness = r.fitness;
        ind.fault = r.fault;
        ind.eval_index = r.eval_index;
        ind.wall_time_ms = r.wall_time_ms;
        Ok(ind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOutcome {
    pub fitness: f64,
    pub fault: bool,
}

/// Scores a design given an episode seed.
pub type Evaluator = Arc<dyn Fn(&RobotDesign, u64) -> Result<EvalOutcome> + Send + Sync>;

/// Exploration episode under the controller family of the configured mode.
pub fn episode_evaluator(cfg: &AmeConfig) -> Evaluator {
    let cfg = cfg.clone();
    Arc::new(move |design: &RobotDesign, seed: u64| {
        let body = build_body(design, &cfg.body);
        let r = run_episode(&body, &cfg.controller_spec(), &cfg.arena, &cfg.episode, seed)?;
        Ok(EvalOutcome { fitness: r.score, fault: r.fault })
    })
}

/// Evaluate with one retry on error or panic; a second failure is a fault
/// with fitness zero.
fn evaluate_guarded(eval: &Evaluator, design: &RobotDesign, seed: u64) -> EvalOutcome {
    for _ in 0..2 {
        if let Ok(Ok(out)) = catch_unwind(AssertUnwindSafe(|| eval(design, seed))) {
            if out.fitness.is_finite() {
                return out;
            }
        }
    }
    EvalOutcome { fitness: 0.0, fault: true }
}

/// Insert `incoming` and drop the least fit member (the oldest among ties).
/// Returns the removed individual, which may be `incoming` itself.
pub fn replace(population: &mut Vec<Individual>, incoming: Individual) -> Individual {
    population.push(incoming);
    let worst = population
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
            let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
            fa.total_cmp(&fb).then(a.id.cmp(&b.id))
        })
        .map(|(i, _)| i)
        .expect("population is non-empty");
    population.remove(worst)
}

/// Tournament: `size` distinct members drawn uniformly, fittest wins, ties
/// broken uniformly.
pub fn select<'a, R: Rng + ?Sized>(population: &'a [Individual], size: usize, rng: &mut R) -> &'a Individual {
    let drawn = sample(rng, population.len(), size.min(population.len()));
    let best = drawn.iter().map(|i| population[i].fitness.unwrap_or(f64::NEG_INFINITY)).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> =
        drawn.iter().filter(|&i| population[i].fitness.unwrap_or(f64::NEG_INFINITY) == best).collect();
    let pick = if tied.len() == 1 { tied[0] } else { tied[rng.random_range(0..tied.len())] };
    &population[pick]
}

/// Mutated, decoded, unevaluated child of `parent`.
pub fn reproduce<R: Rng + ?Sized>(
    parent: &Individual,
    id: u64,
    params: &MutationParams,
    threshold: f64,
    seed: u64,
    rng: &mut R,
) -> Individual {
    Individual::new(id, Some(parent.id), parent.genome.mutate(params, rng), threshold, seed)
}

/// Coordinator state; everything needed to resume a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AmeState {
    pub population: Vec<Individual>,
    /// Evaluated individuals in completion order.
    pub archive: Vec<Individual>,
    pub next_id: u64,
}

impl AmeState {
    pub fn evaluations(&self) -> usize {
        self.archive.len()
    }

    pub fn best(&self) -> Option<&Individual> {
        self.archive.iter().max_by(|a, b| {
            a.fitness.unwrap_or(0.0).total_cmp(&b.fitness.unwrap_or(0.0)).then(b.id.cmp(&a.id))
        })
    }

    pub fn to_json(&self, threshold: f64) -> serde_json::Value {
        serde_json::json!({
            "next_id": self.next_id,
            "population": self.population.iter().map(|i| i.id).collect::<Vec<_>>(),
            "archive": self.archive.iter().map(|i| i.to_record(threshold)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            next_id: u64,
            population: Vec<u64>,
            archive: Vec<serde_json::Value>,
        }
        let raw: Raw = serde_json::from_value(v)?;
        let archive = raw.archive.into_iter().map(Individual::from_record).collect::<Result<Vec<_>>>()?;
        let mut population = Vec::with_capacity(raw.population.len());
        for id in raw.population {
            let ind = archive
                .iter()
                .find(|i| i.id == id)
                .ok_or_else(|| Error::Config(format!("population member {id} missing from the archive")))?;
            population.push(ind.clone());
        }
        Ok(Self { population, archive, next_id: raw.next_id })
    }
}

pub struct Ame {
    cfg: AmeConfig,
    state: AmeState,
    evaluator: Evaluator,
}

impl Ame {
    pub fn new(cfg: AmeConfig) -> Result<Self> {
        let evaluator = episode_evaluator(&cfg);
        Self::with_evaluator(cfg, evaluator)
    }

    pub fn with_evaluator(cfg: AmeConfig, evaluator: Evaluator) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: AmeState::default(), evaluator })
    }

    /// Continue from a saved state.
    pub fn resume(cfg: AmeConfig, state: AmeState, evaluator: Evaluator) -> Result<Self> {
        cfg.validate()?;
        if state.archive.len() > cfg.budget {
            return Err(Error::Config("checkpoint holds more evaluations than the budget".into()));
        }
        Ok(Self { cfg, state, evaluator })
    }

    pub fn config(&self) -> &AmeConfig {
        &self.cfg
    }

    pub fn state(&self) -> &AmeState {
        &self.state
    }

    pub fn into_state(self) -> AmeState {
        self.state
    }

    pub fn done(&self) -> bool {
        self.state.archive.len() >= self.cfg.budget
    }

    fn eval_seed(&self, id: u64) -> u64 {
        seeds::derive(self.cfg.master_seed, &[seeds::STREAM_EVAL, id])
    }

    fn new_random(&mut self) -> Individual {
        let id = self.state.next_id;
        self.state.next_id += 1;
        let mut rng = seeds::rng_for(self.cfg.master_seed, &[seeds::STREAM_INIT, id]);
        let genome = CppnGenome::random(&mut rng, &self.cfg.mutation);
        Individual::new(id, None, genome, self.cfg.content_threshold, self.eval_seed(id))
    }

    fn new_child(&mut self) -> Individual {
        let id = self.state.next_id;
        self.state.next_id += 1;
        let mut rng = seeds::rng_for(self.cfg.master_seed, &[seeds::STREAM_REPRO, id]);
        let parent = select(&self.state.population, self.cfg.tournament_size, &mut rng);
        reproduce(parent, id, &self.cfg.mutation, self.cfg.content_threshold, self.eval_seed(id), &mut rng)
    }

    fn record(&mut self, mut ind: Individual) -> Individual {
        ind.eval_index = Some(self.state.archive.len() as u64);
        self.state.archive.push(ind.clone());
        if self.state.population.len() < self.cfg.population_size {
            self.state.population.push(ind.clone());
        } else {
            replace(&mut self.state.population, ind.clone());
        }
        ind
    }

    /// Run to budget exhaustion. `observe` sees the state after every
    /// recorded batch (sync) or evaluation (async) together with the newly
    /// recorded individuals; an error from it stops the run.
    pub fn run<F>(&mut self, mut observe: F) -> Result<()>
    where
        F: FnMut(&AmeState, &[Individual]) -> Result<()>,
    {
        if self.cfg.sync_mode {
            while !self.done() {
                let batch = self.sync_step();
                observe(&self.state, &batch)?;
            }
            Ok(())
        } else {
            self.run_async(observe)
        }
    }

    /// One sync batch: create, evaluate in parallel, record in birth order.
    pub fn sync_step(&mut self) -> Vec<Individual> {
        let done = self.state.archive.len();
        let mut size = self.cfg.sync_batch.min(self.cfg.budget - done);
        let warmup = self.state.population.len() < self.cfg.population_size;
        if warmup {
            size = size.min(self.cfg.population_size - self.state.population.len());
        }
        let jobs: Vec<Individual> =
            (0..size).map(|_| if warmup { self.new_random() } else { self.new_child() }).collect();
        let evaluated = evaluate_batch(&self.evaluator, jobs, self.cfg.workers, false);
        evaluated.into_iter().map(|ind| self.record(ind)).collect()
    }

    fn run_async<F>(&mut self, mut observe: F) -> Result<()>
    where
        F: FnMut(&AmeState, &[Individual]) -> Result<()>,
    {
        let workers = self.cfg.workers;
        let evaluator = self.evaluator.clone();
        let (job_tx, job_rx) = mpsc::channel::<Individual>();
        let job_rx = Arc::new(Mutex::new(job_rx));
        let (res_tx, res_rx) = mpsc::channel::<Individual>();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let rx = Arc::clone(&job_rx);
                let tx = res_tx.clone();
                let eval = evaluator.clone();
                scope.spawn(move || loop {
                    let job = rx.lock().expect("job queue lock").recv();
                    let Ok(mut ind) = job else { break };
                    evaluate_one(&eval, &mut ind, true);
                    if tx.send(ind).is_err() {
                        break;
                    }
                });
            }
            drop(res_tx);

            let mut in_flight = 0usize;
            let mut pending_initial = 0usize;
            let mut submitted = self.state.archive.len();
            let mut result = Ok(());
            loop {
                // Keep every worker busy while budget remains.
                while in_flight < workers && submitted < self.cfg.budget {
                    let filling = self.state.population.len() + pending_initial < self.cfg.population_size;
                    let job = if filling {
                        pending_initial += 1;
                        self.new_random()
                    } else if self.state.population.len() == self.cfg.population_size {
                        self.new_child()
                    } else {
                        break;
                    };
                    job_tx.send(job).expect("workers outlive the coordinator loop");
                    in_flight += 1;
                    submitted += 1;
                }
                if in_flight == 0 {
                    break;
                }
                let ind = res_rx.recv().expect("a job is in flight");
                in_flight -= 1;
                if ind.parent.is_none() && pending_initial > 0 {
                    pending_initial -= 1;
                }
                let ind = self.record(ind);
                if let Err(e) = observe(&self.state, std::slice::from_ref(&ind)) {
                    result = Err(e);
                    break;
                }
            }
            drop(job_tx);
            // Drain so that workers blocked on send can exit.
            while res_rx.recv().is_ok() {}
            result
        })
    }
}

fn evaluate_one(eval: &Evaluator, ind: &mut Individual, timed: bool) {
    let t0 = Instant::now();
    let out = evaluate_guarded(eval, &ind.design, ind.seed);
    ind.fitness = Some(out.fitness);
    ind.fault = out.fault;
    ind.wall_time_ms = if timed { t0.elapsed().as_millis() as u64 } else { 0 };
}

/// Evaluate `jobs` on up to `workers` threads, preserving order.
fn evaluate_batch(eval: &Evaluator, mut jobs: Vec<Individual>, workers: usize, timed: bool) -> Vec<Individual> {
    if workers <= 1 || jobs.len() <= 1 {
        for ind in jobs.iter_mut() {
            evaluate_one(eval, ind, timed);
        }
        return jobs;
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Individual>>> = jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(slots.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= slots.len() {
                    break;
                }
                let mut slot = slots[i].lock().expect("slot lock");
                if let Some(ind) = slot.as_mut() {
                    evaluate_one(eval, ind, timed);
                }
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("slot filled")).collect()
}

/// Run AME to completion and return the archive.
pub fn ame_run(cfg: &AmeConfig) -> Result<Vec<Individual>> {
    let mut ame = Ame::new(cfg.clone())?;
    ame.run(|_, _| Ok(()))?;
    Ok(ame.into_state().archive)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ind(id: u64, fitness: f64) -> Individual {
        let mut rng = seeds::rng(id);
        let g = CppnGenome::random(&mut rng, &MutationParams::default());
        let mut i = Individual::new(id, None, g, DEFAULT_CONTENT_THRESHOLD, id);
        i.fitness = Some(fitness);
        i
    }

    #[test]
    fn worse_incoming_is_itself_removed() {
        let mut pop: Vec<_> = (0..5).map(|i| ind(i, 0.5)).collect();
        let before: Vec<u64> = pop.iter().map(|i| i.id).collect();
        let removed = replace(&mut pop, ind(9, 0.1));
        assert_eq!(removed.id, 9);
        assert_eq!(pop.iter().map(|i| i.id).collect::<Vec<_>>(), before);
    }

    #[test]
    fn best_incoming_removes_the_oldest_zero() {
        let mut pop: Vec<_> = (0..5).map(|i| ind(i, 0.0)).collect();
        let removed = replace(&mut pop, ind(9, 1.0));
        assert_eq!(removed.id, 0);
        assert_eq!(pop.len(), 5);
    }

    #[test]
    fn unique_best_in_full_tournament_wins() {
        let pop: Vec<_> = (0..4).map(|i| ind(i, if i == 2 { 0.9 } else { 0.1 })).collect();
        let mut rng = seeds::rng(3);
        for _ in 0..20 {
            assert_eq!(select(&pop, 4, &mut rng).id, 2);
        }
    }

    #[test]
    fn frozen_mutation_keeps_the_design() {
        let parent = ind(1, 0.4);
        let mut rng = seeds::rng(5);
        let child = reproduce(&parent, 2, &MutationParams::frozen(), DEFAULT_CONTENT_THRESHOLD, 0, &mut rng);
        assert_eq!(child.design.id(), parent.design.id());
        assert_eq!(child.parent, Some(1));
        assert!(!child.is_evaluated());
    }

    #[test]
    fn record_round_trip() {
        let i = ind(7, 0.25);
        let back = Individual::from_record(i.to_record(DEFAULT_CONTENT_THRESHOLD)).unwrap();
        assert_eq!(back, i);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("mehk".parse::<EvalMode>().unwrap(), EvalMode::Mehk);
        assert!("x".parse::<EvalMode>().is_err());
        assert_eq!(serde_json::to_string(&EvalMode::Mefc).unwrap(), "\"MEFC\"");
    }
}
