//! Closed-loop episodes and task scores.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::arena::{ArenaSpec, Pose, TaskKind};
use super::body::BodyModel;
use super::geometry::{dot, norm, rotate, sub, Vec2};
use super::physics::{step, SimState};
use crate::controllers::{
    map_actions, ActuatorCommands, ActuatorParams, Controller, ControllerFamily, ElmanController, FixedController,
    HkController, HkParams, SensorChannel,
};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub duration: f64,
    pub control_period: f64,
    pub substeps: usize,
    pub actuators: ActuatorParams,
    /// Keep per-step sensor and action vectors.
    pub record_io: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { duration: 1200.0, control_period: 0.1, substeps: 10, actuators: ActuatorParams::default(), record_io: false }
    }
}

impl EpisodeConfig {
    pub fn for_task(task: TaskKind) -> Self {
        Self { duration: task.default_duration(), ..Self::default() }
    }

    pub fn control_steps(&self) -> usize {
        (self.duration / self.control_period + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.control_period > 0.0 && self.substeps > 0) {
            return Err(Error::Config("episode duration, control period and substeps must be positive".into()));
        }
        Ok(())
    }
}

/// How to instantiate the controller of an episode.
#[derive(Clone, Debug, PartialEq)]
pub enum ControllerSpec {
    /// Fresh homeokinetic controller, initial noise drawn from the episode seed.
    Homeokinetic(HkParams),
    /// Fixed network with parameters drawn from `U[-0.5, 0.5]` using the episode seed.
    Fixed,
    /// Elman network with the given flat parameters.
    Elman(Vec<f64>),
}

impl ControllerSpec {
    pub fn build(&self, body: &BodyModel, seed: u64) -> Result<Controller> {
        let (n, m) = (body.layout.n(), body.layout.m());
        let mut rng = seeds::rng(seed);
        Ok(match self {
            Self::Homeokinetic(p) => Controller::Homeokinetic(HkController::for_layout(&body.layout, *p, &mut rng)),
            Self::Fixed => Controller::Fixed(FixedController::random(n, m, &mut rng)),
            Self::Elman(params) => Controller::Elman(ElmanController::from_flat(n, m, params)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub sample_period: f64,
    /// Poses at `t = k · sample_period`, starting at `t = 0`.
    pub poses: Vec<Pose>,
    /// Cube centre at each sample (manipulation only).
    pub cube: Vec<Vec2>,
    pub sensor_log: Vec<Vec<f64>>,
    pub action_log: Vec<Vec<f64>>,
    pub final_state: SimState,
}

impl Trajectory {
    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.poses.iter().map(|p| [p.x, p.y])
    }

    /// CSV `t,x,y,heading,score` with the running task score.
    pub fn to_csv(&self, arena: &ArenaSpec) -> String {
        let scores = score_series(self, arena);
        let mut s = String::from("t,x,y,heading,score\n");
        for (k, (p, sc)) in self.poses.iter().zip(scores).enumerate() {
            let _ = writeln!(s, "{:.3},{},{},{},{}", k as f64 * self.sample_period, p.x, p.y, p.heading, sc);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub score: f64,
    pub fault: bool,
    /// Final robot position, or final cube position for manipulation.
    pub behavior: Vec2,
    pub trajectory: Trajectory,
    /// `(t, TLE, ‖E‖)` for every homeokinetic update.
    pub diagnostics: Vec<(f64, f64, f64)>,
    pub controller_faults: u32,
}

/// Fraction of the arena's coverage cells that contain at least one position.
pub fn coverage_score(positions: impl IntoIterator<Item = Vec2>, arena: &ArenaSpec) -> f64 {
    let cells: HashSet<usize> = positions.into_iter().map(|p| arena.cell_of(p)).collect();
    cells.len() as f64 / (arena.grid_cells * arena.grid_cells) as f64
}

fn displacement(a: Vec2, b: Vec2) -> f64 {
    norm(sub(b, a))
}

/// Running score after each sample.
pub fn score_series(traj: &Trajectory, arena: &ArenaSpec) -> Vec<f64> {
    let start = [arena.start.x, arena.start.y];
    match arena.task {
        TaskKind::Exploration => {
            let mut seen = HashSet::new();
            let total = (arena.grid_cells * arena.grid_cells) as f64;
            traj.positions()
                .map(|p| {
                    seen.insert(arena.cell_of(p));
                    seen.len() as f64 / total
                })
                .collect()
        }
        TaskKind::LocoFlat | TaskKind::LocoRough => {
            traj.positions().map(|p| displacement(start, p) / arena.track_length).collect()
        }
        TaskKind::HillClimb => {
            let h = arena.hill.map_or(1.0, |h| h.height);
            let mut best: f64 = 0.0;
            traj.positions()
                .map(|p| {
                    best = best.max(arena.altitude(p));
                    best / h
                })
                .collect()
        }
        TaskKind::Manipulation => {
            let c0 = traj.cube.first().copied().unwrap_or([0.0, 0.0]);
            traj.cube.iter().map(|&c| displacement(c0, c) / arena.track_length).collect()
        }
    }
}

fn task_score(traj: &Trajectory, arena: &ArenaSpec) -> f64 {
    let start = [arena.start.x, arena.start.y];
    match arena.task {
        TaskKind::Exploration => coverage_score(traj.positions(), arena),
        TaskKind::LocoFlat | TaskKind::LocoRough => {
            displacement(start, traj.final_state.position()) / arena.track_length
        }
        TaskKind::HillClimb => {
            let h = arena.hill.map_or(1.0, |h| h.height);
            traj.positions().map(|p| arena.altitude(p)).fold(0.0, f64::max) / h
        }
        TaskKind::Manipulation => match (traj.cube.first(), traj.cube.last()) {
            (Some(&a), Some(&b)) => displacement(a, b) / arena.track_length,
            _ => 0.0,
        },
    }
}

/// Normalised sensor vector for the current state. Wheel channels report the
/// angle each wheel turned since `prev_wheel` as a fraction of `span`, the
/// largest turn the motors can command over one control period.
pub fn read_sensors(
    state: &SimState,
    prev_wheel: &[f64],
    span: f64,
    body: &BodyModel,
    arena: &ArenaSpec,
    out: &mut Vec<f64>,
) {
    out.clear();
    let p = &body.params;
    let pos = state.position();
    let heading = state.pose.heading;
    for ch in &body.layout.sensors {
        let v = match *ch {
            SensorChannel::WheelRate(w) => ((state.wheel_angle[w] - prev_wheel[w]) / span).clamp(-1.0, 1.0),
            SensorChannel::JointAngle { limb, joint } => state.joint_angle[limb][joint] / FRAC_PI_2,
            SensorChannel::Proximity(i) => {
                let unit = &body.sensors[i];
                match unit.direction {
                    None => 1.0,
                    Some(d) => {
                        let origin = add(pos, rotate(unit.pos, heading));
                        let dir = rotate(d, heading);
                        let mut best = p.sensor_range;
                        for w in &arena.walls {
                            if let Some(t) = w.ray_hit(origin, dir) {
                                best = best.min(t);
                            }
                        }
                        if let Some(cube) = &state.cube {
                            for e in cube.edges() {
                                if let Some(t) = e.ray_hit(origin, dir) {
                                    best = best.min(t);
                                }
                            }
                        }
                        best / p.sensor_range
                    }
                }
            }
            SensorChannel::Infrared(i) => {
                let unit = &body.sensors[i];
                match (unit.direction, &state.cube) {
                    (Some(d), Some(cube)) => {
                        let origin = add(pos, rotate(unit.pos, heading));
                        let dir = rotate(d, heading);
                        let to = sub(cube.center, origin);
                        let dist = norm(to);
                        let visible = dist <= p.sensor_range
                            && (dist < 1e-12 || dot(to, dir) / dist >= p.ir_half_angle.cos());
                        if visible {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    _ => 0.0,
                }
            }
        };
        out.push(v);
    }
}

fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

/// Run `controller` on `body` in `arena` for one episode.
pub fn simulate(body: &BodyModel, controller: &mut Controller, arena: &ArenaSpec, cfg: &EpisodeConfig) -> Result<EpisodeResult> {
    cfg.validate()?;
    controller.reset();
    let family = controller.family();
    let oscillating = family != ControllerFamily::Homeokinetic && body.n_limbs() > 0;
    let dt = cfg.control_period / cfg.substeps as f64;
    let n_control = cfg.control_steps();

    let mut state = SimState::initial(body, arena);
    let mut prev_wheel = state.wheel_angle.clone();
    let mut poses = Vec::with_capacity(n_control + 1);
    let mut cube = Vec::new();
    let mut sensor_log = Vec::new();
    let mut action_log = Vec::new();
    let mut diagnostics = Vec::new();
    poses.push(state.pose);
    if let Some(c) = &state.cube {
        cube.push(c.center);
    }
    let mut sensors = Vec::with_capacity(body.layout.n());
    let mut cmds = ActuatorCommands::zeros(&body.layout);
    let mut fault = false;

    'control: for k in 0..n_control {
        let t = k as f64 * cfg.control_period;
        read_sensors(&state, &prev_wheel, cfg.actuators.v_max * cfg.control_period, body, arena, &mut sensors);
        prev_wheel.clone_from(&state.wheel_angle);
        let out = controller.step(&sensors)?;
        if let (Some(tle), Some(e)) = (out.tle, out.error_norm) {
            diagnostics.push((t, tle, e));
        }
        if out.action.iter().any(|a| !a.is_finite()) {
            fault = true;
            break;
        }
        if cfg.record_io {
            sensor_log.push(sensors.clone());
            action_log.push(out.action.clone());
        }
        map_actions(&body.layout, &out.action, family, t, &cfg.actuators, &mut cmds)?;
        for i in 0..cfg.substeps {
            if oscillating && i > 0 {
                map_actions(&body.layout, &out.action, family, t + i as f64 * dt, &cfg.actuators, &mut cmds)?;
            }
            match step(&mut state, body, &cmds, arena, dt) {
                Ok(()) => {}
                Err(Error::Fault(_)) => {
                    fault = true;
                    break 'control;
                }
                Err(e) => return Err(e),
            }
        }
        poses.push(state.pose);
        if let Some(c) = &state.cube {
            cube.push(c.center);
        }
    }

    let behavior = match &state.cube {
        Some(c) if arena.task == TaskKind::Manipulation => c.center,
        _ => state.position(),
    };
    let trajectory =
        Trajectory { sample_period: cfg.control_period, poses, cube, sensor_log, action_log, final_state: state };
    let score = if fault { 0.0 } else { task_score(&trajectory, arena) };
    Ok(EpisodeResult { score, fault, behavior, trajectory, diagnostics, controller_faults: controller.faults() })
}

/// Build the controller described by `spec` from `seed` and run one episode.
pub fn run_episode(
    body: &BodyModel,
    spec: &ControllerSpec,
    arena: &ArenaSpec,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    let mut controller = spec.build(body, seed)?;
    simulate(body, &mut controller, arena, cfg)
}
