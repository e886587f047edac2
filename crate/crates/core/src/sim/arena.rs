//! Arena descriptions for the exploration task and the four downstream tasks.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::geometry::{Segment, Vec2};
use crate::error::{Error, Result};
use crate::seeds;

pub const ARENA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Exploration,
    HillClimb,
    LocoFlat,
    LocoRough,
    Manipulation,
}

impl TaskKind {
    pub const DOWNSTREAM: [TaskKind; 4] = [Self::HillClimb, Self::LocoFlat, Self::LocoRough, Self::Manipulation];

    pub fn name(self) -> &'static str {
        match self {
            Self::Exploration => "exploration",
            Self::HillClimb => "hill_climb",
            Self::LocoFlat => "loco_flat",
            Self::LocoRough => "loco_rough",
            Self::Manipulation => "manipulation",
        }
    }

    /// Episode length in seconds.
    pub fn default_duration(self) -> f64 {
        match self {
            Self::Exploration => 1200.0,
            Self::HillClimb => 120.0,
            Self::LocoFlat | Self::LocoRough | Self::Manipulation => 240.0,
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Exploration, Self::HillClimb, Self::LocoFlat, Self::LocoRough, Self::Manipulation]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Smooth radial mound `h(d) = height · cos²(π d / 2R)` for `d < R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hill {
    pub center: Vec2,
    pub radius: f64,
    pub height: f64,
    /// Speed loss per unit uphill slope.
    pub slope_penalty: f64,
}

impl Hill {
    pub fn height_at(&self, p: Vec2) -> f64 {
        let d = (p[0] - self.center[0]).hypot(p[1] - self.center[1]);
        if d >= self.radius {
            return 0.0;
        }
        let c = (PI * d / (2.0 * self.radius)).cos();
        self.height * c * c
    }

    pub fn gradient_at(&self, p: Vec2) -> Vec2 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let d = dx.hypot(dy);
        if d >= self.radius || d < 1e-12 {
            return [0.0, 0.0];
        }
        let dh = -self.height * PI / (2.0 * self.radius) * (PI * d / self.radius).sin();
        [dh * dx / d, dh * dy / d]
    }
}

/// Velocity multiplier decreasing linearly along x, modulated by a fixed
/// pseudo-random bump pattern.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roughness {
    pub start_factor: f64,
    pub end_factor: f64,
    pub length: f64,
    pub bump_amplitude: f64,
    pub bump_cell: f64,
    pub seed: u64,
}

impl Roughness {
    pub fn factor_at(&self, p: Vec2) -> f64 {
        let t = (p[0] / self.length).clamp(0.0, 1.0);
        let base = self.start_factor + (self.end_factor - self.start_factor) * t;
        let cx = (p[0] / self.bump_cell).floor() as i64;
        let cy = (p[1] / self.bump_cell).floor() as i64;
        let h = seeds::derive(self.seed, &[cx as u64, cy as u64]);
        let bump = (h >> 11) as f64 / (1u64 << 53) as f64;
        base * (1.0 - self.bump_amplitude * bump)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub edge: f64,
    /// Gap between the robot's footprint and the cube's near face at the start.
    pub gap: f64,
    /// Per-substep multiplier applied to the cube's residual sliding velocity.
    pub slide_decay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    pub version: u32,
    pub task: TaskKind,
    /// Lower-left and upper-right corners of the scored region.
    pub bounds: [Vec2; 2],
    pub walls: Vec<Segment>,
    pub start: Pose,
    /// Cells per side of the coverage grid.
    pub grid_cells: usize,
    /// Normalising distance for locomotion and manipulation scores.
    pub track_length: f64,
    pub hill: Option<Hill>,
    pub roughness: Option<Roughness>,
    pub cube: Option<CubeSpec>,
}

fn boundary(lo: Vec2, hi: Vec2) -> Vec<Segment> {
    vec![
        Segment::new([lo[0], lo[1]], [hi[0], lo[1]]),
        Segment::new([hi[0], lo[1]], [hi[0], hi[1]]),
        Segment::new([hi[0], hi[1]], [lo[0], hi[1]]),
        Segment::new([lo[0], hi[1]], [lo[0], lo[1]]),
    ]
}

const TRACK_HALF_WIDTH: f64 = 1.5;
const TRACK_BACK: f64 = -0.5;
const TRACK_END: f64 = 13.5;

impl ArenaSpec {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Exploration => Self::exploration(),
            TaskKind::HillClimb => Self::hill_climb(),
            TaskKind::LocoFlat => Self::loco_flat(),
            TaskKind::LocoRough => Self::loco_rough(0),
            TaskKind::Manipulation => Self::manipulation(),
        }
    }

    /// 4×4 m square with four interior wall obstacles and an 8×8 scoring grid.
    pub fn exploration() -> Self {
        let mut walls = boundary([0.0, 0.0], [4.0, 4.0]);
        walls.extend([
            Segment::new([1.0, 1.0], [1.0, 1.8]),
            Segment::new([2.2, 1.0], [3.0, 1.0]),
            Segment::new([3.0, 2.2], [3.0, 3.0]),
            Segment::new([1.0, 3.0], [1.8, 3.0]),
        ]);
        Self {
            version: ARENA_VERSION,
            task: TaskKind::Exploration,
            bounds: [[0.0, 0.0], [4.0, 4.0]],
            walls,
            start: Pose { x: 2.0, y: 2.0, heading: 0.0 },
            grid_cells: 8,
            track_length: 12.0,
            hill: None,
            roughness: None,
            cube: None,
        }
    }

    /// 4×4 m arena, start in one corner, mound peaking at the opposite corner.
    pub fn hill_climb() -> Self {
        Self {
            version: ARENA_VERSION,
            task: TaskKind::HillClimb,
            bounds: [[0.0, 0.0], [4.0, 4.0]],
            walls: boundary([0.0, 0.0], [4.0, 4.0]),
            start: Pose { x: 0.4, y: 0.4, heading: FRAC_PI_4 },
            grid_cells: 8,
            track_length: 12.0,
            hill: Some(Hill { center: [4.0, 4.0], radius: 4.5, height: 0.5, slope_penalty: 3.0 }),
            roughness: None,
            cube: None,
        }
    }

    /// 12 m track, 3 m wide, start at the far left facing +x. The closing
    /// wall sits beyond the 12 m mark so that the full distance is reachable.
    pub fn loco_flat() -> Self {
        Self {
            version: ARENA_VERSION,
            task: TaskKind::LocoFlat,
            bounds: [[TRACK_BACK, -TRACK_HALF_WIDTH], [TRACK_END, TRACK_HALF_WIDTH]],
            walls: boundary([TRACK_BACK, -TRACK_HALF_WIDTH], [TRACK_END, TRACK_HALF_WIDTH]),
            start: Pose { x: 0.0, y: 0.0, heading: 0.0 },
            grid_cells: 8,
            track_length: 12.0,
            hill: None,
            roughness: None,
            cube: None,
        }
    }

    pub fn loco_rough(seed: u64) -> Self {
        Self {
            task: TaskKind::LocoRough,
            roughness: Some(Roughness {
                start_factor: 1.0,
                end_factor: 0.3,
                length: 12.0,
                bump_amplitude: 0.15,
                bump_cell: 0.25,
                seed,
            }),
            ..Self::loco_flat()
        }
    }

    /// Flat track with a 10 cm IR-emitting cube 50 cm in front of the robot.
    pub fn manipulation() -> Self {
        Self {
            task: TaskKind::Manipulation,
            cube: Some(CubeSpec { edge: 0.10, gap: 0.50, slide_decay: 0.8 }),
            ..Self::loco_flat()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != ARENA_VERSION {
            return Err(Error::Config(format!("arena version {} unsupported (expected {ARENA_VERSION})", self.version)));
        }
        let [lo, hi] = self.bounds;
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::Config("arena bounds are empty".into()));
        }
        if self.grid_cells == 0 || !(self.track_length > 0.0) {
            return Err(Error::Config("grid_cells and track_length must be positive".into()));
        }
        if self.task == TaskKind::Exploration && (hi[0] - lo[0] - (hi[1] - lo[1])).abs() > 1e-12 {
            return Err(Error::Config("exploration arena must be square".into()));
        }
        if self.task == TaskKind::Manipulation && self.cube.is_none() {
            return Err(Error::Config("manipulation arena needs a cube".into()));
        }
        Ok(())
    }

    pub fn altitude(&self, p: Vec2) -> f64 {
        self.hill.map_or(0.0, |h| h.height_at(p))
    }

    pub fn roughness_at(&self, p: Vec2) -> f64 {
        self.roughness.map_or(1.0, |r| r.factor_at(p))
    }

    /// Coverage cell containing `p`, clamped to the grid.
    pub fn cell_of(&self, p: Vec2) -> usize {
        let [lo, hi] = self.bounds;
        let n = self.grid_cells;
        let cx = (((p[0] - lo[0]) / (hi[0] - lo[0])) * n as f64).floor().clamp(0.0, (n - 1) as f64) as usize;
        let cy = (((p[1] - lo[1]) / (hi[1] - lo[1])) * n as f64).floor().clamp(0.0, (n - 1) as f64) as usize;
        cy * n + cx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arena_dimensions() {
        let e = ArenaSpec::exploration();
        assert_eq!(e.grid_cells * e.grid_cells, 64);
        e.validate().unwrap();
        let h = ArenaSpec::hill_climb();
        assert_eq!(h.bounds, [[0.0, 0.0], [4.0, 4.0]]);
        assert_eq!(h.altitude([4.0, 4.0]), 0.5);
        assert_eq!(h.altitude([0.4, 0.4]), 0.0);
        assert_eq!(ArenaSpec::loco_flat().track_length, 12.0);
        assert_eq!(ArenaSpec::manipulation().cube.unwrap().edge, 0.10);
        assert_eq!(ArenaSpec::manipulation().cube.unwrap().gap, 0.50);
    }

    #[test]
    fn roughness_decreases_along_track() {
        let r = ArenaSpec::loco_rough(3);
        let early = r.roughness_at([0.1, 0.0]);
        let late = r.roughness_at([11.9, 0.0]);
        assert!(early > 0.84 && early <= 1.0);
        assert!(late < 0.31 && late > 0.25);
        assert_eq!(r.roughness_at([5.0, 0.3]), r.roughness_at([5.0, 0.3]));
    }

    #[test]
    fn hill_gradient_matches_finite_difference() {
        let h = ArenaSpec::hill_climb().hill.unwrap();
        let p = [2.0, 2.5];
        let eps = 1e-6;
        let g = h.gradient_at(p);
        let fx = (h.height_at([p[0] + eps, p[1]]) - h.height_at([p[0] - eps, p[1]])) / (2.0 * eps);
        let fy = (h.height_at([p[0], p[1] + eps]) - h.height_at([p[0], p[1] - eps])) / (2.0 * eps);
        assert!((g[0] - fx).abs() < 1e-8 && (g[1] - fy).abs() < 1e-8);
    }

    #[test]
    fn task_names_round_trip() {
        for t in TaskKind::DOWNSTREAM {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
        }
    }
}
