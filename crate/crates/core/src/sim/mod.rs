//! Deterministic fixed-timestep planar simulator.
//!
//! Bodies are abstracted from voxel designs ([`body`]), arenas are wall
//! segments plus optional height and roughness fields and an IR cube
//! ([`arena`]), and [`episode`] runs a controller in closed loop at 10 Hz over
//! 100 Hz physics substeps and scores the run.

pub mod arena;
pub mod body;
pub mod episode;
pub mod geometry;
pub mod physics;

pub use arena::{ArenaSpec, TaskKind};
pub use body::{build_body, BodyModel, BodyParams};
pub use episode::{
    coverage_score, run_episode, simulate, ControllerSpec, EpisodeConfig, EpisodeResult, Trajectory,
};
pub use geometry::Vec2;
pub use physics::{step, SimState};
