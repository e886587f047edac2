//! Morpho-evolution of voxel robots evaluated by a homeokinetic controller.
//!
//! The crate is organised bottom-up:
//!
//! - [`cppn`]: the generative genotype and its mutation operators
//! - [`morphology`]: decoding a genome into an 11×11×11 voxel robot, descriptors and sparsity
//! - [`controllers`]: homeokinetic, fixed feed-forward and Elman controllers plus the I/O convention
//! - [`sim`]: a deterministic planar arena simulator and the five task environments
//! - [`evolution`]: asynchronous morpho-evolution (AME) in MEHK and MEFC modes
//! - [`selection`]: threshold filtering, fitness/sparsity Pareto front and pick-three
//! - [`ncmaes`]: CMA-ES with a novelty archive and an annealed objective schedule

pub mod controllers;
pub mod cppn;
pub mod error;
pub mod evolution;
pub mod morphology;
pub mod ncmaes;
pub mod seeds;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
