//! Kinetic run-and-tumble chemotaxis on Cartesian meshes with embedded
//! boundaries.

pub mod boundary;
pub mod classify;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod limiter;
pub mod linsolve;
pub mod kinetic;
pub mod mesh;
pub mod output;
pub mod presets;
pub mod reaction_diffusion;
pub mod simulation;
pub mod stencil;

pub use error::{Error, Result};

pub type Point = nalgebra::Vector2<f64>;
