//! Curvature flow of a planar triod whose grain-boundary tensions depend on
//! the misorientation of the adjacent grains.
//!
//! Each of the three curves is described by its tangent angle on the unit
//! parameter interval (outer endpoint at `x = 0`, triple junction at
//! `x = 1`) and its length. The lattice orientations of the three grains
//! evolve by an ODE coupled to the lengths. See [`solver::run`] for the time
//! integration and [`scenario`] for admissible initial data.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod model;
pub mod numerics;
pub mod rayleigh;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use model::{EndpointSet, GrainModel, SurfaceTensionModel, TriodState};
