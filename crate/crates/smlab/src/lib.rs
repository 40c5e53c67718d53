//! smlab: a laboratory for meshes h-refined toward singularities.
//!
//! The crate builds d-dimensional hypercubic meshes refined toward a
//! q-dimensional singularity on an exact integer lattice, enumerates the
//! basis-function carriers and their overlap graph, constructs element
//! partition trees and elimination orderings, counts exact sparse-elimination
//! work and fill, and compares space-time formulations against time-marching
//! schemes through symbolic cost classes.

pub mod basis;
pub mod cost;
pub mod elim;
pub mod error;
pub mod fxhash;
pub mod geom;
pub mod matrices;
pub mod mesh;
pub mod pipeline;
pub mod tree;

pub use error::{Error, Result};
