//! Tensor calculus on sampled charts, G-structures with inner torsion, a
//! catalog of infinitesimally homogeneous target spaces, compatibility-system
//! residuals, and reconstruction of structure-preserving immersions by
//! integrating the frame equation.

pub mod chart;
pub mod error;
pub mod fd;
pub mod gstructure;
pub mod models;
pub mod realize;
pub mod compat;
pub mod fixtures;
pub mod align;
pub mod solver;
pub mod mesh;
pub mod config;
pub mod run;
pub mod tensor;

pub use error::{Error, Result};
