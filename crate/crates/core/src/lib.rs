//! Optimal placement of boundary pressure activations for recovering
//! perturbations of the Lamé parameters in linearized plane elasticity.

pub mod bayes;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod geometry;
pub mod linmap;
pub mod mesh;
pub mod objective;
pub mod optim;
pub mod skyline;

pub use error::{Error, Result};
