//! Prediction of particle-distribution dynamics from discrete optimal
//! transport maps, inside a projective-integration loop around stochastic
//! micro simulators.

pub mod analysis;
pub mod config;
pub mod error;
pub mod io;
pub mod measure;
pub mod micro;
pub mod scheduler;
pub mod tangent;
pub mod transport;

pub use error::{Error, Result};
pub use measure::{empirical_from_points, ParticleCloud, ParticleRngs};
