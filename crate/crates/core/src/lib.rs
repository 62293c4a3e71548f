//! Finite-volume simulation and analysis toolkit for reaction–diffusion
//! systems with mass-action kinetics: entropy decay, duality estimates,
//! and the exact exponent bootstrap for higher integrability.

pub mod diagnostics;
pub mod duality;
pub mod equilibrium;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod integrator;
mod linalg;
pub mod rational;
pub mod serde_ext;
pub mod system;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
pub use integrator::{SpeciesState, StepControl, Trajectory};
pub use rational::Rational;
pub use system::ReactionSystem;
