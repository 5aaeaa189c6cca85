//! Kinetic models of interacting populations and their diffusive limits.
//!
//! This crate simulates mixtures of self-propelled particles whose velocity
//! changes through a jump process on the sphere `V = R·S^{d-1}`, derives the
//! macroscopic cross-diffusion/reaction systems they converge to under
//! parabolic scaling, solves those limit systems by finite volumes, and
//! measures the micro -> macro gap as the scaling parameter `eps -> 0`.
//!
//! The pipeline is organised as one module per stage:
//!
//! - [`velocity`] — discrete velocity sphere, quadrature, equilibria, moments;
//! - [`turning`] — turning operators `T = T0 + eps^b T1`, their structural
//!   checks, and inversion of the leading part on mean-zero data;
//! - [`hilbert`] — the derivation engine: diffusion tensors, taxis matrices,
//!   and reaction closures assembled into a [`hilbert::DerivedModel`];
//! - [`kinetic`] — split transport/relaxation integrator for the scaled
//!   kinetic system at finite `eps`;
//! - [`macroscale`] — explicit finite-volume solver for the limit systems;
//! - [`harness`] — eps-sweeps, error tables, and convergence-order fits;
//! - [`scenario`] — ready-made model families (heat, virus/chemotaxis,
//!   oncolytic, invasion, forager, flux-limited);
//! - [`io`] — CSV snapshots, model files, and fixed-width number formatting.

pub mod error;
pub mod harness;
pub mod hilbert;
pub mod io;
pub mod kinetic;
mod linalg;
pub mod macroscale;
pub mod scenario;
pub mod space;
pub mod turning;
pub mod velocity;

pub use error::Error;
pub use hilbert::{DerivedModel, SourceSpec};
pub use kinetic::{KineticModel, KineticState};
pub use macroscale::MacroState;
pub use space::{Boundary, SpaceGrid};
pub use turning::{ScalingExponents, TurningKernel};
pub use velocity::{Equilibrium, VelocityGrid};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
