//! Linearizing semiconjugacies for attracting fixed points and limit cycles.
//!
//! The crate computes principal Koopman eigenfunctions, Sternberg
//! linearizations, Floquet normal forms and isostable/phase coordinates.
//! The pipeline is:
//!
//! 1. [`vfield`] parses the system and provides jet arithmetic,
//! 2. [`flow`] locates the attractor and transports jets through the flow,
//! 3. [`spectral`] checks nonresonance and the spectral spread,
//! 4. [`factor`] solves the homological equations for a polynomial factor,
//! 5. [`evaluate`] and [`cycle`] turn that polynomial into the exact factor
//!    by pulling it back along trajectories,
//! 6. [`classify`] enumerates the monomial eigenfunctions for a target
//!    eigenvalue.

pub mod linalg;
pub mod spectral;
pub mod flow;
pub mod vfield;
pub mod factor;
pub mod evaluate;
pub mod systems;
pub mod cycle;
pub mod classify;
