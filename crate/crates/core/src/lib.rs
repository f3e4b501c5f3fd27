//! Sphere evolution under combined advection and mean curvature flow.
//!
//! A closed surface moving with normal speed `a - bκ` stays a sphere when it
//! starts as one, and its radius obeys `r' = a - b/r`. This crate provides:
//!
//! - [`lambert_w`]: the real branches `W₀` and `W₋₁` of the Lambert W function.
//! - [`analytic`]: the closed-form radius, vanishing time and regime
//!   classification, plus an adaptive RK4 reference integrator.
//! - [`levelset`]: a 3D level-set solver of the same flow on a uniform grid.
//! - [`inverse`]: recovery of `(a, b)` from an observed radius trajectory.
//! - [`cli`]: the `sphere-flow` command-line front end that writes CSV data.

pub mod analytic;
pub mod cli;
pub mod inverse;
pub mod lambert_w;
pub mod levelset;
pub mod trajectory;

pub use analytic::{
    classify_regime, evolve_trajectory, prescribed_curvature, radius_at, reference_integrate,
    reference_sample, vanishing_time, FlowError, FlowParams, FlowRegime, ReferenceSolution,
    VanishingTime,
};
pub use lambert_w::{lambert_w, LambertBranch, LambertError};
pub use trajectory::RadiusTrajectory;
