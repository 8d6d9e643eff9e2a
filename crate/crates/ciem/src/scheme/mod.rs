//! The full convex-integration correction step: parameters, mollified
//! tuple, weights, perturbation, time corrector, new stress, new current,
//! and the bifurcating variant.

pub mod commutator;
pub mod corrector;
pub mod current;
pub mod mollify;
pub mod ops;
pub mod params;
pub mod perturbation;
pub mod step;
pub mod stress;
pub mod tuple;
pub mod weights;

pub use params::{compute_params, IterationParams, RunConstants};
pub use step::{step, StepDiagnostics, StepOptions, StepOutput};
pub use tuple::{Ambient, Pressure, ReynoldsTuple};
