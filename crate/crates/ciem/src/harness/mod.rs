//! Configuration, orchestration, verification, and reporting.

pub mod verify;

pub use verify::{verify, verify_interior, ResidualTable};
