//! Pseudo-spectral engine for the convex-integration construction of
//! dissipative Euler-Maxwell-Reynolds flows on the periodic box.
//!
//! The crate builds starting tuples, executes the q -> q+1 correction step
//! (with its bifurcating variant), and verifies every exactly-checkable
//! identity of the construction at desk scale: Fourier-multiplier operators,
//! the geometric decomposition lemmas, Mikado profiles and their moment
//! conditions, exact Maxwell building blocks, weight cancellation, and the
//! momentum/energy closure of the corrected tuple.

pub mod blocks;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod mikado;
pub mod operators;
pub mod bootstrap;
pub mod scheme;

pub use error::{CiemError, Result};
