//! Spectral representation and calculus of periodic fields on the 3-torus,
//! plus time-sampled space-time fields, discrete Hölder norms, and the
//! binary snapshot format.

pub mod fft;
pub mod lattice;
pub mod norms;
pub mod scalar;
pub mod snapshot;
pub mod tensor;
pub mod time;
pub mod vector;

pub use lattice::Lattice3;
pub use scalar::{GridField, ScalarField};
pub use tensor::TensorField;
pub use time::{ddt2_scalar, ddt_scalar, ddt_stencil, TimeGrid, TimeSampled};
pub use vector::VectorField;
