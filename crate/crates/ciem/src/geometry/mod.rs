//! Direction families, the two geometric decomposition lemmas, and the
//! space/time partition-of-unity cutoffs.

pub mod cutoffs;
pub mod families;
pub mod gamma;

pub use cutoffs::{CutoffSystem, FamilyTag};
pub use families::{build_families, class_of_cell, DirectionFamily, IVec3};
pub use gamma::{CurrentDecomposition, StressDecomposition};
