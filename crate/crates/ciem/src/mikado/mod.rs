//! Construction of Mikado profiles, the moment-constrained strength
//! functions, their truncated Fourier coefficient families, and shift
//! placement with certified disjointness.

pub mod frame;
pub mod placement;
pub mod profile;
pub mod profile2d;

pub use frame::PipeFrame;
pub use placement::{place_shifts, PlacedIndex, Placement, PlacementRequest, StrandPattern};
pub use profile::{CurrentShapeSet, MikadoProfile, ProfileMode, ProfileShape, Strand, TailReport};
pub use profile2d::{select_case, CaseThresholds, CurrentCase, CURRENT_CASES};
