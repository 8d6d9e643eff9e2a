//! Starting tuples: stationary density (pipe-block pressure cancellation)
//! and the slightly time-dependent variant built on top of it.

pub mod stationary;
pub mod timedep;

pub use stationary::{start_stationary, StartConfig, StartDiagnostics};
pub use timedep::{start_timedep, TimeDepConfig};
