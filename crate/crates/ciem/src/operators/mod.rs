//! Fourier-multiplier and mollification operators: Leray projection, the two
//! inverse-divergence operators, Littlewood-Paley projections, mollification
//! in time, and mollification along flow trajectories.

pub mod bump;
pub mod flow_mollify;
pub mod leray;
pub mod lp;
pub mod time_mollify;

pub use leray::{inverse_divergence_matrix, inverse_divergence_vector, leray};
pub use lp::{lp_low_pass, lp_low_pass_tensor, lp_low_pass_vec, lp_project, LpSide};
pub use time_mollify::{mollify_time, MarginPolicy, TimeKernel};
