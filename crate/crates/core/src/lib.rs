//! Minimum-power distributed relay beamforming under per-user SINR
//! constraints: non-robust, min-over-max robust and accurate worst-case robust
//! designs by semidefinite relaxation, with Monte-Carlo evaluation.

pub mod conic;
pub mod linalg;
pub mod matrices;
pub mod model;
pub mod sim;
pub mod solvers;
pub mod uncertainty;
