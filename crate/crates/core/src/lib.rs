//! Scheduling of cache updates at a base station over a time-slotted horizon,
//! subject to per-request delivery deadlines and a cache capacity.
//!
//! The main solver is a repeated column generation scheme ([`rounding::run_rcga`]):
//! column generation over per-content caching sequences, priced by a shortest
//! path on a small DAG, alternated with a rounding step that fixes one caching
//! decision at a time. The first converged column generation pass is a lower
//! bound on the integer optimum. Two slot-by-slot greedy baselines and an
//! exhaustive oracle for tiny instances are included for comparison.

pub mod colgen;
pub mod cost;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod greedy;
pub mod lpsolve;
pub mod model;
pub mod rounding;
pub mod scalar;

pub use cost::{total_cost, CachePlan};
pub use error::{Error, Result};
pub use model::{GenParams, Instance, Request};
pub use rounding::{run_rcga, FixSet, RcgaOutcome};

/// Integrality tolerance for column weights and the aggregated z-matrix.
pub const INTEGRALITY_EPS: f64 = 1e-6;
/// Primal feasibility tolerance of the master LP.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost cutoff for adding a column, and duality tolerance.
pub const REDUCED_COST_TOL: f64 = 1e-6;
