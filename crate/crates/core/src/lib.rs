//! Cooperative self-localization for networks of (underwater) vehicles from
//! pairwise ranges, water-relative velocity and a few GPS-referenced anchors.
//!
//! - [`geom`]: dimensions, the measurement graph and incidence bookkeeping.
//! - [`problem`]: the windowed stacked quadratic over a product of spheres.
//! - [`diesel`]: the distributed projected-gradient solver and tracker.
//! - [`oracle`]: dense reference operators used to check the solver.
//! - [`baselines`]: centralized EKF and static range-only localizers.
//! - [`scenario`]: trajectories, formations and noisy measurement synthesis.
//! - [`harness`]: Monte Carlo experiments, metrics and reports.

pub mod baselines;
pub mod diesel;
pub mod error;
pub mod geom;
pub mod harness;
pub mod oracle;
pub mod problem;
pub mod scenario;

pub use error::{Error, Result};
pub use geom::{NetworkTopology, Point, SpaceDim};
