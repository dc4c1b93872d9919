//! End-to-end uplink throughput for UAV relays backhauled by tethered
//! balloons: channel models, association MILP, dual power allocation,
//! random-search placement, and a Monte Carlo harness.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod assoc;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod lp;
pub mod milp;
pub mod oracles;
pub mod placement;
pub mod power;
pub mod rate;
pub mod scalar;
pub mod seeding;

pub use error::{Error, Result, Violation};
pub use scalar::Scalar;

pub type Point = geometry::Point3<f64>;
pub type Scenario = geometry::Scenario<f64>;
pub type RadioParams = geometry::RadioParams<f64>;
pub type RateTable = rate::RateTable<f64>;
pub type PowerAllocation = power::PowerAllocation<f64>;
pub type PlacementSettings = placement::PlacementSettings<f64>;
pub type MilpSettings = milp::MilpSettings<f64>;
pub type LinearProgram = lp::LinearProgram<f64>;
