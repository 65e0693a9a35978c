//! Simulation of bearing-based cooperative target entrapping.
//!
//! Leaders follow designed trajectories around a moving target. Followers
//! sense only bearings and relative velocities of their neighbors, estimate
//! inter-agent distances from those bearings, and steer with a stress-matrix
//! formation controller plus a signum term that rejects bounded
//! uncertainty. The crate also checks the gain conditions, excitation
//! conditions and collision-avoidance certificate that go with that scheme.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod formation;
pub mod geometry;
pub mod linalg;
pub mod scenario;

pub use error::{Error, Result};
pub use geometry::{Bearing, Vec2};
