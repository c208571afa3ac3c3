//! Multi-vessel pursuit-evasion on a spherical Earth.
//!
//! Every pursuer runs two independent online actor-critic learners (one per
//! horizontal axis of its local frame) whose outputs are turned into speed
//! and heading adjustments. The [`engine`] steps the world deterministically
//! and [`io`] handles scenario files and run exports.

pub mod engine;
pub mod error;
pub mod geo;
pub mod io;
pub mod kinematics;
pub mod pursuit;
pub mod rl;

pub use error::{Error, Result};
