//! Simulation, planning and directive-based social scoring for a
//! differential-drive robot navigating among people.

pub mod batch;
pub mod dwa;
pub mod episode;
pub mod error;
pub mod geometry;
pub mod log;
pub mod metrics;
pub mod provider;
pub mod scenario;
pub mod sim;
pub mod social;
pub mod types;

pub use error::{Error, Result};
