//! Outage-risk simulator for fleets of prosumer nano-grids.
//!
//! The crate scores hourly per-feeder State of Risk, samples feeder outages
//! from it, dispatches every nano-grid hour by hour (islanded while its
//! feeder is down, grid-tied otherwise), and aggregates energy not served,
//! spilled PV and ramp capacity across Monte Carlo replications.

pub mod casestudy;
pub mod dispatch;
pub mod error;
pub mod fleet;
pub mod io;
pub mod metrics;
pub mod sim;
pub mod sor;

pub use error::{Error, Result};
