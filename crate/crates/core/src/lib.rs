//! Brownian motion with a deterministic drift: samplers, Green and Martin
//! kernels, discrete capacities, box-counting dimensions, Monte Carlo hitting
//! probabilities and closest-approach (double point) statistics.

pub mod capacity;
pub mod drifts;
pub mod error;
pub mod fracdim;
pub mod hitting;
pub mod kernels;
pub mod multipoint;
pub mod par;
pub mod quad;
pub mod randpath;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
