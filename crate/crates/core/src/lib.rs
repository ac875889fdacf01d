//! Simulation and numerical tools for critical Hawkes processes.

pub mod cluster;
pub mod distributions;
pub mod embedding;
pub mod error;
mod fft;
pub mod genealogy;
pub mod harness;
pub mod hawkes_sim;
pub mod inar;
pub mod renewal_calc;
pub mod rng;
pub mod stats;
pub mod walks;

pub use distributions::{DisplacementSpec, Family, Law, SymmetrizedSpec, TruncatedSpec};
pub use error::{Error, Result};
pub use rng::{split_stream, split_stream_tagged, RngStream};
