//! Resilient multi-user MIMO-OFDM uplink under smart jamming.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: resource grid, unit conversions, system configuration and the
//!   per-user transmit [`Allocation`](grid::Allocation) with its constraint validator.
//! * [`channel`]: beamspace channel synthesis from a seeded circular geometry.
//! * [`rates`]: covariances, MMSE equalizers, SINRs, the user-sum-rate and the sum-rate.
//! * [`allocator`]: DoA-informed surrogate covariance and joint iterative
//!   scheduling / beamforming / water-filling.
//! * [`jammer`]: approximate worst-case jamming and the barrage baseline.
//! * [`harness`]: baselines, scenario pipeline, parameter sweeps and CSV output.
//!
//! Per-RE loops and sweep trials run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to plain iterators otherwise; results are
//! identical either way.

pub mod allocator;
pub mod channel;
pub mod config;
pub mod error;
pub mod exec;
pub mod grid;
pub mod harness;
pub mod jammer;
pub mod linalg;
pub mod rates;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
