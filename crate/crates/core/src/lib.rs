//! Joint active beamforming, NOMA power allocation and RIS passive
//! beamforming for a RIS-aided integrated sensing and communication system.
//!
//! The crate is organised bottom-up:
//! - [`geometry`]: layout, steering vectors and Rician channels;
//! - [`metrics`]: rates, beampattern gain and illumination power;
//! - [`conic`]: complex SDP modelling on top of an interior-point solver;
//! - [`algorithms`]: the SCA joint solver, feasibility search, SRCR passive
//!   beamforming and the two alternating outer loops;
//! - [`baselines`]: ZF/MRT baselines and the no-NOMA and sensing-only systems;
//! - [`harness`]: sweeps, persistence and CSV emitters.

pub mod config;
pub mod conic;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod serde_util;
pub mod algorithms;
pub mod baselines;
pub mod harness;

pub use config::{load_config, ScenarioConfig};
pub use error::{Error, Result};
