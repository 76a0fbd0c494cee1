//! System-level Monte Carlo simulator of a TDD cellular network serving both
//! ground users (GUEs) and UAVs.
//!
//! The simulator compares two deployments on the downlink:
//!
//! - **single-user mode**: sectorized BSs with a 16-antenna (8×1 X-POL)
//!   vertical panel, fixed analog beamforming with mechanical downtilt, one
//!   user per PRB;
//! - **multi-user mode**: 128-antenna (8×8 X-POL) massive MIMO panels, uplink
//!   SRS sounding with pilot Reuse 3, least-squares channel estimation under
//!   contamination, and zero-forcing precoding with equal per-user power,
//!   eight users per PRB.
//!
//! Propagation follows the 3GPP Urban-Macro models with aerial extensions
//! (TR 38.901 / TR 36.777 style regimes) over a wrapped three-tier hexagonal
//! grid. Per-user rates come from a CQI-style spectral-efficiency staircase
//! and an analytic round-robin airtime share; the harness aggregates rate
//! CDFs and the reliability of a 100 kbps UAV command-and-control target.
//!
//! Everything is deterministic given the master seed: every random quantity
//! is drawn from a counter-derived ChaCha stream, so results are bit-identical
//! regardless of thread count.

pub mod antenna;
pub mod channel;
pub mod config;
pub mod deployment;
pub mod geom;
pub mod harness;
pub mod linalg;
pub mod mac;
pub mod mu_mimo;
pub mod phy;
pub mod rng;

pub use config::SimConfig;
pub use harness::{run_experiment, CdfSummary};
