//! Analytical and Monte Carlo performance evaluation of dense small-cell
//! networks whose base stations sleep when no user is attached.
//!
//! The crate computes, for a homogeneous-PPP deployment under a piecewise
//! LoS/NLoS path loss model with smallest-path-loss association:
//!
//! * coverage probability ([`coverage`]),
//! * area spectral efficiency ([`ase`]),
//! * the activated-BS density with its upper/lower bounds and calibrated
//!   approximation ([`activation`]),
//! * serving-distance distributions ([`association`]),
//!
//! and validates all of it against an independent seeded simulator
//! ([`montecarlo`]).

pub mod activation;
pub mod ase;
pub mod association;
pub mod config;
pub mod coverage;
pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod pathloss;

pub use error::{Error, Result};
pub use pathloss::{NetworkConfig, Path, PathLossModel};
