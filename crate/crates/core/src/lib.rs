//! Random walks driven by nonstationary sequences of isometries of a compact
//! metric space.
//!
//! The crate is organised bottom-up:
//!
//! * [`groups`]: finite groups given by Cayley tables, subgroup lattices and
//!   the adapted / strictly aperiodic / coset aperiodic classification.
//! * [`spaces`]: compact metric spaces (circle, torus, 2-sphere, finite
//!   groups, finite metric spaces), their isometries and reference nets.
//! * [`measures`]: finitely supported probability measures, pushforward,
//!   exact convolution and particle evolution.
//! * [`transport`]: exact Wasserstein-1 distance by network simplex, a
//!   brute-force oracle and total variation.
//! * [`setdyn`]: closed sets on nets, Hausdorff distance, the alignment
//!   pseudo-metric and the intersection map over a support.
//! * [`experiments`]: scenario drivers (convergence, standing assumption
//!   probe, ergodic averages, large deviations, sphere equidistribution,
//!   Itô–Kawada census, Stromberg alternation).

pub mod error;
pub mod experiments;
pub mod groups;
pub mod measures;
pub mod rng;
pub mod setdyn;
pub mod spaces;
pub mod transport;

pub use error::{Error, Result};
