//! Destabilization and transition to chaos in rings of identical coupled
//! oscillators: continuous spectra, Ginzburg-Landau amplitude equations,
//! direct simulation with Lyapunov spectra, and bifurcation scans.

pub mod amplitude;
pub mod error;
pub mod glsolver;
pub mod linalg;
pub mod model;
pub mod scan;
pub mod simulate;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{make_duffing_ring, DuffingRingParams, RingModel};
