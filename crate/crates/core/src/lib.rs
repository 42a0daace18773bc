//! Spatial false discovery rate control on 2D/3D lattices.
//!
//! The local procedure replaces each p-value by the median (or mean) of the
//! p-values in its neighborhood, estimates the null law of these aggregated
//! p*-values, and thresholds them with a plug-in FDR estimate. The crate
//! also quantifies how small a control level each procedure can reach
//! before its threshold collapses to zero, and simulates the lattice
//! scenarios used to compare the procedures.

pub mod aggregate;
pub mod error;
pub mod fdr;
pub mod grid;
pub mod io;
pub mod lip;
pub mod nulldist;
pub mod pipeline;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
