//! Desk-scale simulator of a multimode-cavity quantum annealer.
//!
//! The crate covers the full chain: Hermite-Gauss cavity modes and their
//! couplings to an optical-lattice chain, greedy selection of a well-spanning
//! mode set, synthesis of laser inputs realizing a target spin-spin
//! interaction matrix, exact evolution of the resulting spin Hamiltonian
//! through an annealing ramp, and reconstruction of the final spin state
//! from the cavity output light.

pub mod anneal;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod hopfield;
pub mod lattice;
pub mod mode_search;
pub mod presets;
pub mod readout;
pub mod sector;
pub mod spin;
pub mod synthesis;

pub use error::{CoreError, Result};
