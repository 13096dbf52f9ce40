//! Gate-level simulator for hybrid NV-centre / flux-qubit registers.
//!
//! Qubit 0 is the most significant bit of a basis index. Energies are in
//! rad/us and times in us.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod decoupling;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod linalg;
pub mod noise;
pub mod observables;

pub use error::{Error, Result};
