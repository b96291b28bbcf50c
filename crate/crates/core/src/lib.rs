//! Exact dynamics of Bose-Hubbard-type lattices on truncated Fock spaces.
//!
//! The crate builds occupation-number bases and sparse Hamiltonians,
//! propagates states exactly, and uses those pieces to check boson
//! transport bounds, Lieb-Robinson approximation errors, the HHKL block
//! decomposition and the boson-amplified CNOT protocol numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bounds;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod hamiltonian;
pub mod hhkl;
pub mod lattice;
pub mod protocol;
pub mod sparse;

pub use error::{Error, Result};
pub use evolve::{evolve, expectation, EvolutionConfig, Method};
pub use fock::FockBasis;
pub use hamiltonian::{HamiltonianSpec, SubsetHamiltonian};
pub use lattice::{estimate_gamma, LatticeGraph, SiteSet};
pub use sparse::{SparseOperator, StateVector, C64};
