//! Checking noncontextuality assumptions on finite quantum scenarios.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! * [`linalg`] dense complex matrices and a cyclic Jacobi Hermitian eigensolver,
//! * [`qcore`] density matrices, effects, measurements, channels, kernels and distances,
//! * [`ontomodel`] scenarios (finite operational theories) and finite ontological models,
//! * [`relations`] operational and ontological relations and the assumption checker,
//! * [`constructions`] the constructive arguments (support closure, the four-state preparation
//!   witness, the antidistinguishability bound and support-disjointness chain, effect and
//!   channel reductions) as algorithms,
//! * [`feasibility`] exact decision procedures for the existence of noncontextual models.
//!
//! File formats and the command-line front end live in the companion `nonctx` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constructions;
pub mod error;
pub mod feasibility;
pub mod linalg;
pub mod ontomodel;
pub mod qcore;
pub mod random;
pub mod relations;

pub use error::{Error, Result};
