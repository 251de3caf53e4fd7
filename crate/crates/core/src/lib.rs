//! Minimizing-movement (JKO) schemes for `∂t ρ = Δρ^m` on simple domains,
//! together with the convex-analysis checks used to certify discrete
//! Aronson-Bénilan bounds on the computed iterates.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ab;
pub mod entropy;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod isotonic;
pub mod jko1d;
pub mod jko2d;
pub mod linalg;
pub mod monge_ampere;
pub mod ot1d;
pub mod sinkhorn;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{BoundaryTag, Domain, DomainKind, Grid};
