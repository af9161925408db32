//! Simulation, return-map analysis and potential reconstruction for natural
//! Hamiltonian systems `H = <p,p> + U(q)` on flat tori, plus the round sphere
//! and conformally flat torus variants.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure function of
//! its inputs; file formats, configuration and the CLI live in the `orbitfit`
//! crate.
//!
//! Conventions used throughout:
//!
//! * The kinetic term carries no factor ½, so `q̇ = 2p` and `q̈ = -2∇U(q)`.
//! * Torus coordinates are angles in `[0, 2π)`; integrators track winding
//!   numbers so the unwrapped lift can be recovered exactly.
//! * Potentials are finite trigonometric series with one stored coefficient
//!   pair per `±k` wave-vector pair.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub(crate) mod math;
pub mod periodicity;
pub mod potential;
pub mod reconstruction;

pub use error::{Error, Result};
pub use geometry::{MetricTag, SpherePoint, TorusPoint};
pub use potential::{FourierSeries, FourierSeries2D, FourierSeries3D};
