//! Numerical dynamics for holomorphic families of polynomial-like maps.
//!
//! The library builds equilibrium measures by inverse iteration, estimates
//! partial sums of Lyapunov exponents, takes discrete dd^c of parameter-plane
//! scans to locate bifurcation loci, tracks periodic orbits, and slices
//! horizontal currents over parameter space. Everything is desk-scale and
//! deterministic: given the same configuration and seed, artifacts are
//! byte-identical.

pub mod bifurcation;
pub mod cli;
pub mod cloud;
pub mod equilibrium;
pub mod error;
pub mod family;
pub mod field;
pub mod linalg;
pub mod lyapunov;
pub mod params;
pub mod poly;
pub mod preimage;
pub mod slicing;
pub mod stability;

pub use cloud::AtomCloud;
pub use error::{Error, Result};
pub use family::MapFamily;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
