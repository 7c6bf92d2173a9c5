//! Aggregation dynamics on products of spheres, matrix manifolds, and the
//! unitary and special-orthogonal groups, driven by a cubic tensor coupling.
//!
//! The crate provides:
//!
//! * dense complex tensors and the contraction primitives of the model
//!   ([`tensor`]),
//! * exact right-hand sides of the tensor flow and all of its reductions,
//!   with the coupling patterns and free-flow constructions connecting them
//!   ([`model`]),
//! * a fixed-step Runge-Kutta integrator with polar/normalization retraction
//!   back to the state manifold ([`integrate`]),
//! * aggregation functionals, emergence thresholds, and differential
//!   inequality monitors ([`diagnostics`]),
//! * seeded scenario generation, preset experiments, and CSV/JSON emission
//!   ([`scenario`]), also exposed through the `lohe` command-line binary.

pub mod diagnostics;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod scenario;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{C64, DenseTensor, IndexVector};
