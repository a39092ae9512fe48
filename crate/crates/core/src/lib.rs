//! Open-system simulation of a two-mode mechanical resonator coupled to an
//! NV-center spin, where heating the low-frequency mode cools the
//! high-frequency one.
//!
//! Three models of increasing approximation are provided and share one
//! operator layer:
//!
//! * [`liouville`]: the full spin ⊗ mode a ⊗ mode b Lindblad master equation,
//!   propagated with fixed-step RK4;
//! * [`reduced`]: the spin ⊗ mode b master equation left after adiabatically
//!   eliminating mode a;
//! * [`meanfield`]: factorized number-operator equations and their closed-form
//!   stationary solution.
//!
//! All rates and frequencies inside the dynamics are angular with ħ = 1.
//! SI constants appear only in the conversions in [`model`].

pub mod error;
pub mod hilbert;
pub mod liouville;
pub mod meanfield;
pub mod model;
pub mod par;
pub mod reduced;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
