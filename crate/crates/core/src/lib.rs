//! Dynamics of a two-level atom coupled to one quantized cavity mode at
//! arbitrary coupling strength.
//!
//! Two descriptions of the same Hamiltonian are provided:
//!
//! * [`meanfield`]: the entanglement-free product ansatz, reduced to the
//!   closed system for the field expectation `α = ⟨a⟩`, the atomic coherence
//!   `β = b c*` and the inversion `s = |b|² − |c|²`.
//! * [`fock`]: the exact entangled amplitudes `b_n`, `c_n` on a truncated
//!   photon-number basis.
//!
//! The Fock dynamics are validated against two independent references: the
//! closed-form rotating-wave solution in [`rwa`] and exact propagation by
//! dense eigendecomposition in [`spectral`].
//!
//! Units are dimensionless with ħ = 1.

pub mod error;
pub mod fock;
pub mod integrator;
pub mod meanfield;
pub mod model;
pub mod observables;
pub mod rwa;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{
    Atom, FockAmplitudes, InitialSpec, MeanFieldState, ModelParams, Series, Trajectory,
    TruncationMode,
};
pub use num_complex::Complex64 as C64;
