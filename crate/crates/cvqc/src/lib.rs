//! Simulator for measurement-based continuous-variable quantum computation on
//! temporal photonic cluster states.
//!
//! The crate provides two state backends and the measurement calculus built on
//! top of them:
//!
//! - [`gaussian`]: exact Gaussian states (means + covariances), symplectic
//!   gates, conditional homodyne updates, and the circuit oracle used to pin
//!   down every convention.
//! - [`fock`]: truncated Fock-space states and operators, Wigner functions,
//!   homodyne and photon-number projections.
//! - [`macronode`]: the closed-form operators induced by macronode homodyne
//!   measurements, validated against the circuit oracle.
//! - [`cluster`]: generation of 1D/2D temporal cluster states from their
//!   delay-loop optical circuits and execution of measurement schedules.
//! - [`resources`]: non-Gaussian resource states and the photon-number-
//!   resolved conditioning channel.
//! - [`algorithms`]: Gaussian boson sampling, commuting position-diagonal
//!   (IQP-style) circuits, and the continuous-variable amplitude-amplification
//!   search, compiled to macronode schedules.
//!
//! Conventions used throughout: ħ = 1, x̂ = (â+â†)/√2, p̂ = (â−â†)/(i√2),
//! vacuum variance 1/2, quadratures interleaved (x₁, p₁, x₂, p₂, …). The
//! homodyne angle θ selects the quadrature p̂ cos θ + x̂ sin θ, so θ = 0
//! measures p̂ and θ = π/2 measures x̂.

pub mod error;
pub mod math;

pub mod cluster;

pub mod convert;

pub mod gates;

pub mod macronode;

pub mod resources;

pub mod fock;
pub mod gaussian;

pub use error::{Error, Result};
pub use gates::{Gate, GateOp, ModeId};
