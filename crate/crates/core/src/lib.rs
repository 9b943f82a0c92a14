//! Matrix-free transient and DC analysis for RC/RLC power-grid models.
//!
//! The fast path never forms a system matrix: each node carries a small
//! stencil (diagonal, neighbor weights, source/current injections) and
//! per-step solves are Gauss-Seidel or SOR sweeps over those stencils.
//! A dense reference implementation ([`oracle`]) exists for
//! verification and for the positive-definiteness checks.
//!
//! Everything is generic over the scalar type ([`scalar::Scalar`],
//! implemented for `f32` and `f64`); the aliases at the crate root fix
//! `f64` for ordinary use.

pub mod dc;
pub mod dense;
pub mod error;
pub mod gridgen;
pub mod netlist;
pub mod oracle;
pub mod scalar;
pub mod topology;
pub mod transient;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` aliases for the common case.
pub type Circuit = netlist::Circuit<f64>;
pub type Pwl = waveform::Pwl<f64>;
pub type WaveformSet = waveform::WaveformSet<f64>;
pub type StencilSet = topology::StencilSet<f64>;
pub type SolveConfig = transient::SolveConfig<f64>;
pub type SolveReport = transient::SolveReport<f64>;
pub type DenseSystem = oracle::DenseSystem<f64>;
