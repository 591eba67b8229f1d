//! Nonlinear coherent loss dynamics of a single bosonic mode.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the precision for the common case.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod designer;
pub mod elimination;
pub mod error;
pub mod evolution;
pub mod fock;
pub mod io;
pub mod lindblad;
pub mod metrics;
pub mod ode;
pub mod optimize;
pub mod scalar;
pub mod special;
pub mod stationary;
pub mod validation;

pub use designer::{optimize_amplitude, sweep_amplitude, Objective, OptimizationResult, SweepRow};
pub use elimination::{reduced_generator, verify_reduction, ModeExpansion, ReducedGenerator, ReductionReport, TermKind};
pub use error::{Error, Result};
pub use evolution::{evolve_band, evolve_matrix, Diagnostics, EvolutionSettings, Trajectory};
pub use fock::{
    coherent_density_matrix, CoherentAmplitude, DensityMatrix, DiagonalBand, LossProfile, TailRule, TargetState,
};
pub use scalar::{Real, C};
pub use stationary::{stationary_matrix, stationary_support, StationaryReport, StationarySupport};

pub type LossProfileF64 = LossProfile<f64>;
pub type LossProfileF32 = LossProfile<f32>;
pub type DensityMatrixF64 = DensityMatrix<f64>;
pub type DensityMatrixF32 = DensityMatrix<f32>;
pub type DiagonalBandF64 = DiagonalBand<f64>;
pub type DiagonalBandF32 = DiagonalBand<f32>;
pub type TargetStateF64 = TargetState<f64>;
pub type TargetStateF32 = TargetState<f32>;
pub type EvolutionSettingsF64 = EvolutionSettings<f64>;
pub type EvolutionSettingsF32 = EvolutionSettings<f32>;
pub type StationaryReportF64 = StationaryReport<f64>;
pub type StationaryReportF32 = StationaryReport<f32>;
