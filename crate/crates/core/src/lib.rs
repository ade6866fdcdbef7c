//! Simulation of the stochastic heat equation and of stochastic Stefan
//! problems on the half-line, with kernel-regularity verification and
//! ensemble estimators.

pub mod config;
pub mod error;
pub mod estimators;
pub mod heat;
pub mod kernels;
pub mod noise;
pub mod profiles;
pub mod quadrature;
pub mod regularity;
pub mod stefan;

pub use config::{parse_config, DriveMethod, EstimateSource, Model, RawConfig, SimConfig};
pub use error::{Error, Result};
pub use estimators::{
    holder_from_moments, mean_check, speed_structure_function, stefan_residual, structure_function, MeanAccumulator,
    MeanReport, StructureCurve, StructureMode,
};
pub use heat::{boundary_derivative, deterministic_heat, mild_solution_oracle, simulate_heat, SolutionField};
pub use noise::{
    colored_increments, sample_sheet, shifted_sheet, ColoredIncrements, CounterSheet, Grid1D, Mollifier,
    SheetIncrements, SheetSource,
};
pub use profiles::{InitialProfile, ScalingFunction};
pub use regularity::{verify, BoundId, RegularityReport, VerifyOptions};
pub use stefan::{
    detect_tau, drive_beta, psi, simulate_stefan_colored, simulate_stefan_scaled, BoundaryPath, HistoryKernel,
};
