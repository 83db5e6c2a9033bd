//! Orbit-based analyses: unstable curves and their accumulation, Lyapunov
//! exponents, basin and U⁺ censuses, and Birkhoff averages.

mod census;
mod curve;
mod lyapunov;

pub use census::{
    backward_survival, basin_census, basin_census_points, birkhoff_compare, constant_observable, diagnose_escapees,
    fourier_observables, u_plus_measure, BasinCensus, BirkhoffComparison, Diagnosis, Escapee, Observable, Region,
    UPlusEstimate,
};
pub use curve::{
    accumulation_check, grow_unstable_curve, iterate_unstable_curve, scan_unstable_curve, CurveScan, TargetScan,
    UnstableCurve, MAX_STRAIGHT, SEED_LENGTH,
};
pub use lyapunov::{
    census_csv, cs_exponent_census, cs_exponent_census_points, lyapunov_checkpoints, lyapunov_spectrum, CensusResult,
    ExponentSample, Histogram,
};

use crate::da_family::DaError;
use crate::semiconj::SemiconjError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("segment {segment} leaves the unstable cone (margin {margin:e}); refine tol")]
    ConeViolation { segment: usize, margin: f64 },
    #[error("arclength stagnated at {arclength:e} after {iterations} iterations")]
    TargetUnreachable { arclength: f64, iterations: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Da(#[from] DaError),
    #[error(transparent)]
    Semiconj(#[from] SemiconjError),
}
