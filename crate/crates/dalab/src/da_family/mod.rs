//! The DA diffeomorphism f: bump perturbation of an Anosov automorphism near
//! two fixed points, with sampled verification of its defining properties.

mod bump;
mod map;
mod sites;
mod stable_manifold;
mod verify;

pub use bump::{BumpProfile, BumpShape};
pub use map::{build_da, DAMap, DAParams, DesignCheck};
pub use sites::{check_separation, lattice_systole, select_sites, SiteSelection, MIN_SAFETY};
pub use stable_manifold::{local_stable_manifold_q, ManifoldStatus, StableManifold};
pub use verify::{verify_construction, PropertyCheck, VerificationReport};

pub use verify::stratified_point;

use crate::torus_core::{hyperbolic_splitting, ConeField, IMat3, TorusError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DaError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("only {0} fixed points; three are needed")]
    TooFewFixedPoints(usize),
    #[error("plaque radius {0} is at least 1/4")]
    PlaqueTooLarge(f64),
    #[error("site separation is {0}·δ, below 200·δ")]
    SitesTooClose(f64),
    #[error("gains infeasible: {0}")]
    GainInfeasible(String),
    #[error("inverse did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error("spectrum mismatch: {0}")]
    SpectrumMismatch(String),
    #[error(transparent)]
    Torus(#[from] TorusError),
}

/// The base matrix with characteristic polynomial λ³ − λ² − 1.
pub const BASE_MATRIX: IMat3 = [[1, 1, 0], [0, 0, 1], [1, 0, 0]];

/// Scalar knobs from which `DAParams` are assembled.
#[derive(Clone, Debug, PartialEq)]
pub struct DASettings {
    pub base: IMat3,
    pub lambda_target: f64,
    pub safety: f64,
    pub c_p: f64,
    pub s1: f64,
    pub s2: f64,
    pub kappa_u: f64,
    pub kappa_cs: f64,
    pub beta: f64,
    pub bump_shape: BumpShape,
    pub bump_core: f64,
}

impl Default for DASettings {
    fn default() -> Self {
        DASettings {
            base: BASE_MATRIX,
            lambda_target: 1.0 / 3.0,
            safety: MIN_SAFETY,
            c_p: 2.30,
            s1: 0.97,
            s2: 1.05,
            kappa_u: 0.5,
            kappa_cs: 0.003,
            beta: 0.06,
            bump_shape: BumpShape::LogRadius,
            bump_core: 0.01,
        }
    }
}

impl DASettings {
    pub fn params(&self) -> Result<DAParams, DaError> {
        let (anosov, frame) = hyperbolic_splitting(&self.base, self.lambda_target)?;
        let sites = select_sites(&anosov, &frame, self.safety)?;
        let bump = BumpProfile::new(self.bump_shape, self.bump_core)
            .ok_or_else(|| DaError::InvalidParams(format!("bump core {} outside (0, 1)", self.bump_core)))?;
        let cones = ConeField::new(frame, self.kappa_u, self.kappa_cs)?;
        Ok(DAParams { anosov, sites, c_p: self.c_p, s1: self.s1, s2: self.s2, bump, cones, beta: self.beta })
    }

    pub fn build(&self) -> Result<DAMap, DaError> {
        build_da(self.params()?)
    }
}

#[cfg(test)]
mod tests;
