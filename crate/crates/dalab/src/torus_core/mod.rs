//! Torus arithmetic, integer Anosov matrices and their splittings, periodic
//! points, and cone predicates.

mod cones;
pub mod intmat;
mod periodic;
mod splitting;
mod transversal;

pub use cones::{cone_membership, Bundle, ConeField};
pub use intmat::IMat3;
pub use periodic::{period_count, periodic_orbits, periodic_points, PeriodicOrbit, PeriodicPoint};
pub use splitting::{hyperbolic_splitting, AnosovMatrix, SplittingFrame, SplittingWarning};
pub use transversal::{transversal_length, TransversalLength};

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorusError {
    #[error("matrix is not Anosov: eigenvalue modulus {0} is within 1e-9 of 1")]
    NotAnosov(f64),
    #[error("|det M| = {0}, expected 1")]
    NotUnimodular(i128),
    #[error("stable bundle has dimension {0}; only a 2+1 splitting is supported")]
    UnsupportedSplitting(usize),
    #[error("no power k <= {0} brings both rates below the target")]
    PowerLimit(u32),
    #[error("integer overflow in exact matrix arithmetic")]
    Overflow,
    #[error("det(A^{0} - I) = 0")]
    DegeneratePeriod(u32),
    #[error("{0} periodic points exceed the enumeration limit")]
    TooManyPoints(i128),
    #[error("eigenvector residual {0:e} above tolerance")]
    Residual(f64),
    #[error("zero vector has no cone membership")]
    ZeroVector,
    #[error("cone widths must be positive with kappa_u * kappa_cs < 1 (got {0}, {1})")]
    BadCones(f64, f64),
    #[error("transversal covering did not close below return time {0}")]
    CoveringFailed(f64),
}

#[inline]
pub(crate) fn wrap1(c: f64) -> f64 {
    let w = c - c.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// A point of the 3-torus R³/Z³ with coordinates in [0,1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint([f64; 3]);

impl TorusPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        TorusPoint([wrap1(x), wrap1(y), wrap1(z)])
    }

    pub fn from_vec(v: &Vec3) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn origin() -> Self {
        TorusPoint([0.0; 3])
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    pub fn to_vec(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn translate(&self, v: &Vec3) -> Self {
        Self::new(self.0[0] + v[0], self.0[1] + v[1], self.0[2] + v[2])
    }
}

impl std::ops::Index<usize> for TorusPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Minimal-lift representative of `b - a`, each component in [-1/2, 1/2).
pub fn torus_delta(a: &TorusPoint, b: &TorusPoint) -> Vec3 {
    let mut d = Vec3::zeros();
    for i in 0..3 {
        let x = b.0[i] - a.0[i];
        d[i] = x - (x + 0.5).floor();
    }
    d
}

/// Euclidean torus distance.
pub fn torus_distance(a: &TorusPoint, b: &TorusPoint) -> f64 {
    torus_delta(a, b).norm()
}
