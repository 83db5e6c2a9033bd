//! Combinatorial outer approximations of f on the uniform n×n×n box grid,
//! their Morse graphs, terminal classes and trapping sets, and localization
//! of secondary classes in fibers over periodic orbits of A.

mod boxmap;
mod boxset;
mod localize;
mod morse;

pub use boxmap::{build_box_map, cube_stencil, BoxMap, BoxMapOptions, EnclosureMode};
pub use boxset::BoxSet;
pub use localize::{
    localization_tolerance, localize_classes, localize_with_retry, ClassStatus, Localization, LocalizationEntry,
};
pub use morse::{
    is_successor_closed, morse_graph, quasi_attractors, spot_check_cycles, trapping_neighborhood, MorseClass,
    MorseGraph,
};

use crate::semiconj::SemiconjError;
use crate::torus_core::TorusPoint;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("grid needs n >= 2, got {0}")]
    GridTooSmall(u64),
    #[error("grid n = {0} exceeds the 32-bit box index range")]
    GridTooLarge(u64),
    #[error("projected memory {needed} bytes exceeds the budget {budget}")]
    OutOfMemory { needed: u64, budget: u64 },
    #[error("set is not a terminal class: its forward closure reaches {0} boxes of other classes")]
    NotTerminal(usize),
    #[error("box-set data is malformed: {0}")]
    BadFormat(String),
    #[error("box sets live on different grids ({0} vs {1})")]
    GridMismatch(u64, u64),
    #[error(transparent)]
    Semiconj(#[from] SemiconjError),
}

/// Uniform grid of n³ boxes over [0,1)³; box (i, j, k) has index
/// i + n·(j + n·k).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxGrid {
    n: u32,
}

impl BoxGrid {
    pub fn new(n: u64) -> Result<Self, BoxError> {
        if n < 2 {
            return Err(BoxError::GridTooSmall(n));
        }
        if n > 1625 {
            return Err(BoxError::GridTooLarge(n));
        }
        Ok(BoxGrid { n: n as u32 })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        (self.n as usize).pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pitch(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn index(&self, i: u32, j: u32, k: u32) -> u32 {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn coords(&self, idx: u32) -> [u32; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    #[inline]
    pub fn box_of(&self, x: &TorusPoint) -> u32 {
        let n = self.n;
        let c = x.coords();
        let f = |t: f64| ((t * n as f64).floor() as i64).clamp(0, n as i64 - 1) as u32;
        self.index(f(c[0]), f(c[1]), f(c[2]))
    }

    pub fn center(&self, idx: u32) -> TorusPoint {
        let [i, j, k] = self.coords(idx);
        let h = self.pitch();
        TorusPoint::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h)
    }

    /// Point of the box at fractional offset t ∈ [0,1]³.
    pub fn point_in(&self, idx: u32, t: [f64; 3]) -> TorusPoint {
        let [i, j, k] = self.coords(idx);
        let h = self.pitch();
        TorusPoint::new((i as f64 + t[0]) * h, (j as f64 + t[1]) * h, (k as f64 + t[2]) * h)
    }
}
