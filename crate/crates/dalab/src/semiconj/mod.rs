//! The semiconjugacy h = id + u with h∘f = A∘h, its fibers, unstable
//! holonomy of fibers, and backward growth of arcs in center-stable leaves.
//!
//! The perturbation p = f − A is valued in E^s, so u solves the split
//! shadowing equations
//!
//! ```text
//! u_u(x) =  Σ_{n≥0} A_u^{-(n+1)} p_u(f^n x)
//! u_s(x) = −Σ_{n≥1} A_s^{n-1} p_s(f^{-n} x)
//! ```
//!
//! truncated where the geometric tail drops below `tol`.

mod fiber;
mod growth;

pub use fiber::{FiberSet, HolonomyCheck};
pub use growth::{linear_prediction, GrowthResult};

use crate::da_family::{DAMap, DaError};
use crate::torus_core::{torus_delta, torus_distance, TorusPoint, Vec3};
use nalgebra::{Matrix2, Vector2};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiconjError {
    #[error("{series} series needs {needed} terms, above the cap {cap}")]
    BudgetExceeded { series: &'static str, needed: usize, cap: usize },
    #[error("|h − id| reached {eps:e}, not below {limit:e}")]
    EpsilonTooLarge { eps: f64, limit: f64 },
    #[error("resolution {resolution:e} exceeds ε_emp/10 = {limit:e}")]
    ResolutionTooCoarse { resolution: f64, limit: f64 },
    #[error("no grid node within the threshold (closest residual {0:e})")]
    EmptyFiber(f64),
    #[error("holonomy offset {t:e} exceeds the reach {reach:e}")]
    ReachExceeded { t: f64, reach: f64 },
    #[error("arc endpoints have h-images {0:e} apart, not above 4·tol")]
    HImagesEqual(f64),
    #[error("arc needs at least two vertices")]
    DegenerateArc,
    #[error(transparent)]
    Da(#[from] DaError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiconjConfig {
    /// Truncation tolerance in the adapted metric.
    pub tol: f64,
    /// Maximum number of series terms.
    pub cap: usize,
    /// Holonomy reach; δ when unset.
    pub gamma_hol: Option<f64>,
}

impl Default for SemiconjConfig {
    fn default() -> Self {
        SemiconjConfig { tol: 1e-8, cap: 200, gamma_hol: None }
    }
}

const INV_TOL: f64 = 1e-13;

/// Truncated series evaluator for u = h − id.
#[derive(Debug)]
pub struct SemiconjugacySolver<'a> {
    map: &'a DAMap,
    tol: f64,
    n_s: usize,
    n_u: usize,
    eps_bound: f64,
    gamma_hol: f64,
    /// A_s^n for n = 0..N_s, adapted stable block.
    stable_powers: Vec<Matrix2<f64>>,
    eps_emp: AtomicU64,
}

fn depth(rate: f64, nu: f64, tol: f64) -> usize {
    if nu == 0.0 {
        return 0;
    }
    let head = nu / (1.0 - rate);
    let mut n = 0;
    let mut tail = head;
    while tail > tol {
        tail *= rate;
        n += 1;
    }
    n
}

impl<'a> SemiconjugacySolver<'a> {
    /// Sets truncation depths from the certified ν and seeds ε_emp by
    /// evaluating u on images of a polar grid in both bumps, where the first
    /// series term is largest.
    pub fn new(map: &'a DAMap, cfg: &SemiconjConfig) -> Result<Self, SemiconjError> {
        let frame = map.frame();
        let nu = map.nu_bound();
        let ls = frame.lambda_s();
        let lui = frame.lambda_u_inv();
        let n_s = depth(ls, nu, cfg.tol);
        let n_u = depth(lui, nu, cfg.tol);
        if n_s > cfg.cap {
            return Err(SemiconjError::BudgetExceeded { series: "stable", needed: n_s, cap: cfg.cap });
        }
        if n_u > cfg.cap {
            return Err(SemiconjError::BudgetExceeded { series: "unstable", needed: n_u, cap: cfg.cap });
        }
        let a_s = *frame.a_stable();
        let mut stable_powers = vec![Matrix2::identity()];
        for i in 0..n_s {
            stable_powers.push(a_s * stable_powers[i]);
        }
        let solver = SemiconjugacySolver {
            map,
            tol: cfg.tol,
            n_s,
            n_u,
            eps_bound: nu / (1.0 - ls),
            gamma_hol: cfg.gamma_hol.unwrap_or(map.delta()),
            stable_powers,
            eps_emp: AtomicU64::new(0f64.to_bits()),
        };
        solver.calibrate()?;
        Ok(solver)
    }

    fn calibrate(&self) -> Result<(), SemiconjError> {
        if self.map.is_linear() {
            return Ok(());
        }
        let frame = self.map.frame();
        let d = self.map.delta();
        for center in self.map.centers() {
            for i in 0..24 {
                let w = d * (0.02f64.ln() * (1.0 - i as f64 / 23.0)).exp();
                for j in 0..24 {
                    let th = std::f64::consts::TAU * j as f64 / 24.0;
                    let z = center.translate(&frame.from_adapted(&Vec3::new(0.0, w * th.cos(), w * th.sin())));
                    self.displacement(&self.map.eval_f(&z))?;
                }
            }
        }
        Ok(())
    }

    pub fn map(&self) -> &'a DAMap {
        self.map
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    /// Certified sup |u| = ν/(1 − λ_s); the unstable series vanishes since p
    /// has no unstable component.
    pub fn eps_bound(&self) -> f64 {
        self.eps_bound
    }

    /// Largest |u| seen so far.
    pub fn eps_emp(&self) -> f64 {
        f64::from_bits(self.eps_emp.load(Ordering::Relaxed))
    }

    pub fn gamma_hol(&self) -> f64 {
        self.gamma_hol
    }

    /// u(x) in adapted coordinates.
    pub fn displacement_adapted(&self, x: &TorusPoint) -> Result<Vec3, SemiconjError> {
        let map = self.map;
        let a_ad = map.a_adapted();
        let mut us = Vector2::zeros();
        let mut z = *x;
        for n in 1..=self.n_s {
            z = map.eval_f_inv(&z, INV_TOL)?;
            let phi = map.phi_adapted(&z);
            if phi[1] != 0.0 || phi[2] != 0.0 {
                // A_s^{n-1} p_s = A_s^n φ_s
                us -= self.stable_powers[n] * Vector2::new(phi[1], phi[2]);
            }
        }
        let mut uu = 0.0;
        let mut z = *x;
        let mut scale = 1.0 / a_ad[(0, 0)];
        for _ in 0..self.n_u {
            let phi = map.phi_adapted(&z);
            if phi != Vec3::zeros() {
                uu += scale * (a_ad * phi)[0];
            }
            scale /= a_ad[(0, 0)];
            z = map.eval_f(&z);
        }
        let u = Vec3::new(uu, us[0], us[1]);
        let norm = u.norm();
        self.eps_emp.fetch_max(norm.to_bits(), Ordering::Relaxed);
        if norm >= map.delta() {
            return Err(SemiconjError::EpsilonTooLarge { eps: norm, limit: map.delta() });
        }
        Ok(u)
    }

    /// u(x) in Euclidean coordinates, h(x) = x + u(x).
    pub fn displacement(&self, x: &TorusPoint) -> Result<Vec3, SemiconjError> {
        Ok(self.map.frame().from_adapted(&self.displacement_adapted(x)?))
    }

    pub fn h(&self, x: &TorusPoint) -> Result<TorusPoint, SemiconjError> {
        Ok(x.translate(&self.displacement(x)?))
    }

    /// Torus distance between h(f(x)) and A(h(x)).
    pub fn conjugacy_defect(&self, x: &TorusPoint) -> Result<f64, SemiconjError> {
        let hx = self.h(x)?;
        let ahx = self.map.anosov().apply(&hx);
        let hfx = self.h(&self.map.eval_f(x))?;
        Ok(torus_distance(&hfx, &ahx))
    }

    /// Adapted distance |h(x) − y| for x near y.
    pub fn residual(&self, x: &TorusPoint, y: &TorusPoint) -> Result<f64, SemiconjError> {
        let c = self.map.frame().to_adapted(&torus_delta(y, x));
        Ok((c + self.displacement_adapted(x)?).norm())
    }

    /// ε_emp / δ.
    pub fn epsilon_ratio(&self) -> f64 {
        self.eps_emp() / self.map.delta()
    }
}

#[cfg(test)]
mod tests;
