//! Choice of the three fixed points p, q, r and the scale δ.

use super::DaError;
use crate::torus_core::{periodic_points, AnosovMatrix, PeriodicPoint, SplittingFrame, TorusPoint, Vec3};

pub const MIN_SAFETY: f64 = 212.0;

/// Sites p (source), q (saddle), r (untouched) and the adapted scale δ.
#[derive(Clone, Debug)]
pub struct SiteSelection {
    pub p: TorusPoint,
    pub q: TorusPoint,
    pub r: TorusPoint,
    pub exact: [PeriodicPoint; 3],
    pub delta: f64,
    pub d_min: f64,
    pub safety: f64,
}

impl SiteSelection {
    /// Plaque radius 2δ.
    pub fn plaque_radius(&self) -> f64 {
        2.0 * self.delta
    }
}

/// Shortest nonzero lattice vector in the adapted metric.
pub fn lattice_systole(frame: &SplittingFrame) -> f64 {
    let mut best = f64::INFINITY;
    for i in -3i32..=3 {
        for j in -3i32..=3 {
            for k in -3i32..=3 {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                best = best.min(frame.adapted_norm(&Vec3::new(i as f64, j as f64, k as f64)));
            }
        }
    }
    best
}

/// Three fixed points of A maximizing the minimal pairwise adapted distance,
/// with δ = d_min / safety.
pub fn select_sites(a: &AnosovMatrix, frame: &SplittingFrame, safety: f64) -> Result<SiteSelection, DaError> {
    if !(safety >= MIN_SAFETY) {
        return Err(DaError::InvalidParams(format!("safety {safety} below {MIN_SAFETY}")));
    }
    let fixed = periodic_points(a, 1)?;
    if fixed.len() < 3 {
        return Err(DaError::TooFewFixedPoints(fixed.len()));
    }
    let pts: Vec<TorusPoint> = fixed.iter().map(|p| p.point()).collect();
    let n = pts.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = frame.adapted_distance(&pts[i], &pts[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut best = (f64::NEG_INFINITY, 0, 1, 2);
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let m = dist[i][j].min(dist[i][k]).min(dist[j][k]);
                if m > best.0 + 1e-12 {
                    best = (m, i, j, k);
                }
            }
        }
    }
    let (d_min, i, j, k) = best;
    let delta = d_min / safety;
    if 2.0 * delta >= 0.25 {
        return Err(DaError::PlaqueTooLarge(2.0 * delta));
    }
    let sel = SiteSelection {
        p: pts[i],
        q: pts[j],
        r: pts[k],
        exact: [fixed[i].clone(), fixed[j].clone(), fixed[k].clone()],
        delta,
        d_min,
        safety,
    };
    check_separation(&sel, frame)?;
    Ok(sel)
}

/// Balls of radius 6δ about the sites, and distinct lattice lifts of each,
/// are at least 200δ apart. With safety exactly 212 the site balls sit at
/// exactly 200δ, so the comparison allows rounding.
pub fn check_separation(sel: &SiteSelection, frame: &SplittingFrame) -> Result<(), DaError> {
    let d = sel.delta;
    let tol = 1e-9 * d;
    let gap = sel.d_min - 12.0 * d;
    if gap < 200.0 * d - tol {
        return Err(DaError::SitesTooClose(gap / d));
    }
    let lift_gap = lattice_systole(frame) - 12.0 * d;
    if lift_gap < 200.0 * d - tol {
        return Err(DaError::SitesTooClose(lift_gap / d));
    }
    Ok(())
}
