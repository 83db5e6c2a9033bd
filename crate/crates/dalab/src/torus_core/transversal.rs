//! The transversal length L: every unstable segment of length L meets every
//! stable disc of radius ρ.
//!
//! For the linear foliation the flow along e_u starting on the disc D(ρ)
//! returns to D(ρ) + m after unstable time u(m) whenever the stable offset
//! s(m) of the lattice point m lies within ρ of the start. L is the supremum
//! over the disc of the first return time, bounded from above on a grid whose
//! cells cover the disc.

use super::{SplittingFrame, TorusError, Vec3};
use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq)]
pub struct TransversalLength {
    pub radius: f64,
    /// Covering bound for straight segments along e_u.
    pub linear: f64,
    /// Bound valid for every curve tangent to the κ-cone, when the cone
    /// drift over the linear bound stays below half the radius.
    pub cone_certified: Option<f64>,
    pub kappa: f64,
}

const MAX_RETURN: f64 = 1.0e7;

struct Candidates {
    pts: Vec<(f64, f64, f64)>,
}

fn collect(frame: &SplittingFrame, reach: f64, horizon: f64) -> Candidates {
    let eu = frame.e_u();
    let mut seen: HashSet<[i64; 3]> = HashSet::new();
    let mut pts = Vec::new();
    let steps = (horizon / 0.5).ceil() as i64 + 1;
    for k in 0..=steps {
        let p = eu * (0.5 * k as f64);
        let base = [p[0].floor() as i64, p[1].floor() as i64, p[2].floor() as i64];
        for dx in 0..2 {
            for dy in 0..2 {
                for dz in 0..2 {
                    let m = [base[0] + dx, base[1] + dy, base[2] + dz];
                    if seen.contains(&m) {
                        continue;
                    }
                    let c = frame.to_adapted(&Vec3::new(m[0] as f64, m[1] as f64, m[2] as f64));
                    if c[0] > 0.0 && c[0] <= horizon && (c[1] * c[1] + c[2] * c[2]).sqrt() <= reach {
                        seen.insert(m);
                        pts.push((c[0], c[1], c[2]));
                    }
                }
            }
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Candidates { pts }
}

fn covering_bound(c: &Candidates, radius: f64, pitch: f64) -> Option<f64> {
    let half_diag = pitch / std::f64::consts::SQRT_2;
    let accept = radius - half_diag;
    let reach = radius + half_diag;
    let k = (reach / pitch).ceil() as i64;
    let mut worst: f64 = 0.0;
    for i in -k..=k {
        for j in -k..=k {
            let (gx, gy) = (i as f64 * pitch, j as f64 * pitch);
            if (gx * gx + gy * gy).sqrt() > reach {
                continue;
            }
            // candidates are sorted by return time: the first hit is the minimum
            let hit = c.pts.iter().find(|(_, sx, sy)| ((sx - gx).powi(2) + (sy - gy).powi(2)).sqrt() <= accept);
            match hit {
                Some((u, _, _)) => worst = worst.max(*u),
                None => return None,
            }
        }
    }
    Some(worst)
}

/// Certified transversal length for stable discs of the given adapted radius.
pub fn transversal_length(frame: &SplittingFrame, radius: f64, kappa: f64) -> Result<TransversalLength, TorusError> {
    let linear = linear_bound(frame, radius)?;
    let half = linear_bound(frame, 0.5 * radius)?;
    let cone_certified = if kappa * half <= 0.5 * radius { Some(half * (1.0 + kappa * kappa).sqrt()) } else { None };
    Ok(TransversalLength { radius, linear, cone_certified, kappa })
}

fn linear_bound(frame: &SplittingFrame, radius: f64) -> Result<f64, TorusError> {
    let pitch = radius / 16.0;
    let mut horizon = 64.0;
    loop {
        let cands = collect(frame, 2.0 * radius + pitch, horizon);
        if let Some(l) = covering_bound(&cands, radius, pitch) {
            return Ok(l);
        }
        if horizon >= MAX_RETURN {
            return Err(TorusError::CoveringFailed(horizon));
        }
        horizon *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_core::hyperbolic_splitting;

    #[test]
    fn larger_discs_are_hit_sooner() {
        let (_, f) = hyperbolic_splitting(&[[1, 1, 0], [0, 0, 1], [1, 0, 0]], 1.0 / 3.0).unwrap();
        let a = linear_bound(&f, 0.05).unwrap();
        let b = linear_bound(&f, 0.1).unwrap();
        assert!(b <= a);
        assert!(a > 0.0);
    }

    /// Oracle: march along unstable segments from random starts and check
    /// that a point within the radius of the disc is met before time L.
    #[test]
    fn segments_of_length_l_meet_the_disc() {
        use rand::{Rng, SeedableRng};
        let (_, f) = hyperbolic_splitting(&[[1, 1, 0], [0, 0, 1], [1, 0, 0]], 1.0 / 3.0).unwrap();
        let rho = 0.08;
        let l = linear_bound(&f, rho).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let binv = f.basis_inv();
        for _ in 0..50 {
            let x0 = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            // closest approach of the line x0 + t e_u to the lattice, in stable coordinates
            let c0 = binv * x0;
            let eu = f.e_u();
            let mut met = false;
            let steps = (l / 0.5).ceil() as i64 + 2;
            'outer: for k in 0..=steps {
                let p = x0 + eu * (0.5 * k as f64);
                let base = [p[0].floor(), p[1].floor(), p[2].floor()];
                for dx in 0..2 {
                    for dy in 0..2 {
                        for dz in 0..2 {
                            let m = Vec3::new(base[0] + dx as f64, base[1] + dy as f64, base[2] + dz as f64);
                            let c = binv * m - c0;
                            if c[0] >= 0.0 && c[0] <= l && (c[1] * c[1] + c[2] * c[2]).sqrt() <= rho {
                                met = true;
                                break 'outer;
                            }
                        }
                    }
                }
            }
            assert!(met, "segment from {x0:?} of length {l} misses the disc");
        }
    }
}
