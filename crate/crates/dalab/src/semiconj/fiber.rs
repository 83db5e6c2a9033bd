//! Fibers h⁻¹(y) by grid search in the flat stable plaque of y.

use super::{SemiconjError, SemiconjugacySolver};
use crate::torus_core::{torus_delta, TorusPoint, Vec3};
use rayon::prelude::*;
use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct FiberSet {
    pub base: TorusPoint,
    pub points: Vec<TorusPoint>,
    /// Grid coordinates of each point in the (s₁, s₂) frame about `base`.
    pub nodes: Vec<(i32, i32)>,
    /// |h(x) − y| for each point.
    pub residuals: Vec<f64>,
    pub resolution: f64,
    pub threshold: f64,
    pub diameter: f64,
    pub components: usize,
    /// Members touch the edge of a search disc clipped to the plaque.
    pub plaque_overflow: bool,
    /// ε_emp when the fiber was computed.
    pub eps_emp: f64,
}

impl FiberSet {
    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    pub fn diameter_ok(&self) -> bool {
        self.diameter <= self.eps_emp
    }

    /// All fiber invariants hold.
    pub fn is_valid(&self) -> bool {
        self.is_connected() && self.diameter_ok() && !self.plaque_overflow
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z,residual\n");
        for (p, r) in self.points.iter().zip(&self.residuals) {
            let [x, y, z] = p.coords();
            let _ = writeln!(s, "{x:e},{y:e},{z:e},{r:e}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolonomyCheck {
    pub t: f64,
    pub spread: f64,
    pub allowed: f64,
    pub pass: bool,
}

fn count_components(nodes: &[(i32, i32)]) -> usize {
    let index: HashMap<(i32, i32), usize> = nodes.iter().enumerate().map(|(k, n)| (*n, k)).collect();
    let mut seen = vec![false; nodes.len()];
    let mut comps = 0;
    for start in 0..nodes.len() {
        if seen[start] {
            continue;
        }
        comps += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let (i, j) = nodes[k];
            for di in -1..=1 {
                for dj in -1..=1 {
                    if let Some(&m) = index.get(&(i + di, j + dj)) {
                        if !seen[m] {
                            seen[m] = true;
                            queue.push_back(m);
                        }
                    }
                }
            }
        }
    }
    comps
}

impl SemiconjugacySolver<'_> {
    /// Grid nodes of the stable plaque of y with |h(x) − y| ≤ 2·tol +
    /// resolution. Only nodes within ε_bound + threshold of y can qualify.
    pub fn fiber(&self, y: &TorusPoint, resolution: f64) -> Result<FiberSet, SemiconjError> {
        let map = self.map();
        let delta = map.delta();
        let eps = self.eps_emp();
        if eps >= 0.5 * delta {
            return Err(SemiconjError::EpsilonTooLarge { eps, limit: 0.5 * delta });
        }
        if eps > 0.0 && resolution > eps / 10.0 {
            return Err(SemiconjError::ResolutionTooCoarse { resolution, limit: eps / 10.0 });
        }
        let threshold = 2.0 * self.tol() + resolution;
        if map.is_linear() {
            // h is the identity
            return Ok(FiberSet {
                base: *y,
                points: vec![*y],
                nodes: vec![(0, 0)],
                residuals: vec![0.0],
                resolution,
                threshold,
                diameter: 0.0,
                components: 1,
                plaque_overflow: false,
                eps_emp: eps,
            });
        }
        let plaque = 2.0 * delta;
        let mut radius = self.eps_bound() + threshold;
        let clipped = radius > plaque;
        if clipped {
            radius = plaque;
        }
        let k = (radius / resolution).floor() as i32;
        let r2 = (radius / resolution).powi(2);
        let mut grid = Vec::new();
        for i in -k..=k {
            for j in -k..=k {
                if ((i * i + j * j) as f64) <= r2 {
                    grid.push((i, j));
                }
            }
        }
        let frame = map.frame();
        let evals: Vec<Result<(TorusPoint, f64), SemiconjError>> = grid
            .par_iter()
            .map(|&(i, j)| {
                let c = Vec3::new(0.0, i as f64 * resolution, j as f64 * resolution);
                let x = y.translate(&frame.from_adapted(&c));
                let u = self.displacement_adapted(&x)?;
                Ok((x, (c + u).norm()))
            })
            .collect();
        let mut points = Vec::new();
        let mut nodes = Vec::new();
        let mut residuals = Vec::new();
        let mut closest = f64::INFINITY;
        for (node, e) in grid.iter().zip(evals) {
            let (x, r) = e?;
            closest = closest.min(r);
            if r <= threshold {
                points.push(x);
                nodes.push(*node);
                residuals.push(r);
            }
        }
        if points.is_empty() {
            return Err(SemiconjError::EmptyFiber(closest));
        }
        let mut diameter: f64 = 0.0;
        for a in 0..nodes.len() {
            for b in (a + 1)..nodes.len() {
                let di = (nodes[a].0 - nodes[b].0) as f64;
                let dj = (nodes[a].1 - nodes[b].1) as f64;
                diameter = diameter.max(resolution * (di * di + dj * dj).sqrt());
            }
        }
        let edge = (radius / resolution - 1.5).max(0.0).powi(2);
        let plaque_overflow = clipped && nodes.iter().any(|&(i, j)| ((i * i + j * j) as f64) > edge);
        Ok(FiberSet {
            base: *y,
            components: count_components(&nodes),
            points,
            nodes,
            residuals,
            resolution,
            threshold,
            diameter,
            plaque_overflow,
            eps_emp: self.eps_emp(),
        })
    }

    /// Slides each fiber point by t along E^u and measures the spread of the
    /// h-images. The flat unstable direction makes the slide land in the
    /// target plaque exactly.
    pub fn holonomy_collapse_check(&self, fib: &FiberSet, t: f64) -> Result<HolonomyCheck, SemiconjError> {
        if t.abs() > self.gamma_hol() {
            return Err(SemiconjError::ReachExceeded { t, reach: self.gamma_hol() });
        }
        let frame = self.map().frame();
        let shift = frame.from_adapted(&Vec3::new(t, 0.0, 0.0));
        let images: Vec<TorusPoint> =
            fib.points.iter().map(|x| self.h(&x.translate(&shift))).collect::<Result<_, _>>()?;
        let mut spread: f64 = 0.0;
        for a in 0..images.len() {
            for b in (a + 1)..images.len() {
                spread = spread.max(frame.adapted_norm(&torus_delta(&images[a], &images[b])));
            }
        }
        let allowed = 4.0 * self.tol() + 3.0 * fib.resolution;
        Ok(HolonomyCheck { t, spread, allowed, pass: spread <= allowed })
    }
}
