//! Backward iteration of arcs in a center-stable leaf.

use super::{SemiconjError, SemiconjugacySolver};
use crate::torus_core::{torus_delta, TorusPoint};
use nalgebra::Vector2;
use std::fmt::Write as _;

const INV_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct GrowthResult {
    /// First n with leaf diameter above 100δ; None when not reached by n_max.
    pub n0: Option<usize>,
    pub n_max: usize,
    /// Leaf diameter of the n-th backward image, n = 0, 1, ...
    pub diameters: Vec<f64>,
    /// |h(a) − h(b)| for the arc endpoints.
    pub endpoint_gap: f64,
    /// Diameter of h over the initial vertices.
    pub h_image_diameter: f64,
    /// Vertex count of the last image.
    pub vertices: usize,
}

impl GrowthResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,diameter\n");
        for (n, d) in self.diameters.iter().enumerate() {
            let _ = writeln!(s, "{n},{d:e}");
        }
        s
    }
}

/// Steps for a stable segment of length d′ to exceed 100δ under A⁻¹.
pub fn linear_prediction(d_prime: f64, delta: f64, lambda_s: f64) -> usize {
    let r = (100.0 * delta / d_prime).ln() / (1.0 / lambda_s).ln();
    if r <= 0.0 {
        0
    } else {
        r.ceil() as usize
    }
}

/// Diameter of planar points via the convex hull.
fn planar_diameter(pts: &[Vector2<f64>]) -> f64 {
    let mut p: Vec<Vector2<f64>> = pts.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return if p.len() == 2 { (p[0] - p[1]).norm() } else { 0.0 };
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for q in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(*q);
        }
        hull.pop();
    }
    let mut d: f64 = 0.0;
    for a in 0..hull.len() {
        for b in (a + 1)..hull.len() {
            d = d.max((hull[a] - hull[b]).norm());
        }
    }
    d
}

impl SemiconjugacySolver<'_> {
    /// Iterates a leaf arc backward, keeping consecutive vertices within δ/10
    /// by inserting preimages of interpolated points of the original arc.
    pub fn backward_plaque_growth(&self, arc: &[TorusPoint], n_max: usize) -> Result<GrowthResult, SemiconjError> {
        if arc.len() < 2 {
            return Err(SemiconjError::DegenerateArc);
        }
        let map = self.map();
        let frame = map.frame();
        let delta = map.delta();
        let spacing = delta / 10.0;
        let target = 100.0 * delta;

        let himg: Vec<TorusPoint> = arc.iter().map(|x| self.h(x)).collect::<Result<_, _>>()?;
        let endpoint_gap = frame.adapted_norm(&torus_delta(&himg[0], &himg[himg.len() - 1]));
        if endpoint_gap <= 4.0 * self.tol() {
            return Err(SemiconjError::HImagesEqual(endpoint_gap));
        }
        let mut h_image_diameter: f64 = 0.0;
        for a in 0..himg.len() {
            for b in (a + 1)..himg.len() {
                h_image_diameter = h_image_diameter.max(frame.adapted_norm(&torus_delta(&himg[a], &himg[b])));
            }
        }

        // point of the original arc at parameter s ∈ [0, len − 1]
        let base = |s: f64| -> TorusPoint {
            let i = (s.floor() as usize).min(arc.len() - 2);
            let frac = s - i as f64;
            arc[i].translate(&(torus_delta(&arc[i], &arc[i + 1]) * frac))
        };
        let pull = |s: f64, n: usize| -> Result<TorusPoint, SemiconjError> {
            let mut x = base(s);
            for _ in 0..n {
                x = map.eval_f_inv(&x, INV_TOL)?;
            }
            Ok(x)
        };
        let refine = |verts: &mut Vec<(f64, TorusPoint)>, n: usize| -> Result<(), SemiconjError> {
            let mut i = 0;
            while i + 1 < verts.len() {
                let gap = frame.adapted_norm(&torus_delta(&verts[i].1, &verts[i + 1].1));
                if gap > spacing && verts[i + 1].0 - verts[i].0 > 1e-12 {
                    let s = 0.5 * (verts[i].0 + verts[i + 1].0);
                    verts.insert(i + 1, (s, pull(s, n)?));
                } else {
                    i += 1;
                }
            }
            Ok(())
        };
        let diameter = |verts: &[(f64, TorusPoint)]| -> f64 {
            let mut pts = Vec::with_capacity(verts.len());
            let mut acc = Vector2::zeros();
            pts.push(acc);
            for w in verts.windows(2) {
                let c = frame.to_adapted(&torus_delta(&w[0].1, &w[1].1));
                acc += Vector2::new(c[1], c[2]);
                pts.push(acc);
            }
            planar_diameter(&pts)
        };

        let mut verts: Vec<(f64, TorusPoint)> = arc.iter().enumerate().map(|(i, x)| (i as f64, *x)).collect();
        refine(&mut verts, 0)?;
        let mut diameters = vec![diameter(&verts)];
        let mut n0 = None;
        let mut n = 0;
        loop {
            if diameters[n] > target {
                n0 = Some(n);
                break;
            }
            if n == n_max {
                break;
            }
            for v in verts.iter_mut() {
                v.1 = map.eval_f_inv(&v.1, INV_TOL)?;
            }
            n += 1;
            refine(&mut verts, n)?;
            diameters.push(diameter(&verts));
        }
        Ok(GrowthResult { n0, n_max, diameters, endpoint_gap, h_image_diameter, vertices: verts.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_diameter_matches_brute_force() {
        let pts: Vec<Vector2<f64>> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                Vector2::new(t.cos() * (1.0 + 0.3 * (3.0 * t).sin()), t.sin() * 0.7)
            })
            .collect();
        let mut brute: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                brute = brute.max((a - b).norm());
            }
        }
        assert!((planar_diameter(&pts) - brute).abs() < 1e-14);
        assert_eq!(planar_diameter(&pts[..1]), 0.0);
    }

    #[test]
    fn prediction_counts_expansion_steps() {
        // 0.3^3 = 0.027 so a segment of 0.01 needs 3 steps to pass 0.27
        assert_eq!(linear_prediction(0.01, 0.0027, 0.3), 3);
        assert_eq!(linear_prediction(1.0, 0.001, 0.3), 0);
    }
}
