//! Local stable manifold of the saddle q inside its stable leaf.

use super::{DAMap, DaError};
use crate::torus_core::{torus_delta, TorusPoint, Vec3};
use nalgebra::Matrix2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ManifoldStatus {
    Reached,
    /// Growth stopped before the target; carries the achieved length.
    MaxLength(f64),
}

#[derive(Clone, Debug)]
pub struct StableManifold {
    /// Polyline through q, ordered along the curve.
    pub vertices: Vec<TorusPoint>,
    /// Adapted arclength.
    pub length: f64,
    pub status: ManifoldStatus,
    pub iterations: usize,
    /// Every vertex approaches q monotonically along its forward orbit.
    pub monotone: bool,
}

#[derive(Clone, Copy)]
struct Vertex {
    s: f64,
    x: TorusPoint,
    monotone: bool,
}

const INV_TOL: f64 = 1e-13;

/// Grows W^s_loc(q) by backward iteration of a seed segment inside the
/// linear core of the bump at q, trimming to B(q, 2δ) and refining in the
/// seed parameter so consecutive vertices stay within δ/50.
///
/// A vertex at depth k is f^{-k}(seed(s)); its forward orbit retraces the
/// backward chain and then contracts linearly by s₁ inside the core, so
/// monotone approach is checked along that chain.
pub fn local_stable_manifold_q(map: &DAMap, target_len: f64, steps: usize) -> Result<StableManifold, DaError> {
    let q = map.sites().q;
    let frame = map.frame();
    let df = map.eval_df_adapted(&q);
    let block = Matrix2::new(df[(1, 1)], df[(1, 2)], df[(2, 1)], df[(2, 2)]);
    let ev = block.complex_eigenvalues();
    let (m0, m1) = (ev[0].norm(), ev[1].norm());
    let (small, large) = if m0 <= m1 { (ev[0], ev[1]) } else { (ev[1], ev[0]) };
    if !(small.norm() < 1.0 && large.norm() > 1.0) || small.im.abs() > 1e-12 {
        return Err(DaError::SpectrumMismatch(format!(
            "stable moduli at q are ({:.6}, {:.6}); need a real contracting and an expanding direction",
            small.norm(),
            large.norm()
        )));
    }
    if target_len <= 0.0 {
        return Ok(StableManifold {
            vertices: vec![q],
            length: 0.0,
            status: ManifoldStatus::Reached,
            iterations: 0,
            monotone: true,
        });
    }

    // eigenvector of the contracting eigenvalue in the stable plane
    let lam = small.re;
    let m = block - Matrix2::identity() * lam;
    let dir = if m[(0, 1)].abs() + (m[(0, 0)]).abs() >= m[(1, 0)].abs() + m[(1, 1)].abs() {
        nalgebra::Vector2::new(-m[(0, 1)], m[(0, 0)])
    } else {
        nalgebra::Vector2::new(-m[(1, 1)], m[(1, 0)])
    };
    let dir = dir / dir.norm();
    let delta = map.delta();
    let half = 0.5 * map.params().bump.core() * delta;
    let seed = |s: f64| -> TorusPoint {
        let c = Vec3::new(0.0, s * half * dir[0], s * half * dir[1]);
        q.translate(&frame.from_adapted(&c))
    };
    let offset = |x: &TorusPoint| -> f64 { frame.adapted_norm(&torus_delta(&q, x)) };
    let trap = 2.0 * delta;
    let spacing = delta / 50.0;

    // backward chain from the seed, checking that distances grow
    let chain = |s: f64, depth: usize| -> Result<Vertex, DaError> {
        let mut x = seed(s);
        let mut d = offset(&x);
        let mut mono = true;
        for _ in 0..depth {
            x = map.eval_f_inv(&x, INV_TOL)?;
            let nd = offset(&x);
            if s != 0.0 && nd <= d {
                mono = false;
            }
            d = nd;
        }
        Ok(Vertex { s, x, monotone: mono })
    };

    let mut verts: Vec<Vertex> =
        (0..=20).map(|i| -1.0 + i as f64 / 10.0).map(|s| chain(s, 0)).collect::<Result<_, _>>()?;
    let mut depth = 0;
    let mut length = polyline_length(map, &verts);
    let mut both_trimmed = false;
    while depth < steps && length < target_len && !both_trimmed {
        depth += 1;
        for v in verts.iter_mut() {
            let before = offset(&v.x);
            v.x = map.eval_f_inv(&v.x, INV_TOL)?;
            if v.s != 0.0 && offset(&v.x) <= before {
                v.monotone = false;
            }
        }
        // refine in parameter
        let mut i = 0;
        while i + 1 < verts.len() {
            let gap = frame.adapted_norm(&torus_delta(&verts[i].x, &verts[i + 1].x));
            let both_out = offset(&verts[i].x) > trap && offset(&verts[i + 1].x) > trap;
            if gap > spacing && !both_out && verts[i + 1].s - verts[i].s > 1e-15 {
                let mid = chain(0.5 * (verts[i].s + verts[i + 1].s), depth)?;
                verts.insert(i + 1, mid);
            } else {
                i += 1;
            }
        }
        // trim to the component of B(q, 2δ) containing q
        let center = verts.iter().position(|v| v.s == 0.0).expect("q is a vertex");
        let mut lo = center;
        while lo > 0 && offset(&verts[lo - 1].x) <= trap {
            lo -= 1;
        }
        let mut hi = center;
        while hi + 1 < verts.len() && offset(&verts[hi + 1].x) <= trap {
            hi += 1;
        }
        both_trimmed = lo > 0 && hi + 1 < verts.len();
        verts.truncate(hi + 1);
        verts.drain(..lo);
        length = polyline_length(map, &verts);
    }
    let monotone = verts.iter().all(|v| v.monotone);
    let status = if length >= target_len { ManifoldStatus::Reached } else { ManifoldStatus::MaxLength(length) };
    Ok(StableManifold {
        vertices: verts.into_iter().map(|v| v.x).collect(),
        length,
        status,
        iterations: depth,
        monotone,
    })
}

fn polyline_length(map: &DAMap, verts: &[Vertex]) -> f64 {
    verts.windows(2).map(|w| map.frame().adapted_norm(&torus_delta(&w[0].x, &w[1].x))).sum()
}
