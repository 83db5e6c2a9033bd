//! Box maps: set-valued outer approximations of f on a BoxGrid.
//!
//! In grid units a box is c + [0,1]³ with c integer, and its image under A
//! is A·c + A[0,1]³, an integer translate of one parallelepiped. The unit
//! cubes meeting that parallelepiped form a fixed stencil K, so the
//! certified successors of c are (A·c + K) mod n. Boxes meeting the support
//! of the perturbation use the stencil of the parallelepiped inflated by
//! n·sup|f − A|. Both enclosures are exact outer bounds, without storing
//! the adjacency.

use super::{BoxError, BoxGrid, BoxSet};
use crate::da_family::DAMap;
use crate::rng;
use crate::torus_core::IMat3;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnclosureMode {
    /// Rigorous outer enclosure from the stencils.
    CertifiedLipschitz,
    /// Boxes hit by sampled images, inflated by a pad; not rigorous.
    Sampled,
}

impl EnclosureMode {
    pub fn name(&self) -> &'static str {
        match self {
            EnclosureMode::CertifiedLipschitz => "certified-lipschitz",
            EnclosureMode::Sampled => "sampled",
        }
    }
}

#[derive(Clone, Debug)]
enum Adjacency {
    Stencil { a: IMat3, base: Vec<[i64; 3]>, padded: Vec<[i64; 3]>, near: BoxSet },
    Explicit { offsets: Vec<u64>, targets: Vec<u32> },
}

#[derive(Clone, Debug)]
pub struct BoxMap {
    grid: BoxGrid,
    mode: EnclosureMode,
    /// Euclidean inflation radius: sup|f − A| near the bumps in certified
    /// mode, the sampling pad in sampled mode.
    pad: f64,
    adj: Adjacency,
}

/// Rounding allowance in torus units.
const SLACK: f64 = 1e-9;

const BLOCK: usize = 4096;

/// Integer offsets m whose unit cube m + [0,1]³ comes within `r` of the
/// parallelepiped a·[0,1]³, by separating-axis tests over the 15 candidate
/// axes. Every cube at distance ≤ r is kept; a few farther cubes may be
/// kept as well, which only enlarges the enclosure.
pub fn cube_stencil(a: &Matrix3<f64>, r: f64) -> Vec<[i64; 3]> {
    let mut verts = Vec::with_capacity(8);
    for b in 0..8u32 {
        let v = Vector3::new((b & 1) as f64, (b >> 1 & 1) as f64, (b >> 2 & 1) as f64);
        verts.push(a * v);
    }
    let cols = [a.column(0).into_owned(), a.column(1).into_owned(), a.column(2).into_owned()];
    let e = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut axes: Vec<Vector3<f64>> = e.to_vec();
    axes.push(cols[1].cross(&cols[2]));
    axes.push(cols[2].cross(&cols[0]));
    axes.push(cols[0].cross(&cols[1]));
    for ei in &e {
        for c in &cols {
            axes.push(ei.cross(c));
        }
    }
    let axes: Vec<Vector3<f64>> = axes.into_iter().filter(|w| w.norm() > 1e-12).map(|w| w / w.norm()).collect();
    let proj: Vec<(f64, f64)> = axes
        .iter()
        .map(|w| {
            let d: Vec<f64> = verts.iter().map(|v| w.dot(v)).collect();
            (d.iter().cloned().fold(f64::INFINITY, f64::min), d.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let lo: Vec<i64> =
        (0..3).map(|i| (verts.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min) - r).floor() as i64 - 1).collect();
    let hi: Vec<i64> =
        (0..3).map(|i| (verts.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max) + r).ceil() as i64).collect();
    let mut out = Vec::new();
    for mz in lo[2]..=hi[2] {
        for my in lo[1]..=hi[1] {
            for mx in lo[0]..=hi[0] {
                let m = Vector3::new(mx as f64, my as f64, mz as f64);
                let separated = axes.iter().zip(&proj).any(|(w, &(pmin, pmax))| {
                    let c0 = w.dot(&m);
                    let ext = w.abs().sum();
                    let cmin = c0 + w.iter().filter(|&&t| t < 0.0).sum::<f64>();
                    let cmax = cmin + ext;
                    cmin - pmax > r || pmin - cmax > r
                });
                if !separated {
                    out.push([mx, my, mz]);
                }
            }
        }
    }
    out
}

/// Boxes whose closure comes within `radius` of `center` (Euclidean, on
/// the torus).
fn mark_ball(grid: &BoxGrid, set: &mut BoxSet, center: [f64; 3], radius: f64) {
    let n = grid.n() as i64;
    let nf = n as f64;
    let lo: Vec<i64> = center.iter().map(|&c| ((c - radius) * nf).floor() as i64 - 1).collect();
    let hi: Vec<i64> = center.iter().map(|&c| ((c + radius) * nf).floor() as i64 + 1).collect();
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let idx = [i, j, k];
                let mut d2 = 0.0;
                for a in 0..3 {
                    let x0 = idx[a] as f64 / nf;
                    let x1 = (idx[a] + 1) as f64 / nf;
                    let g = if center[a] < x0 {
                        x0 - center[a]
                    } else if center[a] > x1 {
                        center[a] - x1
                    } else {
                        0.0
                    };
                    d2 += g * g;
                }
                if d2.sqrt() <= radius {
                    let w = |t: i64| t.rem_euclid(n) as u32;
                    set.insert(grid.index(w(i), w(j), w(k)));
                }
            }
        }
    }
}

/// Options for `build_box_map`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxMapOptions {
    pub mode: EnclosureMode,
    /// Sampled mode: points per box (1 = center, 9 adds the corners, more
    /// adds random interior points).
    pub samples_per_box: usize,
    /// Sampled mode inflation radius.
    pub pad: f64,
    pub memory_budget: u64,
    pub seed: u64,
}

impl Default for BoxMapOptions {
    fn default() -> Self {
        BoxMapOptions {
            mode: EnclosureMode::CertifiedLipschitz,
            samples_per_box: 9,
            pad: 0.0,
            memory_budget: 8 << 30,
            seed: 0,
        }
    }
}

impl BoxMap {
    /// Box map with explicit successor lists; lists are sorted and
    /// deduplicated.
    pub fn from_adjacency(grid: BoxGrid, lists: &[Vec<u32>]) -> Self {
        assert_eq!(lists.len(), grid.len(), "one list per box");
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for l in lists {
            let mut l = l.clone();
            l.sort_unstable();
            l.dedup();
            targets.extend_from_slice(&l);
            offsets.push(targets.len() as u64);
        }
        BoxMap { grid, mode: EnclosureMode::Sampled, pad: 0.0, adj: Adjacency::Explicit { offsets, targets } }
    }

    pub fn grid(&self) -> BoxGrid {
        self.grid
    }

    pub fn mode(&self) -> EnclosureMode {
        self.mode
    }

    pub fn pad(&self) -> f64 {
        self.pad
    }

    pub fn is_rigorous(&self) -> bool {
        self.mode == EnclosureMode::CertifiedLipschitz
    }

    /// Pseudo-orbit size realized by box chains: pitch·√3 + pad.
    pub fn eps_chain(&self) -> f64 {
        self.grid.pitch() * 3f64.sqrt() + self.pad
    }

    /// Number of raw successor slots of b (may repeat boxes on small grids).
    #[inline]
    pub fn degree(&self, b: u32) -> usize {
        match &self.adj {
            Adjacency::Stencil { base, padded, near, .. } => {
                if near.contains(b) {
                    padded.len()
                } else {
                    base.len()
                }
            }
            Adjacency::Explicit { offsets, .. } => (offsets[b as usize + 1] - offsets[b as usize]) as usize,
        }
    }

    /// The j-th raw successor slot of b.
    #[inline]
    pub fn successor(&self, b: u32, j: usize) -> u32 {
        match &self.adj {
            Adjacency::Stencil { a, base, padded, near } => {
                let st = if near.contains(b) { padded } else { base };
                let n = self.grid.n() as i64;
                let c = self.grid.coords(b);
                let m = st[j];
                let w = |r: usize| {
                    let v = a[r][0] * c[0] as i64 + a[r][1] * c[1] as i64 + a[r][2] * c[2] as i64 + m[r];
                    v.rem_euclid(n) as u32
                };
                self.grid.index(w(0), w(1), w(2))
            }
            Adjacency::Explicit { offsets, targets } => targets[offsets[b as usize] as usize + j],
        }
    }

    /// Sorted, duplicate-free successors of b.
    pub fn successors(&self, b: u32) -> Vec<u32> {
        let mut v: Vec<u32> = (0..self.degree(b)).map(|j| self.successor(b, j)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Total raw successor slots.
    pub fn edge_slots(&self) -> u64 {
        match &self.adj {
            Adjacency::Stencil { base, padded, near, .. } => {
                let k = near.count() as u64;
                (self.grid.len() as u64 - k) * base.len() as u64 + k * padded.len() as u64
            }
            Adjacency::Explicit { targets, .. } => targets.len() as u64,
        }
    }

    /// Boxes using the inflated stencil (certified mode).
    pub fn near_bumps(&self) -> Option<&BoxSet> {
        match &self.adj {
            Adjacency::Stencil { near, .. } => Some(near),
            Adjacency::Explicit { .. } => None,
        }
    }
}

/// Bytes for the SCC pass over a grid of n³ boxes.
fn morse_bytes(n: u64) -> u64 {
    n.pow(3) * 24
}

pub fn build_box_map(map: &DAMap, n: u64, opts: &BoxMapOptions) -> Result<BoxMap, BoxError> {
    let grid = BoxGrid::new(n)?;
    match opts.mode {
        EnclosureMode::CertifiedLipschitz => {
            let needed = morse_bytes(n) + n.pow(3) / 8;
            if needed > opts.memory_budget {
                return Err(BoxError::OutOfMemory { needed, budget: opts.memory_budget });
            }
            let a = *map.anosov().matrix();
            let af = map.a();
            let nf = n as f64;
            let base = cube_stencil(af, SLACK * nf);
            let ab = af * map.frame().basis();
            let sup_p = ab.singular_values().max() * map.sup_phi();
            let (padded, pad) = if map.is_linear() {
                (base.clone(), 0.0)
            } else {
                (cube_stencil(af, (sup_p + SLACK) * nf), sup_p + SLACK)
            };
            let mut near = BoxSet::empty(grid);
            if !map.is_linear() {
                for c in map.centers() {
                    mark_ball(&grid, &mut near, c.coords(), map.euclidean_reach() + SLACK);
                }
            }
            Ok(BoxMap { grid, mode: opts.mode, pad, adj: Adjacency::Stencil { a, base, padded, near } })
        }
        EnclosureMode::Sampled => {
            let s = opts.samples_per_box.max(1) as u64;
            let reach = (2.0 * opts.pad * n as f64).ceil() as u64 + 1;
            let per = (s * reach.pow(3)).min(n.pow(3));
            let needed = n.pow(3) * (8 + 4 * per) + morse_bytes(n);
            if needed > opts.memory_budget {
                return Err(BoxError::OutOfMemory { needed, budget: opts.memory_budget });
            }
            Ok(sampled(map, grid, opts))
        }
    }
}

fn sample_list(map: &DAMap, grid: &BoxGrid, b: u32, opts: &BoxMapOptions, rng: &mut impl Rng, out: &mut Vec<u32>) {
    out.clear();
    let n = grid.n() as i64;
    let nf = n as f64;
    let s = opts.samples_per_box.max(1);
    let mut push = |t: [f64; 3]| {
        let y = map.eval_f(&grid.point_in(b, t)).coords();
        let lo: Vec<i64> = y.iter().map(|&c| ((c - opts.pad) * nf).floor() as i64).collect();
        let hi: Vec<i64> = y.iter().map(|&c| ((c + opts.pad) * nf).floor() as i64).collect();
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let w = |t: i64| t.rem_euclid(n) as u32;
                    out.push(grid.index(w(i), w(j), w(k)));
                }
            }
        }
    };
    push([0.5; 3]);
    if s >= 9 {
        for c in 0..8u32 {
            push([(c & 1) as f64, (c >> 1 & 1) as f64, (c >> 2 & 1) as f64]);
        }
        for _ in 9..s {
            push([rng.gen(), rng.gen(), rng.gen()]);
        }
    } else {
        for _ in 1..s {
            push([rng.gen(), rng.gen(), rng.gen()]);
        }
    }
    out.sort_unstable();
    out.dedup();
}

/// Two passes over blocks of boxes: count, then fill disjoint ranges of one
/// arena. Each block draws from its own random stream, so both passes see
/// the same samples.
fn sampled(map: &DAMap, grid: BoxGrid, opts: &BoxMapOptions) -> BoxMap {
    let total = grid.len();
    let blocks: Vec<(usize, usize)> =
        (0..total.div_ceil(BLOCK)).map(|k| (k * BLOCK, total.min((k + 1) * BLOCK))).collect();
    let counts: Vec<Vec<u32>> = blocks
        .par_iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let mut rng = rng::stream(opts.seed, "boxmap:sampled", k as u64);
            let mut buf = Vec::new();
            (lo..hi)
                .map(|b| {
                    sample_list(map, &grid, b as u32, opts, &mut rng, &mut buf);
                    buf.len() as u32
                })
                .collect()
        })
        .collect();
    let mut offsets = Vec::with_capacity(total + 1);
    offsets.push(0u64);
    for c in counts.iter().flatten() {
        offsets.push(offsets.last().unwrap() + *c as u64);
    }
    let mut targets = vec![0u32; *offsets.last().unwrap() as usize];
    let mut slices = Vec::with_capacity(blocks.len());
    let mut rest: &mut [u32] = &mut targets;
    for &(lo, hi) in &blocks {
        let (head, tail) = rest.split_at_mut((offsets[hi] - offsets[lo]) as usize);
        slices.push(head);
        rest = tail;
    }
    slices.into_par_iter().zip(blocks.par_iter()).enumerate().for_each(|(k, (slice, &(lo, hi)))| {
        let mut rng = rng::stream(opts.seed, "boxmap:sampled", k as u64);
        let mut buf = Vec::new();
        let mut at = 0;
        for b in lo..hi {
            sample_list(map, &grid, b as u32, opts, &mut rng, &mut buf);
            slice[at..at + buf.len()].copy_from_slice(&buf);
            at += buf.len();
        }
    });
    BoxMap { grid, mode: EnclosureMode::Sampled, pad: opts.pad, adj: Adjacency::Explicit { offsets, targets } }
}
