//! Unstable curves: forward images of a short segment along e_u.
//!
//! Off the two bump supports f is the affine map A, so a segment whose
//! iterates all avoid the supports has an exact straight image. Such pieces
//! are kept as long chords; everything else is bisected until chords are at
//! most `tol` long and their midpoints stay within tol/2 of the chord.

use super::AnalysisError;
use crate::da_family::DAMap;
use crate::torus_core::{cone_membership, torus_delta, Bundle, TorusPoint, Vec3};
use nalgebra::Matrix3;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Length of the seed segment (adapted metric).
pub const SEED_LENGTH: f64 = 1.0e-6;
/// Longest exact chord kept (Euclidean); keeps minimal lifts unambiguous.
pub const MAX_STRAIGHT: f64 = 0.25;
const MAX_ITERATIONS: usize = 64;
const MIN_PARAM: f64 = 1.0e-13;

/// Polyline on T³: vertex i is `points[i]`, segment i runs from `points[i]`
/// along the lifted vector `steps[i]`.
#[derive(Clone, Debug)]
pub struct UnstableCurve {
    pub origin: TorusPoint,
    pub points: Vec<TorusPoint>,
    pub steps: Vec<Vec3>,
    /// Adapted arclength at each vertex; `cumulative[0] = 0`.
    pub cumulative: Vec<f64>,
    pub tol: f64,
    pub iterations: usize,
    /// Smallest normalized unstable-cone margin over all segments.
    pub min_cone_margin: f64,
}

impl UnstableCurve {
    pub fn arclength(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn segments(&self) -> usize {
        self.steps.len()
    }

    /// Point at adapted arclength s along the chords.
    pub fn point_at(&self, s: f64) -> TorusPoint {
        let s = s.clamp(0.0, self.arclength());
        let k = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            k => (k - 1).min(self.steps.len().saturating_sub(1)),
        };
        if self.steps.is_empty() {
            return self.origin;
        }
        let len = self.cumulative[k + 1] - self.cumulative[k];
        let t = if len > 0.0 { (s - self.cumulative[k]) / len } else { 0.0 };
        self.points[k].translate(&(self.steps[k] * t))
    }

    /// Endpoint of the last segment.
    pub fn end(&self) -> TorusPoint {
        match self.steps.last() {
            Some(d) => self.points[self.steps.len() - 1].translate(d),
            None => self.origin,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("s,x,y,z\n");
        for (c, p) in self.cumulative.iter().zip(self.points.iter().chain(std::iter::once(&self.end()))) {
            let [x, y, z] = p.coords();
            let _ = writeln!(s, "{c:e},{x:e},{y:e},{z:e}");
        }
        s
    }
}

struct Curver<'a> {
    map: &'a DAMap,
    a: Matrix3<f64>,
    basis_inv: Matrix3<f64>,
    centers: Vec<TorusPoint>,
    delta: f64,
    tol: f64,
}

impl<'a> Curver<'a> {
    fn new(map: &'a DAMap, tol: f64) -> Self {
        let centers = if map.is_linear() { Vec::new() } else { map.centers().to_vec() };
        Curver { map, a: *map.a(), basis_inv: *map.frame().basis_inv(), centers, delta: map.delta(), tol }
    }

    fn adapted(&self, v: &Vec3) -> f64 {
        (self.basis_inv * v).norm()
    }

    /// Segment from s along d stays outside every open support ball.
    fn avoids(&self, s: &TorusPoint, d: &Vec3) -> bool {
        let mid = s.translate(&(d * 0.5));
        self.centers.iter().all(|c| {
            let w = torus_delta(c, &mid);
            let p0 = self.basis_inv * (w - d * 0.5);
            let dd = self.basis_inv * d;
            let l2 = dd.norm_squared();
            let t = if l2 > 0.0 { (-p0.dot(&dd) / l2).clamp(0.0, 1.0) } else { 0.0 };
            (p0 + dd * t).norm() > self.delta * (1.0 + 1e-9)
        })
    }

    /// Exact j-fold image of a straight segment that never meets a support.
    fn exact_image(&self, s: &TorusPoint, d: &Vec3, j: usize) -> Option<(TorusPoint, Vec3)> {
        let mut s = *s;
        let mut d = *d;
        for _ in 0..j {
            if d.norm() > 0.4 || !self.avoids(&s, &d) {
                return None;
            }
            s = self.map.eval_f(&s);
            d = self.a * d;
        }
        Some((s, d))
    }

    fn image(&self, x: &TorusPoint, j: usize) -> TorusPoint {
        let mut y = *x;
        for _ in 0..j {
            y = self.map.eval_f(&y);
        }
        y
    }

    /// Emits the j-fold image of the segment (x0, d) as chords, in order.
    fn refine(&self, x0: &TorusPoint, d: &Vec3, j: usize, emit: &mut impl FnMut(TorusPoint, Vec3)) {
        let at = |t: f64| x0.translate(&(d * t));
        let mut stack = vec![(0.0f64, 1.0f64, self.image(x0, j), self.image(&at(1.0), j))];
        while let Some((t0, t1, p0, p1)) = stack.pop() {
            let sub = d * (t1 - t0);
            if let Some((_, img)) = self.exact_image(&at(t0), &sub, j) {
                if img.norm() <= MAX_STRAIGHT {
                    emit(p0, img);
                    continue;
                }
            } else {
                let chord = torus_delta(&p0, &p1);
                let tm = 0.5 * (t0 + t1);
                let pm = self.image(&at(tm), j);
                if self.adapted(&chord) <= self.tol {
                    let bow = self.adapted(&(torus_delta(&p0, &pm) - chord * 0.5));
                    if bow <= 0.5 * self.tol || t1 - t0 < MIN_PARAM {
                        emit(p0, chord);
                        continue;
                    }
                }
                stack.push((tm, t1, pm, p1));
                stack.push((t0, tm, p0, pm));
                continue;
            }
            let tm = 0.5 * (t0 + t1);
            let pm = self.image(&at(tm), j);
            stack.push((tm, t1, pm, p1));
            stack.push((t0, tm, p0, pm));
        }
    }
}

/// Normalized unstable-cone margin of a chord.
fn cone_margin(map: &DAMap, d: &Vec3) -> f64 {
    match cone_membership(map.cones(), Bundle::Unstable, d) {
        Ok((_, margin)) => margin / map.frame().adapted_norm(d),
        Err(_) => f64::NEG_INFINITY,
    }
}

fn assemble(
    origin: TorusPoint,
    chords: Vec<(TorusPoint, Vec3)>,
    map: &DAMap,
    tol: f64,
    iterations: usize,
) -> UnstableCurve {
    let frame = map.frame();
    let mut cumulative = Vec::with_capacity(chords.len() + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut points = Vec::with_capacity(chords.len());
    let mut steps = Vec::with_capacity(chords.len());
    for (p, d) in chords {
        acc += frame.adapted_norm(&d);
        cumulative.push(acc);
        min_margin = min_margin.min(cone_margin(map, &d));
        points.push(p);
        steps.push(d);
    }
    UnstableCurve { origin, points, steps, cumulative, tol, iterations, min_cone_margin: min_margin }
}

fn check_cones(curve: &UnstableCurve, map: &DAMap) -> Result<(), AnalysisError> {
    if curve.min_cone_margin > 0.0 {
        return Ok(());
    }
    let (segment, margin) = curve
        .steps
        .iter()
        .enumerate()
        .map(|(i, d)| (i, cone_margin(map, d)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::NEG_INFINITY));
    Err(AnalysisError::ConeViolation { segment, margin })
}

fn seed_curve(map: &DAMap, seed: &TorusPoint, tol: f64) -> Result<UnstableCurve, AnalysisError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let eu = map.frame().e_u();
    let d = eu * (SEED_LENGTH / map.frame().adapted_norm(&eu));
    Ok(assemble(*seed, vec![(*seed, d)], map, tol, 0))
}

fn step(map: &DAMap, curve: &UnstableCurve, j: usize) -> UnstableCurve {
    let cv = Curver::new(map, curve.tol);
    let pieces: Vec<Vec<(TorusPoint, Vec3)>> = curve
        .points
        .par_iter()
        .zip(curve.steps.par_iter())
        .map(|(p, d)| {
            let mut out = Vec::new();
            cv.refine(p, d, j, &mut |q, v| out.push((q, v)));
            out
        })
        .collect();
    let origin = cv.image(&curve.origin, j);
    assemble(origin, pieces.into_iter().flatten().collect(), map, curve.tol, curve.iterations + j)
}

fn truncate(curve: &mut UnstableCurve, target: f64) {
    let k = curve.cumulative.partition_point(|&c| c < target);
    if k == 0 || k >= curve.cumulative.len() {
        return;
    }
    let seg = k - 1;
    let len = curve.cumulative[k] - curve.cumulative[seg];
    let t = (target - curve.cumulative[seg]) / len;
    curve.steps.truncate(seg + 1);
    curve.points.truncate(seg + 1);
    curve.cumulative.truncate(seg + 2);
    curve.steps[seg] *= t;
    curve.cumulative[seg + 1] = target;
}

/// Forward images of the seed segment along e_u until the adapted
/// arclength reaches `target_len`, truncated there.
pub fn grow_unstable_curve(
    map: &DAMap,
    seed: &TorusPoint,
    target_len: f64,
    tol: f64,
) -> Result<UnstableCurve, AnalysisError> {
    let mut curve = seed_curve(map, seed, tol)?;
    while curve.arclength() < target_len {
        if curve.iterations >= MAX_ITERATIONS {
            return Err(AnalysisError::TargetUnreachable {
                arclength: curve.arclength(),
                iterations: curve.iterations,
            });
        }
        let before = curve.arclength();
        curve = step(map, &curve, 1);
        check_cones(&curve, map)?;
        if curve.arclength() < 1.5 * before {
            return Err(AnalysisError::TargetUnreachable {
                arclength: curve.arclength(),
                iterations: curve.iterations,
            });
        }
    }
    truncate(&mut curve, target_len);
    Ok(curve)
}

/// The image of the seed segment after exactly `iterations` steps.
pub fn iterate_unstable_curve(
    map: &DAMap,
    seed: &TorusPoint,
    iterations: usize,
    tol: f64,
) -> Result<UnstableCurve, AnalysisError> {
    let mut curve = seed_curve(map, seed, tol)?;
    for _ in 0..iterations {
        curve = step(map, &curve, 1);
        check_cones(&curve, map)?;
    }
    Ok(curve)
}

/// Closest approach of the chord (p, d) to `target`: (parameter, distance).
fn chord_distance(map: &DAMap, p: &TorusPoint, d: &Vec3, target: &TorusPoint) -> (f64, f64) {
    let binv = map.frame().basis_inv();
    let mid = p.translate(&(d * 0.5));
    let w = binv * (torus_delta(&mid, target) + d * 0.5);
    let dd = binv * d;
    let l2 = dd.norm_squared();
    let t = if l2 > 0.0 { (w.dot(&dd) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (t, (w - dd * t).norm())
}

/// Whether some chord of the curve passes within `radius` of `target`, and
/// the minimal adapted distance.
pub fn accumulation_check(map: &DAMap, curve: &UnstableCurve, target: &TorusPoint, radius: f64) -> (bool, f64) {
    let closest = curve
        .points
        .par_iter()
        .zip(curve.steps.par_iter())
        .map(|(p, d)| chord_distance(map, p, d, target).1)
        .reduce(|| f64::INFINITY, f64::min);
    (closest <= radius, closest)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetScan {
    pub target: TorusPoint,
    pub radius: f64,
    /// Arclength of the first approach within `radius`.
    pub first_hit: Option<f64>,
    pub closest: f64,
    pub closest_at: f64,
    /// Running minima (arclength, distance) in scan order.
    pub minima: Vec<(f64, f64)>,
}

impl TargetScan {
    pub fn hit(&self) -> bool {
        self.first_hit.is_some()
    }

    /// Minimal distance over the initial piece of the given arclength.
    pub fn closest_within(&self, arclength: f64) -> f64 {
        let k = self.minima.partition_point(|m| m.0 <= arclength);
        if k == 0 {
            f64::INFINITY
        } else {
            self.minima[k - 1].1
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurveScan {
    pub seed: TorusPoint,
    pub tol: f64,
    pub base_length: f64,
    pub iterations: usize,
    /// Arclength covered: the budget when the scan stopped at a hit,
    /// otherwise min(total image length, max_len).
    pub length: f64,
    pub stopped_at_hit: bool,
    pub targets: Vec<TargetScan>,
    pub min_cone_margin: f64,
    pub chords: u64,
}

impl CurveScan {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "base_length: {:e}", self.base_length);
        let _ = writeln!(s, "iterations: {}", self.iterations);
        let _ = writeln!(s, "scanned_length: {:e}", self.length);
        let _ = writeln!(s, "stopped_at_hit: {}", self.stopped_at_hit);
        let _ = writeln!(s, "chords: {}", self.chords);
        let _ = writeln!(s, "min_cone_margin: {:e}", self.min_cone_margin);
        for (i, t) in self.targets.iter().enumerate() {
            let [x, y, z] = t.target.coords();
            let _ = writeln!(s, "target.{i}: ({x:e},{y:e},{z:e})");
            let _ = writeln!(s, "target.{i}.radius: {:e}", t.radius);
            let _ = writeln!(s, "target.{i}.hit: {}", t.hit());
            if let Some(h) = t.first_hit {
                let _ = writeln!(s, "target.{i}.first_hit_arclength: {h:e}");
            }
            let _ = writeln!(s, "target.{i}.closest: {:e}", t.closest);
            let _ = writeln!(s, "target.{i}.closest_arclength: {:e}", t.closest_at);
        }
        s
    }
}

struct ChunkScan {
    length: f64,
    chords: u64,
    margin: f64,
    first: Vec<Option<f64>>,
    minima: Vec<Vec<(f64, f64)>>,
}

fn scan_chunk(cv: &Curver, p: &TorusPoint, d: &Vec3, j: usize, targets: &[(TorusPoint, f64)]) -> ChunkScan {
    let frame = cv.map.frame();
    let mut out = ChunkScan {
        length: 0.0,
        chords: 0,
        margin: f64::INFINITY,
        first: vec![None; targets.len()],
        minima: vec![Vec::new(); targets.len()],
    };
    cv.refine(p, d, j, &mut |q, v| {
        let len = frame.adapted_norm(&v);
        for (k, (target, radius)) in targets.iter().enumerate() {
            let (t, dist) = chord_distance(cv.map, &q, &v, target);
            let at = out.length + t * len;
            if out.minima[k].last().is_none_or(|m| dist < m.1) {
                out.minima[k].push((at, dist));
            }
            if out.first[k].is_none() && dist <= *radius {
                out.first[k] = Some(at);
            }
        }
        out.margin = out.margin.min(cone_margin(cv.map, &v));
        out.length += len;
        out.chords += 1;
    });
    out
}

/// Streams the image of a stored base curve of length `base_len` grown from
/// `seed` through enough further iterations to cover `max_len`, recording
/// approaches to each (target, radius). With `stop_on_first` the scan ends
/// at the first hit of target 0, whose arclength becomes the budget.
pub fn scan_unstable_curve(
    map: &DAMap,
    seed: &TorusPoint,
    targets: &[(TorusPoint, f64)],
    max_len: f64,
    base_len: f64,
    tol: f64,
    stop_on_first: bool,
) -> Result<CurveScan, AnalysisError> {
    let base_len = base_len.min(max_len);
    let base = grow_unstable_curve(map, seed, base_len, tol)?;
    let growth = map.frame().lambda_u_inv().recip() * 0.9;
    let mut j = ((max_len / base_len).ln() / growth.ln()).ceil().max(0.0) as usize;
    loop {
        let scan = scan_pass(map, &base, targets, max_len, j, stop_on_first)?;
        if scan.length >= max_len || scan.stopped_at_hit || base.iterations + j >= MAX_ITERATIONS {
            return Ok(scan);
        }
        j += 1;
    }
}

fn scan_pass(
    map: &DAMap,
    base: &UnstableCurve,
    targets: &[(TorusPoint, f64)],
    max_len: f64,
    j: usize,
    stop_on_first: bool,
) -> Result<CurveScan, AnalysisError> {
    let cv = Curver::new(map, base.tol);
    let mut offset = 0.0;
    let mut chords = 0u64;
    let mut margin = f64::INFINITY;
    let mut first: Vec<Option<f64>> = vec![None; targets.len()];
    let mut minima: Vec<Vec<(f64, f64)>> = vec![Vec::new(); targets.len()];
    let mut stopped = false;
    let batch = rayon::current_num_threads().max(1) * 4;
    let segs: Vec<usize> = (0..base.segments()).collect();
    'outer: for block in segs.chunks(batch) {
        let results: Vec<ChunkScan> =
            block.par_iter().map(|&i| scan_chunk(&cv, &base.points[i], &base.steps[i], j, targets)).collect();
        for r in results {
            for k in 0..targets.len() {
                for &(at, dist) in &r.minima[k] {
                    let at = offset + at;
                    if at > max_len {
                        break;
                    }
                    if minima[k].last().is_none_or(|m| dist < m.1) {
                        minima[k].push((at, dist));
                    }
                }
                if first[k].is_none() {
                    first[k] = r.first[k].map(|h| offset + h).filter(|&h| h <= max_len);
                }
            }
            margin = margin.min(r.margin);
            chords += r.chords;
            offset += r.length;
            if stop_on_first && first.first().is_some_and(|h| h.is_some()) {
                stopped = true;
                break 'outer;
            }
            if offset >= max_len {
                break 'outer;
            }
        }
    }
    if margin <= 0.0 {
        return Err(AnalysisError::ConeViolation { segment: chords as usize, margin });
    }
    let length = if stopped { first[0].expect("stopped on a hit") } else { offset.min(max_len) };
    let targets = targets
        .iter()
        .zip(first)
        .zip(minima)
        .map(|(((target, radius), first_hit), mut minima)| {
            minima.retain(|m| m.0 <= length);
            let first_hit = first_hit.filter(|&h| h <= length);
            let (closest_at, closest) = minima.last().copied().unwrap_or((0.0, f64::INFINITY));
            TargetScan { target: *target, radius: *radius, first_hit, closest, closest_at, minima }
        })
        .collect();
    Ok(CurveScan {
        seed: base.origin,
        tol: base.tol,
        base_length: base.arclength(),
        iterations: base.iterations + j,
        length,
        stopped_at_hit: stopped,
        targets,
        min_cone_margin: margin,
        chords,
    })
}
