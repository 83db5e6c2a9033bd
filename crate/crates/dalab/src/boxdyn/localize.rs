//! Matching non-terminal classes with fibers of h over periodic orbits of A.

use super::{build_box_map, morse_graph, BoxError, BoxGrid, BoxMapOptions, EnclosureMode, MorseGraph};
use crate::semiconj::SemiconjugacySolver;
use crate::torus_core::{periodic_orbits, TorusPoint};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub enum ClassStatus {
    QuasiAttractor,
    /// Index into `Localization::orbits` and the orbit's period.
    PeriodicFiber {
        orbit: usize,
        period: u32,
    },
    Unresolved(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationEntry {
    pub class: usize,
    pub boxes: usize,
    pub status: ClassStatus,
}

#[derive(Clone, Debug)]
pub struct Localization {
    pub n: u32,
    pub entries: Vec<LocalizationEntry>,
    /// Matching tolerance for h-images (adapted metric).
    pub tolerance: f64,
    /// Points of each periodic orbit of A considered.
    pub orbits: Vec<(u32, Vec<TorusPoint>)>,
    /// Resolution of the first attempt and its unresolved count when a
    /// refinement retry happened.
    pub retry: Option<(u32, usize)>,
}

impl Localization {
    pub fn unresolved(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e.status, ClassStatus::Unresolved(_))).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n: {}", self.n);
        let _ = writeln!(s, "tolerance: {:e}", self.tolerance);
        let _ = writeln!(s, "orbits: {}", self.orbits.len());
        if let Some((n, u)) = self.retry {
            let _ = writeln!(s, "retry_from: {n}");
            let _ = writeln!(s, "retry_unresolved_before: {u}");
        }
        for e in &self.entries {
            let status = match &e.status {
                ClassStatus::QuasiAttractor => "quasi-attractor".to_string(),
                ClassStatus::PeriodicFiber { orbit, period } => {
                    let [x, y, z] = self.orbits[*orbit].1[0].coords();
                    format!("periodic-fiber period={period} orbit={orbit} point=({x:e},{y:e},{z:e})")
                }
                ClassStatus::Unresolved(why) => format!("unresolved ({why})"),
            };
            let _ = writeln!(s, "class.{}: boxes={} {}", e.class, e.boxes, status);
        }
        let _ = writeln!(s, "unresolved: {}", self.unresolved());
        s
    }
}

/// Matching tolerance for h-images at grid resolution n.
///
/// A box center lies within half a box diagonal of the fiber points it
/// approximates, and |h(x) − h(x′)| ≤ |x − x′| + 2ε, so the tolerance is
/// 2·ε_emp + half the adapted box diagonal.
pub fn localization_tolerance(solver: &SemiconjugacySolver, n: u32) -> f64 {
    let half_diag = solver.map().frame().basis_inv_norm() * 3f64.sqrt() / 2.0 / n as f64;
    2.0 * solver.eps_emp() + half_diag
}

/// Resolves each non-terminal class to the periodic orbit of A whose points
/// lie within `tolerance` of h at every box center of the class, requiring
/// also that every box sits within a plaque of some orbit point.
pub fn localize_classes(
    mg: &MorseGraph,
    solver: &SemiconjugacySolver,
    max_period: u32,
) -> Result<Localization, BoxError> {
    let map = solver.map();
    let frame = map.frame();
    let grid = BoxGrid::new(mg.n as u64)?;
    let half_diag = frame.basis_inv_norm() * 3f64.sqrt() / 2.0 * grid.pitch();
    let tolerance = localization_tolerance(solver, mg.n);
    let plaque = 2.0 * map.delta() + half_diag;
    let orbits: Vec<(u32, Vec<TorusPoint>)> = periodic_orbits(map.anosov(), max_period)
        .map_err(crate::da_family::DaError::from)
        .map_err(crate::semiconj::SemiconjError::from)?
        .into_iter()
        .map(|o| (o.period, o.points.iter().map(|p| p.point()).collect()))
        .collect();

    let mut entries = Vec::new();
    for (ci, class) in mg.classes.iter().enumerate() {
        if class.terminal {
            entries.push(LocalizationEntry {
                class: ci,
                boxes: class.boxes.len(),
                status: ClassStatus::QuasiAttractor,
            });
            continue;
        }
        let centers: Vec<TorusPoint> = class.boxes.iter().map(|&b| grid.center(b)).collect();
        let images: Vec<TorusPoint> = centers.iter().map(|c| solver.h(c)).collect::<Result<_, _>>()?;
        let mut candidates: Vec<usize> = (0..orbits.len()).collect();
        for y in &images {
            candidates.retain(|&o| orbits[o].1.iter().any(|z| frame.local_distance(z, y) <= tolerance));
            if candidates.is_empty() {
                break;
            }
        }
        candidates
            .retain(|&o| centers.iter().all(|c| orbits[o].1.iter().any(|z| frame.local_distance(z, c) <= plaque)));
        candidates.sort_by_key(|&o| (orbits[o].0, o));
        let status = match candidates.first() {
            Some(&o) => ClassStatus::PeriodicFiber { orbit: o, period: orbits[o].0 },
            None => ClassStatus::Unresolved(format!("no orbit of period <= {max_period} within {tolerance:e}")),
        };
        entries.push(LocalizationEntry { class: ci, boxes: class.boxes.len(), status });
    }
    Ok(Localization { n: mg.n, entries, tolerance, orbits, retry: None })
}

/// Certified box map and localization at n, repeated once at 2n when
/// classes remain unresolved and 2n fits the memory budget.
pub fn localize_with_retry(
    solver: &SemiconjugacySolver,
    n: u64,
    max_period: u32,
    memory_budget: u64,
) -> Result<(MorseGraph, Localization), BoxError> {
    let opts = BoxMapOptions { mode: EnclosureMode::CertifiedLipschitz, memory_budget, ..Default::default() };
    let bm = build_box_map(solver.map(), n, &opts)?;
    let mg = morse_graph(&bm);
    drop(bm);
    let loc = localize_classes(&mg, solver, max_period)?;
    let before = loc.unresolved();
    if before == 0 {
        return Ok((mg, loc));
    }
    match build_box_map(solver.map(), 2 * n, &opts) {
        Ok(bm2) => {
            drop(mg);
            let mg2 = morse_graph(&bm2);
            let mut loc2 = localize_classes(&mg2, solver, max_period)?;
            loc2.retry = Some((n as u32, before));
            Ok((mg2, loc2))
        }
        Err(BoxError::OutOfMemory { .. }) => Ok((mg, loc)),
        Err(e) => Err(e),
    }
}
