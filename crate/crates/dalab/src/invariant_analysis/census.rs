//! Monte Carlo censuses: basin capture, the backward-trapped measure U⁺,
//! and Birkhoff averages from independent starts.

use super::AnalysisError;
use crate::boxdyn::{localization_tolerance, BoxSet};
use crate::da_family::DAMap;
use crate::rng;
use crate::semiconj::SemiconjugacySolver;
use crate::torus_core::{periodic_orbits, TorusPoint, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

fn uniform_point(rng: &mut ChaCha8Rng) -> TorusPoint {
    TorusPoint::new(rng.gen(), rng.gen(), rng.gen())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnosis {
    PeriodicFiber { period: u32, point: TorusPoint, distance: f64 },
    Undiagnosed { nearest: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Escapee {
    pub index: usize,
    pub start: TorusPoint,
    pub end: TorusPoint,
    pub diagnosis: Option<Diagnosis>,
}

#[derive(Clone, Debug)]
pub struct BasinCensus {
    pub samples: usize,
    pub captured: usize,
    pub fraction: f64,
    pub stderr: f64,
    pub n_max: usize,
    pub seed: u64,
    /// First iterate inside the attractor neighborhood, per sample.
    pub capture_times: Vec<Option<u32>>,
    pub escapees: Vec<Escapee>,
    /// h-image tolerance used for escapee diagnosis.
    pub tolerance: Option<f64>,
}

impl BasinCensus {
    /// Fraction captured within k iterates.
    pub fn fraction_within(&self, k: usize) -> f64 {
        let c = self.capture_times.iter().filter(|t| t.is_some_and(|t| t as usize <= k)).count();
        c as f64 / self.samples.max(1) as f64
    }

    pub fn undiagnosed(&self) -> usize {
        self.escapees.iter().filter(|e| !matches!(e.diagnosis, Some(Diagnosis::PeriodicFiber { .. }))).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,samples,n_max,captured,fraction,stderr\n");
        let _ = writeln!(
            s,
            "{},{},{},{},{:e},{:e}",
            self.seed, self.samples, self.n_max, self.captured, self.fraction, self.stderr
        );
        s
    }

    pub fn escapees_csv(&self) -> String {
        let mut s = String::from("index,x,y,z,diagnosis,period,distance\n");
        for e in &self.escapees {
            let [x, y, z] = e.start.coords();
            let (kind, period, dist) = match &e.diagnosis {
                Some(Diagnosis::PeriodicFiber { period, distance, .. }) => {
                    ("periodic-fiber", period.to_string(), *distance)
                }
                Some(Diagnosis::Undiagnosed { nearest }) => ("undiagnosed", String::new(), *nearest),
                None => ("pending", String::new(), f64::NAN),
            };
            let _ = writeln!(s, "{},{x:e},{y:e},{z:e},{kind},{period},{dist:e}", e.index);
        }
        s
    }
}

/// Iterates each point up to n_max times and records the first iterate in
/// `attractor` (iterate 0 is the point itself).
pub fn basin_census_points(
    map: &DAMap,
    attractor: &BoxSet,
    points: &[TorusPoint],
    n_max: usize,
    seed: u64,
) -> BasinCensus {
    let grid = attractor.grid();
    let runs: Vec<(Option<u32>, TorusPoint)> = points
        .par_iter()
        .map(|x| {
            let mut y = *x;
            for k in 0..=n_max {
                if attractor.contains(grid.box_of(&y)) {
                    return (Some(k as u32), y);
                }
                if k < n_max {
                    y = map.eval_f(&y);
                }
            }
            (None, y)
        })
        .collect();
    let escapees: Vec<Escapee> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.0.is_none())
        .map(|(i, r)| Escapee { index: i, start: points[i], end: r.1, diagnosis: None })
        .collect();
    let samples = points.len();
    let captured = samples - escapees.len();
    let fraction = captured as f64 / samples.max(1) as f64;
    BasinCensus {
        samples,
        captured,
        fraction,
        stderr: (fraction * (1.0 - fraction) / samples.max(1) as f64).sqrt(),
        n_max,
        seed,
        capture_times: runs.into_iter().map(|r| r.0).collect(),
        escapees,
        tolerance: None,
    }
}

/// Census over Lebesgue-uniform points from the "basin:points" streams.
pub fn basin_census(map: &DAMap, attractor: &BoxSet, samples: usize, n_max: usize, seed: u64) -> BasinCensus {
    let points: Vec<TorusPoint> =
        (0..samples as u64).map(|i| uniform_point(&mut rng::stream(seed, "basin:points", i))).collect();
    basin_census_points(map, attractor, &points, n_max, seed)
}

/// Matches h at the final point of each escapee against periodic orbits of
/// A, with the box-localization tolerance at the attractor's resolution.
pub fn diagnose_escapees(
    census: &mut BasinCensus,
    solver: &SemiconjugacySolver,
    grid_n: u32,
    max_period: u32,
) -> Result<(), AnalysisError> {
    let map = solver.map();
    let frame = map.frame();
    let tol = localization_tolerance(solver, grid_n);
    let orbits = periodic_orbits(map.anosov(), max_period).map_err(crate::da_family::DaError::from)?;
    for e in census.escapees.iter_mut() {
        let y = solver.h(&e.end)?;
        let mut best = (f64::INFINITY, 0u32, y);
        for o in &orbits {
            for p in &o.points {
                let z = p.point();
                let d = frame.local_distance(&z, &y);
                if d < best.0 || (d == best.0 && o.period < best.1) {
                    best = (d, o.period, z);
                }
            }
        }
        e.diagnosis = Some(if best.0 <= tol {
            Diagnosis::PeriodicFiber { period: best.1, point: best.2, distance: best.0 }
        } else {
            Diagnosis::Undiagnosed { nearest: best.0 }
        });
    }
    census.tolerance = Some(tol);
    Ok(())
}

/// Region for the U⁺ estimate.
#[derive(Clone, Debug)]
pub enum Region {
    Boxes(BoxSet),
    /// Adapted-metric ball.
    Ball {
        center: TorusPoint,
        radius: f64,
    },
}

impl Region {
    pub fn contains(&self, map: &DAMap, x: &TorusPoint) -> bool {
        match self {
            Region::Boxes(set) => set.contains(set.grid().box_of(x)),
            Region::Ball { center, radius } => map.frame().local_distance(center, x) <= *radius,
        }
    }

    pub fn volume(&self, map: &DAMap) -> f64 {
        match self {
            Region::Boxes(set) => set.count() as f64 / set.grid().len() as f64,
            Region::Ball { radius, .. } => {
                4.0 / 3.0 * std::f64::consts::PI * radius.powi(3) * map.frame().basis().determinant().abs()
            }
        }
    }

    fn sample(&self, map: &DAMap, rng: &mut ChaCha8Rng) -> TorusPoint {
        match self {
            Region::Boxes(set) => {
                let members: u64 = set.count() as u64;
                let k = rng.gen_range(0..members);
                let b = set.iter().nth(k as usize).expect("k < count");
                set.grid().point_in(b, [rng.gen(), rng.gen(), rng.gen()])
            }
            Region::Ball { center, radius } => loop {
                let c = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if c.norm() <= 1.0 {
                    return center.translate(&map.frame().from_adapted(&(c * *radius)));
                }
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UPlusEstimate {
    pub samples: usize,
    pub volume: f64,
    /// Fraction of samples whose first k backward iterates stay in the
    /// region, for k = 0..=n.
    pub fraction: Vec<f64>,
    /// volume · fraction.
    pub measure: Vec<f64>,
    pub stderr: Vec<f64>,
    pub seed: u64,
}

impl UPlusEstimate {
    pub fn at(&self, k: usize) -> f64 {
        self.measure[k.min(self.measure.len() - 1)]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,seed,samples,fraction,measure,stderr\n");
        for k in 0..self.fraction.len() {
            let _ = writeln!(
                s,
                "{k},{},{},{:e},{:e},{:e}",
                self.seed, self.samples, self.fraction[k], self.measure[k], self.stderr[k]
            );
        }
        s
    }
}

/// Backward iterates survived inside the region, capped at n.
pub fn backward_survival(map: &DAMap, region: &Region, x: &TorusPoint, n: usize) -> Result<usize, AnalysisError> {
    let mut y = *x;
    for k in 0..n {
        y = map.eval_f_inv(&y, 1e-14)?;
        if !region.contains(map, &y) {
            return Ok(k);
        }
    }
    Ok(n)
}

/// Monte Carlo estimate of Leb{x ∈ U : f^{−k}(x) ∈ U for 0 ≤ k ≤ n}.
pub fn u_plus_measure(
    map: &DAMap,
    region: &Region,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<UPlusEstimate, AnalysisError> {
    if samples == 0 {
        return Err(AnalysisError::InvalidArgument("samples must be positive".into()));
    }
    if let Region::Boxes(set) = region {
        if set.is_empty() {
            return Err(AnalysisError::InvalidArgument("empty region".into()));
        }
    }
    let survived: Vec<usize> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = region.sample(map, &mut rng::stream(seed, "uplus:points", i));
            backward_survival(map, region, &x, n)
        })
        .collect::<Result<_, _>>()?;
    let mut hist = vec![0usize; n + 1];
    for s in survived {
        hist[s] += 1;
    }
    let volume = region.volume(map);
    let mut alive = samples;
    let mut fraction = Vec::with_capacity(n + 1);
    for h in &hist[..=n] {
        fraction.push(alive as f64 / samples as f64);
        alive -= h;
    }
    let measure = fraction.iter().map(|f| f * volume).collect();
    let stderr = fraction.iter().map(|f| volume * (f * (1.0 - f) / samples as f64).sqrt()).collect();
    Ok(UPlusEstimate { samples, volume, fraction, measure, stderr, seed })
}

#[derive(Clone, Copy)]
pub struct Observable {
    pub name: &'static str,
    pub f: fn(&TorusPoint) -> f64,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

const TAU: f64 = std::f64::consts::TAU;

/// Real and imaginary parts of e^{2πi x_j}.
pub fn fourier_observables() -> Vec<Observable> {
    vec![
        Observable { name: "cos_x", f: |p| (TAU * p[0]).cos() },
        Observable { name: "sin_x", f: |p| (TAU * p[0]).sin() },
        Observable { name: "cos_y", f: |p| (TAU * p[1]).cos() },
        Observable { name: "sin_y", f: |p| (TAU * p[1]).sin() },
        Observable { name: "cos_z", f: |p| (TAU * p[2]).cos() },
        Observable { name: "sin_z", f: |p| (TAU * p[2]).sin() },
    ]
}

pub fn constant_observable() -> Observable {
    Observable { name: "one", f: |_| 1.0 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffComparison {
    pub names: Vec<&'static str>,
    /// averages[o][s]: time average of observable o from start s.
    pub averages: Vec<Vec<f64>>,
    /// Max pairwise deviation per observable.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub n: usize,
    pub starts: usize,
    pub seed: u64,
}

impl BirkhoffComparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("observable,seed,starts,n,min,max,deviation\n");
        for (o, name) in self.names.iter().enumerate() {
            let a = &self.averages[o];
            let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ =
                writeln!(s, "{name},{},{},{},{lo:e},{hi:e},{:e}", self.seed, self.starts, self.n, self.deviations[o]);
        }
        s
    }
}

/// Time averages over n iterates from `starts` uniform starting points.
pub fn birkhoff_compare(
    map: &DAMap,
    observables: &[Observable],
    starts: usize,
    n: usize,
    seed: u64,
) -> Result<BirkhoffComparison, AnalysisError> {
    if starts < 2 || n == 0 || observables.is_empty() {
        return Err(AnalysisError::InvalidArgument(format!(
            "need starts >= 2, n >= 1 and an observable (got {starts}, {n}, {})",
            observables.len()
        )));
    }
    let per_start: Vec<Vec<f64>> = (0..starts as u64)
        .into_par_iter()
        .map(|i| {
            let mut y = uniform_point(&mut rng::stream(seed, "birkhoff:starts", i));
            let mut sums = vec![0.0; observables.len()];
            for _ in 0..n {
                for (s, o) in sums.iter_mut().zip(observables) {
                    *s += (o.f)(&y);
                }
                y = map.eval_f(&y);
            }
            sums.into_iter().map(|s| s / n as f64).collect()
        })
        .collect();
    let averages: Vec<Vec<f64>> = (0..observables.len()).map(|o| per_start.iter().map(|v| v[o]).collect()).collect();
    let deviations: Vec<f64> = averages
        .iter()
        .map(|a| {
            let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .collect();
    Ok(BirkhoffComparison {
        names: observables.iter().map(|o| o.name).collect(),
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        averages,
        deviations,
        n,
        starts,
        seed,
    })
}
