//! Finite-time Lyapunov exponents by reorthonormalized cocycle products.

use super::{AnalysisError, UnstableCurve};
use crate::da_family::DAMap;
use crate::rng;
use crate::torus_core::{torus_distance, TorusPoint};
use nalgebra::Matrix3;
use rand::Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

const FIXED_TOL: f64 = 1e-13;
const FLAG_WARMUP: usize = 4000;

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentSample {
    pub base: TorusPoint,
    pub n: usize,
    /// Per-iterate log rates, sorted descending.
    pub exponents: [f64; 3],
    /// Σ log|det Df(f^k x)| over the orbit.
    pub log_det: f64,
}

impl ExponentSample {
    /// |Σ exponents − log_det/n|.
    pub fn det_defect(&self) -> f64 {
        (self.exponents.iter().sum::<f64>() - self.log_det / self.n as f64).abs()
    }

    /// The two smallest exponents.
    pub fn cs(&self) -> [f64; 2] {
        [self.exponents[1], self.exponents[2]]
    }

    pub fn cs_negative(&self) -> bool {
        self.exponents[1] < 0.0
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass; returns the
/// orthonormal columns and the diagonal of R.
fn reorthonormalize(m: &Matrix3<f64>) -> (Matrix3<f64>, [f64; 3]) {
    let mut q = *m;
    let mut r = [0.0; 3];
    for j in 0..3 {
        let mut v = q.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let e = q.column(i).into_owned();
                v -= e * e.dot(&v);
            }
        }
        let norm = v.norm();
        r[j] = norm;
        q.set_column(j, &(v / norm));
    }
    (q, r)
}

/// Exponents along the orbit of x recorded at each horizon (ascending).
///
/// A base point fixed by f up to rounding keeps the constant cocycle Df(x);
/// iterating it would drift off a saddle within a few dozen steps. Its frame
/// is first relaxed onto the dominant invariant flag, so the finite-time
/// rates carry no transient.
pub fn lyapunov_checkpoints(
    map: &DAMap,
    x: &TorusPoint,
    horizons: &[usize],
) -> Result<Vec<ExponentSample>, AnalysisError> {
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::InvalidArgument(format!(
            "horizons must be positive and increasing, got {horizons:?}"
        )));
    }
    let fixed = torus_distance(&map.eval_f(x), x) <= FIXED_TOL;
    let mut q = Matrix3::identity();
    if fixed {
        let df = map.eval_df_adapted(x);
        q = reorthonormalize(&Matrix3::new(1.0, 0.3, 0.2, 0.4, 1.0, 0.5, 0.1, 0.7, 1.0)).0;
        for _ in 0..FLAG_WARMUP {
            q = reorthonormalize(&(df * q)).0;
        }
    }
    let mut acc = [0.0f64; 3];
    let mut log_det = 0.0;
    let mut y = *x;
    let mut out = Vec::with_capacity(horizons.len());
    let mut next = 0;
    for k in 1..=*horizons.last().expect("nonempty") {
        let df = map.eval_df_adapted(&y);
        log_det += df.determinant().abs().ln();
        let (q2, r) = reorthonormalize(&(df * q));
        q = q2;
        for i in 0..3 {
            acc[i] += r[i].ln();
        }
        if !fixed {
            y = map.eval_f(&y);
        }
        if k == horizons[next] {
            let mut e = acc.map(|a| a / k as f64);
            e.sort_by(|a, b| b.total_cmp(a));
            out.push(ExponentSample { base: *x, n: k, exponents: e, log_det });
            next += 1;
        }
    }
    Ok(out)
}

pub fn lyapunov_spectrum(map: &DAMap, x: &TorusPoint, n: usize) -> Result<ExponentSample, AnalysisError> {
    Ok(lyapunov_checkpoints(map, x, &[n])?.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
    pub under: usize,
    pub over: usize,
}

impl Histogram {
    fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram { lo, width: (hi - lo) / bins as f64, counts: vec![0; bins], under: 0, over: 0 }
    }

    fn add(&mut self, v: f64) {
        if v < self.lo {
            self.under += 1;
            return;
        }
        let k = ((v - self.lo) / self.width) as usize;
        match self.counts.get_mut(k) {
            Some(c) => *c += 1,
            None => self.over += 1,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lo,hi,count\n");
        let _ = writeln!(s, "-inf,{:e},{}", self.lo, self.under);
        for (i, c) in self.counts.iter().enumerate() {
            let a = self.lo + i as f64 * self.width;
            let _ = writeln!(s, "{:e},{:e},{c}", a, a + self.width);
        }
        let _ = writeln!(s, "{:e},inf,{}", self.lo + self.counts.len() as f64 * self.width, self.over);
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusResult {
    pub horizon: usize,
    pub samples: usize,
    pub negative: usize,
    pub fraction: f64,
    pub stderr: f64,
    /// Histogram of the larger cs-exponent.
    pub histogram: Histogram,
    pub max_det_defect: f64,
    pub seed: u64,
}

/// Fraction of points with both cs-exponents negative at each horizon, for
/// the given base points.
pub fn cs_exponent_census_points(
    map: &DAMap,
    points: &[TorusPoint],
    horizons: &[usize],
    seed: u64,
) -> Result<Vec<CensusResult>, AnalysisError> {
    let per_point: Vec<Vec<ExponentSample>> =
        points.par_iter().map(|x| lyapunov_checkpoints(map, x, horizons)).collect::<Result<_, _>>()?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(h, &horizon)| {
            let mut hist = Histogram::new(-1.5, 0.5, 40);
            let mut negative = 0;
            let mut max_defect: f64 = 0.0;
            for s in per_point.iter().map(|v| &v[h]) {
                hist.add(s.exponents[1]);
                negative += s.cs_negative() as usize;
                max_defect = max_defect.max(s.det_defect());
            }
            let n = points.len().max(1) as f64;
            let fraction = negative as f64 / n;
            CensusResult {
                horizon,
                samples: points.len(),
                negative,
                fraction,
                stderr: (fraction * (1.0 - fraction) / n).sqrt(),
                histogram: hist,
                max_det_defect: max_defect,
                seed,
            }
        })
        .collect())
}

/// Census over points drawn uniformly by arclength on the curve.
pub fn cs_exponent_census(
    map: &DAMap,
    curve: &UnstableCurve,
    samples: usize,
    horizons: &[usize],
    seed: u64,
) -> Result<Vec<CensusResult>, AnalysisError> {
    if curve.arclength() <= 0.0 {
        return Err(AnalysisError::InvalidArgument("empty curve".into()));
    }
    let points: Vec<TorusPoint> = (0..samples as u64)
        .map(|i| curve.point_at(rng::stream(seed, "census:points", i).gen::<f64>() * curve.arclength()))
        .collect();
    cs_exponent_census_points(map, &points, horizons, seed)
}

pub fn census_csv(results: &[CensusResult]) -> String {
    let mut s = String::from("horizon,seed,samples,negative,fraction,stderr,max_det_defect\n");
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{:e},{:e},{:e}",
            r.horizon, r.seed, r.samples, r.negative, r.fraction, r.stderr, r.max_det_defect
        );
    }
    s
}
