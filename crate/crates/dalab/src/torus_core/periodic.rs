//! Exact enumeration of periodic points of a toral automorphism.
//!
//! Points of period dividing n are the group (A^n − I)⁻¹Z³ / Z³. Coset
//! representatives of Z³ / (A^n − I)Z³ are read off the column Hermite form,
//! and each representative m gives the point adj(A^n − I)·m / det mod 1 with
//! an exact rational numerator.

use super::intmat::{self, WMat3};
use super::{AnosovMatrix, TorusError, TorusPoint};
use std::collections::HashSet;

const MAX_POINTS: i128 = 50_000_000;

/// A periodic point x = num / den mod 1 with 0 ≤ num_i < den.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeriodicPoint {
    num: [i128; 3],
    den: i128,
}

impl PeriodicPoint {
    pub fn numerators(&self) -> [i128; 3] {
        self.num
    }

    pub fn denominator(&self) -> i128 {
        self.den
    }

    pub fn point(&self) -> TorusPoint {
        let d = self.den as f64;
        TorusPoint::new(self.num[0] as f64 / d, self.num[1] as f64 / d, self.num[2] as f64 / d)
    }

    /// Exact image under A.
    pub fn image(&self, a: &WMat3) -> PeriodicPoint {
        let v = intmat::apply(a, &self.num);
        PeriodicPoint { num: v.map(|c| c.rem_euclid(self.den)), den: self.den }
    }

    /// Reduced form, for comparing points with different denominators.
    pub fn reduced(&self) -> ([i128; 3], i128) {
        let mut g = self.den;
        for c in self.num {
            g = gcd(g, c);
        }
        (self.num.map(|c| c / g), self.den / g)
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn period_matrix(a: &AnosovMatrix, n: u32) -> Result<WMat3, TorusError> {
    let mut b = intmat::pow_checked(&a.wide(), n)?;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= 1;
    }
    Ok(b)
}

/// |det(A^n − I)| in exact arithmetic.
pub fn period_count(a: &AnosovMatrix, n: u32) -> Result<i128, TorusError> {
    Ok(intmat::det(&period_matrix(a, n)?).abs())
}

/// All x ∈ [0,1)³ with A^n x = x mod 1, sorted by exact coordinates.
pub fn periodic_points(a: &AnosovMatrix, n: u32) -> Result<Vec<PeriodicPoint>, TorusError> {
    let b = period_matrix(a, n)?;
    let det = intmat::det(&b);
    if det == 0 {
        return Err(TorusError::DegeneratePeriod(n));
    }
    let count = det.abs();
    if count > MAX_POINTS {
        return Err(TorusError::TooManyPoints(count));
    }
    let h = intmat::column_hermite(&b);
    let mut adj = intmat::adjugate(&b);
    if det < 0 {
        for row in adj.iter_mut() {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    for m0 in 0..h[0][0] {
        for m1 in 0..h[1][1] {
            for m2 in 0..h[2][2] {
                let v = intmat::apply(&adj, &[m0, m1, m2]);
                out.push(PeriodicPoint { num: v.map(|c| c.rem_euclid(count)), den: count });
            }
        }
    }
    out.sort();
    Ok(out)
}

/// A periodic orbit of A with its minimal period.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub period: u32,
    pub points: Vec<PeriodicPoint>,
}

/// All periodic orbits of minimal period ≤ `max_period`.
pub fn periodic_orbits(a: &AnosovMatrix, max_period: u32) -> Result<Vec<PeriodicOrbit>, TorusError> {
    let aw = a.wide();
    let mut orbits = Vec::new();
    for n in 1..=max_period {
        let pts = periodic_points(a, n)?;
        let mut seen: HashSet<PeriodicPoint> = HashSet::new();
        for p in pts {
            if seen.contains(&p) {
                continue;
            }
            let mut orbit = vec![p.clone()];
            let mut cur = p.image(&aw);
            while cur != p {
                orbit.push(cur.clone());
                cur = cur.image(&aw);
            }
            for q in &orbit {
                seen.insert(q.clone());
            }
            if orbit.len() as u32 == n {
                orbits.push(PeriodicOrbit { period: n, points: orbit });
            }
        }
    }
    Ok(orbits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_core::{torus_distance, IMat3};

    const M: IMat3 = [[1, 1, 0], [0, 0, 1], [1, 0, 0]];

    /// Brute-force oracle: enumerate integer m in the bounding box of
    /// (A^n − I)[0,1)³ and keep solutions x = (A^n − I)⁻¹m inside [0,1)³.
    fn brute_force_count(a: &AnosovMatrix, n: u32) -> usize {
        let b = period_matrix(a, n).unwrap();
        let det = intmat::det(&b);
        let adj = intmat::adjugate(&b);
        let mut lo = [0i128; 3];
        let mut hi = [0i128; 3];
        for i in 0..3 {
            for j in 0..3 {
                lo[i] += b[i][j].min(0);
                hi[i] += b[i][j].max(0);
            }
        }
        let mut count = 0;
        for m0 in lo[0]..=hi[0] {
            for m1 in lo[1]..=hi[1] {
                for m2 in lo[2]..=hi[2] {
                    let v = intmat::apply(&adj, &[m0, m1, m2]);
                    // x_i = v_i / det must lie in [0, 1)
                    let inside = v.iter().all(|&c| if det > 0 { c >= 0 && c < det } else { c <= 0 && c > det });
                    if inside {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn counts_match_determinants_and_oracle() {
        let m1 = AnosovMatrix::new(M, 1).unwrap();
        let m6 = AnosovMatrix::new(M, 6).unwrap();
        let expected_m = [1, 3, 1, 3, 11, 9];
        for n in 1..=6u32 {
            let pts = periodic_points(&m1, n).unwrap();
            assert_eq!(pts.len() as i128, period_count(&m1, n).unwrap());
            assert_eq!(pts.len(), expected_m[n as usize - 1]);
            assert_eq!(pts.len(), brute_force_count(&m1, n));
        }
        for n in 1..=2u32 {
            let pts = periodic_points(&m6, n).unwrap();
            assert_eq!(pts.len(), brute_force_count(&m6, n));
        }
        assert_eq!(periodic_points(&m6, 1).unwrap().len(), 9);
    }

    #[test]
    fn points_are_periodic_and_distinct() {
        let m6 = AnosovMatrix::new(M, 6).unwrap();
        for n in 1..=3u32 {
            let pts = periodic_points(&m6, n).unwrap();
            let set: HashSet<_> = pts.iter().map(|p| p.reduced()).collect();
            assert_eq!(set.len(), pts.len());
            for p in &pts {
                let mut x = p.point();
                for _ in 0..n {
                    x = m6.apply(&x);
                }
                assert!(torus_distance(&x, &p.point()) < 1e-10);
            }
        }
    }

    #[test]
    fn orbits_partition_points() {
        let m1 = AnosovMatrix::new(M, 1).unwrap();
        let orbits = periodic_orbits(&m1, 4).unwrap();
        // points of period dividing 4 are exactly the orbits whose period divides 4
        let total4: usize = orbits.iter().filter(|o| 4 % o.period == 0).map(|o| o.points.len()).sum();
        assert_eq!(total4 as i128, period_count(&m1, 4).unwrap());
        for o in &orbits {
            assert_eq!(o.points.len() as u32, o.period);
        }
    }

    #[test]
    fn degenerate_period_is_reported() {
        // A hyperbolic matrix never has det(A^n − I) = 0; check the error on a synthetic matrix
        let id = AnosovMatrix::new([[1, 0, 0], [0, 1, 0], [0, 0, 1]], 1).unwrap();
        assert!(matches!(periodic_points(&id, 1), Err(TorusError::DegeneratePeriod(1))));
    }
}
