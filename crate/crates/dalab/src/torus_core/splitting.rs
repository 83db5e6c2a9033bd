//! Hyperbolic splitting of an integer Anosov matrix and the adapted frame.

use super::intmat::{self, IMat3, WMat3};
use super::{torus_delta, TorusError, TorusPoint, Vec3};
use nalgebra::{Complex, Matrix2, Matrix3, Vector2};

const MAX_POWER: u32 = 64;

/// Base matrix M, chosen power k, and the exact composite A = M^k.
#[derive(Clone, Debug, PartialEq)]
pub struct AnosovMatrix {
    base: IMat3,
    power: u32,
    composite: IMat3,
    inverse: IMat3,
}

impl AnosovMatrix {
    pub fn new(base: IMat3, power: u32) -> Result<Self, TorusError> {
        let wb = intmat::widen(&base);
        let d = intmat::det(&wb);
        if d.abs() != 1 {
            return Err(TorusError::NotUnimodular(d));
        }
        let comp = intmat::pow_checked(&wb, power)?;
        let dc = intmat::det(&comp);
        let mut inv = intmat::adjugate(&comp);
        if dc == -1 {
            for row in inv.iter_mut() {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
        }
        Ok(AnosovMatrix { base, power, composite: intmat::narrow(&comp)?, inverse: intmat::narrow(&inv)? })
    }

    pub fn base(&self) -> &IMat3 {
        &self.base
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// A = M^k.
    pub fn matrix(&self) -> &IMat3 {
        &self.composite
    }

    /// A⁻¹, an integer matrix since |det A| = 1.
    pub fn inverse(&self) -> &IMat3 {
        &self.inverse
    }

    pub fn matrix_f64(&self) -> Matrix3<f64> {
        intmat::to_f64(&self.composite)
    }

    pub fn inverse_f64(&self) -> Matrix3<f64> {
        intmat::to_f64(&self.inverse)
    }

    pub fn wide(&self) -> WMat3 {
        intmat::widen(&self.composite)
    }

    /// A·x mod 1.
    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_vec(&(self.matrix_f64() * x.to_vec()))
    }

    pub fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_vec(&(self.inverse_f64() * x.to_vec()))
    }

    /// Same base matrix at power 1.
    pub fn base_power_one(&self) -> AnosovMatrix {
        AnosovMatrix::new(self.base, 1).expect("base matrix was validated")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplittingWarning {
    /// E^s is spanned by two real eigenvectors instead of a complex pair.
    NoComplexPair,
}

/// Splitting E^u ⊕ E^s of M with the adapted basis (e_u, s₁, s₂).
#[derive(Clone, Debug)]
pub struct SplittingFrame {
    lambda_u: f64,
    stable_eigs: [Complex<f64>; 2],
    e_u: Vec3,
    s_basis: [Vec3; 2],
    basis: Matrix3<f64>,
    basis_inv: Matrix3<f64>,
    power: u32,
    lambda_s: f64,
    lambda_u_inv: f64,
    a_stable: Matrix2<f64>,
    a_unstable: f64,
    lambda_target: f64,
    warnings: Vec<SplittingWarning>,
}

impl SplittingFrame {
    /// Real unstable eigenvalue of M.
    pub fn lambda_u(&self) -> f64 {
        self.lambda_u
    }

    /// Stable eigenvalues of M.
    pub fn stable_eigenvalues(&self) -> [Complex<f64>; 2] {
        self.stable_eigs
    }

    pub fn e_u(&self) -> Vec3 {
        self.e_u
    }

    pub fn s_basis(&self) -> [Vec3; 2] {
        self.s_basis
    }

    /// Columns (e_u, s₁, s₂).
    pub fn basis(&self) -> &Matrix3<f64> {
        &self.basis
    }

    pub fn basis_inv(&self) -> &Matrix3<f64> {
        &self.basis_inv
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// Norm of A on E^s in the adapted metric.
    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    /// Norm of A⁻¹ on E^u.
    pub fn lambda_u_inv(&self) -> f64 {
        self.lambda_u_inv
    }

    /// A restricted to E^s in the basis (s₁, s₂).
    pub fn a_stable(&self) -> &Matrix2<f64> {
        &self.a_stable
    }

    /// A restricted to E^u (the eigenvalue λ_u^k).
    pub fn a_unstable(&self) -> f64 {
        self.a_unstable
    }

    pub fn lambda_target(&self) -> f64 {
        self.lambda_target
    }

    pub fn warnings(&self) -> &[SplittingWarning] {
        &self.warnings
    }

    pub fn has_complex_pair(&self) -> bool {
        !self.warnings.contains(&SplittingWarning::NoComplexPair)
    }

    /// Euclidean vector to adapted coordinates (u, s₁, s₂).
    pub fn to_adapted(&self, v: &Vec3) -> Vec3 {
        self.basis_inv * v
    }

    pub fn from_adapted(&self, c: &Vec3) -> Vec3 {
        self.basis * c
    }

    /// Euclidean vector from stable coordinates (s₁, s₂).
    pub fn from_stable(&self, s: &Vector2<f64>) -> Vec3 {
        self.s_basis[0] * s[0] + self.s_basis[1] * s[1]
    }

    pub fn adapted_norm(&self, v: &Vec3) -> f64 {
        self.to_adapted(v).norm()
    }

    pub fn proj_u(&self, v: &Vec3) -> Vec3 {
        self.e_u * self.to_adapted(v)[0]
    }

    pub fn proj_s(&self, v: &Vec3) -> Vec3 {
        let c = self.to_adapted(v);
        self.s_basis[0] * c[1] + self.s_basis[1] * c[2]
    }

    /// Adapted length of the minimal-Euclidean-lift difference; exact for
    /// points much closer than the injectivity radius.
    pub fn local_distance(&self, a: &TorusPoint, b: &TorusPoint) -> f64 {
        self.adapted_norm(&torus_delta(a, b))
    }

    /// Adapted torus distance, minimizing over lattice lifts.
    pub fn adapted_distance(&self, a: &TorusPoint, b: &TorusPoint) -> f64 {
        let d = torus_delta(a, b);
        let mut best = f64::INFINITY;
        for i in -2..=2 {
            for j in -2..=2 {
                for k in -2..=2 {
                    let v = d + Vec3::new(i as f64, j as f64, k as f64);
                    best = best.min(self.adapted_norm(&v));
                }
            }
        }
        best
    }

    /// Operator norm of B (adapted to Euclidean), used for ball inclusions.
    pub fn basis_norm(&self) -> f64 {
        self.basis.singular_values().max()
    }

    pub fn basis_inv_norm(&self) -> f64 {
        self.basis_inv.singular_values().max()
    }
}

fn char_poly(m: &IMat3) -> [f64; 3] {
    // λ³ + c2 λ² + c1 λ + c0
    let w = intmat::widen(m);
    let tr = w[0][0] + w[1][1] + w[2][2];
    let minors = (w[0][0] * w[1][1] - w[0][1] * w[1][0])
        + (w[0][0] * w[2][2] - w[0][2] * w[2][0])
        + (w[1][1] * w[2][2] - w[1][2] * w[2][1]);
    let d = intmat::det(&w);
    [-(d as f64), minors as f64, -(tr as f64)]
}

fn eval_poly(c: &[f64; 3], x: f64) -> f64 {
    ((x + c[2]) * x + c[1]) * x + c[0]
}

fn polish(c: &[f64; 3], mut x: f64) -> f64 {
    for _ in 0..4 {
        let f = eval_poly(c, x);
        let df = (3.0 * x + 2.0 * c[2]) * x + c[1];
        if df == 0.0 {
            break;
        }
        let nx = x - f / df;
        if !nx.is_finite() {
            break;
        }
        x = nx;
    }
    x
}

/// A real root by bisection on the Cauchy bracket.
fn real_root(c: &[f64; 3]) -> f64 {
    let r = 1.0 + c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut lo, mut hi) = (-r, r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval_poly(c, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    polish(c, 0.5 * (lo + hi))
}

fn roots(c: &[f64; 3]) -> [Complex<f64>; 3] {
    let r = real_root(c);
    let b1 = c[2] + r;
    let b0 = c[1] + r * b1;
    let disc = b1 * b1 - 4.0 * b0;
    if disc < 0.0 {
        let re = -0.5 * b1;
        let im = 0.5 * (-disc).sqrt();
        [Complex::new(r, 0.0), Complex::new(re, im), Complex::new(re, -im)]
    } else {
        let s = disc.sqrt();
        let r1 = polish(c, 0.5 * (-b1 + s));
        let r2 = polish(c, 0.5 * (-b1 - s));
        [Complex::new(r, 0.0), Complex::new(r1, 0.0), Complex::new(r2, 0.0)]
    }
}

fn real_null_vector(m: &Matrix3<f64>, lambda: f64) -> Vec3 {
    let d = m - Matrix3::identity() * lambda;
    let rows = [d.row(0).transpose(), d.row(1).transpose(), d.row(2).transpose()];
    let cands = [rows[0].cross(&rows[1]), rows[0].cross(&rows[2]), rows[1].cross(&rows[2])];
    let mut best = cands[0];
    for c in cands.iter().skip(1) {
        if c.norm() > best.norm() {
            best = *c;
        }
    }
    let mut v = best / best.norm();
    let imax = (0..3).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap();
    if v[imax] < 0.0 {
        v = -v;
    }
    v
}

type CVec3 = [Complex<f64>; 3];

fn ccross(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn complex_null_vector(m: &Matrix3<f64>, mu: Complex<f64>) -> (Vec3, Vec3) {
    let row = |i: usize| -> CVec3 {
        let mut r = [Complex::new(0.0, 0.0); 3];
        for j in 0..3 {
            r[j] = Complex::new(m[(i, j)], 0.0) - if i == j { mu } else { Complex::new(0.0, 0.0) };
        }
        r
    };
    let rows = [row(0), row(1), row(2)];
    let cands = [ccross(&rows[0], &rows[1]), ccross(&rows[0], &rows[2]), ccross(&rows[1], &rows[2])];
    let nrm = |v: &CVec3| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut best = cands[0];
    for c in cands.iter().skip(1) {
        if nrm(c) > nrm(&best) {
            best = *c;
        }
    }
    let x = Vec3::new(best[0].re, best[1].re, best[2].re);
    let y = Vec3::new(best[0].im, best[1].im, best[2].im);
    // rotate the phase so that Re ⟂ Im with |Re| ≥ |Im|
    let theta = 0.5 * (2.0 * x.dot(&y)).atan2(x.norm_squared() - y.norm_squared());
    let (sn, cs) = theta.sin_cos();
    let re = x * cs + y * sn;
    let im = y * cs - x * sn;
    let scale = re.norm();
    (re / scale, im / scale)
}

fn complex_pow(z: Complex<f64>, k: u32) -> Complex<f64> {
    let mut acc = Complex::new(1.0, 0.0);
    for _ in 0..k {
        acc *= z;
    }
    acc
}

/// Smallest power k of M with both adapted rates below `lambda_target`,
/// together with the adapted frame.
pub fn hyperbolic_splitting(m: &IMat3, lambda_target: f64) -> Result<(AnosovMatrix, SplittingFrame), TorusError> {
    let wm = intmat::widen(m);
    let d = intmat::det(&wm);
    if d.abs() != 1 {
        return Err(TorusError::NotUnimodular(d));
    }
    let c = char_poly(m);
    // With |det| = 1 a root of modulus one forces ±1 to be a root, which is
    // decided exactly on the integer polynomial.
    for x in [1.0f64, -1.0] {
        if eval_poly(&c, x) == 0.0 {
            return Err(TorusError::NotAnosov(1.0));
        }
    }
    let rts = roots(&c);
    for z in &rts {
        if (z.norm() - 1.0).abs() < 1e-9 {
            return Err(TorusError::NotAnosov(z.norm()));
        }
    }
    let unstable: Vec<Complex<f64>> = rts.iter().copied().filter(|z| z.norm() > 1.0).collect();
    let stable: Vec<Complex<f64>> = rts.iter().copied().filter(|z| z.norm() < 1.0).collect();
    if unstable.len() != 1 {
        return Err(TorusError::UnsupportedSplitting(stable.len()));
    }
    let lambda_u = unstable[0].re;
    let mf = intmat::to_f64(m);
    let e_u = real_null_vector(&mf, lambda_u);

    let mut warnings = Vec::new();
    let complex_pair = stable[0].im.abs() > 0.0;
    let (s1, s2, mu_sorted) = if complex_pair {
        let mu = if stable[0].im > 0.0 { stable[0] } else { stable[1] };
        let (re, im) = complex_null_vector(&mf, mu);
        (re, -im, [mu, mu.conj()])
    } else {
        warnings.push(SplittingWarning::NoComplexPair);
        let (a, b) = (stable[0].re, stable[1].re);
        (real_null_vector(&mf, a), real_null_vector(&mf, b), [stable[0], stable[1]])
    };

    let basis = Matrix3::from_columns(&[e_u, s1, s2]);
    let basis_inv = basis.try_inverse().ok_or(TorusError::Residual(f64::INFINITY))?;

    // residual checks on M itself
    let ru = (mf * e_u - e_u * lambda_u).amax();
    let cs1 = basis_inv * (mf * s1);
    let cs2 = basis_inv * (mf * s2);
    let rs = cs1[0].abs().max(cs2[0].abs());
    let worst = ru.max(rs);
    if worst > 1e-10 {
        return Err(TorusError::Residual(worst));
    }

    let mu_mod = mu_sorted[0].norm().max(mu_sorted[1].norm());
    let mut power = 0;
    for k in 1..=MAX_POWER {
        let ls = mu_mod.powi(k as i32);
        let lu = lambda_u.abs().powi(-(k as i32));
        if ls < lambda_target && lu < lambda_target {
            power = k;
            break;
        }
    }
    if power == 0 {
        return Err(TorusError::PowerLimit(MAX_POWER));
    }
    let anosov = AnosovMatrix::new(*m, power)?;

    let a_stable = if complex_pair {
        let z = complex_pow(mu_sorted[0], power);
        Matrix2::new(z.re, -z.im, z.im, z.re)
    } else {
        Matrix2::new(mu_sorted[0].re.powi(power as i32), 0.0, 0.0, mu_sorted[1].re.powi(power as i32))
    };
    let a_unstable = lambda_u.powi(power as i32);
    let lambda_s = if complex_pair { mu_sorted[0].norm().powi(power as i32) } else { mu_mod.powi(power as i32) };
    let lambda_u_inv = lambda_u.abs().powi(-(power as i32));

    Ok((
        anosov,
        SplittingFrame {
            lambda_u,
            stable_eigs: mu_sorted,
            e_u,
            s_basis: [s1, s2],
            basis,
            basis_inv,
            power,
            lambda_s,
            lambda_u_inv,
            a_stable,
            a_unstable,
            lambda_target,
            warnings,
        },
    ))
}
