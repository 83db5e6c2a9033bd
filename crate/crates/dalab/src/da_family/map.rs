//! The perturbed map f = A ∘ (id + φ) with φ valued in E^s.

use super::{BumpProfile, DaError, SiteSelection};
use crate::torus_core::{
    torus_delta, torus_distance, transversal_length, AnosovMatrix, ConeField, SplittingFrame, TorusError, TorusPoint,
    TransversalLength, Vec3,
};
use nalgebra::{Matrix2, Matrix3, Vector2};
use std::sync::OnceLock;

/// Free parameters of the construction.
#[derive(Clone, Debug)]
pub struct DAParams {
    pub anosov: AnosovMatrix,
    pub sites: SiteSelection,
    /// Radial gain at p: Df(p)|E^s = (1 + c_p)·A|E^s.
    pub c_p: f64,
    /// Target moduli of Df(q)|E^s.
    pub s1: f64,
    pub s2: f64,
    pub bump: BumpProfile,
    pub cones: ConeField,
    pub beta: f64,
}

impl DAParams {
    pub fn frame(&self) -> &SplittingFrame {
        self.cones.frame()
    }

    /// Parameter invariants: p becomes a source, q a saddle of stable index
    /// one with area expansion on E^s.
    pub fn check(&self) -> Result<(), DaError> {
        let ls = self.frame().lambda_s();
        if !((1.0 + self.c_p) * ls > 1.0) {
            return Err(DaError::InvalidParams(format!("(1 + c_p)·λ_s = {} must exceed 1", (1.0 + self.c_p) * ls)));
        }
        if !(self.s1 < 1.0 && 1.0 < self.s2) {
            return Err(DaError::InvalidParams(format!("need s1 < 1 < s2, got ({}, {})", self.s1, self.s2)));
        }
        if !(self.s1 * self.s2 > 1.0) {
            return Err(DaError::InvalidParams(format!("need s1·s2 > 1, got {}", self.s1 * self.s2)));
        }
        if !(self.beta > 0.0) {
            return Err(DaError::InvalidParams("beta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Bump {
    center: TorusPoint,
    gain: Matrix2<f64>,
}

/// Design-stage bounds derived from the profile, without sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignCheck {
    /// Minimum over the bump profile of det(I + Dφ); positive means f is a
    /// local diffeomorphism.
    pub min_det: f64,
    /// Norm of Df on E^s at the core of each bump.
    pub core_norm_p: f64,
    pub core_norm_q: f64,
}

/// The DA diffeomorphism.
#[derive(Debug)]
pub struct DAMap {
    params: DAParams,
    frame: SplittingFrame,
    a: Matrix3<f64>,
    a_inv: Matrix3<f64>,
    ab: Matrix3<f64>,
    a_adapted: Matrix3<f64>,
    basis: Matrix3<f64>,
    basis_inv: Matrix3<f64>,
    bumps: [Bump; 2],
    delta: f64,
    reach: f64,
    sup_phi: f64,
    nu_bound: f64,
    transversal: OnceLock<Result<TransversalLength, TorusError>>,
}

/// Builds the map after checking parameter invariants and the design-stage
/// budgets: f must be a local diffeomorphism and the core norms of Df on
/// E^s must respect the (1 + β) budget.
pub fn build_da(params: DAParams) -> Result<DAMap, DaError> {
    params.check()?;
    let map = DAMap::build_unchecked(params);
    let d = map.design_check();
    let budget = 1.0 + map.params.beta;
    if d.min_det <= 0.0 {
        return Err(DaError::GainInfeasible(format!(
            "det(I + Dφ) reaches {:.4} on the bump transition; f is not a diffeomorphism",
            d.min_det
        )));
    }
    if d.core_norm_p > budget || d.core_norm_q > budget {
        return Err(DaError::GainInfeasible(format!(
            "core norms ({:.4}, {:.4}) exceed 1 + β = {budget}",
            d.core_norm_p, d.core_norm_q
        )));
    }
    Ok(map)
}

impl DAMap {
    /// Gains G_p = c_p·I and G_q = (A|E^s)⁻¹·diag(s₁, s₂) − I, with no checks.
    pub fn build_unchecked(params: DAParams) -> DAMap {
        let frame = params.frame().clone();
        let g_p = Matrix2::identity() * params.c_p;
        let a_s_inv = frame.a_stable().try_inverse().expect("A|E^s is invertible");
        let g_q = a_s_inv * Matrix2::new(params.s1, 0.0, 0.0, params.s2) - Matrix2::identity();
        Self::with_gains(params, g_p, g_q)
    }

    /// The unperturbed map f = A with the same sites and cones.
    pub fn linear(params: DAParams) -> DAMap {
        Self::with_gains(params, Matrix2::zeros(), Matrix2::zeros())
    }

    pub fn with_gains(params: DAParams, g_p: Matrix2<f64>, g_q: Matrix2<f64>) -> DAMap {
        let frame = params.frame().clone();
        let a = params.anosov.matrix_f64();
        let a_inv = params.anosov.inverse_f64();
        let basis = *frame.basis();
        let basis_inv = *frame.basis_inv();
        let delta = params.sites.delta;
        let bumps = [Bump { center: params.sites.p, gain: g_p }, Bump { center: params.sites.q, gain: g_q }];
        let wmax = params.bump.max_w_rho();
        let sup_phi = bumps.iter().map(|b| b.gain.singular_values().max() * delta * wmax).fold(0.0, f64::max);
        let nu_bound = frame.lambda_s() * sup_phi;
        let reach = frame.basis_norm() * delta * (1.0 + 1e-12);
        DAMap {
            ab: a * basis,
            a_adapted: basis_inv * a * basis,
            frame,
            a,
            a_inv,
            basis,
            basis_inv,
            bumps,
            delta,
            reach,
            sup_phi,
            nu_bound,
            params,
            transversal: OnceLock::new(),
        }
    }

    pub fn params(&self) -> &DAParams {
        &self.params
    }

    pub fn frame(&self) -> &SplittingFrame {
        &self.frame
    }

    pub fn anosov(&self) -> &AnosovMatrix {
        &self.params.anosov
    }

    pub fn cones(&self) -> &ConeField {
        &self.params.cones
    }

    pub fn sites(&self) -> &SiteSelection {
        &self.params.sites
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gain_p(&self) -> &Matrix2<f64> {
        &self.bumps[0].gain
    }

    pub fn gain_q(&self) -> &Matrix2<f64> {
        &self.bumps[1].gain
    }

    /// Certified sup |φ| in the adapted metric.
    pub fn sup_phi(&self) -> f64 {
        self.sup_phi
    }

    /// Certified sup-distance of f to A: λ_s·sup|φ|.
    pub fn nu_bound(&self) -> f64 {
        self.nu_bound
    }

    pub fn is_linear(&self) -> bool {
        self.bumps.iter().all(|b| b.gain == Matrix2::zeros())
    }

    /// Bump centers p and q.
    pub fn centers(&self) -> [TorusPoint; 2] {
        [self.bumps[0].center, self.bumps[1].center]
    }

    /// Euclidean radius enclosing each adapted δ-ball.
    pub fn euclidean_reach(&self) -> f64 {
        self.reach
    }

    /// Covering constant L for stable discs of radius δ.
    pub fn transversal_length(&self) -> Result<TransversalLength, TorusError> {
        self.transversal
            .get_or_init(|| transversal_length(&self.frame, self.delta, self.params.cones.kappa_u()))
            .clone()
    }

    /// Certified bound for the adapted operator norm of Df.
    pub fn lipschitz_bound(&self) -> f64 {
        let g = self.bumps.iter().map(|b| b.gain.norm()).fold(0.0, f64::max);
        let inner = 1.0 + g * (1.0 + self.params.bump.radial_slope_bound());
        self.a_adapted.norm() * inner
    }

    /// Adapted offset from bump k when it lies inside the open δ-ball.
    #[inline]
    fn local(&self, k: usize, x: &TorusPoint) -> Option<Vec3> {
        let d = torus_delta(&self.bumps[k].center, x);
        if d.amax() >= self.reach {
            return None;
        }
        let c = self.basis_inv * d;
        if c.norm() < self.delta {
            Some(c)
        } else {
            None
        }
    }

    /// Adapted distances from x to p and q (minimal Euclidean lift).
    pub fn site_distances(&self, x: &TorusPoint) -> (f64, f64) {
        (self.frame.local_distance(&self.bumps[0].center, x), self.frame.local_distance(&self.bumps[1].center, x))
    }

    pub fn in_support(&self, x: &TorusPoint) -> bool {
        (0..2).any(|k| self.local(k, x).is_some())
    }

    /// φ(x) in adapted coordinates (zero unstable component).
    pub fn phi_adapted(&self, x: &TorusPoint) -> Vec3 {
        let mut out = Vec3::zeros();
        for k in 0..2 {
            if let Some(c) = self.local(k, x) {
                let (rho, _) = self.params.bump.eval(c.norm() / self.delta);
                let gs = self.bumps[k].gain * Vector2::new(c[1], c[2]);
                out[1] += rho * gs[0];
                out[2] += rho * gs[1];
            }
        }
        out
    }

    pub fn phi(&self, x: &TorusPoint) -> Vec3 {
        self.basis * self.phi_adapted(x)
    }

    /// The lifted displacement f̃(x) − A·x = A·φ(x) in Euclidean coordinates.
    pub fn perturbation(&self, x: &TorusPoint) -> Vec3 {
        self.ab * self.phi_adapted(x)
    }

    /// A·x (lifted, unwrapped) for a point of [0,1)³.
    pub fn linear_lift(&self, x: &TorusPoint) -> Vec3 {
        self.a * x.to_vec()
    }

    pub fn a(&self) -> &Matrix3<f64> {
        &self.a
    }

    pub fn a_inv(&self) -> &Matrix3<f64> {
        &self.a_inv
    }

    /// A in adapted coordinates: diag(λ_u^k, A|E^s).
    pub fn a_adapted(&self) -> &Matrix3<f64> {
        &self.a_adapted
    }

    pub fn eval_f(&self, x: &TorusPoint) -> TorusPoint {
        let mut y = self.a * x.to_vec();
        let phi = self.phi_adapted(x);
        if phi != Vec3::zeros() {
            y += self.ab * phi;
        }
        TorusPoint::from_vec(&y)
    }

    /// Dφ in adapted coordinates.
    pub fn dphi_adapted(&self, x: &TorusPoint) -> Matrix3<f64> {
        let mut d = Matrix3::zeros();
        for k in 0..2 {
            if let Some(c) = self.local(k, x) {
                let r = c.norm();
                let (rho, drho) = self.params.bump.eval(r / self.delta);
                let g = &self.bumps[k].gain;
                let gs = g * Vector2::new(c[1], c[2]);
                let grad = if r > 0.0 { c * (drho / (self.delta * r)) } else { Vec3::zeros() };
                for i in 0..2 {
                    for j in 0..3 {
                        d[(1 + i, j)] += gs[i] * grad[j];
                    }
                    for j in 0..2 {
                        d[(1 + i, 1 + j)] += rho * g[(i, j)];
                    }
                }
            }
        }
        d
    }

    /// Df in adapted coordinates: A_a·(I + Dφ_a).
    pub fn eval_df_adapted(&self, x: &TorusPoint) -> Matrix3<f64> {
        self.a_adapted * (Matrix3::identity() + self.dphi_adapted(x))
    }

    pub fn eval_df(&self, x: &TorusPoint) -> Matrix3<f64> {
        self.a + self.ab * self.dphi_adapted(x) * self.basis_inv
    }

    /// f⁻¹(y): x + φ(x) = A⁻¹y is solved inside the stable leaf of A⁻¹y by
    /// damped Newton iteration.
    pub fn eval_f_inv(&self, y: &TorusPoint, tol: f64) -> Result<TorusPoint, DaError> {
        let z = TorusPoint::from_vec(&(self.a_inv * y.to_vec()));
        let capture = self.delta + self.sup_phi * 1.001 + 1e-15;
        for k in 0..2 {
            let b = &self.bumps[k];
            if b.gain == Matrix2::zeros() {
                continue;
            }
            let d = torus_delta(&b.center, &z);
            if d.amax() > self.reach * capture / self.delta {
                continue;
            }
            let c = self.basis_inv * d;
            if c.norm() > capture {
                continue;
            }
            let e = self.solve_leaf(b, c)?;
            let x = b.center.translate(&(self.basis * e));
            let err = torus_distance(&self.eval_f(&x), y);
            if err > tol {
                return Err(DaError::NoConvergence(err));
            }
            return Ok(x);
        }
        Ok(z)
    }

    /// Solves e + ρ(|e|/δ)·G·Π_s e = c for e with e_u = c_u.
    fn solve_leaf(&self, b: &Bump, c: Vec3) -> Result<Vec3, DaError> {
        let t = Vector2::new(c[1], c[2]);
        let eu = c[0];
        let resid = |e: &Vector2<f64>| -> (Vector2<f64>, f64, f64, f64) {
            let r = (eu * eu + e.norm_squared()).sqrt();
            let (rho, drho) = self.params.bump.eval(r / self.delta);
            (e + b.gain * e * rho - t, rho, drho, r)
        };
        let mut e = t;
        let (mut f, mut rho, mut drho, mut r) = resid(&e);
        let scale = self.delta;
        let floor = 4e-16 * (t.norm() + eu.abs() + scale);
        for _ in 0..100 {
            if f.norm() <= floor {
                break;
            }
            let ge = b.gain * e;
            let mut j = Matrix2::identity() + b.gain * rho;
            if r > 0.0 {
                let k = drho / (self.delta * r);
                j += ge * e.transpose() * k;
            }
            let step = match j.try_inverse() {
                Some(ji) => ji * f,
                None => return Err(DaError::NoConvergence(f.norm())),
            };
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = e - step * lam;
                let (fc, rc, dc, rr) = resid(&cand);
                if fc.norm() < f.norm() {
                    e = cand;
                    f = fc;
                    rho = rc;
                    drho = dc;
                    r = rr;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if f.norm() > 1e-12 * scale {
            return Err(DaError::NoConvergence(f.norm()));
        }
        Ok(Vec3::new(eu, e[0], e[1]))
    }

    /// Minimum of det(I + Dφ) over the bump profile and the design norms.
    ///
    /// In adapted coordinates I + Dφ is block lower triangular with stable
    /// block I + ρG + (w ρ'(w)) G ŝŝᵀ, |ŝ| ≤ 1. Its determinant is affine in
    /// |ŝ|², so the extremes are |ŝ| ∈ {0, 1}, scanned over radius and angle.
    pub fn design_check(&self) -> DesignCheck {
        let bump = &self.params.bump;
        let mut min_det = f64::INFINITY;
        let nw = 4000;
        let nt = 256;
        for b in &self.bumps {
            for i in 0..=nw {
                let w = i as f64 / nw as f64;
                let (rho, drho) = bump.eval(w);
                let eps = w * drho;
                let base = Matrix2::identity() + b.gain * rho;
                min_det = min_det.min(base.determinant());
                for j in 0..nt {
                    let th = std::f64::consts::TAU * j as f64 / nt as f64;
                    let s = Vector2::new(th.cos(), th.sin());
                    let m = base + b.gain * s * s.transpose() * eps;
                    min_det = min_det.min(m.determinant());
                }
            }
        }
        let a_s = self.frame.a_stable();
        let core = |g: &Matrix2<f64>| (a_s * (Matrix2::identity() + g)).singular_values().max();
        DesignCheck { min_det, core_norm_p: core(&self.bumps[0].gain), core_norm_q: core(&self.bumps[1].gain) }
    }
}
