//! Sampled verification of the construction properties and plaque trapping.

use super::{local_stable_manifold_q, DAMap};
use crate::rng;
use crate::torus_core::{torus_delta, TorusPoint, Vec3};
use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

const CHUNK: usize = 2048;
const TRAP_DIRECTIONS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst margin over the sample budget; positive means satisfied.
    pub margin: f64,
    pub witness: Option<TorusPoint>,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub checks: Vec<PropertyCheck>,
    pub seed: u64,
    pub samples: usize,
    pub trapping_samples: usize,
    /// Rate used for property (d) outside the bumps.
    pub lambda: f64,
    pub measured_nu: f64,
    pub nu_bound: f64,
    pub measured_beta: f64,
    pub max_cone_width: f64,
    pub max_inverse_factor: f64,
    pub min_sampled_det: f64,
    pub max_sampled_norm: f64,
    pub moduli_p: [f64; 3],
    pub moduli_q: [f64; 3],
    pub stable_manifold_length: Option<f64>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Flat `key: value` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "samples: {}", self.samples);
        let _ = writeln!(s, "trapping_samples: {}", self.trapping_samples);
        for c in &self.checks {
            let _ = writeln!(s, "{}.pass: {}", c.name, c.passed);
            let _ = writeln!(s, "{}.margin: {:e}", c.name, c.margin);
            if let Some(w) = c.witness {
                let [x, y, z] = w.coords();
                let _ = writeln!(s, "{}.witness: {x:e} {y:e} {z:e}", c.name);
            }
        }
        let _ = writeln!(s, "lambda: {:e}", self.lambda);
        let _ = writeln!(s, "measured_nu: {:e}", self.measured_nu);
        let _ = writeln!(s, "nu_bound: {:e}", self.nu_bound);
        let _ = writeln!(s, "measured_beta: {:e}", self.measured_beta);
        let _ = writeln!(s, "max_cone_width: {:e}", self.max_cone_width);
        let _ = writeln!(s, "max_inverse_factor: {:e}", self.max_inverse_factor);
        let _ = writeln!(s, "min_sampled_det: {:e}", self.min_sampled_det);
        let _ = writeln!(s, "max_sampled_norm: {:e}", self.max_sampled_norm);
        let [a, b, c] = self.moduli_p;
        let _ = writeln!(s, "moduli_p: {a:e} {b:e} {c:e}");
        let [a, b, c] = self.moduli_q;
        let _ = writeln!(s, "moduli_q: {a:e} {b:e} {c:e}");
        match self.stable_manifold_length {
            Some(l) => {
                let _ = writeln!(s, "stable_manifold_length_q: {l:e}");
            }
            None => {
                let _ = writeln!(s, "stable_manifold_length_q: none");
            }
        }
        let _ = writeln!(s, "all_passed: {}", self.all_passed());
        s
    }

    /// CSV of (property, pass, margin, witness).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("property,pass,margin,witness_x,witness_y,witness_z\n");
        for c in &self.checks {
            let w = match c.witness {
                Some(w) => {
                    let [x, y, z] = w.coords();
                    format!("{x:e},{y:e},{z:e}")
                }
                None => ",,".to_string(),
            };
            let _ = writeln!(s, "{},{},{:e},{}", c.name, c.passed, c.margin, w);
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
struct Worst {
    margin: f64,
    witness: Option<TorusPoint>,
}

impl Worst {
    fn new() -> Self {
        Worst { margin: f64::INFINITY, witness: None }
    }

    fn offer(&mut self, margin: f64, x: &TorusPoint) {
        if margin < self.margin {
            self.margin = margin;
            self.witness = Some(*x);
        }
    }

    fn merge(&mut self, o: &Worst) {
        if o.margin < self.margin {
            *self = *o;
        }
    }
}

#[derive(Clone, Debug)]
struct Partial {
    cone: Worst,
    width: Worst,
    inverse: Worst,
    outside: Worst,
    budget: Worst,
    nu: Worst,
    max_width: f64,
    max_inverse: f64,
    max_growth: f64,
    measured_nu: f64,
    min_det: f64,
    max_norm: f64,
}

impl Partial {
    fn new() -> Self {
        Partial {
            cone: Worst::new(),
            width: Worst::new(),
            inverse: Worst::new(),
            outside: Worst::new(),
            budget: Worst::new(),
            nu: Worst::new(),
            max_width: 0.0,
            max_inverse: 0.0,
            max_growth: 0.0,
            measured_nu: 0.0,
            min_det: f64::INFINITY,
            max_norm: 0.0,
        }
    }

    fn merge(&mut self, o: &Partial) {
        self.cone.merge(&o.cone);
        self.width.merge(&o.width);
        self.inverse.merge(&o.inverse);
        self.outside.merge(&o.outside);
        self.budget.merge(&o.budget);
        self.nu.merge(&o.nu);
        self.max_width = self.max_width.max(o.max_width);
        self.max_inverse = self.max_inverse.max(o.max_inverse);
        self.max_growth = self.max_growth.max(o.max_growth);
        self.measured_nu = self.measured_nu.max(o.measured_nu);
        self.min_det = self.min_det.min(o.min_det);
        self.max_norm = self.max_norm.max(o.max_norm);
    }
}

fn unit_sphere(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Stratified sample: a third uniform on the torus and a third each near p
/// and q with log-uniform adapted radius in [1e-4·δ, reach·δ].
pub fn stratified_point(map: &DAMap, rng: &mut ChaCha8Rng, i: usize, reach: f64) -> TorusPoint {
    match i % 3 {
        0 => TorusPoint::new(rng.gen(), rng.gen(), rng.gen()),
        k => {
            let center = map.centers()[k - 1];
            let lo = (1e-4f64).ln();
            let hi = reach.ln();
            let r = map.delta() * (lo + rng.gen::<f64>() * (hi - lo)).exp();
            let dir = unit_sphere(rng);
            center.translate(&map.frame().from_adapted(&(dir * r)))
        }
    }
}

fn moduli(m: &Matrix3<f64>) -> [f64; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0].norm(), ev[1].norm(), ev[2].norm()];
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

fn sample_chunk(map: &DAMap, seed: u64, chunk: usize, count: usize, lambda: f64) -> Partial {
    let mut rng = rng::stream(seed, "verify:cones", chunk as u64);
    let mut part = Partial::new();
    let frame = map.frame();
    let ku = map.cones().kappa_u();
    let kcs = map.cones().kappa_cs();
    let beta = map.params().beta;
    let ls = frame.lambda_s();
    let delta = map.delta();
    for j in 0..count {
        let x = stratified_point(map, &mut rng, chunk * CHUNK + j, 1.5);
        let df = map.eval_df_adapted(&x);
        part.min_det = part.min_det.min(df.determinant() / map.a_adapted().determinant());
        part.max_norm = part.max_norm.max(df.norm());

        // unstable cone vector
        let t = if rng.gen::<f64>() < 0.25 { 1.0 } else { rng.gen::<f64>() };
        let th = rng.gen::<f64>() * std::f64::consts::TAU;
        let v = Vec3::new(1.0, ku * t * th.cos(), ku * t * th.sin());
        let w = df * v;
        let wu = w[0].abs();
        let ws = (w[1] * w[1] + w[2] * w[2]).sqrt();
        let width = ws / wu;
        part.max_width = part.max_width.max(width);
        part.cone.offer(ku - width, &x);
        part.width.offer(0.9 * ku - width, &x);
        let inv = v.norm() / w.norm();
        part.max_inverse = part.max_inverse.max(inv);
        part.inverse.offer(ls - inv, &x);

        // center-stable cone vector
        let t = if rng.gen::<f64>() < 0.25 { 1.0 } else { rng.gen::<f64>() };
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let th = rng.gen::<f64>() * std::f64::consts::TAU;
        let v = Vec3::new(kcs * t * sign, th.cos(), th.sin());
        let growth = (df * v).norm() / v.norm();
        part.max_growth = part.max_growth.max(growth);
        part.budget.offer(1.0 + beta - growth, &x);
        let (dp, dq) = map.site_distances(&x);
        if dp >= delta && dq >= delta {
            part.outside.offer(lambda - growth, &x);
        }

        // distance to the linear map
        let lin = TorusPoint::from_vec(&map.linear_lift(&x));
        let nu = frame.adapted_norm(&torus_delta(&lin, &map.eval_f(&x)));
        part.measured_nu = part.measured_nu.max(nu);
        part.nu.offer(map.nu_bound() - nu, &x);
    }
    part
}

#[derive(Clone, Copy, Debug)]
struct Trap {
    trap: Worst,
    leaf: Worst,
}

fn trap_chunk(map: &DAMap, seed: u64, chunk: usize, count: usize) -> Trap {
    let mut rng = rng::stream(seed, "verify:trapping", chunk as u64);
    let frame = map.frame();
    let radius = 2.0 * map.delta();
    let mut out = Trap { trap: Worst::new(), leaf: Worst::new() };
    for j in 0..count {
        let x = stratified_point(map, &mut rng, chunk * CHUNK + j, 3.0);
        let fx = map.eval_f(&x);
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        for k in 0..TRAP_DIRECTIONS {
            let th = phase + std::f64::consts::TAU * k as f64 / TRAP_DIRECTIONS as f64;
            let v = frame.from_adapted(&Vec3::new(0.0, radius * th.cos(), radius * th.sin()));
            let fy = map.eval_f(&x.translate(&v));
            let c = frame.to_adapted(&torus_delta(&fx, &fy));
            let stable = (c[1] * c[1] + c[2] * c[2]).sqrt();
            out.trap.offer(radius - stable, &x);
            out.leaf.offer(1e-10 - c[0].abs(), &x);
            // an interior point of the plaque at a random radius
            let s = rng.gen::<f64>();
            let fy = map.eval_f(&x.translate(&(v * s)));
            let c = frame.to_adapted(&torus_delta(&fx, &fy));
            out.leaf.offer(1e-10 - c[0].abs(), &x);
        }
    }
    out
}

fn chunks(total: usize) -> Vec<(usize, usize)> {
    (0..total.div_ceil(CHUNK)).map(|c| (c, CHUNK.min(total - c * CHUNK))).collect()
}

/// Samples properties (a)–(d), plaque trapping, leaf exactness, fixed points
/// and the ν bound. Property (d) outside the bumps uses the rate λ of the
/// splitting target.
pub fn verify_construction(map: &DAMap, samples: usize, trapping_samples: usize, seed: u64) -> VerificationReport {
    let lambda = map.frame().lambda_target();
    let parts: Vec<Partial> =
        chunks(samples).into_par_iter().map(|(c, n)| sample_chunk(map, seed, c, n, lambda)).collect();
    let mut part = Partial::new();
    for p in &parts {
        part.merge(p);
    }
    let traps: Vec<Trap> = chunks(trapping_samples).into_par_iter().map(|(c, n)| trap_chunk(map, seed, c, n)).collect();
    let mut trap = Trap { trap: Worst::new(), leaf: Worst::new() };
    for t in &traps {
        trap.trap.merge(&t.trap);
        trap.leaf.merge(&t.leaf);
    }

    let sites = map.sites();
    let mp = moduli(&map.eval_df(&sites.p));
    let mq = moduli(&map.eval_df(&sites.q));
    let source_margin = mp[0] - 1.0;
    let index_one = mq[0] < 1.0 && mq[1] > 1.0;
    let saddle_margin = mq[0] * mq[1] - 1.0;

    let (manifold_len, manifold_margin) = if index_one {
        match local_stable_manifold_q(map, 4.0 * map.delta(), 400) {
            Ok(m) if m.monotone => (Some(m.length), m.length - map.delta()),
            Ok(m) => (Some(m.length), f64::NEG_INFINITY),
            Err(_) => (None, f64::NEG_INFINITY),
        }
    } else {
        (None, f64::NEG_INFINITY)
    };

    let mut fixed = Worst::new();
    for x in [sites.p, sites.q, sites.r] {
        let e = torus_delta(&x, &map.eval_f(&x)).norm();
        fixed.offer(1e-10 - e, &x);
    }

    let mk = |name: &'static str, w: Worst| PropertyCheck {
        name,
        passed: w.margin > 0.0,
        margin: w.margin,
        witness: if w.margin > 0.0 { None } else { w.witness },
    };
    let nu_check = PropertyCheck {
        name: "nu_bound",
        passed: part.nu.margin >= 0.0,
        margin: part.nu.margin,
        witness: if part.nu.margin >= 0.0 { None } else { part.nu.witness },
    };
    let checks = vec![
        PropertyCheck {
            name: "a_source_p",
            passed: source_margin > 0.0,
            margin: source_margin,
            witness: if source_margin > 0.0 { None } else { Some(sites.p) },
        },
        PropertyCheck {
            name: "b_saddle_q",
            passed: index_one && saddle_margin > 0.0,
            margin: if index_one { saddle_margin } else { f64::NEG_INFINITY },
            witness: if index_one && saddle_margin > 0.0 { None } else { Some(sites.q) },
        },
        PropertyCheck {
            name: "b_stable_manifold_q",
            passed: manifold_margin > 0.0,
            margin: manifold_margin,
            witness: if manifold_margin > 0.0 { None } else { Some(sites.q) },
        },
        mk("c_cone_invariance", part.cone),
        mk("c_cone_width_contraction", part.width),
        mk("c_inverse_contraction", part.inverse),
        mk("d_contraction_outside", part.outside),
        mk("d_center_stable_budget", part.budget),
        mk("trapping", trap.trap),
        mk("leaf_exactness", trap.leaf),
        mk("fixed_points", fixed),
        nu_check,
    ];
    VerificationReport {
        checks,
        seed,
        samples,
        trapping_samples,
        lambda,
        measured_nu: part.measured_nu,
        nu_bound: map.nu_bound(),
        measured_beta: part.max_growth - 1.0,
        max_cone_width: part.max_width,
        max_inverse_factor: part.max_inverse,
        min_sampled_det: part.min_det,
        max_sampled_norm: part.max_norm,
        moduli_p: mp,
        moduli_q: mq,
        stable_manifold_length: manifold_len,
    }
}
