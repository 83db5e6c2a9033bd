use super::*;
use crate::torus_core::{periodic_points, torus_delta, torus_distance, AnosovMatrix, TorusPoint, Vec3};
use nalgebra::Matrix2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn default_map() -> &'static DAMap {
    static MAP: OnceLock<DAMap> = OnceLock::new();
    MAP.get_or_init(|| DASettings::default().build().expect("defaults build"))
}

fn sorted_moduli(m: &nalgebra::Matrix3<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

#[test]
fn default_power_and_rates() {
    let map = default_map();
    assert_eq!(map.anosov().power(), 6);
    assert!((map.frame().lambda_s() - 0.317672).abs() < 1e-6);
    assert!(((1.0 + 2.30) * map.frame().lambda_s() - 1.0483).abs() < 1e-4);
}

#[test]
fn spectrum_at_sites_matches_design() {
    let map = default_map();
    let lu6 = 1.465571231876768f64.powi(6);
    let src = (1.0 + 2.30) * map.frame().lambda_s();
    let mp = sorted_moduli(&map.eval_df(&map.sites().p));
    assert!((mp[0] - src).abs() < 1e-8 && (mp[1] - src).abs() < 1e-8);
    assert!((mp[2] - lu6).abs() < 1e-8);
    let mq = sorted_moduli(&map.eval_df(&map.sites().q));
    assert!((mq[0] - 0.97).abs() < 1e-8, "{mq:?}");
    assert!((mq[1] - 1.05).abs() < 1e-8, "{mq:?}");
    assert!((mq[2] - lu6).abs() < 1e-8);
}

#[test]
fn untouched_site_is_linear() {
    let map = default_map();
    let r = map.sites().r;
    assert!(torus_distance(&map.eval_f(&r), &r) < 1e-12);
    assert_eq!(map.eval_df(&r), *map.a());
}

#[test]
fn sites_are_fixed() {
    let map = default_map();
    for x in [map.sites().p, map.sites().q, map.sites().r] {
        assert!(torus_distance(&map.eval_f(&x), &x) < 1e-12);
        assert!(torus_distance(&map.eval_f_inv(&x, 1e-13).unwrap(), &x) < 1e-12);
    }
}

#[test]
fn site_selection_is_max_min() {
    let map = default_map();
    let frame = map.frame();
    let pts: Vec<TorusPoint> = periodic_points(map.anosov(), 1).unwrap().iter().map(|p| p.point()).collect();
    assert_eq!(pts.len(), 9);
    // exhaustive oracle over all triples, distances by brute-force lift search
    let dist = |a: &TorusPoint, b: &TorusPoint| {
        let d = b.to_vec() - a.to_vec();
        let mut best = f64::INFINITY;
        for i in -2..=2 {
            for j in -2..=2 {
                for k in -2..=2 {
                    best = best.min(frame.adapted_norm(&(d + Vec3::new(i as f64, j as f64, k as f64))));
                }
            }
        }
        best
    };
    let mut best = 0.0f64;
    for i in 0..9 {
        for j in i + 1..9 {
            for k in j + 1..9 {
                let m = dist(&pts[i], &pts[j]).min(dist(&pts[i], &pts[k])).min(dist(&pts[j], &pts[k]));
                best = best.max(m);
            }
        }
    }
    let s = map.sites();
    assert!((s.d_min - best).abs() < 1e-12);
    assert!((s.delta - best / 212.0).abs() < 1e-15);
}

#[test]
fn single_fixed_point_is_rejected() {
    let a = AnosovMatrix::new(BASE_MATRIX, 1).unwrap();
    assert_eq!(
        DASettings { lambda_target: 0.99, ..Default::default() }.params().unwrap_err(),
        DaError::TooFewFixedPoints(1)
    );
    let (_, frame) = crate::torus_core::hyperbolic_splitting(&BASE_MATRIX, 0.99).unwrap();
    assert_eq!(select_sites(&a, &frame, 212.0).unwrap_err(), DaError::TooFewFixedPoints(1));
}

#[test]
fn larger_safety_scales_delta() {
    let a = DASettings::default().params().unwrap();
    let b = DASettings { safety: 1000.0, ..Default::default() }.params().unwrap();
    assert!((b.sites.delta / a.sites.delta - 212.0 / 1000.0).abs() < 1e-12);
    check_separation(&b.sites, b.frame()).unwrap();
    assert!(DASettings { safety: 100.0, ..Default::default() }.params().is_err());
}

#[test]
fn zero_perturbation_is_the_linear_map() {
    let params = DASettings::default().params().unwrap();
    let map = DAMap::linear(params);
    assert_eq!(map.nu_bound(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..2000 {
        let x = stratified_point(&map, &mut rng, i, 1.5);
        let lin = TorusPoint::from_vec(&map.linear_lift(&x));
        assert!(torus_distance(&map.eval_f(&x), &lin) < 1e-12);
    }
}

#[test]
fn linear_profile_with_wide_core_is_infeasible() {
    let s = DASettings { bump_shape: BumpShape::Linear, bump_core: 0.25, ..Default::default() };
    match s.build() {
        Err(DaError::GainInfeasible(_)) => {}
        other => panic!("expected GainInfeasible, got {other:?}"),
    }
}

#[test]
fn parameter_invariants_are_enforced() {
    for s in [
        DASettings { c_p: 2.0, ..Default::default() },
        DASettings { s1: 1.01, ..Default::default() },
        DASettings { s1: 0.9, s2: 1.05, ..Default::default() },
    ] {
        assert!(matches!(s.build(), Err(DaError::InvalidParams(_))));
    }
}

#[test]
fn f_equals_a_outside_the_bumps() {
    let map = default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut outside = 0;
    for i in 0..20_000 {
        let x = stratified_point(map, &mut rng, i, 1.5);
        let (dp, dq) = map.site_distances(&x);
        if dp >= map.delta() && dq >= map.delta() {
            outside += 1;
            let lin = TorusPoint::from_vec(&map.linear_lift(&x));
            assert_eq!(map.eval_f(&x), lin);
        }
    }
    assert!(outside > 5000);
}

#[test]
fn derivative_matches_finite_differences() {
    let map = default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let x = stratified_point(map, &mut rng, i, 1.2);
        let df = map.eval_df(&x);
        let h = 1e-6 * map.delta();
        let fx = map.eval_f(&x);
        let mut fd = nalgebra::Matrix3::zeros();
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let plus = torus_delta(&fx, &map.eval_f(&x.translate(&e)));
            let minus = torus_delta(&fx, &map.eval_f(&x.translate(&-e)));
            fd.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        worst = worst.max((fd - df).norm() / df.norm());
    }
    assert!(worst <= 1e-5, "relative error {worst}");
}

#[test]
fn inverse_round_trip() {
    let map = default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..3000 {
        // images of stratified points cover the perturbed region's image
        let y = map.eval_f(&stratified_point(map, &mut rng, i, 1.5));
        let x = map.eval_f_inv(&y, 1e-12).unwrap();
        assert!(torus_distance(&map.eval_f(&x), &y) <= 1e-11);
    }
    for _ in 0..1000 {
        let y = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
        let x = map.eval_f_inv(&y, 1e-12).unwrap();
        assert!(torus_distance(&map.eval_f(&x), &y) <= 1e-11);
    }
}

#[test]
fn inverse_outside_is_linear_inverse() {
    let map = default_map();
    let y = map.sites().r.translate(&Vec3::new(0.01, -0.02, 0.005));
    let x = map.eval_f_inv(&y, 1e-12).unwrap();
    assert_eq!(x, TorusPoint::from_vec(&(map.a_inv() * y.to_vec())));
}

#[test]
fn design_check_is_feasible_by_default() {
    let d = default_map().design_check();
    assert!(d.min_det > 0.5, "{d:?}");
    assert!(d.core_norm_p <= 1.06 && d.core_norm_q <= 1.06, "{d:?}");
}

#[test]
fn sup_phi_dominates_samples() {
    let map = default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..20_000 {
        let x = stratified_point(map, &mut rng, i, 1.0);
        assert!(map.phi_adapted(&x).norm() <= map.sup_phi());
    }
}

#[test]
fn stable_manifold_degenerate_and_errors() {
    let map = default_map();
    let m = local_stable_manifold_q(map, 0.0, 10).unwrap();
    assert_eq!(m.vertices, vec![map.sites().q]);
    let lin = DAMap::linear(DASettings::default().params().unwrap());
    assert!(matches!(local_stable_manifold_q(&lin, 1e-3, 10), Err(DaError::SpectrumMismatch(_))));
}

#[test]
fn stable_manifold_reaches_delta() {
    let map = default_map();
    let m = local_stable_manifold_q(map, map.delta(), 400).unwrap();
    assert_eq!(m.status, ManifoldStatus::Reached);
    assert!(m.length >= map.delta());
    assert!(m.monotone);
    assert!(m.vertices.iter().any(|v| torus_distance(v, &map.sites().q) < 1e-14));
    // vertices stay on the stable leaf of q
    for v in &m.vertices {
        let c = map.frame().to_adapted(&torus_delta(&map.sites().q, v));
        assert!(c[0].abs() < 1e-12);
    }
}

#[test]
fn verification_passes_on_defaults() {
    let r = verify_construction(default_map(), 30_000, 3000, 1);
    for c in &r.checks {
        assert!(c.passed, "{} margin {}", c.name, c.margin);
    }
    assert!(r.measured_nu <= r.nu_bound);
    assert!(r.measured_nu > 0.0);
}

#[test]
fn verification_is_reproducible() {
    let a = verify_construction(default_map(), 5000, 500, 9);
    let b = verify_construction(default_map(), 5000, 500, 9);
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn oversized_source_gain_breaks_the_budget() {
    let params = DASettings { c_p: 10.0, ..Default::default() }.params().unwrap();
    assert!(matches!(build_da(params.clone()), Err(DaError::GainInfeasible(_))));
    let map = DAMap::build_unchecked(params);
    let r = verify_construction(&map, 20_000, 0, 3);
    let c = r.check("d_center_stable_budget").unwrap();
    assert!(!c.passed);
    let (dp, _) = map.site_distances(&c.witness.unwrap());
    assert!(dp < map.delta());
}

#[test]
fn zero_perturbation_fails_only_the_bifurcation_checks() {
    let map = DAMap::linear(DASettings::default().params().unwrap());
    let r = verify_construction(&map, 10_000, 1000, 4);
    assert_eq!(r.measured_nu, 0.0);
    for c in &r.checks {
        let expect = !matches!(c.name, "a_source_p" | "b_saddle_q" | "b_stable_manifold_q");
        assert_eq!(c.passed, expect, "{}", c.name);
    }
}

#[test]
fn gains_hit_the_target_spectrum() {
    let map = default_map();
    let a_s = map.frame().a_stable();
    let core = a_s * (Matrix2::identity() + map.gain_q());
    assert!((core - Matrix2::new(0.97, 0.0, 0.0, 1.05)).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn leaves_map_to_leaves(i in 0usize..3, seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let map = default_map();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = stratified_point(map, &mut rng, i, 2.0);
        let v = map.frame().from_adapted(&Vec3::new(0.0, 2.0 * map.delta() * a, 2.0 * map.delta() * b));
        let d = torus_delta(&map.eval_f(&x), &map.eval_f(&x.translate(&v)));
        prop_assert!(map.frame().to_adapted(&d)[0].abs() <= 1e-10);
    }

    #[test]
    fn displacement_is_bounded(i in 0usize..3, seed in any::<u64>()) {
        let map = default_map();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = stratified_point(map, &mut rng, i, 1.5);
        let lin = TorusPoint::from_vec(&map.linear_lift(&x));
        prop_assert!(map.frame().adapted_norm(&torus_delta(&lin, &map.eval_f(&x))) <= map.nu_bound());
    }
}
