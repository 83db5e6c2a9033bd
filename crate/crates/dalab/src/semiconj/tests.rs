use super::*;
use crate::da_family::{stratified_point, DASettings};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn default_map() -> &'static DAMap {
    static MAP: OnceLock<DAMap> = OnceLock::new();
    MAP.get_or_init(|| DASettings::default().build().unwrap())
}

fn linear_map() -> &'static DAMap {
    static MAP: OnceLock<DAMap> = OnceLock::new();
    MAP.get_or_init(|| DAMap::linear(DASettings::default().params().unwrap()))
}

fn solver() -> SemiconjugacySolver<'static> {
    SemiconjugacySolver::new(default_map(), &SemiconjConfig::default()).unwrap()
}

#[test]
fn tail_bounds_hold() {
    let s = solver();
    let map = default_map();
    let f = map.frame();
    let nu = map.nu_bound();
    assert!(f.lambda_s().powi(s.n_s() as i32) * nu / (1.0 - f.lambda_s()) <= s.tol());
    assert!(f.lambda_u_inv().powi(s.n_u() as i32) * nu / (1.0 - f.lambda_u_inv()) <= s.tol());
    // minimal depths
    assert!(f.lambda_s().powi(s.n_s() as i32 - 1) * nu / (1.0 - f.lambda_s()) > s.tol());
}

#[test]
fn budget_cap_is_enforced() {
    let cfg = SemiconjConfig { cap: 3, ..Default::default() };
    assert!(matches!(
        SemiconjugacySolver::new(default_map(), &cfg),
        Err(SemiconjError::BudgetExceeded { series: "stable", .. })
    ));
}

#[test]
fn zero_perturbation_has_zero_displacement() {
    let s = SemiconjugacySolver::new(linear_map(), &SemiconjConfig::default()).unwrap();
    assert_eq!(s.n_s(), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
        assert_eq!(s.displacement(&x).unwrap(), Vec3::zeros());
    }
    assert_eq!(s.eps_emp(), 0.0);
}

#[test]
fn calibrated_epsilon_is_small() {
    let s = solver();
    assert!(s.eps_emp() > 0.0);
    assert!(s.eps_emp() <= s.eps_bound());
    assert!(s.eps_emp() < 0.5 * default_map().delta());
}

#[test]
fn defect_is_within_four_tol() {
    let s = solver();
    let map = default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..3000 {
        let x = stratified_point(map, &mut rng, i, 2.0);
        let d = s.conjugacy_defect(&x).unwrap();
        assert!(d <= 4.0 * s.tol(), "defect {d}");
    }
    assert!(s.eps_emp() <= s.eps_bound());
}

#[test]
fn orbits_avoiding_bumps_have_tiny_displacement() {
    let s = solver();
    let map = default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 200 {
        let x = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
        // backward orbit of length N_s avoiding the bumps
        let mut z = x;
        let mut clear = true;
        for _ in 0..s.n_s() {
            z = map.eval_f_inv(&z, 1e-13).unwrap();
            clear &= !map.in_support(&z);
        }
        if clear {
            assert_eq!(s.displacement(&x).unwrap(), Vec3::zeros());
            checked += 1;
        }
    }
}

#[test]
fn fixed_sites_are_fixed_by_h() {
    let s = solver();
    for x in [default_map().sites().p, default_map().sites().q, default_map().sites().r] {
        assert!(s.displacement(&x).unwrap().norm() < 1e-15);
    }
}

#[test]
fn fiber_of_r_under_zero_perturbation_is_a_point() {
    let s = SemiconjugacySolver::new(linear_map(), &SemiconjConfig::default()).unwrap();
    let r = linear_map().sites().r;
    let fib = s.fiber(&r, 1e-6).unwrap();
    assert_eq!(fib.points, vec![r]);
    let hol = s.holonomy_collapse_check(&fib, 1e-4).unwrap();
    assert_eq!(hol.spread, 0.0);
}

#[test]
fn fiber_over_p_contains_p() {
    let s = solver();
    let p = default_map().sites().p;
    let hp = s.h(&p).unwrap();
    let fib = s.fiber(&hp, s.eps_emp() / 10.0).unwrap();
    assert!(fib.points.iter().any(|x| crate::torus_core::torus_distance(x, &p) < 1e-15));
    assert!(fib.is_connected());
    // the source p carries a nontrivial fiber
    assert!(fib.points.len() > 100);
}

#[test]
fn generic_fibers_are_small_and_connected() {
    let s = solver();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let res = s.eps_emp() / 10.0;
    for _ in 0..10 {
        let y = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
        let fib = s.fiber(&y, res).unwrap();
        assert!(fib.is_valid(), "{fib:?}");
        let hol = s.holonomy_collapse_check(&fib, 0.5 * s.gamma_hol()).unwrap();
        assert!(hol.pass, "{hol:?}");
        let hol = s.holonomy_collapse_check(&fib, 0.0).unwrap();
        assert!(hol.spread <= 2.0 * (2.0 * s.tol() + res) && hol.pass);
    }
}

#[test]
fn fiber_preconditions() {
    let s = solver();
    let y = default_map().sites().r;
    assert!(matches!(s.fiber(&y, s.eps_emp()), Err(SemiconjError::ResolutionTooCoarse { .. })));
    let fib = s.fiber(&y, s.eps_emp() / 10.0).unwrap();
    assert!(matches!(s.holonomy_collapse_check(&fib, 2.0 * s.gamma_hol()), Err(SemiconjError::ReachExceeded { .. })));
}

#[test]
fn fibers_are_equivariant() {
    let s = solver();
    let map = default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let res = s.eps_emp() / 10.0;
    for _ in 0..5 {
        let y = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
        let fib = s.fiber(&y, res).unwrap();
        let y_pre = map.anosov().apply_inverse(&y);
        let pre = s.fiber(&y_pre, res).unwrap();
        let slack = fib.threshold / map.frame().lambda_s() + res;
        for x in &fib.points {
            let fx = map.eval_f_inv(x, 1e-13).unwrap();
            let near =
                pre.points.iter().map(|z| map.frame().adapted_norm(&torus_delta(z, &fx))).fold(f64::INFINITY, f64::min);
            assert!(near <= slack, "{near} > {slack}");
        }
    }
}

#[test]
fn growth_requires_distinct_images() {
    let s = solver();
    let p = default_map().sites().p;
    let frame = default_map().frame();
    let inside = p.translate(&frame.from_adapted(&Vec3::new(0.0, 1e-6, 0.0)));
    assert!(matches!(s.backward_plaque_growth(&[p, inside], 10), Err(SemiconjError::HImagesEqual(_))));
    assert!(matches!(s.backward_plaque_growth(&[p], 10), Err(SemiconjError::DegenerateArc)));
}

#[test]
fn growth_matches_linear_prediction() {
    let s = solver();
    let map = default_map();
    let frame = map.frame();
    let delta = map.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..4 {
        let a = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
        let th: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let b = a.translate(&frame.from_adapted(&Vec3::new(0.0, delta * th.cos(), delta * th.sin())));
        let g = s.backward_plaque_growth(&[a, b], 50).unwrap();
        let n0 = g.n0.expect("reached 100δ");
        let pred = linear_prediction(g.h_image_diameter, delta, frame.lambda_s());
        assert!(n0.abs_diff(pred) <= 2, "n0 {n0} pred {pred}");
        assert!(g.diameters.windows(2).all(|w| w[1] > w[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn halving_tol_does_not_increase_defect(i in 0usize..3, seed in any::<u64>()) {
        let map = default_map();
        let coarse = SemiconjugacySolver::new(map, &SemiconjConfig { tol: 1e-6, ..Default::default() }).unwrap();
        let fine = SemiconjugacySolver::new(map, &SemiconjConfig { tol: 5e-7, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = stratified_point(map, &mut rng, i, 1.5);
        let dc = coarse.conjugacy_defect(&x).unwrap();
        let df = fine.conjugacy_defect(&x).unwrap();
        prop_assert!(df <= dc.max(1e-15), "fine {} coarse {}", df, dc);
    }

    #[test]
    fn displacement_is_stable_and_bounded(i in 0usize..3, seed in any::<u64>()) {
        let map = default_map();
        let s = solver();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = stratified_point(map, &mut rng, i, 1.5);
        let u = s.displacement_adapted(&x).unwrap();
        prop_assert!(u[0].abs() <= 1e-15);
        prop_assert!(u.norm() <= s.eps_bound());
    }
}
