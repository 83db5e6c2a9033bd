//! Experiment stages and the sequential orchestrator.

use crate::config::{Enclosure, ExperimentConfig};
use crate::render::render_bytes;
use crate::report::RunReport;
use dalab::boxdyn::{
    build_box_map, is_successor_closed, localize_with_retry, morse_graph, quasi_attractors, spot_check_cycles,
    trapping_neighborhood, BoxMap, BoxMapOptions, BoxSet, EnclosureMode, MorseGraph,
};
use dalab::da_family::{verify_construction, DAMap};
use dalab::invariant_analysis::{
    basin_census, birkhoff_compare, census_csv, cs_exponent_census, diagnose_escapees, fourier_observables,
    grow_unstable_curve, lyapunov_spectrum, scan_unstable_curve, u_plus_measure, Region,
};
use dalab::rng::{derive_seed, stream};
use dalab::semiconj::{linear_prediction, SemiconjConfig, SemiconjugacySolver};
use dalab::torus_core::{TorusPoint, Vec3};
use rand::Rng;
use rayon::prelude::*;
use std::error::Error;
use std::fmt::Write as _;
use std::io;
use std::time::Instant;

type StageResult = Result<(), Box<dyn Error + Send + Sync>>;

/// Tolerance between measured and designed fixed-point spectra.
pub const SPECTRUM_TOL: f64 = 1e-8;
/// Backward steps allowed for an arc to outgrow 100δ.
const GROWTH_N_MAX: usize = 50;
/// Slack between measured and predicted growth steps.
const GROWTH_SLACK: usize = 2;
const CYCLE_SPOT_CHECKS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Verify,
    Semiconj,
    Morse,
    Localize,
    Manifolds,
    Lyapunov,
    Basin,
    Uplus,
    Birkhoff,
    /// Rasters of the box sets and curves emitted earlier in the run.
    Render,
}

impl Stage {
    pub const PIPELINE: [Stage; 10] = [
        Stage::Verify,
        Stage::Semiconj,
        Stage::Morse,
        Stage::Localize,
        Stage::Manifolds,
        Stage::Lyapunov,
        Stage::Basin,
        Stage::Uplus,
        Stage::Birkhoff,
        Stage::Render,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Verify => "verify",
            Stage::Semiconj => "semiconj",
            Stage::Morse => "morse",
            Stage::Localize => "localize",
            Stage::Manifolds => "manifolds",
            Stage::Lyapunov => "lyapunov",
            Stage::Basin => "basin",
            Stage::Uplus => "uplus",
            Stage::Birkhoff => "birkhoff",
            Stage::Render => "render",
        }
    }

    fn run(&self, cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport) -> StageResult {
        let seed = derive_seed(cfg.seed, self.name());
        match self {
            Stage::Verify => verify(cfg, map, rep, seed),
            Stage::Semiconj => semiconj(cfg, map, rep, seed),
            Stage::Morse => morse(cfg, map, rep, seed),
            Stage::Localize => localize(cfg, map, rep),
            Stage::Manifolds => manifolds(cfg, map, rep),
            Stage::Lyapunov => lyapunov(cfg, map, rep, seed),
            Stage::Basin => basin(cfg, map, rep, seed),
            Stage::Uplus => uplus(cfg, map, rep, seed),
            Stage::Birkhoff => birkhoff(cfg, map, rep, seed),
            Stage::Render => render_outputs(rep),
        }
    }
}

/// Runs the stages in order. Stage failures become failing checks named
/// after the stage; only I/O errors on the report itself abort the run.
pub fn run(command: &str, stages: &[Stage], cfg: &ExperimentConfig) -> io::Result<RunReport> {
    std::fs::create_dir_all(&cfg.out)?;
    let mut rep = RunReport::new(command, cfg.to_text(), cfg.out.clone());
    rep.emit("config.txt", cfg.experiment_text().as_bytes())?;
    let t0 = Instant::now();
    let map = if cfg.perturbed { cfg.settings().build() } else { cfg.settings().params().map(DAMap::linear) };
    rep.timings.push(("construct".into(), t0.elapsed()));
    match map {
        Err(e) => rep.check("construct", false, e.to_string()),
        Ok(map) => {
            for stage in stages {
                let t = Instant::now();
                if let Err(e) = stage.run(cfg, &map, &mut rep) {
                    rep.check(format!("{}:error", stage.name()), false, e.to_string());
                }
                rep.timings.push((stage.name().into(), t.elapsed()));
            }
        }
    }
    rep.finish()?;
    Ok(rep)
}

fn uniform(rng: &mut impl Rng) -> TorusPoint {
    TorusPoint::new(rng.gen(), rng.gen(), rng.gen())
}

fn solver<'a>(cfg: &ExperimentConfig, map: &'a DAMap) -> Result<SemiconjugacySolver<'a>, Box<dyn Error + Send + Sync>> {
    let sc = SemiconjConfig { tol: cfg.semiconj_tol, cap: cfg.semiconj_cap, gamma_hol: None };
    Ok(SemiconjugacySolver::new(map, &sc)?)
}

fn box_options(cfg: &ExperimentConfig, seed: u64) -> BoxMapOptions {
    BoxMapOptions {
        mode: match cfg.enclosure {
            Enclosure::Certified => EnclosureMode::CertifiedLipschitz,
            Enclosure::Sampled => EnclosureMode::Sampled,
        },
        samples_per_box: cfg.samples_per_box,
        pad: cfg.pad,
        memory_budget: cfg.memory_budget(),
        seed,
    }
}

/// Union of the terminal classes, or None when there are none.
fn terminal_union(mg: &MorseGraph) -> Option<BoxSet> {
    let mut sets = quasi_attractors(mg).into_iter();
    let mut u = sets.next()?;
    for s in sets {
        for b in s.iter() {
            u.insert(b);
        }
    }
    Some(u)
}

fn verify(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport, seed: u64) -> StageResult {
    let v = verify_construction(map, cfg.verify_samples, cfg.trapping_samples, seed);
    rep.emit("verify.txt", v.to_text().as_bytes())?;
    rep.emit("verify.csv", v.to_csv().as_bytes())?;
    for c in &v.checks {
        rep.check(format!("verify:{}", c.name), c.passed, format!("margin {:e}", c.margin));
    }
    Ok(())
}

fn semiconj(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport, seed: u64) -> StageResult {
    let s = solver(cfg, map)?;
    let delta = map.delta();
    let frame = map.frame();

    let max_defect = (0..cfg.defect_samples as u64)
        .into_par_iter()
        .map(|i| s.conjugacy_defect(&uniform(&mut stream(seed, "semiconj:defect", i))))
        .try_reduce(|| 0.0, |a, b| Ok(f64::max(a, b)))?;
    let bound = 4.0 * s.tol();
    rep.check(
        "semiconj:defect",
        max_defect <= bound,
        format!("max {max_defect:e} <= {bound:e} over {} points", cfg.defect_samples),
    );
    let eps = s.eps_emp();
    rep.check("semiconj:epsilon", eps < 0.5 * delta, format!("eps_emp {eps:e} < delta/2 {:e}", 0.5 * delta));

    let mut summary = String::new();
    let _ = writeln!(summary, "tol: {:e}", s.tol());
    let _ = writeln!(summary, "n_s: {}", s.n_s());
    let _ = writeln!(summary, "n_u: {}", s.n_u());
    let _ = writeln!(summary, "eps_bound: {:e}", s.eps_bound());
    let _ = writeln!(summary, "eps_emp: {eps:e}");
    let _ = writeln!(summary, "delta: {delta:e}");
    let _ = writeln!(summary, "gamma_hol: {:e}", s.gamma_hol());
    let _ = writeln!(summary, "max_defect: {max_defect:e}");

    if eps < 0.5 * delta && cfg.fiber_count > 0 {
        let res = eps / 10.0;
        let t = 0.5 * s.gamma_hol();
        let mut csv = String::from(
            "index,y_x,y_y,y_z,points,diameter,components,plaque_overflow,valid,spread,allowed,collapse\n",
        );
        let mut bad = 0;
        for i in 0..cfg.fiber_count as u64 {
            let y = uniform(&mut stream(seed, "semiconj:fibers", i));
            let fib = s.fiber(&y, res)?;
            let hol = s.holonomy_collapse_check(&fib, t)?;
            bad += (!fib.is_valid() || !hol.pass) as usize;
            let [a, b, c] = y.coords();
            let _ = writeln!(
                csv,
                "{i},{a:e},{b:e},{c:e},{},{:e},{},{},{},{:e},{:e},{}",
                fib.points.len(),
                fib.diameter,
                fib.components,
                fib.plaque_overflow,
                fib.is_valid(),
                hol.spread,
                hol.allowed,
                hol.pass
            );
        }
        rep.emit("fibers.csv", csv.as_bytes())?;
        rep.check(
            "semiconj:fibers",
            bad == 0,
            format!("{bad} of {} fibers violate (resolution {res:e}, holonomy t {t:e})", cfg.fiber_count),
        );
        let _ = writeln!(summary, "fiber_resolution: {res:e}");
    }

    if cfg.growth_arcs > 0 {
        let mut csv = String::from("arc,n,diameter\n");
        let mut arcs = String::from("arc,n0,prediction,h_gap\n");
        let mut bad = 0;
        for i in 0..cfg.growth_arcs as u64 {
            let mut rng = stream(seed, "semiconj:growth", i);
            let a = uniform(&mut rng);
            let th = rng.gen::<f64>() * std::f64::consts::TAU;
            let b = a.translate(&frame.from_adapted(&Vec3::new(0.0, delta * th.cos(), delta * th.sin())));
            let g = s.backward_plaque_growth(&[a, b], GROWTH_N_MAX)?;
            let pred = linear_prediction(g.h_image_diameter, delta, frame.lambda_s());
            bad += !g.n0.is_some_and(|n0| n0.abs_diff(pred) <= GROWTH_SLACK) as usize;
            for (n, d) in g.diameters.iter().enumerate() {
                let _ = writeln!(csv, "{i},{n},{d:e}");
            }
            let n0 = g.n0.map_or("none".to_string(), |n| n.to_string());
            let _ = writeln!(arcs, "{i},{n0},{pred},{:e}", g.h_image_diameter);
        }
        rep.emit("growth.csv", csv.as_bytes())?;
        rep.emit("growth_arcs.csv", arcs.as_bytes())?;
        rep.check(
            "semiconj:growth",
            bad == 0,
            format!("{bad} of {} arcs miss the linear prediction by more than {GROWTH_SLACK}", cfg.growth_arcs),
        );
    }
    rep.emit("semiconj.txt", summary.as_bytes())?;
    Ok(())
}

fn terminal_checks(tag: &str, bm: &BoxMap, mg: &MorseGraph, map: &DAMap, rep: &mut RunReport) -> Option<BoxSet> {
    let grid = bm.grid();
    let sites = map.sites();
    let terminals = mg.terminal_classes().count();
    let rigor = if bm.is_rigorous() { "" } else { ", sampled enclosure (not rigorous)" };
    rep.check(format!("{tag}:acyclic"), mg.acyclic, format!("{} classes", mg.classes.len()));
    rep.check(format!("{tag}:unique_terminal"), terminals == 1, format!("{terminals} terminal classes{rigor}"));
    let term = terminal_union(mg)?;
    let size = format!("terminal set {} of {} boxes", term.count(), grid.len());
    rep.check(format!("{tag}:contains_r"), term.contains(grid.box_of(&sites.r)), size.clone());
    rep.check(format!("{tag}:contains_q"), term.contains(grid.box_of(&sites.q)), size.clone());
    rep.check(format!("{tag}:excludes_p"), !term.contains(grid.box_of(&sites.p)), size);
    Some(term)
}

fn morse(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport, seed: u64) -> StageResult {
    let delta = map.delta();
    let mut terminals: Vec<(u64, BoxSet)> = Vec::new();
    for &n in &cfg.box_levels {
        let bm = build_box_map(map, n, &box_options(cfg, derive_seed(seed, &format!("morse:{n}"))))?;
        let mg = morse_graph(&bm);
        rep.emit(&format!("morse_{n}.txt"), mg.summary(Some(delta)).as_bytes())?;
        rep.emit(&format!("morse_{n}_edges.csv"), mg.edges_csv().as_bytes())?;
        let tag = format!("morse:{n}");
        let cycles = spot_check_cycles(&bm, &mg, CYCLE_SPOT_CHECKS, &mut stream(seed, "morse:cycles", n));
        rep.check(format!("{tag}:cycles"), cycles, format!("{CYCLE_SPOT_CHECKS} returns per class"));
        let Some(term) = terminal_checks(&tag, &bm, &mg, map, rep) else {
            continue;
        };
        let trap = trapping_neighborhood(&bm, &mg, &term)?;
        rep.check(
            format!("{tag}:trapping"),
            is_successor_closed(&bm, &trap),
            format!("F(U) inside U for U of {} boxes", trap.count()),
        );
        rep.emit(&format!("terminal_{n}.daqbox"), &term.to_bytes())?;
        rep.emit(&format!("trapping_{n}.daqbox"), &trap.to_bytes())?;
        terminals.push((n, term));
    }
    for w in terminals.windows(2) {
        let ((lo, coarse), (hi, fine)) = (&w[0], &w[1]);
        if hi % lo != 0 || !(hi / lo).is_power_of_two() {
            continue;
        }
        let mut s = fine.clone();
        while (s.grid().n() as u64) > *lo {
            s = s.coarsen()?;
        }
        rep.check(
            format!("morse:refinement_{lo}_{hi}"),
            s.is_subset(coarse)?,
            format!("terminal set at {hi} coarsened to {lo}"),
        );
    }
    Ok(())
}

fn localize(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport) -> StageResult {
    let s = solver(cfg, map)?;
    let (mg, loc) = localize_with_retry(&s, cfg.localize_n, cfg.max_period, cfg.memory_budget())?;
    rep.emit("localize.txt", loc.to_text().as_bytes())?;
    let nontrivial =
        loc.entries.iter().filter(|e| !matches!(e.status, dalab::boxdyn::ClassStatus::QuasiAttractor)).count();
    rep.check(
        "localize:resolved",
        loc.unresolved() == 0,
        format!(
            "{} unresolved of {nontrivial} non-terminal classes at n = {} ({} classes total)",
            loc.unresolved(),
            loc.n,
            mg.classes.len()
        ),
    );
    Ok(())
}

fn manifolds(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport) -> StageResult {
    let s = solver(cfg, map)?;
    let eps = s.eps_emp();
    let sites = map.sites();
    let near_q = 0.1 * map.delta();
    let scan = scan_unstable_curve(
        map,
        &sites.r,
        &[(sites.q, near_q), (sites.p, eps)],
        cfg.curve_budget,
        cfg.curve_base,
        cfg.curve_tol,
        true,
    )?;
    rep.emit("manifolds.txt", scan.to_text().as_bytes())?;
    let (tq, tp) = (&scan.targets[0], &scan.targets[1]);
    rep.check(
        "manifolds:reaches_q",
        tq.hit(),
        format!("closest {:e} vs {near_q:e}, first hit at arclength {:?}", tq.closest, tq.first_hit),
    );
    let horizon = tq.first_hit.unwrap_or(scan.length);
    let p_min = tp.closest_within(horizon);
    rep.check(
        "manifolds:avoids_p",
        p_min > eps,
        format!("closest {p_min:e} > eps_emp {eps:e} up to arclength {horizon:e}"),
    );
    let curve = grow_unstable_curve(map, &sites.r, cfg.curve_base, cfg.curve_tol)?;
    rep.emit("curve.csv", curve.to_csv().as_bytes())?;
    Ok(())
}

/// Design Lyapunov spectra at p and q, descending.
pub fn design_spectra(map: &DAMap) -> [[f64; 3]; 2] {
    let frame = map.frame();
    let params = map.params();
    let lu = frame.a_unstable().ln();
    let sort = |mut e: [f64; 3]| {
        e.sort_by(|a, b| b.total_cmp(a));
        e
    };
    let lp = ((1.0 + params.c_p) * frame.lambda_s()).ln();
    [sort([lu, lp, lp]), sort([lu, params.s1.ln(), params.s2.ln()])]
}

fn lyapunov(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport, seed: u64) -> StageResult {
    let sites = map.sites();
    let design = design_spectra(map);
    let mut csv = String::from("site,n,e1,e2,e3,design1,design2,design3\n");
    let mut worst: f64 = 0.0;
    for ((name, x), d) in [("p", sites.p), ("q", sites.q)].into_iter().zip(design) {
        let e = lyapunov_spectrum(map, &x, cfg.census_horizon)?;
        worst = (0..3).map(|i| (e.exponents[i] - d[i]).abs()).fold(worst, f64::max);
        let [a, b, c] = e.exponents;
        let _ = writeln!(csv, "{name},{},{a:e},{b:e},{c:e},{:e},{:e},{:e}", e.n, d[0], d[1], d[2]);
    }
    rep.emit("spectra.csv", csv.as_bytes())?;
    rep.check("lyapunov:fixed_points", worst <= SPECTRUM_TOL, format!("max deviation {worst:e} <= {SPECTRUM_TOL:e}"));

    let curve = grow_unstable_curve(map, &sites.r, cfg.curve_length, cfg.curve_tol)?;
    let results = cs_exponent_census(map, &curve, cfg.census_samples, &cfg.census_horizons, seed)?;
    rep.emit("lyapunov.csv", census_csv(&results).as_bytes())?;
    let at = results.iter().find(|r| r.horizon == cfg.census_horizon).expect("validated horizon");
    rep.emit("lyapunov_hist.csv", at.histogram.to_csv().as_bytes())?;
    rep.check(
        "lyapunov:census",
        at.fraction >= cfg.census_threshold,
        format!("fraction {} ± {:.3} at horizon {} >= {}", at.fraction, at.stderr, at.horizon, cfg.census_threshold),
    );
    let fr: Vec<String> = results.iter().map(|r| r.fraction.to_string()).collect();
    rep.check(
        "lyapunov:monotone",
        results.windows(2).all(|w| w[1].fraction >= w[0].fraction),
        format!("fractions {}", fr.join(" ")),
    );
    Ok(())
}

fn basin(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport, seed: u64) -> StageResult {
    let s = solver(cfg, map)?;
    let bm = build_box_map(map, cfg.box_n, &box_options(cfg, derive_seed(seed, "basin:boxes")))?;
    let mg = morse_graph(&bm);
    let term = terminal_union(&mg).ok_or("box map has no terminal class")?;
    let trap = trapping_neighborhood(&bm, &mg, &term)?;
    drop(bm);
    let mut census = basin_census(map, &trap, cfg.basin_samples, cfg.basin_n_max, seed);
    diagnose_escapees(&mut census, &s, cfg.box_n as u32, cfg.max_period)?;
    rep.emit("basin.csv", census.to_csv().as_bytes())?;
    rep.emit("basin_escapees.csv", census.escapees_csv().as_bytes())?;
    rep.check(
        "basin:capture",
        census.fraction >= cfg.basin_threshold,
        format!(
            "fraction {} ± {:.4} within {} iterates >= {} (neighborhood {} of {} boxes)",
            census.fraction,
            census.stderr,
            cfg.basin_n_max,
            cfg.basin_threshold,
            trap.count(),
            trap.grid().len()
        ),
    );
    rep.check(
        "basin:escapees",
        census.undiagnosed() == 0,
        format!("{} escapees, {} undiagnosed", census.escapees.len(), census.undiagnosed()),
    );
    Ok(())
}

fn uplus(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport, seed: u64) -> StageResult {
    let radius = cfg.uplus_radius * map.delta();
    let region = Region::Ball { center: map.sites().p, radius };
    let est = u_plus_measure(map, &region, cfg.uplus_n, cfg.uplus_samples, seed)?;
    rep.emit("uplus.csv", est.to_csv().as_bytes())?;
    rep.check(
        "uplus:nonincreasing",
        est.measure.windows(2).all(|w| w[1] <= w[0]),
        format!("measure {:e} at k = 0, {:e} at k = {}", est.at(0), est.at(cfg.uplus_n), cfg.uplus_n),
    );
    Ok(())
}

fn birkhoff(cfg: &ExperimentConfig, map: &DAMap, rep: &mut RunReport, seed: u64) -> StageResult {
    let cmp = birkhoff_compare(map, &fourier_observables(), cfg.birkhoff_starts, cfg.birkhoff_n, seed)?;
    rep.emit("birkhoff.csv", cmp.to_csv().as_bytes())?;
    rep.check(
        "birkhoff:agreement",
        cmp.max_deviation <= cfg.birkhoff_threshold,
        format!("max deviation {:e} <= {}", cmp.max_deviation, cfg.birkhoff_threshold),
    );
    Ok(())
}

fn render_outputs(rep: &mut RunReport) -> StageResult {
    let inputs: Vec<String> = rep
        .manifest
        .iter()
        .map(|e| e.file.clone())
        .filter(|f| (f.starts_with("terminal_") && f.ends_with(".daqbox")) || f == "curve.csv")
        .collect();
    for file in inputs {
        let data = std::fs::read(rep.out_dir().join(&file))?;
        let img = render_bytes(&data)?;
        let stem = file.rsplit_once('.').map_or(file.as_str(), |(s, _)| s);
        rep.emit(&format!("{stem}.ppm"), &img.to_ppm())?;
    }
    Ok(())
}
