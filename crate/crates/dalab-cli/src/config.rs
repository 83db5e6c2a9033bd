//! Flat `key = value` experiment configuration.

use dalab::da_family::{BumpShape, DASettings};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{key}: {msg}")]
    Range { key: &'static str, msg: String },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enclosure {
    Certified,
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub matrix: dalab::torus_core::IMat3,
    pub lambda_target: f64,
    pub safety: f64,
    pub c_p: f64,
    pub s1: f64,
    pub s2: f64,
    pub kappa_u: f64,
    pub kappa_cs: f64,
    pub beta: f64,
    pub bump_shape: BumpShape,
    pub bump_core: f64,
    /// false runs the unperturbed automorphism A.
    pub perturbed: bool,
    pub semiconj_tol: f64,
    pub semiconj_cap: usize,
    pub box_n: u64,
    pub box_levels: Vec<u64>,
    pub localize_n: u64,
    pub enclosure: Enclosure,
    pub samples_per_box: usize,
    pub pad: f64,
    pub memory_budget_gb: f64,
    pub max_period: u32,
    pub verify_samples: usize,
    pub trapping_samples: usize,
    pub defect_samples: usize,
    pub fiber_count: usize,
    pub growth_arcs: usize,
    pub curve_tol: f64,
    pub curve_budget: f64,
    pub curve_base: f64,
    pub curve_length: f64,
    pub census_samples: usize,
    pub census_horizons: Vec<usize>,
    pub census_horizon: usize,
    pub census_threshold: f64,
    pub basin_samples: usize,
    pub basin_n_max: usize,
    pub basin_threshold: f64,
    pub uplus_radius: f64,
    pub uplus_n: usize,
    pub uplus_samples: usize,
    pub birkhoff_starts: usize,
    pub birkhoff_n: usize,
    pub birkhoff_threshold: f64,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = DASettings::default();
        ExperimentConfig {
            matrix: [[1, 1, 0], [0, 0, 1], [1, 0, 0]],
            lambda_target: s.lambda_target,
            safety: s.safety,
            c_p: s.c_p,
            s1: s.s1,
            s2: s.s2,
            kappa_u: s.kappa_u,
            kappa_cs: s.kappa_cs,
            beta: s.beta,
            bump_shape: s.bump_shape,
            bump_core: s.bump_core,
            perturbed: true,
            semiconj_tol: 1e-8,
            semiconj_cap: 200,
            box_n: 128,
            box_levels: vec![64, 128],
            localize_n: 128,
            enclosure: Enclosure::Certified,
            samples_per_box: 9,
            pad: 0.0,
            memory_budget_gb: 8.0,
            max_period: 4,
            verify_samples: 100_000,
            trapping_samples: 10_000,
            defect_samples: 100_000,
            fiber_count: 100,
            growth_arcs: 10,
            curve_tol: 1e-3,
            curve_budget: 1e8,
            curve_base: 1e3,
            curve_length: 1e3,
            census_samples: 1000,
            census_horizons: vec![1000, 10_000, 100_000],
            census_horizon: 10_000,
            census_threshold: 0.95,
            basin_samples: 10_000,
            basin_n_max: 1000,
            basin_threshold: 0.99,
            uplus_radius: 0.05,
            uplus_n: 40,
            uplus_samples: 4000,
            birkhoff_starts: 10,
            birkhoff_n: 100_000,
            birkhoff_threshold: 0.05,
            seed: 0,
            workers: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
        return Ok(a / b);
    }
    s.parse().map_err(|_| format!("bad number {s:?}"))
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    let clean: String = s.chars().filter(|&c| c != '_').collect();
    if let Ok(v) = clean.parse() {
        return Ok(v);
    }
    // integral scientific notation such as 1e5
    let f: f64 = clean.parse().map_err(|_| format!("bad integer {s:?}"))?;
    if f.fract() == 0.0 && (0.0..1e18).contains(&f) {
        if let Ok(v) = format!("{}", f as u64).parse() {
            return Ok(v);
        }
    }
    Err(format!("bad integer {s:?}"))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(parse_int).collect()
}

fn fmt_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::Parse { line, msg: format!("expected key = value, got {body:?}") })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::Parse { line, msg: format!("duplicate key {key:?}") });
            }
            cfg.set(key, value).map_err(|msg| ConfigError::Parse { line, msg })?;
            seen.push(key.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "matrix" => {
                let e: Vec<i64> = v
                    .split(|c: char| c == ',' || c.is_whitespace() || c == '[' || c == ']')
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse().map_err(|_| format!("bad matrix entry {t:?}")))
                    .collect::<Result<_, _>>()?;
                if e.len() != 9 {
                    return Err(format!("matrix needs 9 integers, got {}", e.len()));
                }
                self.matrix = [[e[0], e[1], e[2]], [e[3], e[4], e[5]], [e[6], e[7], e[8]]];
            }
            "lambda_target" => self.lambda_target = parse_f64(v)?,
            "safety" => self.safety = parse_f64(v)?,
            "c_p" => self.c_p = parse_f64(v)?,
            "s1" => self.s1 = parse_f64(v)?,
            "s2" => self.s2 = parse_f64(v)?,
            "kappa_u" => self.kappa_u = parse_f64(v)?,
            "kappa_cs" => self.kappa_cs = parse_f64(v)?,
            "beta" => self.beta = parse_f64(v)?,
            "bump_shape" => {
                self.bump_shape = match v {
                    "log-radius" => BumpShape::LogRadius,
                    "linear" => BumpShape::Linear,
                    _ => return Err(format!("bump_shape must be log-radius or linear, got {v:?}")),
                }
            }
            "bump_core" => self.bump_core = parse_f64(v)?,
            "perturbation" => {
                self.perturbed = match v {
                    "bump" => true,
                    "none" => false,
                    _ => return Err(format!("perturbation must be bump or none, got {v:?}")),
                }
            }
            "semiconj_tol" => self.semiconj_tol = parse_f64(v)?,
            "semiconj_cap" => self.semiconj_cap = parse_int(v)?,
            "box_n" => self.box_n = parse_int(v)?,
            "box_levels" => self.box_levels = parse_list(v)?,
            "localize_n" => self.localize_n = parse_int(v)?,
            "enclosure" => {
                self.enclosure = match v {
                    "certified" | "certified-lipschitz" => Enclosure::Certified,
                    "sampled" => Enclosure::Sampled,
                    _ => return Err(format!("enclosure must be certified or sampled, got {v:?}")),
                }
            }
            "samples_per_box" => self.samples_per_box = parse_int(v)?,
            "pad" => self.pad = parse_f64(v)?,
            "memory_budget_gb" => self.memory_budget_gb = parse_f64(v)?,
            "max_period" => self.max_period = parse_int(v)?,
            "verify_samples" => self.verify_samples = parse_int(v)?,
            "trapping_samples" => self.trapping_samples = parse_int(v)?,
            "defect_samples" => self.defect_samples = parse_int(v)?,
            "fiber_count" => self.fiber_count = parse_int(v)?,
            "growth_arcs" => self.growth_arcs = parse_int(v)?,
            "curve_tol" => self.curve_tol = parse_f64(v)?,
            "curve_budget" => self.curve_budget = parse_f64(v)?,
            "curve_base" => self.curve_base = parse_f64(v)?,
            "curve_length" => self.curve_length = parse_f64(v)?,
            "census_samples" => self.census_samples = parse_int(v)?,
            "census_horizons" => self.census_horizons = parse_list(v)?,
            "census_horizon" => self.census_horizon = parse_int(v)?,
            "census_threshold" => self.census_threshold = parse_f64(v)?,
            "basin_samples" => self.basin_samples = parse_int(v)?,
            "basin_n_max" => self.basin_n_max = parse_int(v)?,
            "basin_threshold" => self.basin_threshold = parse_f64(v)?,
            "uplus_radius" => self.uplus_radius = parse_f64(v)?,
            "uplus_n" => self.uplus_n = parse_int(v)?,
            "uplus_samples" => self.uplus_samples = parse_int(v)?,
            "birkhoff_starts" => self.birkhoff_starts = parse_int(v)?,
            "birkhoff_n" => self.birkhoff_n = parse_int(v)?,
            "birkhoff_threshold" => self.birkhoff_threshold = parse_f64(v)?,
            "seed" => self.seed = parse_int(v)?,
            "workers" => self.workers = parse_int(v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn need(ok: bool, key: &'static str, msg: impl Into<String>) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Range { key, msg: msg.into() })
            }
        }
        let pos = |x: f64| x > 0.0 && x.is_finite();
        need(self.lambda_target > 0.0 && self.lambda_target < 1.0, "lambda_target", "must lie in (0, 1)")?;
        need(pos(self.safety), "safety", "must be positive")?;
        need(pos(self.c_p), "c_p", "must be positive")?;
        need(self.s1 > 0.0 && self.s1 < 1.0, "s1", format!("s1 < 1 required, got {}", self.s1))?;
        need(self.s2 > 1.0 && self.s2.is_finite(), "s2", format!("s2 > 1 required, got {}", self.s2))?;
        need(self.s1 * self.s2 > 1.0, "s2", format!("s1·s2 > 1 required, got {}", self.s1 * self.s2))?;
        need(pos(self.kappa_u), "kappa_u", "must be positive")?;
        need(pos(self.kappa_cs), "kappa_cs", "must be positive")?;
        need(self.kappa_u * self.kappa_cs < 1.0, "kappa_cs", "kappa_u·kappa_cs < 1 required")?;
        need(self.beta >= 0.0 && self.beta.is_finite(), "beta", "must be non-negative")?;
        need(self.bump_core > 0.0 && self.bump_core < 1.0, "bump_core", "must lie in (0, 1)")?;
        need(pos(self.semiconj_tol), "semiconj_tol", "must be positive")?;
        need(self.semiconj_cap >= 1, "semiconj_cap", "must be at least 1")?;
        need(self.box_n >= 2, "box_n", "must be at least 2")?;
        need(!self.box_levels.is_empty() && self.box_levels.iter().all(|&n| n >= 2), "box_levels", "need levels >= 2")?;
        need(self.box_levels.windows(2).all(|w| w[0] < w[1]), "box_levels", "must be increasing")?;
        need(self.localize_n >= 2, "localize_n", "must be at least 2")?;
        need(self.samples_per_box >= 1, "samples_per_box", "must be at least 1")?;
        need(self.pad >= 0.0 && self.pad.is_finite(), "pad", "must be non-negative")?;
        need(pos(self.memory_budget_gb), "memory_budget_gb", "must be positive")?;
        need(self.max_period >= 1, "max_period", "must be at least 1")?;
        need(self.verify_samples >= 1, "verify_samples", "must be positive")?;
        need(self.defect_samples >= 1, "defect_samples", "must be positive")?;
        need(pos(self.curve_tol), "curve_tol", "must be positive")?;
        need(pos(self.curve_budget), "curve_budget", "must be positive")?;
        need(pos(self.curve_base), "curve_base", "must be positive")?;
        need(pos(self.curve_length), "curve_length", "must be positive")?;
        need(self.census_samples >= 1, "census_samples", "must be positive")?;
        need(
            !self.census_horizons.is_empty()
                && self.census_horizons[0] >= 1
                && self.census_horizons.windows(2).all(|w| w[0] < w[1]),
            "census_horizons",
            "must be positive and increasing",
        )?;
        need(self.census_horizons.contains(&self.census_horizon), "census_horizon", "must be one of census_horizons")?;
        need((0.0..=1.0).contains(&self.census_threshold), "census_threshold", "must lie in [0, 1]")?;
        need(self.basin_samples >= 1, "basin_samples", "must be positive")?;
        need((0.0..=1.0).contains(&self.basin_threshold), "basin_threshold", "must lie in [0, 1]")?;
        need(pos(self.uplus_radius), "uplus_radius", "must be positive")?;
        need(self.uplus_samples >= 1, "uplus_samples", "must be positive")?;
        need(self.birkhoff_starts >= 2, "birkhoff_starts", "must be at least 2")?;
        need(self.birkhoff_n >= 1, "birkhoff_n", "must be positive")?;
        need(pos(self.birkhoff_threshold), "birkhoff_threshold", "must be positive")?;
        Ok(())
    }

    pub fn settings(&self) -> DASettings {
        DASettings {
            base: self.matrix,
            lambda_target: self.lambda_target,
            safety: self.safety,
            c_p: self.c_p,
            s1: self.s1,
            s2: self.s2,
            kappa_u: self.kappa_u,
            kappa_cs: self.kappa_cs,
            beta: self.beta,
            bump_shape: self.bump_shape,
            bump_core: self.bump_core,
        }
    }

    pub fn memory_budget(&self) -> u64 {
        (self.memory_budget_gb * (1u64 << 30) as f64) as u64
    }

    /// Echo without `out` and `workers`, which do not affect results.
    pub fn experiment_text(&self) -> String {
        self.to_text()
            .lines()
            .filter(|l| !l.starts_with("out =") && !l.starts_with("workers ="))
            .map(|l| format!("{l}\n"))
            .collect()
    }

    /// Canonical `key = value` echo; parsing it reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = self.matrix;
        let _ = writeln!(s, "matrix = {}", fmt_list(&[m[0], m[1], m[2]].concat()));
        let shape = match self.bump_shape {
            BumpShape::LogRadius => "log-radius",
            BumpShape::Linear => "linear",
        };
        let enclosure = match self.enclosure {
            Enclosure::Certified => "certified",
            Enclosure::Sampled => "sampled",
        };
        let floats = [
            ("lambda_target", self.lambda_target),
            ("safety", self.safety),
            ("c_p", self.c_p),
            ("s1", self.s1),
            ("s2", self.s2),
            ("kappa_u", self.kappa_u),
            ("kappa_cs", self.kappa_cs),
            ("beta", self.beta),
        ];
        for (k, v) in floats {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "bump_shape = {shape}");
        let _ = writeln!(s, "bump_core = {:?}", self.bump_core);
        let _ = writeln!(s, "perturbation = {}", if self.perturbed { "bump" } else { "none" });
        let _ = writeln!(s, "semiconj_tol = {:?}", self.semiconj_tol);
        let _ = writeln!(s, "semiconj_cap = {}", self.semiconj_cap);
        let _ = writeln!(s, "box_n = {}", self.box_n);
        let _ = writeln!(s, "box_levels = {}", fmt_list(&self.box_levels));
        let _ = writeln!(s, "localize_n = {}", self.localize_n);
        let _ = writeln!(s, "enclosure = {enclosure}");
        let _ = writeln!(s, "samples_per_box = {}", self.samples_per_box);
        let _ = writeln!(s, "pad = {:?}", self.pad);
        let _ = writeln!(s, "memory_budget_gb = {:?}", self.memory_budget_gb);
        let _ = writeln!(s, "max_period = {}", self.max_period);
        let _ = writeln!(s, "verify_samples = {}", self.verify_samples);
        let _ = writeln!(s, "trapping_samples = {}", self.trapping_samples);
        let _ = writeln!(s, "defect_samples = {}", self.defect_samples);
        let _ = writeln!(s, "fiber_count = {}", self.fiber_count);
        let _ = writeln!(s, "growth_arcs = {}", self.growth_arcs);
        let _ = writeln!(s, "curve_tol = {:?}", self.curve_tol);
        let _ = writeln!(s, "curve_budget = {:?}", self.curve_budget);
        let _ = writeln!(s, "curve_base = {:?}", self.curve_base);
        let _ = writeln!(s, "curve_length = {:?}", self.curve_length);
        let _ = writeln!(s, "census_samples = {}", self.census_samples);
        let _ = writeln!(s, "census_horizons = {}", fmt_list(&self.census_horizons));
        let _ = writeln!(s, "census_horizon = {}", self.census_horizon);
        let _ = writeln!(s, "census_threshold = {:?}", self.census_threshold);
        let _ = writeln!(s, "basin_samples = {}", self.basin_samples);
        let _ = writeln!(s, "basin_n_max = {}", self.basin_n_max);
        let _ = writeln!(s, "basin_threshold = {:?}", self.basin_threshold);
        let _ = writeln!(s, "uplus_radius = {:?}", self.uplus_radius);
        let _ = writeln!(s, "uplus_n = {}", self.uplus_n);
        let _ = writeln!(s, "uplus_samples = {}", self.uplus_samples);
        let _ = writeln!(s, "birkhoff_starts = {}", self.birkhoff_starts);
        let _ = writeln!(s, "birkhoff_n = {}", self.birkhoff_n);
        let _ = writeln!(s, "birkhoff_threshold = {:?}", self.birkhoff_threshold);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.matrix, [[1, 1, 0], [0, 0, 1], [1, 0, 0]]);
        assert_eq!(c.lambda_target, 1.0 / 3.0);
        assert_eq!((c.c_p, c.s1, c.s2), (2.30, 0.97, 1.05));
    }

    #[test]
    fn comments_fractions_and_lists() {
        let c = ExperimentConfig::parse(
            "# header\nlambda_target = 1/3  # bound\nbox_levels = 64, 128 256\nverify_samples = 1e5\nseed=7\n",
        )
        .unwrap();
        assert_eq!(c.lambda_target, 1.0 / 3.0);
        assert_eq!(c.box_levels, vec![64, 128, 256]);
        assert_eq!(c.verify_samples, 100_000);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn range_and_unknown_key_errors() {
        assert!(matches!(ExperimentConfig::parse("s1 = 1.2"), Err(ConfigError::Range { key: "s1", .. })));
        assert!(matches!(ExperimentConfig::parse("s1 = 0.9\ns2 = 1.05"), Err(ConfigError::Range { key: "s2", .. })));
        assert_eq!(
            ExperimentConfig::parse("\ncolour = blue"),
            Err(ConfigError::Parse { line: 2, msg: "unknown key \"colour\"".into() })
        );
        assert!(matches!(ExperimentConfig::parse("seed 3"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("seed = 1\nseed = 2"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(ExperimentConfig::parse("matrix = 1 2 3"), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig {
            seed: 99,
            c_p: 2.1,
            box_levels: vec![8, 16],
            enclosure: Enclosure::Sampled,
            bump_shape: BumpShape::Linear,
            perturbed: false,
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }
}
