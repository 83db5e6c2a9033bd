//! Determinism of the command-line pipeline. Prints one PASS/FAIL line.

use dalab_cli::{parse_manifest, sha256_hex};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

const OVERHEAD_LIMIT: Duration = Duration::from_secs(60);

const CONFIG: &str = "\
box_levels = 32 64
box_n = 64
localize_n = 32
verify_samples = 20000
trapping_samples = 1000
defect_samples = 20000
fiber_count = 10
growth_arcs = 4
curve_budget = 1e5
curve_base = 300
curve_length = 300
census_samples = 100
census_horizons = 1000 5000
census_horizon = 5000
basin_samples = 2000
basin_n_max = 200
uplus_samples = 1000
birkhoff_n = 20000
seed = 20240611
";

fn run_all(cfg: &Path, out: &Path, workers: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_dalab"))
        .args(["all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers])
        .output()
        .expect("binary runs")
        .status;
    assert!(matches!(status.code(), Some(0 | 1)), "{status:?}");
}

fn report(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.cfg");
    std::fs::write(&cfg, CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_all(&cfg, &a, "1");
    run_all(&cfg, &b, "0");

    let ma = parse_manifest(&std::fs::read_to_string(a.join("report.txt")).unwrap());
    let mb = parse_manifest(&std::fs::read_to_string(b.join("report.txt")).unwrap());
    let t = Instant::now();
    let mut mismatched = Vec::new();
    for e in &ma {
        let da = std::fs::read(a.join(&e.file)).unwrap();
        let db = std::fs::read(b.join(&e.file)).unwrap_or_default();
        if sha256_hex(&da) != e.sha256 || sha256_hex(&db) != e.sha256 {
            mismatched.push(e.file.clone());
        }
    }
    let overhead = t.elapsed();
    let same_files = ma.iter().map(|e| &e.file).eq(mb.iter().map(|e| &e.file));
    let pass = same_files && mismatched.is_empty() && ma.len() > 20 && overhead < OVERHEAD_LIMIT;
    report(
        "criterion 12 determinism",
        pass,
        format!(
            "{} files identical across 1 and all workers, mismatched {:?}, hashing {:.3} s < {} s",
            ma.len() - mismatched.len(),
            mismatched,
            overhead.as_secs_f64(),
            OVERHEAD_LIMIT.as_secs()
        ),
    );
    if !pass {
        std::process::exit(1);
    }
}
