use clap::{Parser, Subcommand};
use dalab_cli::{render_bytes, report::write_atomic, run, ExperimentConfig, Stage};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dalab", version, about = "Experiments on a derived-from-Anosov map of T³")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value configuration file; absent keys take defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Construction properties (a)-(d) and plaque trapping
    Verify,
    /// Semiconjugacy defect, fibers, holonomy and backward growth
    Semiconj,
    /// Box maps, Morse graphs and the terminal class at each level
    Morse,
    /// Match non-terminal classes with periodic fibers
    Localize,
    /// Unstable curve from r: accumulation on q, avoidance of p
    Manifolds,
    /// Fixed-point spectra and the center-stable exponent census
    Lyapunov,
    /// Capture of random points by the trapping neighborhood
    Basin,
    /// Backward-trapped measure near p
    Uplus,
    /// Birkhoff averages from independent starts
    Birkhoff,
    /// Draw a DAQBOX1 box set or a curve CSV as a P6 image
    Render { input: PathBuf, output: Option<PathBuf> },
    /// Every stage followed by rendering
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Render { input, output } = &cli.command {
        let data = match std::fs::read(input) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", input.display());
                return ExitCode::from(2);
            }
        };
        let img = match render_bytes(&data) {
            Ok(img) => img,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        let output = output.clone().unwrap_or_else(|| input.with_extension("ppm"));
        return match write_atomic(&output, &img.to_ppm()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", output.display());
                ExitCode::from(1)
            }
        };
    }

    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if cfg.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    let (name, stages): (&str, Vec<Stage>) = match cli.command {
        Command::Verify => ("verify", vec![Stage::Verify]),
        Command::Semiconj => ("semiconj", vec![Stage::Semiconj]),
        Command::Morse => ("morse", vec![Stage::Morse]),
        Command::Localize => ("localize", vec![Stage::Localize]),
        Command::Manifolds => ("manifolds", vec![Stage::Manifolds]),
        Command::Lyapunov => ("lyapunov", vec![Stage::Lyapunov]),
        Command::Basin => ("basin", vec![Stage::Basin]),
        Command::Uplus => ("uplus", vec![Stage::Uplus]),
        Command::Birkhoff => ("birkhoff", vec![Stage::Birkhoff]),
        Command::All => ("all", Stage::PIPELINE.to_vec()),
        Command::Render { .. } => unreachable!("handled above"),
    };
    match run(name, &stages, &cfg) {
        Ok(rep) => {
            for c in &rep.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("report: {}", cfg.out.join("report.txt").display());
            if rep.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
