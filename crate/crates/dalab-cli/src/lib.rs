//! Configuration, orchestration and reporting for the dalab experiments.

pub mod config;
pub mod render;
pub mod report;
pub mod run;

pub use config::{ConfigError, Enclosure, ExperimentConfig};
pub use render::{render_bytes, RenderError};
pub use report::{parse_manifest, sha256_hex, Check, RunReport};
pub use run::{run, Stage};
