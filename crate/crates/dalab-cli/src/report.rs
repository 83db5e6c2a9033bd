//! Output directory bookkeeping and the run report.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes `data` to `path` through a temporary sibling and a rename, so a
/// present file is always complete.
pub fn write_atomic(path: &Path, data: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, data)?;
    std::fs::rename(&tmp, path)
}

#[derive(Debug)]
pub struct RunReport {
    pub command: String,
    pub config_echo: String,
    pub checks: Vec<Check>,
    pub timings: Vec<(String, Duration)>,
    pub manifest: Vec<ManifestEntry>,
    out: PathBuf,
}

impl RunReport {
    pub fn new(command: &str, config_echo: String, out: PathBuf) -> Self {
        RunReport {
            command: command.into(),
            config_echo,
            checks: Vec::new(),
            timings: Vec::new(),
            manifest: Vec::new(),
            out,
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        let name = name.into();
        assert!(self.checks.iter().all(|c| c.name != name), "check {name} recorded twice");
        self.checks.push(Check { name, passed, detail: detail.into() });
    }

    /// Writes an output file and records it in the manifest.
    pub fn emit(&mut self, file: &str, data: &[u8]) -> io::Result<()> {
        write_atomic(&self.out.join(file), data)?;
        let entry = ManifestEntry { file: file.into(), bytes: data.len(), sha256: sha256_hex(data) };
        match self.manifest.iter_mut().find(|e| e.file == file) {
            Some(e) => *e = entry,
            None => self.manifest.push(entry),
        }
        Ok(())
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "status: {}", if self.all_passed() { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "checks_passed: {}/{}", self.checks.iter().filter(|c| c.passed).count(), self.checks.len());
        s.push_str("\n[config]\n");
        s.push_str(&self.config_echo);
        s.push_str("\n[checks]\n");
        for c in &self.checks {
            let _ = writeln!(s, "{}: {} {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        }
        s.push_str("\n[timing]\n");
        for (stage, t) in &self.timings {
            let _ = writeln!(s, "{stage}: {:.3} s", t.as_secs_f64());
        }
        s.push_str("\n[manifest]\n");
        for e in &self.manifest {
            let _ = writeln!(s, "{}: {} {}", e.file, e.sha256, e.bytes);
        }
        s
    }

    /// Writes report.txt; called after every other file is in place.
    pub fn finish(&self) -> io::Result<()> {
        write_atomic(&self.out.join("report.txt"), self.to_text().as_bytes())
    }
}

/// Manifest entries parsed back from a report, for verification.
pub fn parse_manifest(report: &str) -> Vec<ManifestEntry> {
    let mut out = Vec::new();
    let mut inside = false;
    for line in report.lines() {
        if line.starts_with('[') {
            inside = line == "[manifest]";
            continue;
        }
        if !inside || line.is_empty() {
            continue;
        }
        if let Some((file, rest)) = line.split_once(": ") {
            let mut it = rest.split_whitespace();
            if let (Some(h), Some(b)) = (it.next(), it.next()) {
                out.push(ManifestEntry { file: file.into(), bytes: b.parse().unwrap_or(0), sha256: h.into() });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = RunReport::new("verify", "seed = 0\n".into(), dir.path().to_path_buf());
        r.emit("a.csv", b"x\n1\n").unwrap();
        r.emit("b.csv", b"y\n").unwrap();
        r.check("one", true, "ok");
        r.finish().unwrap();
        let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
        let m = parse_manifest(&text);
        assert_eq!(m, r.manifest);
        for e in &m {
            assert_eq!(sha256_hex(&std::fs::read(dir.path().join(&e.file)).unwrap()), e.sha256);
        }
        assert!(!dir.path().join(".a.csv.tmp").exists());
    }
}
