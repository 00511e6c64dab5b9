//! The run manifest: written before any output, completed when the run ends.
//!
//! It is itself a valid config file, so `--config manifest.txt` replays the
//! run; bookkeeping keys live under `manifest.` and are ignored by commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use weno_decmdp::config::KvConfig;

pub const MANIFEST_NAME: &str = "manifest.txt";

pub struct RunManifest {
    pub command: String,
    pub config: KvConfig,
    pub seed: Option<u64>,
    pub dir: PathBuf,
    outputs: Vec<PathBuf>,
    started_unix: u64,
    clock: Instant,
}

impl RunManifest {
    /// Create the run directory and write the manifest with status `running`.
    pub fn begin(command: &str, config: &KvConfig, seed: Option<u64>, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let m = Self {
            command: command.into(),
            config: config.clone(),
            seed,
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            started_unix,
            clock: Instant::now(),
        };
        m.write("running")?;
        Ok(m)
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join(MANIFEST_NAME)
    }

    /// Path inside the run directory, recorded as an output.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.add(p.clone());
        p
    }

    pub fn add(&mut self, p: PathBuf) {
        if !self.outputs.contains(&p) {
            self.outputs.push(p);
        }
    }

    pub fn finish(&self, status: &str) -> Result<()> {
        self.write(status)
    }

    fn render(&self, status: &str) -> String {
        let mut s = String::new();
        writeln!(s, "manifest.command = {}", self.command).unwrap();
        writeln!(s, "manifest.version = {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(s, "manifest.defaults_sha256 = {}", KvConfig::defaults_checksum()).unwrap();
        if let Some(seed) = self.seed {
            writeln!(s, "manifest.seed = {seed}").unwrap();
        }
        writeln!(s, "manifest.out = {}", self.dir.display()).unwrap();
        writeln!(s, "manifest.started_unix = {}", self.started_unix).unwrap();
        writeln!(s, "manifest.status = {status}").unwrap();
        if status != "running" {
            writeln!(s, "manifest.wall_clock_s = {:.3}", self.clock.elapsed().as_secs_f64()).unwrap();
        }
        for (i, p) in self.outputs.iter().enumerate() {
            let name = p.strip_prefix(&self.dir).unwrap_or(p);
            writeln!(s, "manifest.output.{i:03} = {}", name.display()).unwrap();
        }
        s.push_str(&self.config.render());
        s
    }

    fn write(&self, status: &str) -> Result<()> {
        std::fs::write(self.path(), self.render(status)).with_context(|| format!("writing {}", self.path().display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_is_a_loadable_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut kv = KvConfig::defaults();
        kv.set("solve.n", "64");
        let mut m = RunManifest::begin("solve", &kv, Some(3), dir.path()).unwrap();
        let text = std::fs::read_to_string(m.path()).unwrap();
        assert!(text.contains("manifest.status = running"));
        m.output("a.csv");
        m.finish("ok").unwrap();
        let back = KvConfig::load(&m.path()).unwrap();
        assert_eq!(back.get_str("solve.n"), Some("64"));
        assert_eq!(back.get_str("manifest.status"), Some("ok"));
        assert_eq!(back.get_str("manifest.output.000"), Some("a.csv"));
    }
}
