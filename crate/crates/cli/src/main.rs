//! `weno-decmdp`: solve, train, evaluate and verify from the command line.

mod eval;
mod manifest;
mod plot;
mod solve;
mod train;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use weno_decmdp::config::KvConfig;

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "WENO_DECMDP_OUT";

#[derive(Parser)]
#[command(name = "weno-decmdp", version, about = "Learned WENO flux weights as a multi-agent control problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver (classical WENO by default) and write snapshots.
    Solve(solve::SolveArgs),
    /// Train the shared flux-weight policy.
    Train(train::TrainArgs),
    /// Compare a policy with classical WENO and the exact solution.
    Eval(eval::EvalArgs),
    /// Run the built-in invariant checks.
    Verify(verify::VerifyArgs),
}

/// Options every command accepts.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Config file (`key = value` lines); flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output root; the run writes into a subdirectory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Exit status for failures that are not configuration errors.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Layer defaults, an optional preset, the config file and flag overrides.
pub fn resolve_config(common: &Common, preset: Option<KvConfig>, flags: &[(&str, Option<String>)]) -> Result<KvConfig> {
    let mut kv = KvConfig::defaults();
    if let Some(p) = preset {
        kv.merge(&p);
    }
    if let Some(path) = &common.config {
        let file = KvConfig::load(path)?;
        let mut clean = KvConfig::default();
        for (k, v) in file.iter().filter(|(k, _)| !k.starts_with("manifest.")) {
            clean.set(k, v);
        }
        kv.merge(&clean);
    }
    for (k, v) in flags {
        if let Some(v) = v {
            kv.set(*k, v.clone());
        }
    }
    for kvp in &common.set {
        let (k, v) = kvp
            .split_once('=')
            .ok_or_else(|| weno_decmdp::Error::Config(format!("--set expects KEY=VALUE, got `{kvp}`")))?;
        kv.set(k.trim(), v.trim());
    }
    Ok(kv)
}

/// Output root: `--out`, then the environment variable, then `out` in the
/// config, then `./out`.
pub fn out_root(common: &Common, kv: &KvConfig) -> PathBuf {
    if let Some(p) = &common.out {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(kv.get_str("out").unwrap_or("out"))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<weno_decmdp::Error>() {
            return err.exit_code() as u8;
        }
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve::run(&a),
        Command::Train(a) => train::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Verify(a) => verify::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
