use anyhow::Result;
use clap::Args;
use weno_decmdp::verify::{run_checks, CHECK_NAMES};

use crate::manifest::RunManifest;
use crate::{out_root, resolve_config, write_file, Common, NumericalFailure};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated subset of checks (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}

pub fn run(a: &VerifyArgs) -> Result<()> {
    let mut kv = resolve_config(&a.common, None, &[])?;
    let only: Vec<String> = a.only.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    kv.set("verify.only", if only.is_empty() { CHECK_NAMES.join(",") } else { only.join(",") });
    let dir = out_root(&a.common, &kv).join("verify");
    let mut m = RunManifest::begin("verify", &kv, None, &dir)?;
    let results = match run_checks(&only) {
        Ok(r) => r,
        Err(e) => {
            m.finish("failed")?;
            return Err(e.into());
        }
    };
    let mut report = String::new();
    for r in &results {
        println!("{}", r.line());
        report.push_str(&r.line());
        report.push('\n');
    }
    write_file(&m.output("verify_report.txt"), &report)?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    m.finish(if failed.is_empty() { "ok" } else { "failed" })?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(NumericalFailure(format!("checks failed: {}", failed.join(", "))).into())
    }
}
