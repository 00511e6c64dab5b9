use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Result;
use clap::Args;
use weno_decmdp::config::KvConfig;
use weno_decmdp::env::State2D;
use weno_decmdp::scheme::{ActionPolicy, PolicyRegistry};
use weno_decmdp::training::{error_table, evaluate, evaluate_kh, metric_description, EvalCase, EvalReport};
use weno_decmdp::weno::WenoOracle;
use weno_decmdp::Error;

use crate::manifest::RunManifest;
use crate::plot::{heatmap_png, line_plot, read_csv, Series};
use crate::{out_root, resolve_config, write_file, Common, NumericalFailure};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained checkpoint file.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Any registered policy instead of a checkpoint (`weno`, `linear`, ...).
    #[arg(long)]
    pub policy: Option<String>,
    /// `euler` (default), `burgers` or `euler2d`.
    #[arg(long)]
    pub equation: Option<String>,
    /// Comma-separated initial conditions.
    #[arg(long)]
    pub ics: Option<String>,
    /// Single initial condition (same as `--ics` with one entry).
    #[arg(long)]
    pub ic: Option<String>,
    /// Comma-separated grid sizes.
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Overrides each initial condition's default end time.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
}

fn flags(a: &EvalArgs) -> Vec<(&'static str, Option<String>)> {
    let two_d = a.equation.as_deref() == Some("euler2d");
    vec![
        ("eval.checkpoint", a.checkpoint.as_ref().map(|p| p.display().to_string())),
        ("eval.policy", a.policy.clone()),
        ("eval.equation", a.equation.clone()),
        ("eval.ics", a.ics.clone().or_else(|| a.ic.clone())),
        ("eval.ns", a.ns.clone()),
        (if two_d { "eval.kh_dt" } else { "eval.dt" }, a.dt.map(|v| v.to_string())),
        (if two_d { "eval.kh_t_final" } else { "eval.t_final" }, a.t_final.map(|v| v.to_string())),
    ]
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| Error::Config(format!("bad {what} `{x}`")).into()))
        .collect()
}

fn load_policy(kv: &KvConfig) -> Result<(String, Arc<dyn ActionPolicy>)> {
    let spec = match (kv.get_str("eval.checkpoint"), kv.get_str("eval.policy")) {
        (Some(ck), _) => format!("checkpoint:{ck}"),
        (None, Some(p)) => p.to_string(),
        (None, None) => return Err(Error::Config("pass --checkpoint or --policy".into()).into()),
    };
    let p = PolicyRegistry::default().create(&spec)?;
    Ok((spec, p))
}

pub fn run(a: &EvalArgs) -> Result<()> {
    let kv = resolve_config(&a.common, None, &flags(a))?;
    let (policy_spec, policy) = load_policy(&kv)?;
    let equation = kv.get_str("eval.equation").unwrap_or("euler").to_string();
    let run_id = match kv.get_str("eval.checkpoint") {
        Some(ck) => {
            let stem = Path::new(ck).parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().to_string());
            format!("eval-{equation}-{}", stem.unwrap_or_else(|| "checkpoint".into()))
        }
        None => format!("eval-{equation}-{}", policy_spec.replace([':', '/'], "_")),
    };
    let dir = out_root(&a.common, &kv).join(&run_id);
    let mut m = RunManifest::begin("eval", &kv, None, &dir)?;
    let result = match equation.as_str() {
        "euler2d" => eval_2d(&kv, policy.as_ref(), &policy_spec, &mut m),
        "euler" | "burgers" => eval_1d(&kv, &equation, policy.as_ref(), &policy_spec, &mut m),
        other => Err(Error::Config(format!("unknown equation `{other}` (euler, burgers, euler2d)")).into()),
    };
    m.finish(if result.is_ok() { "ok" } else { "failed" })?;
    result
}

fn eval_1d(kv: &KvConfig, equation: &str, policy: &dyn ActionPolicy, spec: &str, m: &mut RunManifest) -> Result<()> {
    let (default_ics, default_ns) = match equation {
        "burgers" => ("burgers-rarefaction", "64,128,256,512"),
        _ => ("sod,sod2,lax,sonic-rarefaction", "64,128,256,512"),
    };
    let ics: Vec<String> = list(kv.get_str("eval.ics").unwrap_or(default_ics), "initial condition")?;
    let ns: Vec<usize> = list(kv.get_str("eval.ns").unwrap_or(default_ns), "grid size")?;
    let dt: f64 = kv.get_or("eval.dt", 1e-4)?;
    let t_final: Option<f64> = kv.get("eval.t_final")?;
    let calibration: f64 = kv.get_or("eval.l2_calibration", 1.0)?;

    let mut report = format!("policy = {spec}\nequation = {equation}\n");
    report.push_str(&metric_description(calibration));
    let mut reports: Vec<EvalReport> = Vec::new();
    for ic in &ics {
        for &n in &ns {
            let r = evaluate(policy, kv, &EvalCase { ic: ic.clone(), n, dt, t_final })?;
            eprintln!(
                "{ic} n={n}: agent-vs-weno {:.3e}, weno-vs-exact {}",
                r.l2_agent_weno,
                r.l2_weno_exact.map_or("n/a".into(), |v| format!("{v:.4}"))
            );
            report.push_str(&r.render());
            profile(m, &r)?;
            reports.push(r);
        }
    }
    write_file(&m.output("eval_report.txt"), &report)?;
    write_file(&m.output("error_table.csv"), &error_table(&reports))?;
    print!("{}", error_table(&reports));
    Ok(())
}

/// Density of agent, WENO and exact solutions, then an overlay plot from that CSV.
fn profile(m: &mut RunManifest, r: &EvalReport) -> Result<()> {
    let id = format!("{}-n{}", r.ic, r.n);
    let csv_path = m.output(&format!("{id}_t{}.csv", r.steps));
    let name = if r.equation == "burgers" { "u" } else { "rho" };
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["x".to_string(), format!("agent_{name}"), format!("weno_{name}")];
    if r.exact.is_some() {
        header.push(format!("exact_{name}"));
    }
    w.write_record(&header)?;
    for j in 0..r.n {
        let mut row = vec![format!("{:e}", r.agent.grid.center(j)), format!("{:e}", r.agent.field(0)[j]), format!("{:e}", r.weno.field(0)[j])];
        if let Some(e) = &r.exact {
            row.push(format!("{:e}", e.field(0)[j]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    drop(w);
    let t = read_csv(&csv_path)?;
    let x = t.column("x")?;
    let series: Vec<Series> = t.headers[1..]
        .iter()
        .map(|h| Ok(Series { label: h.clone(), points: x.iter().copied().zip(t.column(h)?.iter().copied()).collect() }))
        .collect::<Result<_>>()?;
    let svg = line_plot(&format!("{} N={} t={}", r.ic, r.n, r.t_final), "x", name, &series);
    write_file(&m.output(&format!("{id}_t{}.svg", r.steps)), &svg)
}

fn density_csv(path: &Path, s: &State2D) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "rho"])?;
    for j in 0..s.grid.ny {
        for i in 0..s.grid.nx {
            let (x, y) = s.grid.center(i, j);
            w.write_record([format!("{x:e}"), format!("{y:e}"), format!("{:e}", s.at(0, i, j))])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn eval_2d(kv: &KvConfig, policy: &dyn ActionPolicy, spec: &str, m: &mut RunManifest) -> Result<()> {
    let ic = kv.get_str("eval.ics").unwrap_or("kelvin-helmholtz");
    if ic != "kelvin-helmholtz" {
        return Err(Error::Config(format!("euler2d supports `kelvin-helmholtz`, not `{ic}`")).into());
    }
    let n: usize = match kv.get_str("eval.ns") {
        Some(s) => *list::<usize>(s, "grid size")?.first().unwrap_or(&64),
        None => 64,
    };
    let dt: f64 = kv.require("eval.kh_dt")?;
    let t_final: f64 = kv.require("eval.kh_t_final")?;
    let gamma: f64 = kv.get_or("gamma", 1.4)?;
    let mut report = format!("policy = {spec}\nequation = euler2d\nic = kelvin-helmholtz\nt_final = {t_final}\n");
    let mut unstable = Vec::new();
    let weno = WenoOracle::default();
    for (label, p) in [("policy", policy), ("weno", &weno as &dyn ActionPolicy)] {
        eprintln!("kelvin-helmholtz {n}x{n} with {label}...");
        let r = evaluate_kh(p, n, dt, t_final, gamma)?;
        report.push_str(&r.render(label));
        if !r.stable() {
            unstable.push(label);
        }
        let stem = format!("kh-{label}-n{n}_t{}", r.completed);
        let csv_path = m.output(&format!("{stem}.csv"));
        density_csv(&csv_path, &r.last)?;
        let t = read_csv(&csv_path)?;
        heatmap_png(&m.output(&format!("{stem}.png")), n, n, t.column("rho")?, 6)?;
    }
    write_file(&m.output("eval_report.txt"), &report)?;
    print!("{report}");
    if unstable.is_empty() {
        Ok(())
    } else {
        Err(NumericalFailure(format!("Kelvin-Helmholtz run unstable for: {}", unstable.join(", "))).into())
    }
}
