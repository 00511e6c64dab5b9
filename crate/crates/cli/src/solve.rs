use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use clap::Args;
use weno_decmdp::physics::{ConservedState1D, EquationKind, EquationSpec, Grid1D, InitialCondition};
use weno_decmdp::scheme::PolicyRegistry;
use weno_decmdp::training::field0_l2;
use weno_decmdp::weno::{policy_step, Boundary, SolverConfig, TimeScheme, WenoCoefficients};
use weno_decmdp::Error;

use crate::manifest::RunManifest;
use crate::plot::{line_plot, read_csv, Series};
use crate::{out_root, resolve_config, write_file, Common};

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial condition name.
    #[arg(long)]
    pub ic: Option<String>,
    /// Expected equation (`euler` or `burgers`); must match the initial condition.
    #[arg(long)]
    pub equation: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of steps; overrides `--t-final`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// `fe` (forward Euler) or `rk3`.
    #[arg(long)]
    pub time: Option<String>,
    /// `outflow` or `periodic`.
    #[arg(long)]
    pub boundary: Option<String>,
    /// Also write a snapshot every this many steps.
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<usize>,
    /// Weight policy: `weno`, `upwind`, `linear`, `checkpoint:<path>`, ...
    #[arg(long)]
    pub policy: Option<String>,
}

/// `x,<fields>` rows of one state.
pub fn snapshot_csv(path: &Path, s: &ConservedState1D, names: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x".to_string()];
    header.extend(names.iter().map(|n| n.to_string()));
    w.write_record(&header)?;
    for j in 0..s.n() {
        let mut row = vec![format!("{:e}", s.grid.center(j))];
        row.extend((0..s.nfields).map(|k| format!("{:e}", s.field(k)[j])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn flags(a: &SolveArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("solve.ic", a.ic.clone()),
        ("solve.equation", a.equation.clone()),
        ("solve.n", a.n.map(|v| v.to_string())),
        ("solve.dt", a.dt.map(|v| v.to_string())),
        ("solve.steps", a.steps.map(|v| v.to_string())),
        ("solve.t_final", a.t_final.map(|v| v.to_string())),
        ("solve.time", a.time.clone()),
        ("solve.boundary", a.boundary.clone()),
        ("solve.snapshot_every", a.snapshot_every.map(|v| v.to_string())),
        ("solve.policy", a.policy.clone()),
    ]
}

pub fn run(a: &SolveArgs) -> Result<()> {
    let kv = resolve_config(&a.common, None, &flags(a))?;
    let ic_name = kv.get_str("solve.ic").unwrap_or("sod").to_string();
    let ic = InitialCondition::builtin(&ic_name, &kv)?;
    if let Some(eq) = kv.get_str("solve.equation") {
        let want = match eq {
            "euler" => EquationKind::Euler1d,
            other => EquationKind::parse(other)?,
        };
        if want != ic.equation() {
            return Err(Error::Config(format!("`{ic_name}` is not a {eq} initial condition")).into());
        }
    }
    let gamma: f64 = kv.get_or("gamma", 1.4)?;
    let spec = EquationSpec { kind: ic.equation(), gamma };
    let n: usize = kv.get_or("solve.n", 128)?;
    let grid = Grid1D::new(n, kv.get_or("domain.x0", 0.0)?, kv.get_or("domain.x1", 1.0)?)?;
    let cfg = SolverConfig {
        dt: kv.get_or("solve.dt", 1e-4)?,
        boundary: Boundary::parse(kv.get_str("solve.boundary").unwrap_or("outflow"))?,
        time: TimeScheme::parse(kv.get_str("solve.time").unwrap_or("fe"))?,
        alpha: weno_decmdp::weno::AlphaMode::PerStep,
        coeffs: WenoCoefficients::with_eps(kv.get_or("weno.eps", 1e-6)?)?,
    };
    cfg.validate()?;
    let steps = match kv.get::<usize>("solve.steps")? {
        Some(0) => return Err(Error::Config("--steps must be at least 1".into()).into()),
        Some(s) => s,
        None => {
            let t = match kv.get::<f64>("solve.t_final")? {
                Some(t) => t,
                None => kv.require(&format!("ic.{ic_name}.t_final"))?,
            };
            cfg.steps_for(t)?
        }
    };
    let policy_name = kv.get_str("solve.policy").unwrap_or("weno").to_string();
    let policy = PolicyRegistry::with_builtins(cfg.coeffs).create(&policy_name)?;
    let every: usize = kv.get_or("solve.snapshot_every", 0)?;

    let run_id = format!("solve-{ic_name}-n{n}");
    let dir = out_root(&a.common, &kv).join(&run_id);
    let mut m = RunManifest::begin("solve", &kv, None, &dir)?;
    let names = spec.field_names();
    let mut s = ic.sample(grid, gamma)?;
    snapshot(&mut m, &run_id, 0, &s, names)?;
    let mut failure = None;
    for step in 1..=steps {
        match policy_step(&s, &spec, &cfg, policy.as_ref()) {
            Ok(next) => s = next,
            Err(Error::BlowUp { reason, .. }) => {
                failure = Some(Error::BlowUp { step, reason });
                break;
            }
            Err(e) => return Err(e.into()),
        }
        if (every > 0 && step % every == 0) || step == steps {
            snapshot(&mut m, &run_id, step, &s, names)?;
        }
    }

    let t = steps as f64 * cfg.dt;
    let calibration: f64 = kv.get_or("eval.l2_calibration", 1.0)?;
    let mut summary = String::new();
    writeln!(summary, "ic = {ic_name}").unwrap();
    writeln!(summary, "equation = {}", spec.kind.name()).unwrap();
    writeln!(summary, "policy = {policy_name}").unwrap();
    writeln!(summary, "n = {n}").unwrap();
    writeln!(summary, "dt = {}", cfg.dt).unwrap();
    writeln!(summary, "time_scheme = {}", cfg.time.name()).unwrap();
    writeln!(summary, "steps = {steps}").unwrap();
    writeln!(summary, "t_final = {t}").unwrap();
    let totals: Vec<String> = s.totals().iter().map(|v| format!("{v:e}")).collect();
    writeln!(summary, "field_totals = {}", totals.join(", ")).unwrap();
    if failure.is_none() && cfg.boundary == Boundary::Outflow {
        if let Some(exact) = ic.exact_profile(grid, gamma, t)? {
            writeln!(summary, "l2_vs_exact = {:e}", field0_l2(&s, &exact, calibration)).unwrap();
            writeln!(summary, "l2_vs_exact_uncalibrated = {:e}", field0_l2(&s, &exact, 1.0)).unwrap();
            writeln!(summary, "l2_calibration = {calibration}").unwrap();
            let p = m.output(&format!("{run_id}_exact_t{steps}.csv"));
            snapshot_csv(&p, &exact, names)?;
        }
    }
    if let Some(f) = &failure {
        writeln!(summary, "failure = {f}").unwrap();
    }
    write_file(&m.output(&format!("{run_id}_summary.txt")), &summary)?;
    print!("{summary}");
    match failure {
        Some(f) => {
            m.finish("failed")?;
            Err(f.into())
        }
        None => {
            m.finish("ok")?;
            Ok(())
        }
    }
}

fn snapshot(m: &mut RunManifest, run_id: &str, step: usize, s: &ConservedState1D, names: &[&str]) -> Result<()> {
    let csv_path = m.output(&format!("{run_id}_t{step}.csv"));
    snapshot_csv(&csv_path, s, names)?;
    let table = read_csv(&csv_path)?;
    let x = table.column("x")?;
    let series: Vec<Series> = names
        .iter()
        .map(|n| Ok(Series { label: n.to_string(), points: x.iter().copied().zip(table.column(n)?.iter().copied()).collect() }))
        .collect::<Result<_>>()?;
    let svg = line_plot(&format!("{run_id}, step {step}"), "x", "conserved value", &series);
    write_file(&m.output(&format!("{run_id}_t{step}.svg")), &svg)
}
