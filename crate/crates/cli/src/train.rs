use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use weno_decmdp::training::{preset, train as train_policy, FileObserver, LogRow, TrainConfig, TrainObserver};
use weno_decmdp::policy::Checkpoint;

use crate::manifest::RunManifest;
use crate::plot::{line_plot, moving_average, read_csv, Series};
use crate::{out_root, resolve_config, write_file, Common};

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// `desk` (minutes on one core) or `paper` (the full-scale setup).
    #[arg(long)]
    pub preset: Option<String>,
    /// `rl-weno`, `bc-weno` or `bc-analytical`.
    #[arg(long)]
    pub reward: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Comma-separated initial conditions sampled per episode.
    #[arg(long)]
    pub ics: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "checkpoint-every")]
    pub checkpoint_every: Option<usize>,
    /// Steps per recorded tape segment (0: whole episode).
    #[arg(long)]
    pub segment: Option<usize>,
    /// Print progress every this many episodes (0: silent).
    #[arg(long, default_value_t = 50)]
    pub progress: usize,
}

fn flags(a: &TrainArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("train.reward", a.reward.clone()),
        ("train.episodes", a.episodes.map(|v| v.to_string())),
        ("train.ics", a.ics.clone()),
        ("train.n", a.n.map(|v| v.to_string())),
        ("train.dt", a.dt.map(|v| v.to_string())),
        ("train.steps", a.steps.map(|v| v.to_string())),
        ("train.lr", a.lr.map(|v| v.to_string())),
        ("train.seed", a.seed.map(|v| v.to_string())),
        ("train.checkpoint_every", a.checkpoint_every.map(|v| v.to_string())),
        ("train.segment", a.segment.map(|v| v.to_string())),
    ]
}

struct Progress {
    files: FileObserver,
    every: usize,
    total: usize,
}

impl TrainObserver for Progress {
    fn episode(&mut self, row: &LogRow) -> weno_decmdp::Result<()> {
        if self.every > 0 && (row.episode.is_multiple_of(self.every) || row.episode == self.total) {
            eprintln!(
                "episode {}/{}: return {:.5e}, grad norm {:.3e}{}",
                row.episode,
                self.total,
                row.ret,
                row.grad_norm,
                if row.diverged { ", diverged" } else { "" }
            );
        }
        self.files.episode(row)
    }

    fn checkpoint(&mut self, episode: usize, ck: &Checkpoint, is_final: bool) -> weno_decmdp::Result<()> {
        self.files.checkpoint(episode, ck, is_final)
    }
}

/// Reward curve of one log, raw and smoothed.
fn curve_series(log: &Path, label: &str, window: usize) -> Result<Vec<Series>> {
    let t = read_csv(log)?;
    let ep = t.column("episode")?;
    let ret = t.column("return")?;
    let smooth = moving_average(ret, window);
    Ok(vec![
        Series { label: format!("{label} (mean of {window})"), points: ep.iter().copied().zip(smooth).collect() },
        Series { label: label.to_string(), points: ep.iter().copied().zip(ret.iter().copied()).collect() },
    ])
}

pub fn run(a: &TrainArgs) -> Result<()> {
    let preset_kv = match &a.preset {
        Some(p) => Some(preset(p)?),
        None => None,
    };
    let mut kv = resolve_config(&a.common, preset_kv, &flags(a))?;
    if let Some(p) = &a.preset {
        kv.set("train.preset", p.clone());
    }
    let cfg = TrainConfig::from_config(&kv)?;
    let run_id = format!("train-{}-s{}", cfg.episode.reward, cfg.seed);
    let root = out_root(&a.common, &kv);
    let dir = root.join(&run_id);
    let mut m = RunManifest::begin("train", &kv, Some(cfg.seed), &dir)?;
    let mut obs = Progress { files: FileObserver::new(&dir)?, every: a.progress, total: cfg.episodes };
    let result = train_policy(&cfg, &mut obs);
    for p in obs.files.written() {
        m.add(p.clone());
    }
    let log = dir.join("train_log.csv");
    let window = (cfg.episodes / 20).clamp(1, 50);
    if log.exists() {
        let mut series = curve_series(&log, &cfg.episode.reward, window)?;
        series.reverse();
        let svg = line_plot(&format!("{run_id}: return per episode"), "episode", "return", &series);
        write_file(&m.output("reward_curve.svg"), &svg)?;
        m.add(comparison_plot(&root, window)?);
    }
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            m.finish("failed")?;
            return Err(e.into());
        }
    };
    let mut summary = String::new();
    writeln!(summary, "run = {run_id}").unwrap();
    writeln!(summary, "episodes = {}", out.curve.len()).unwrap();
    writeln!(summary, "first10_mean_return = {:e}", out.curve.head_mean(10)).unwrap();
    writeln!(summary, "last100_mean_return = {:e}", out.curve.tail_mean(100)).unwrap();
    writeln!(summary, "clipped_episodes = {}", out.log.iter().filter(|r| r.clipped).count()).unwrap();
    writeln!(summary, "diverged_episodes = {}", out.log.iter().filter(|r| r.diverged).count()).unwrap();
    writeln!(summary, "checkpoint = {}", dir.join("checkpoint.txt").display()).unwrap();
    write_file(&m.output("train_summary.txt"), &summary)?;
    print!("{summary}");
    m.finish("ok")?;
    Ok(())
}

/// Overlay the smoothed curves of every training run under `root`.
fn comparison_plot(root: &Path, window: usize) -> Result<PathBuf> {
    let mut runs: Vec<_> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("train_log.csv").exists())
        .collect();
    runs.sort();
    let mut series = Vec::new();
    for r in &runs {
        let name = r.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        let mut s = curve_series(&r.join("train_log.csv"), &name, window)?;
        series.push(s.remove(0));
    }
    let svg = line_plot("Return during training", "episode", &format!("return (mean of {window})"), &series);
    let path = root.join("reward_comparison.svg");
    write_file(&path, &svg)?;
    Ok(path)
}
