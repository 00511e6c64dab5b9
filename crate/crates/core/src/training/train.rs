//! The training loop: one episode, one exact gradient, one Adam step.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{adam_step, bptts_gradient, AdamHyper, AdamState, GradientOptions};
use crate::config::KvConfig;
use crate::env::{EpisodeConfig, EpisodeSetup, RewardRegistry};
use crate::error::{Error, Result};
use crate::physics::{ConservedState1D, InitialCondition};
use crate::policy::{Checkpoint, InputScaling, PolicyParams};
use crate::weno::{weno_trajectory, AlphaMode};

/// Episodes inspected by the divergence guard.
pub const DIVERGENCE_WINDOW: usize = 100;

/// Named starting points for [`TrainConfig::from_config`].
pub const PRESETS: &[&str] = &["desk", "paper"];

/// Keys a preset sets; a config file or flags may still override them.
pub fn preset(name: &str) -> Result<KvConfig> {
    let text = match name {
        // a short-horizon run that fits in minutes on one core
        "desk" => {
            "train.n = 64\ntrain.dt = 1e-3\ntrain.steps = 100\ntrain.episodes = 500\n\
             train.lr = 3e-3\ntrain.lr_half_life = 150\ntrain.lr_min = 1e-4\ntrain.start_jitter = 100\n"
        }
        // the full-scale setup: 128 cells, 1000 steps of 1e-4, 10000 episodes
        "paper" => {
            "train.n = 128\ntrain.dt = 1e-4\ntrain.steps = 1000\ntrain.episodes = 10000\n\
             train.lr = 3e-4\ntrain.lr_half_life = 0\ntrain.start_jitter = 0\n"
        }
        other => return Err(Error::config(format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")))),
    };
    KvConfig::parse(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Template episode; its initial condition is replaced per episode when
    /// `ics` holds more than one entry.
    pub episode: EpisodeConfig,
    pub ics: Vec<InitialCondition>,
    pub episodes: usize,
    pub adam: AdamHyper,
    /// Learning rate halves every this many episodes (0 keeps it constant)...
    pub lr_half_life: usize,
    /// ...but never drops below this.
    pub lr_min: f64,
    pub clip: f64,
    pub segment: usize,
    /// Write a checkpoint every this many episodes (0: only at the end).
    pub checkpoint_every: usize,
    pub seed: u64,
    pub scaling: InputScaling,
    /// Each episode starts from the classical solution after a uniformly
    /// drawn number of steps in `0..=start_jitter`.
    pub start_jitter: usize,
}

impl TrainConfig {
    /// Read `train.*` keys on top of built-in defaults.
    pub fn from_config(kv: &KvConfig) -> Result<Self> {
        let names: Vec<String> =
            kv.get_str("train.ics").unwrap_or("sod").split(',').map(|s| s.trim().to_string()).collect();
        let ics = names.iter().map(|n| InitialCondition::builtin(n, kv)).collect::<Result<Vec<_>>>()?;
        let mut episode = EpisodeConfig::from_config(
            kv,
            &names[0],
            kv.get_or("train.n", 64)?,
            kv.get_or("train.dt", 1e-3)?,
            kv.get_or("train.steps", 100)?,
        )?;
        episode.reward = kv.get_str("train.reward").unwrap_or("rl-weno").to_string();
        episode.alpha = AlphaMode::parse(kv.get_str("train.alpha").unwrap_or("per-step"))?;
        let adam = AdamHyper {
            lr: kv.get_or("train.lr", 3e-4)?,
            beta1: kv.get_or("train.beta1", 0.9)?,
            beta2: kv.get_or("train.beta2", 0.999)?,
            eps: kv.get_or("train.adam_eps", 1e-8)?,
        };
        let cfg = Self {
            episode,
            ics,
            episodes: kv.get_or("train.episodes", 500)?,
            adam,
            lr_half_life: kv.get_or("train.lr_half_life", 0)?,
            lr_min: kv.get_or("train.lr_min", 0.0)?,
            clip: kv.get_or("train.clip", 1.0)?,
            segment: kv.get_or("train.segment", 0)?,
            checkpoint_every: kv.get_or("train.checkpoint_every", 0)?,
            seed: kv.get_or("train.seed", 0)?,
            scaling: InputScaling::parse(kv.get_str("train.input_scaling").unwrap_or("smoothness"))?,
            start_jitter: kv.get_or("train.start_jitter", 0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("train.episodes must be at least 1"));
        }
        if !(self.adam.lr > 0.0) || !self.adam.lr.is_finite() {
            return Err(Error::config(format!("train.lr must be positive, got {}", self.adam.lr)));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) || !(self.adam.eps > 0.0) {
            return Err(Error::config("Adam needs beta1, beta2 in [0, 1) and eps > 0"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::config(format!("train.clip must be positive, got {}", self.clip)));
        }
        if self.ics.is_empty() {
            return Err(Error::config("train.ics is empty"));
        }
        if let Some(ic) = self.ics.iter().find(|ic| ic.equation() != self.episode.spec.kind) {
            return Err(Error::config(format!("`{}` belongs to a different equation", ic.name())));
        }
        RewardRegistry::default().get(&self.episode.reward)?;
        self.episode.validate()
    }

    /// Learning rate of episode `e` (0-based). Depends only on `e`, so a
    /// longer run replays a shorter one exactly.
    pub fn lr_at(&self, e: usize) -> f64 {
        if self.lr_half_life == 0 {
            return self.adam.lr;
        }
        let lr = self.adam.lr * 0.5f64.powf(e as f64 / self.lr_half_life as f64);
        lr.max(self.lr_min)
    }

    /// Flat `key = value` description, stored in checkpoints and manifests.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let e = &self.episode;
        let names: Vec<&str> = self.ics.iter().map(InitialCondition::name).collect();
        [
            ("ics", names.join(",")),
            ("equation", e.spec.kind.name().to_string()),
            ("gamma", e.spec.gamma.to_string()),
            ("n", e.n.to_string()),
            ("dt", e.dt.to_string()),
            ("steps", e.steps.to_string()),
            ("reward", e.reward.clone()),
            ("alpha", e.alpha.name()),
            ("boundary", e.boundary.name().to_string()),
            ("weno_eps", e.coeffs.eps.to_string()),
            ("episodes", self.episodes.to_string()),
            ("lr", self.adam.lr.to_string()),
            ("lr_half_life", self.lr_half_life.to_string()),
            ("lr_min", self.lr_min.to_string()),
            ("beta1", self.adam.beta1.to_string()),
            ("beta2", self.adam.beta2.to_string()),
            ("adam_eps", self.adam.eps.to_string()),
            ("clip", self.clip.to_string()),
            ("segment", self.segment.to_string()),
            ("seed", self.seed.to_string()),
            ("input_scaling", self.scaling.name().to_string()),
            ("start_jitter", self.start_jitter.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    /// 1-based.
    pub episode: usize,
    pub ret: f64,
    pub grad_norm: f64,
    pub clipped: bool,
    pub diverged: bool,
}

/// Per-episode returns in training order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardCurve(pub Vec<f64>);

impl RewardCurve {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean of the first `k` returns.
    pub fn head_mean(&self, k: usize) -> f64 {
        mean(&self.0[..k.min(self.0.len())])
    }

    /// Mean of the last `k` returns.
    pub fn tail_mean(&self, k: usize) -> f64 {
        mean(&self.0[self.0.len().saturating_sub(k)..])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Receives progress from [`train`].
pub trait TrainObserver {
    fn episode(&mut self, _row: &LogRow) -> Result<()> {
        Ok(())
    }

    /// Called at the checkpoint cadence and once at the end (`is_final`).
    fn checkpoint(&mut self, _episode: usize, _ck: &Checkpoint, _is_final: bool) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct Silent;

impl TrainObserver for Silent {}

/// Writes `train_log.csv` and checkpoint files into a directory.
pub struct FileObserver {
    dir: PathBuf,
    log: csv::Writer<File>,
    written: Vec<PathBuf>,
}

impl FileObserver {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("train_log.csv");
        let mut log = csv::Writer::from_path(&path)?;
        log.write_record(["episode", "return", "grad_norm", "clipped", "diverged"])?;
        Ok(Self { dir: dir.to_path_buf(), log, written: vec![path] })
    }

    /// Files created so far.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

impl TrainObserver for FileObserver {
    fn episode(&mut self, r: &LogRow) -> Result<()> {
        self.log.write_record([
            r.episode.to_string(),
            format!("{:e}", r.ret),
            format!("{:e}", r.grad_norm),
            u8::from(r.clipped).to_string(),
            u8::from(r.diverged).to_string(),
        ])?;
        self.log.flush()?;
        Ok(())
    }

    fn checkpoint(&mut self, episode: usize, ck: &Checkpoint, is_final: bool) -> Result<()> {
        let name = if is_final { "checkpoint.txt".to_string() } else { format!("checkpoint_ep{episode:06}.txt") };
        let path = self.dir.join(name);
        ck.save(&path)?;
        if !self.written.contains(&path) {
            self.written.push(path);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: RewardCurve,
    pub log: Vec<LogRow>,
}

fn checkpoint_of(cfg: &TrainConfig, params: &PolicyParams, completed: usize) -> Checkpoint {
    let mut ck = Checkpoint::new(params.clone(), cfg.scaling);
    ck.meta = cfg.echo();
    ck.meta.insert("episodes_completed".into(), completed.to_string());
    ck
}

/// Train the shared policy from `PolicyParams::init(cfg.seed)`.
pub fn train(cfg: &TrainConfig, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model = RewardRegistry::default().get(&cfg.episode.reward)?;
    let horizon = cfg.start_jitter + cfg.episode.steps;
    let grid = cfg.episode.grid()?;
    let trajectories: Vec<Vec<ConservedState1D>> = cfg
        .ics
        .iter()
        .map(|ic| weno_trajectory(&ic.sample(grid, cfg.episode.spec.gamma)?, &cfg.episode.spec, &cfg.episode.solver(), horizon))
        .collect::<Result<_>>()?;

    let mut params = PolicyParams::init(cfg.seed);
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let opts = GradientOptions { clip: Some(cfg.clip), segment: cfg.segment };
    let mut curve = RewardCurve::default();
    let mut log = Vec::with_capacity(cfg.episodes);
    let mut window = VecDeque::with_capacity(DIVERGENCE_WINDOW);

    for e in 0..cfg.episodes {
        let which = if cfg.ics.len() > 1 { rng.gen_range(0..cfg.ics.len()) } else { 0 };
        let start = if cfg.start_jitter > 0 { rng.gen_range(0..=cfg.start_jitter) } else { 0 };
        let mut ep = cfg.episode.clone();
        ep.ic = cfg.ics[which].clone();
        ep.start_step = start;
        let setup = EpisodeSetup::from_trajectory(ep, model.as_ref(), &trajectories[which])?;
        let g = bptts_gradient(&params, cfg.scaling, &setup, &opts)?;
        let hyper = AdamHyper { lr: cfg.lr_at(e), ..cfg.adam };
        adam_step(&mut params.0, &g.grad, &mut adam, &hyper);

        let row = LogRow { episode: e + 1, ret: g.ret, grad_norm: g.norm, clipped: g.clipped, diverged: g.diverged };
        observer.episode(&row)?;
        log.push(row);
        curve.0.push(g.ret);

        if window.len() == DIVERGENCE_WINDOW {
            window.pop_front();
        }
        window.push_back(g.diverged);
        let bad = window.iter().filter(|&&d| d).count();
        if 2 * bad > DIVERGENCE_WINDOW {
            let ck = checkpoint_of(cfg, &params, e + 1);
            observer.checkpoint(e + 1, &ck, true)?;
            return Err(Error::Diverged(format!(
                "{bad} of the last {DIVERGENCE_WINDOW} episodes diverged (episode {}, lr {:e}, last grad norm {:e})",
                e + 1,
                hyper.lr,
                g.norm
            )));
        }
        if cfg.checkpoint_every > 0 && (e + 1) % cfg.checkpoint_every == 0 && e + 1 < cfg.episodes {
            observer.checkpoint(e + 1, &checkpoint_of(cfg, &params, e + 1), false)?;
        }
    }
    let checkpoint = checkpoint_of(cfg, &params, cfg.episodes);
    observer.checkpoint(cfg.episodes, &checkpoint, true)?;
    Ok(TrainOutcome { checkpoint, curve, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(reward: &str, episodes: usize) -> TrainConfig {
        let mut kv = KvConfig::defaults();
        kv.merge(&preset("desk").unwrap());
        for (k, v) in [("train.n", "16"), ("train.steps", "5"), ("train.start_jitter", "3"), ("train.reward", reward)] {
            kv.set(k, v);
        }
        kv.set("train.episodes", episodes.to_string());
        TrainConfig::from_config(&kv).unwrap()
    }

    #[test]
    fn one_episode_is_one_step() {
        let out = train(&tiny("rl-weno", 1), &mut Silent).unwrap();
        assert_eq!(out.curve.len(), 1);
        assert_eq!(out.log.len(), 1);
        assert_ne!(out.checkpoint.params, PolicyParams::init(0));
        assert_eq!(out.checkpoint.meta["episodes_completed"], "1");
    }

    #[test]
    fn longer_runs_replay_shorter_ones() {
        let a = train(&tiny("bc-weno", 4), &mut Silent).unwrap();
        let b = train(&tiny("bc-weno", 8), &mut Silent).unwrap();
        assert_eq!(a.curve.0, b.curve.0[..4]);
        let c = train(&tiny("bc-weno", 8), &mut Silent).unwrap();
        assert_eq!(b.curve, c.curve);
        assert_eq!(b.checkpoint, c.checkpoint);
    }

    #[test]
    fn lr_schedule_halves_and_floors() {
        let cfg = tiny("rl-weno", 1);
        assert_eq!(cfg.lr_at(0), cfg.adam.lr);
        assert!((cfg.lr_at(cfg.lr_half_life) - cfg.adam.lr / 2.0).abs() < 1e-18);
        assert_eq!(cfg.lr_at(1_000_000), cfg.lr_min);
    }

    #[test]
    fn rejects_bad_settings() {
        let mut kv = KvConfig::defaults();
        kv.set("train.episodes", "0");
        assert!(TrainConfig::from_config(&kv).is_err());
        let mut kv = KvConfig::defaults();
        kv.set("train.lr", "-1");
        assert!(TrainConfig::from_config(&kv).is_err());
        let mut kv = KvConfig::defaults();
        kv.set("train.ics", "sod,burgers-rarefaction");
        assert!(TrainConfig::from_config(&kv).is_err());
        let mut kv = KvConfig::defaults();
        kv.set("train.reward", "dagger");
        assert!(TrainConfig::from_config(&kv).is_err());
        assert!(preset("huge").is_err());
    }

    #[test]
    fn full_scale_preset_values() {
        let mut kv = KvConfig::defaults();
        kv.merge(&preset("paper").unwrap());
        let cfg = TrainConfig::from_config(&kv).unwrap();
        assert_eq!((cfg.episode.n, cfg.episode.dt, cfg.episode.steps), (128, 1e-4, 1000));
        assert_eq!((cfg.episodes, cfg.adam.lr), (10000, 3e-4));
    }

    #[test]
    fn file_observer_writes_log_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny("rl-weno", 3);
        cfg.checkpoint_every = 2;
        let mut obs = FileObserver::new(dir.path()).unwrap();
        let out = train(&cfg, &mut obs).unwrap();
        let log = std::fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
        assert!(log.starts_with("episode,return,grad_norm,clipped,diverged\n"));
        assert_eq!(log.lines().count(), 4);
        assert!(dir.path().join("checkpoint_ep000002.txt").exists());
        assert_eq!(Checkpoint::load(&dir.path().join("checkpoint.txt")).unwrap(), out.checkpoint);
        assert_eq!(obs.written().len(), 3);
    }
}
