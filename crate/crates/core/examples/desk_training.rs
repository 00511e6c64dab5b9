//! Train the shared policy with the desk preset, then compare it with
//! classical WENO on Sod at two resolutions.
//!
//! `cargo run --release --example desk_training -- 200` trains 200 episodes.

use weno_decmdp::config::KvConfig;
use weno_decmdp::policy::NeuralPolicy;
use weno_decmdp::training::{evaluate, preset, train, EvalCase, LogRow, TrainConfig, TrainObserver};

struct Progress;

impl TrainObserver for Progress {
    fn episode(&mut self, row: &LogRow) -> weno_decmdp::Result<()> {
        if row.episode.is_multiple_of(50) {
            println!("episode {:4}  return {:.4e}", row.episode, row.ret);
        }
        Ok(())
    }
}

fn main() -> weno_decmdp::Result<()> {
    let mut kv = KvConfig::defaults();
    kv.merge(&preset("desk")?);
    if let Some(episodes) = std::env::args().nth(1) {
        kv.set("train.episodes", episodes);
    }
    let cfg = TrainConfig::from_config(&kv)?;
    let out = train(&cfg, &mut Progress)?;
    println!(
        "first 10 episodes: {:.4e}, last 100: {:.4e}",
        out.curve.head_mean(10),
        out.curve.tail_mean(100)
    );

    let policy = NeuralPolicy::new(out.checkpoint.params.clone(), out.checkpoint.scaling);
    for n in [64, 128] {
        let r = evaluate(&policy, &kv, &EvalCase { ic: "sod".into(), n, dt: 1e-4, t_final: None })?;
        println!(
            "sod n={n}: agent vs weno {:.3e}, weno vs exact {:.4}, agent vs exact {:.4}",
            r.l2_agent_weno,
            r.l2_weno_exact.unwrap_or(f64::NAN),
            r.l2_agent_exact.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
