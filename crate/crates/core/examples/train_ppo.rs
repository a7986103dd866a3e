// Trains the PPO attacker for a short budget and prints the learning curve.
//
// `cargo run --release --example train_ppo -- 1000000` runs the full budget.

use fdi_grid::defaults::default_grid;
use fdi_grid::env::EpisodeConfig;
use fdi_grid::ppo::{train_with, PpoConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_with_budget(10_000)
}

fn run_with_budget(total_env_steps: usize) -> Result<(), Box<dyn std::error::Error>> {
    let config = PpoConfig { total_env_steps, checkpoint_interval: 10, ..Default::default() };
    let (trainer, metrics) = train_with(default_grid(), EpisodeConfig::default(), config, "example", |t, ckpt| {
        println!("  checkpoint at step {} ({} updates)", ckpt.global_step, t.updates_done());
        Ok(())
    })?;

    println!("global_step  mean_episode_reward  entropy");
    let stride = (metrics.len() / 10).max(1);
    for m in metrics.iter().step_by(stride) {
        println!("{:>11}  {:>19.4}  {:>7.4}", m.global_step, m.mean_episode_reward, m.entropy);
    }
    println!("trained for {} environment steps", trainer.global_step);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let budget = std::env::args().nth(1).map(|s| s.parse().expect("step budget")).unwrap_or(10_000);
    run_with_budget(budget).expect("training failed");
}
