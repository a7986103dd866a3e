// Round trip through a checkpoint: train briefly, save, reload, and run the
// greedy policy to extract its attack schedule and the system response.

use fdi_grid::defaults::default_grid;
use fdi_grid::env::{make_env, EpisodeConfig};
use fdi_grid::policy::checkpoint::Checkpoint;
use fdi_grid::policy::Architecture;
use fdi_grid::ppo::{evaluate_policy, train, PpoConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let episode = EpisodeConfig::default();
    let config = PpoConfig { total_env_steps: 5_000, ..Default::default() };
    let outcome = train(default_grid(), episode.clone(), config, "example")?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("policy.json");
    outcome.checkpoints.last().expect("final checkpoint").save(&path)?;

    let mut env = make_env(default_grid(), episode)?;
    let restored = Checkpoint::load_for(&path, &Architecture::for_grid(env.n(), env.config().kappa.len()))?;
    let eval = evaluate_policy(&restored.policy, &mut env)?;

    println!("cumulative reward of the greedy schedule: {:.4}", eval.cumulative_reward);
    println!("first steps of the schedule:");
    for (t, a) in eval.schedule.iter().enumerate().take(5) {
        println!("  step {t}: bus {} k' = {}", a.target, a.coefficient);
    }
    let last = eval.trajectory.last();
    let peak = last.omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    println!("max |omega| at the final step: {peak:.4e}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("evaluation failed");
}
