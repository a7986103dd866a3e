// Free response of the shipped 10-bus system: a seeded perturbation around
// equilibrium decays under droop control, and a negative droop coefficient
// on one bus makes it grow instead.

use fdi_grid::defaults::default_grid;
use fdi_grid::env::{make_env, EpisodeConfig};
use fdi_grid::grid::simulate;
use fdi_grid::io::export_trajectory;

fn mean_abs(states: &[fdi_grid::GridState]) -> f64 {
    let sum: f64 = states.iter().flat_map(|s| &s.omega).map(|w| w.abs()).sum();
    sum / (states.len() * states[0].omega.len()) as f64
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = default_grid();
    let episode = EpisodeConfig::default();
    let env = make_env(params.clone(), episode.clone())?;
    let initial = env.initial_state();

    let free = simulate(&params, initial, episode.steps, episode.dt, None)?;
    let mut k = params.droop.clone();
    k[6] = -1.0;
    let attacked = simulate(&params, initial, episode.steps, episode.dt, Some(&vec![k; episode.steps]))?;

    for (label, traj) in [("designed droop", &free), ("bus 6 at k' = -1", &attacked)] {
        let s = &traj.states;
        println!(
            "{label:>18}: mean |omega| first 50 steps {:.3e}, last 50 steps {:.3e}",
            mean_abs(&s[1..51]),
            mean_abs(&s[s.len() - 50..])
        );
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("trajectory.csv");
    export_trajectory(&free, &path, None)?;
    println!("wrote {} lines to {}", std::fs::read_to_string(&path)?.lines().count(), path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("simulation failed");
}
