// Ranks all time-invariant attacks (one bus, one coefficient for the whole
// episode) by cumulative reward.

use fdi_grid::baseline::{enumerate_constant_attacks, export_ranking};
use fdi_grid::defaults::default_grid;
use fdi_grid::env::EpisodeConfig;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = default_grid();
    let ranking = enumerate_constant_attacks(&params, &EpisodeConfig::default())?;

    println!("rank  bus  k'     cumulative reward");
    for r in ranking.iter().take(8) {
        println!("{:>4}  {:>3}  {:>4}  {:>12.4}", r.rank, r.action.target, r.action.coefficient, r.cumulative_reward);
    }
    println!("  ...");
    let worst = ranking.last().expect("30 actions");
    println!("{:>4}  {:>3}  {:>4}  {:>12.4}", worst.rank, worst.action.target, worst.action.coefficient, worst.cumulative_reward);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("ranking.csv");
    export_ranking(&ranking, &path, None)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("enumeration failed");
}
