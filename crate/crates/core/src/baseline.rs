//! Exhaustive search over time-invariant attacks.
//!
//! A time-invariant attack applies one `(bus, k')` pair at every step of the
//! episode, so there are only `n·|κ|` of them. Their rewards give a reference
//! value for learned, time-varying policies.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{make_env, AttackAction, EpisodeConfig, FdiEnv};
use crate::error::{Error, Result};
use crate::grid::GridParams;
use crate::io::export::{self, ArtifactMeta};

pub const RANKING_HEADER: [&str; 4] = ["rank", "target_bus", "coefficient", "cumulative_reward"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantAttackResult {
    pub action: AttackAction,
    pub cumulative_reward: f64,
    /// 1-based position in the descending ranking.
    pub rank: usize,
}

/// Plays `action` at every step of a fresh episode and returns its cumulative reward.
pub fn rollout_constant(env: &mut FdiEnv, action: AttackAction) -> Result<f64> {
    env.reset();
    while !env.step(action)?.done {}
    env.cumulative_reward()
}

/// Ranks all `n·|κ|` constant attacks by cumulative reward, highest first.
///
/// Ties keep the enumeration order: target bus, then position in `κ`.
pub fn enumerate_constant_attacks(
    params: &GridParams,
    episode: &EpisodeConfig,
) -> Result<Vec<ConstantAttackResult>> {
    let env = make_env(params.clone(), episode.clone())?;
    let actions: Vec<AttackAction> = (0..params.n())
        .flat_map(|target| {
            episode
                .kappa
                .iter()
                .map(move |&coefficient| AttackAction { target, coefficient })
        })
        .collect();

    let rewards: Vec<f64> = actions
        .par_iter()
        .map(|&action| {
            let mut env = env.clone();
            rollout_constant(&mut env, action).map_err(|e| Error::Action {
                target: action.target,
                coefficient: action.coefficient,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..actions.len()).collect();
    // stable sort keeps enumeration order among equal rewards
    order.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]));
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(pos, i)| ConstantAttackResult {
            action: actions[i],
            cumulative_reward: rewards[i],
            rank: pos + 1,
        })
        .collect())
}

/// Writes the ranking as CSV with header `rank,target_bus,coefficient,cumulative_reward`.
pub fn export_ranking(
    results: &[ConstantAttackResult],
    path: &Path,
    meta: Option<&ArtifactMeta>,
) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Usage("cannot export an empty ranking".into()));
    }
    let rows = results.iter().map(|r| {
        vec![
            r.rank.to_string(),
            r.action.target.to_string(),
            export::fmt_f64(r.action.coefficient),
            export::fmt_f64(r.cumulative_reward),
        ]
    });
    export::write_csv(path, meta, &RANKING_HEADER, rows)
}

#[derive(Serialize)]
struct RankingDocument<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<&'a ArtifactMeta>,
    results: &'a [ConstantAttackResult],
}

pub fn export_ranking_json(
    results: &[ConstantAttackResult],
    path: &Path,
    meta: Option<&ArtifactMeta>,
) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Usage("cannot export an empty ranking".into()));
    }
    export::write_json(path, &RankingDocument { meta, results })
}

pub fn read_ranking(path: &Path) -> Result<Vec<ConstantAttackResult>> {
    let table = export::read_csv(path)?;
    table.expect_header(&RANKING_HEADER)?;
    table
        .rows
        .iter()
        .map(|row| {
            Ok(ConstantAttackResult {
                rank: table.parse(row, 0)?,
                action: AttackAction {
                    target: table.parse(row, 1)?,
                    coefficient: table.parse(row, 2)?,
                },
                cumulative_reward: table.parse(row, 3)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::default_grid;

    fn short() -> EpisodeConfig {
        EpisodeConfig { steps: 60, ..Default::default() }
    }

    #[test]
    fn cardinality_and_ranks() {
        let results = enumerate_constant_attacks(&default_grid(), &short()).unwrap();
        assert_eq!(results.len(), 30);
        let mut ranks: Vec<usize> = results.iter().map(|r| r.rank).collect();
        ranks.sort();
        assert_eq!(ranks, (1..=30).collect::<Vec<_>>());
        assert!(results.windows(2).all(|w| w[0].cumulative_reward >= w[1].cumulative_reward));
    }

    #[test]
    fn ties_follow_enumeration_order() {
        // zero noise makes every reward exactly 0
        let cfg = EpisodeConfig { steps: 10, ic_noise_half_width: 0.0, ..Default::default() };
        let results = enumerate_constant_attacks(&default_grid(), &cfg).unwrap();
        let order: Vec<(usize, f64)> =
            results.iter().map(|r| (r.action.target, r.action.coefficient)).collect();
        let expected: Vec<(usize, f64)> =
            (0..10).flat_map(|t| [-1.0, 0.0, 1.0].map(|c| (t, c))).collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn csv_export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ranking.csv");
        let results = enumerate_constant_attacks(&default_grid(), &short()).unwrap();
        export_ranking(&results, &path, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 31);
        assert_eq!(text.lines().next().unwrap(), "rank,target_bus,coefficient,cumulative_reward");
        assert_eq!(read_ranking(&path).unwrap(), results);

        let again = dir.path().join("again.csv");
        export_ranking(&results, &again, None).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn json_export_mirrors_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ranking.json");
        let results = enumerate_constant_attacks(&default_grid(), &short()).unwrap();
        export_ranking_json(&results, &path, None).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let first = &doc["results"][0];
        assert_eq!(first["rank"], 1);
        assert_eq!(first["cumulative_reward"].as_f64().unwrap(), results[0].cumulative_reward);
    }

    #[test]
    fn empty_export_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_ranking(&[], &dir.path().join("x.csv"), None).is_err());
    }
}
