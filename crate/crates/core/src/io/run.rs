//! Command orchestration: resolves overrides, runs one experiment and writes
//! its artifacts under the output directory.
//!
//! | command       | artifacts                                            |
//! |---------------|------------------------------------------------------|
//! | `simulate`    | `trajectory.csv`                                     |
//! | `equilibrium` | `equilibrium.json`                                   |
//! | `bruteforce`  | `ranking.csv`, `ranking.json`                        |
//! | `train`       | `metrics.csv`, `checkpoints/step_<global_step>.json` |
//! | `evaluate`    | `schedule.csv`, `response.csv`                       |
//!
//! Failures leave whatever finished before them under a `.partial` name and
//! return the error, so a run never reports success with missing output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::export::{self, export_trajectory, fmt_f64, write_csv, write_json, ArtifactMeta};
use crate::baseline::{enumerate_constant_attacks, export_ranking, export_ranking_json};
use crate::env::{make_env, sample_initial_condition};
use crate::error::{Error, Result};
use crate::grid::{simulate, solve_equilibrium, solve_equilibrium_report};
use crate::policy::checkpoint::Checkpoint;
use crate::policy::Architecture;
use crate::ppo::{evaluate_policy, train_with, TrainingMetrics};

pub const METRICS_HEADER: [&str; 5] = ["global_step", "mean_episode_reward", "policy_loss", "value_loss", "entropy"];
pub const SCHEDULE_HEADER: [&str; 3] = ["step", "target_bus", "coefficient"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Equilibrium,
    Bruteforce,
    Train,
    Evaluate,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Simulate,
        Command::Equilibrium,
        Command::Bruteforce,
        Command::Train,
        Command::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Equilibrium => "equilibrium",
            Command::Bruteforce => "bruteforce",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown command `{s}`")))
    }
}

/// Command-line overrides applied on top of the parsed config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Replaces `ppo.seed`.
    pub seed: Option<u64>,
    /// Replaces `ppo.total_env_steps`.
    pub total_steps: Option<usize>,
    /// Replaces `output_dir`.
    pub out: Option<PathBuf>,
    /// Checkpoint to evaluate.
    pub checkpoint: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &RunConfig) -> Result<RunConfig> {
        let mut c = config.clone();
        if let Some(seed) = self.seed {
            c.ppo.seed = seed;
        }
        if let Some(steps) = self.total_steps {
            c.ppo.total_env_steps = steps;
        }
        if let Some(out) = &self.out {
            c.output_dir = out.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub config_hash: String,
    pub artifacts: Vec<PathBuf>,
    /// Command-specific headline numbers.
    pub summary: Value,
}

impl RunReport {
    pub fn to_record(&self) -> Value {
        json!({
            "status": "ok",
            "command": self.command,
            "config_hash": self.config_hash,
            "artifacts": self.artifacts,
            "summary": self.summary,
        })
    }
}

/// Machine-readable description of a failed run.
pub fn error_record(command: Option<Command>, error: &Error) -> Value {
    let mut record = json!({
        "status": "error",
        "kind": error.kind(),
        "message": error.to_string(),
    });
    if let Some(c) = command {
        record["command"] = json!(c);
    }
    let detail = match error {
        Error::Config { field, .. } => json!({ "field": field }),
        Error::Io { path, .. } | Error::Parse { path, .. } => json!({ "path": path }),
        Error::NumericOverflow { bus, step } => json!({ "bus": bus, "step": step }),
        Error::SimulationAborted { step, partial, .. } => json!({ "step": step, "states": partial.states.len() }),
        Error::Rollout { step, .. } => json!({ "step": step }),
        Error::TrainingAborted { update, metrics, .. } => json!({ "update": update, "completed_updates": metrics.len() }),
        Error::Action { target, coefficient, .. } => json!({ "target": target, "coefficient": coefficient }),
        _ => Value::Null,
    };
    if !detail.is_null() {
        record["detail"] = detail;
    }
    record
}

/// Process exit status for a failed run: 2 for bad input, 1 for runtime failures.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config { .. } | Error::Usage(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

pub fn run_command(command: Command, config: &RunConfig, overrides: &Overrides) -> Result<RunReport> {
    let config = overrides.apply(config)?;
    let hash = config.content_hash();
    let meta = ArtifactMeta::new(hash.clone(), config.episode.seed, config.ppo.seed);
    let out = config.output_dir.as_path();
    let (artifacts, summary) = match command {
        Command::Simulate => run_simulate(&config, &meta, out)?,
        Command::Equilibrium => run_equilibrium(&config, &meta, out)?,
        Command::Bruteforce => run_bruteforce(&config, &meta, out)?,
        Command::Train => run_train(&config, &meta, out)?,
        Command::Evaluate => {
            let ckpt = overrides
                .checkpoint
                .as_deref()
                .ok_or_else(|| Error::Usage("evaluate requires a checkpoint path".into()))?;
            run_evaluate(&config, &meta, out, ckpt)?
        }
    };
    Ok(RunReport {
        command,
        config_hash: hash,
        artifacts,
        summary,
    })
}

type Outcome = Result<(Vec<PathBuf>, Value)>;

fn run_simulate(config: &RunConfig, meta: &ArtifactMeta, out: &Path) -> Outcome {
    let ep = &config.episode;
    let equilibrium = solve_equilibrium(&config.system)?;
    let initial = sample_initial_condition(&equilibrium, ep.ic_noise_half_width, ep.seed);
    let path = out.join("trajectory.csv");
    match simulate(&config.system, &initial, ep.steps, ep.dt, None) {
        Ok(traj) => {
            export_trajectory(&traj, &path, Some(meta))?;
            let max_omega = traj
                .states
                .iter()
                .flat_map(|s| s.omega.iter())
                .fold(0.0f64, |m, w| m.max(w.abs()));
            Ok((vec![path], json!({ "steps": traj.steps(), "max_abs_omega": max_omega })))
        }
        Err(Error::SimulationAborted { step, source, partial }) => {
            export_trajectory(&partial, &out.join("trajectory.partial.csv"), Some(meta))?;
            Err(Error::SimulationAborted { step, source, partial })
        }
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct EquilibriumDocument<'a> {
    meta: &'a ArtifactMeta,
    theta: &'a [f64],
    omega: &'a [f64],
    residual_inf_norm: f64,
    iterations: usize,
}

fn run_equilibrium(config: &RunConfig, meta: &ArtifactMeta, out: &Path) -> Outcome {
    let report = solve_equilibrium_report(&config.system)?;
    let path = out.join("equilibrium.json");
    write_json(
        &path,
        &EquilibriumDocument {
            meta,
            theta: &report.state.theta,
            omega: &report.state.omega,
            residual_inf_norm: report.residual_inf_norm,
            iterations: report.iterations,
        },
    )?;
    Ok((
        vec![path],
        json!({ "residual_inf_norm": report.residual_inf_norm, "iterations": report.iterations }),
    ))
}

fn run_bruteforce(config: &RunConfig, meta: &ArtifactMeta, out: &Path) -> Outcome {
    let ranking = enumerate_constant_attacks(&config.system, &config.episode)?;
    let csv = out.join("ranking.csv");
    let json_path = out.join("ranking.json");
    export_ranking(&ranking, &csv, Some(meta))?;
    export_ranking_json(&ranking, &json_path, Some(meta))?;
    let best = &ranking[0];
    Ok((
        vec![csv, json_path],
        json!({
            "actions": ranking.len(),
            "best_target": best.action.target,
            "best_coefficient": best.action.coefficient,
            "best_cumulative_reward": best.cumulative_reward,
        }),
    ))
}

pub fn export_metrics(metrics: &[TrainingMetrics], path: &Path, meta: Option<&ArtifactMeta>) -> Result<()> {
    let rows = metrics.iter().map(|m| {
        vec![
            m.global_step.to_string(),
            fmt_f64(m.mean_episode_reward),
            fmt_f64(m.policy_loss),
            fmt_f64(m.value_loss),
            fmt_f64(m.entropy),
        ]
    });
    write_csv(path, meta, &METRICS_HEADER, rows)
}

pub fn checkpoint_path(out: &Path, global_step: u64) -> PathBuf {
    out.join("checkpoints").join(format!("step_{global_step:08}.json"))
}

fn run_train(config: &RunConfig, meta: &ArtifactMeta, out: &Path) -> Outcome {
    let mut artifacts = Vec::new();
    let result = train_with(
        config.system.clone(),
        config.episode.clone(),
        config.ppo.clone(),
        &meta.config_hash,
        |_, ckpt| {
            let path = checkpoint_path(out, ckpt.global_step);
            ckpt.save(&path)?;
            artifacts.push(path);
            Ok(())
        },
    );
    let metrics_path = out.join("metrics.csv");
    let (trainer, metrics) = match result {
        Ok(done) => done,
        Err(e) => {
            if let Error::TrainingAborted { metrics, .. } = &e {
                export_metrics(metrics, &out.join("metrics.partial.csv"), Some(meta))?;
            }
            return Err(e);
        }
    };
    export_metrics(&metrics, &metrics_path, Some(meta))?;
    artifacts.insert(0, metrics_path);
    let last = metrics.last().map(|m| m.mean_episode_reward);
    Ok((
        artifacts,
        json!({
            "updates": metrics.len(),
            "global_step": trainer.global_step,
            "final_mean_episode_reward": last,
        }),
    ))
}

fn run_evaluate(config: &RunConfig, meta: &ArtifactMeta, out: &Path, checkpoint: &Path) -> Outcome {
    let mut env = make_env(config.system.clone(), config.episode.clone())?;
    let arch = Architecture::for_grid(env.n(), env.config().kappa.len());
    let ckpt = Checkpoint::load_for(checkpoint, &arch)?;
    let eval = evaluate_policy(&ckpt.policy, &mut env)?;

    let schedule_path = out.join("schedule.csv");
    let rows = eval.schedule.iter().enumerate().map(|(t, a)| {
        vec![t.to_string(), a.target.to_string(), fmt_f64(a.coefficient)]
    });
    write_csv(&schedule_path, Some(meta), &SCHEDULE_HEADER, rows)?;
    let response_path = out.join("response.csv");
    export::export_trajectory(&eval.trajectory, &response_path, Some(meta))?;
    Ok((
        vec![schedule_path, response_path],
        json!({
            "cumulative_reward": eval.cumulative_reward,
            "steps": eval.schedule.len(),
            "checkpoint_global_step": ckpt.global_step,
            "checkpoint_config_hash": ckpt.config_hash,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }

    #[test]
    fn overrides_replace_fields_and_revalidate() {
        let base = RunConfig::with_defaults();
        let o = Overrides {
            seed: Some(9),
            total_steps: Some(1500),
            out: Some("x".into()),
            checkpoint: None,
        };
        let c = o.apply(&base).unwrap();
        assert_eq!((c.ppo.seed, c.ppo.total_env_steps), (9, 1500));
        assert_eq!(c.output_dir, PathBuf::from("x"));
        let bad = Overrides { total_steps: Some(10), ..Default::default() };
        assert!(matches!(bad.apply(&base), Err(Error::Config { .. })));
    }

    #[test]
    fn evaluate_without_checkpoint_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides { out: Some(dir.path().into()), ..Default::default() };
        let e = run_command(Command::Evaluate, &RunConfig::with_defaults(), &o).unwrap_err();
        assert_eq!(error_record(Some(Command::Evaluate), &e)["kind"], "usage");
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn error_record_fields() {
        let e = Error::config("system.inertia[2]", "must be positive");
        let r = error_record(None, &e);
        assert_eq!(r["status"], "error");
        assert_eq!(r["kind"], "config");
        assert_eq!(r["detail"]["field"], "system.inertia[2]");
    }
}
