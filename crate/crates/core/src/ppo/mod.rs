//! Proximal policy optimization for the attack agent.
//!
//! One update collects `rollout_steps` environment steps with the current
//! policy, computes GAE advantages, and runs `update_epochs` passes of Adam
//! over shuffled minibatches of the clipped-surrogate loss.

mod buffer;
mod loss;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{make_env, AttackAction, EpisodeConfig, FdiEnv};
use crate::error::{Error, Result};
use crate::grid::{GridParams, Trajectory};
use crate::policy::checkpoint::Checkpoint;
use crate::policy::{
    init_policy, optimizer_step, ActionChoice, Architecture, OptimizerState, PolicyParameters,
};

pub use buffer::{collect_rollout, compute_gae, RolloutBuffer};
pub use loss::{clipped_surrogate, ppo_loss, LossBreakdown, LossCoefficients, Minibatch};

const ADVANTAGE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    /// `c_V`
    pub value_coef: f64,
    /// `c_H`
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub update_epochs: usize,
    pub total_env_steps: usize,
    /// Gradient clipping by global norm; `None` disables it.
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
    /// Write a checkpoint every this many updates (the final one is always written).
    pub checkpoint_interval: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.001,
            learning_rate: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            rollout_steps: 500,
            minibatch_size: 64,
            update_epochs: 10,
            total_env_steps: 1_000_000,
            max_grad_norm: Some(0.5),
            normalize_advantages: true,
            checkpoint_interval: 100,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be positive, found {x}")))
            }
        };
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::config("clip_epsilon", format!("must lie in (0, 1), found {}", self.clip_epsilon)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma", format!("must lie in (0, 1], found {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("gae_lambda", format!("must lie in [0, 1], found {}", self.gae_lambda)));
        }
        for (name, x) in [("value_coef", self.value_coef), ("entropy_coef", self.entropy_coef)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::config(name, format!("must be nonnegative, found {x}")));
            }
        }
        positive("learning_rate", self.learning_rate)?;
        if let Some(g) = self.max_grad_norm {
            positive("max_grad_norm", g)?;
        }
        if self.rollout_steps == 0 {
            return Err(Error::config("rollout_steps", "must be at least 1"));
        }
        if self.minibatch_size == 0 || self.minibatch_size > self.rollout_steps {
            return Err(Error::config(
                "minibatch_size",
                format!("must lie in [1, rollout_steps = {}], found {}", self.rollout_steps, self.minibatch_size),
            ));
        }
        if self.update_epochs == 0 {
            return Err(Error::config("update_epochs", "must be at least 1"));
        }
        if self.total_env_steps < self.rollout_steps {
            return Err(Error::config(
                "total_env_steps",
                format!("must be at least rollout_steps = {}", self.rollout_steps),
            ));
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::config("checkpoint_interval", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of full rollouts that fit in `total_env_steps`.
    pub fn num_updates(&self) -> usize {
        self.total_env_steps / self.rollout_steps
    }

    pub fn loss_coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// One row per update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub global_step: u64,
    /// Mean over episodes finished in this rollout; if none finished, the
    /// running reward of the open episode.
    pub mean_episode_reward: f64,
    /// Means over every minibatch of the update.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

pub(crate) fn to_attack(env: &FdiEnv, choice: ActionChoice) -> AttackAction {
    AttackAction {
        target: choice.target,
        coefficient: env.config().kappa[choice.coef],
    }
}

/// Mean zero, unit (population) standard deviation.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in advantages.iter_mut() {
        *a = (*a - mean) / (std + ADVANTAGE_EPSILON);
    }
}

/// Statistics of one [`ppo_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
    /// Breakdown of the very first minibatch, evaluated before any step.
    pub first_minibatch: LossBreakdown,
}

/// Runs `update_epochs` passes over shuffled minibatches of `buffer`.
pub fn ppo_update(
    policy: &mut PolicyParameters,
    optimizer: &mut OptimizerState,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if !buffer.has_advantages() || buffer.is_empty() {
        return Err(Error::Usage("ppo_update needs a buffer with computed advantages".into()));
    }
    let mut advantages = buffer.advantages.clone();
    if config.normalize_advantages {
        normalize_advantages(&mut advantages);
    }
    let coeffs = config.loss_coefficients();
    let len = buffer.len();
    let obs_dim = buffer.obs_dim;
    let mut indices: Vec<usize> = (0..len).collect();

    let mut sums = [0.0; 4];
    let mut count = 0usize;
    let mut first = None;

    let mut obs = Vec::with_capacity(config.minibatch_size * obs_dim);
    let mut actions = Vec::with_capacity(config.minibatch_size);
    let mut old_lp = Vec::with_capacity(config.minibatch_size);
    let mut adv = Vec::with_capacity(config.minibatch_size);
    let mut ret = Vec::with_capacity(config.minibatch_size);

    for _ in 0..config.update_epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(config.minibatch_size) {
            obs.clear();
            actions.clear();
            old_lp.clear();
            adv.clear();
            ret.clear();
            for &i in chunk {
                obs.extend_from_slice(buffer.observation(i));
                actions.push(buffer.actions[i]);
                old_lp.push(buffer.log_probs[i]);
                adv.push(advantages[i]);
                ret.push(buffer.returns[i]);
            }
            let batch = Minibatch {
                observations: &obs,
                actions: &actions,
                old_log_probs: &old_lp,
                advantages: &adv,
                returns: &ret,
            };
            let (graph, breakdown) = ppo_loss(policy, &batch, &coeffs)?;
            let mut grads = policy.backward(&graph);
            if let Some(max_norm) = config.max_grad_norm {
                let norm = grads.global_norm();
                if norm > max_norm {
                    grads.scale(max_norm / (norm + 1e-6));
                }
            }
            optimizer_step(policy, &grads, optimizer)?;

            sums[0] += breakdown.policy_loss;
            sums[1] += breakdown.value_loss;
            sums[2] += breakdown.entropy;
            sums[3] += breakdown.clip_fraction;
            count += 1;
            if first.is_none() {
                first = Some(breakdown);
            }
        }
    }
    let c = count as f64;
    Ok(UpdateStats {
        policy_loss: sums[0] / c,
        value_loss: sums[1] / c,
        entropy: sums[2] / c,
        clip_fraction: sums[3] / c,
        minibatches: count,
        first_minibatch: first.expect("at least one minibatch"),
    })
}

/// Owns the learner state across updates.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: FdiEnv,
    pub policy: PolicyParameters,
    pub optimizer: OptimizerState,
    pub config: PpoConfig,
    pub metrics: Vec<TrainingMetrics>,
    pub global_step: u64,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Policy initialized from `config.seed`; the same seed then drives action
    /// sampling and minibatch shuffling.
    pub fn new(params: GridParams, episode: EpisodeConfig, config: PpoConfig) -> Result<Self> {
        config.validate()?;
        let env = make_env(params, episode)?;
        let arch = Architecture::for_grid(env.n(), env.config().kappa.len());
        let policy = init_policy(config.seed, &arch);
        let optimizer = OptimizerState::new(&policy, config.learning_rate);
        // stream 1 of the same seed, disjoint from the init draws on stream 0
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Trainer {
            env,
            policy,
            optimizer,
            config,
            metrics: Vec::new(),
            global_step: 0,
            rng,
        })
    }

    pub fn updates_done(&self) -> usize {
        self.metrics.len()
    }

    pub fn is_finished(&self) -> bool {
        self.updates_done() >= self.config.num_updates()
    }

    /// collect -> GAE -> update; appends and returns the metrics row.
    pub fn run_update(&mut self) -> Result<&TrainingMetrics> {
        let mut buffer = collect_rollout(&mut self.env, &self.policy, self.config.rollout_steps, &mut self.rng)?;
        compute_gae(&mut buffer, self.config.gamma, self.config.gae_lambda);
        let stats = ppo_update(&mut self.policy, &mut self.optimizer, &buffer, &self.config, &mut self.rng)?;
        self.global_step += buffer.len() as u64;

        let mean_episode_reward = if buffer.episode_rewards.is_empty() {
            buffer.open_episode_reward.unwrap_or(0.0)
        } else {
            buffer.episode_rewards.iter().sum::<f64>() / buffer.episode_rewards.len() as f64
        };
        let row = TrainingMetrics {
            global_step: self.global_step,
            mean_episode_reward,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
        };
        if !self.policy.all_finite() {
            return Err(Error::Numeric {
                location: "policy parameters".into(),
                message: "non-finite parameter after update".into(),
            });
        }
        self.metrics.push(row);
        Ok(self.metrics.last().expect("just pushed"))
    }

    pub fn checkpoint(&self, config_hash: &str) -> Checkpoint {
        Checkpoint {
            config_hash: config_hash.to_string(),
            seed: self.config.seed,
            global_step: self.global_step,
            policy: self.policy.clone(),
            optimizer: Some(self.optimizer.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: PolicyParameters,
    pub optimizer: OptimizerState,
    pub metrics: Vec<TrainingMetrics>,
    pub checkpoints: Vec<Checkpoint>,
}

/// Full training run, calling `on_checkpoint` every `checkpoint_interval`
/// updates and after the last one.
pub fn train_with<F>(
    params: GridParams,
    episode: EpisodeConfig,
    config: PpoConfig,
    config_hash: &str,
    mut on_checkpoint: F,
) -> Result<(Trainer, Vec<TrainingMetrics>)>
where
    F: FnMut(&Trainer, Checkpoint) -> Result<()>,
{
    let mut trainer = Trainer::new(params, episode, config)?;
    let total = trainer.config.num_updates();
    let interval = trainer.config.checkpoint_interval;
    while !trainer.is_finished() {
        let update = trainer.updates_done();
        if let Err(e) = trainer.run_update() {
            return Err(Error::TrainingAborted {
                update,
                source: Box::new(e),
                metrics: trainer.metrics.clone(),
            });
        }
        let done = trainer.updates_done();
        if done % interval == 0 || done == total {
            let ckpt = trainer.checkpoint(config_hash);
            on_checkpoint(&trainer, ckpt)?;
        }
    }
    let metrics = trainer.metrics.clone();
    Ok((trainer, metrics))
}

pub fn train(
    params: GridParams,
    episode: EpisodeConfig,
    config: PpoConfig,
    config_hash: &str,
) -> Result<TrainOutcome> {
    let mut checkpoints = Vec::new();
    let (trainer, metrics) = train_with(params, episode, config, config_hash, |_, c| {
        checkpoints.push(c);
        Ok(())
    })?;
    Ok(TrainOutcome {
        policy: trainer.policy,
        optimizer: trainer.optimizer,
        metrics,
        checkpoints,
    })
}

/// Greedy rollout of a policy from the environment's frozen initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub schedule: Vec<AttackAction>,
    pub trajectory: Trajectory,
    pub cumulative_reward: f64,
}

pub fn evaluate_policy(policy: &PolicyParameters, env: &mut FdiEnv) -> Result<PolicyEvaluation> {
    let mut obs = env.reset().values;
    let mut schedule = Vec::with_capacity(env.config().steps);
    loop {
        let out = policy.act_greedy(&obs)?;
        let action = to_attack(env, out.choice);
        let result = env.step(action)?;
        schedule.push(action);
        if result.done {
            break;
        }
        obs = result.observation.values;
    }
    Ok(PolicyEvaluation {
        schedule,
        trajectory: env.trajectory(),
        cumulative_reward: env.cumulative_reward()?,
    })
}
