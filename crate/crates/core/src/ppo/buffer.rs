use rand::Rng;

use crate::env::FdiEnv;
use crate::error::{Error, Result};
use crate::policy::{ActMode, ActionChoice, PolicyParameters};

/// On-policy experience from one rollout.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    /// Row-major `len × obs_dim`.
    pub observations: Vec<f64>,
    pub actions: Vec<ActionChoice>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    /// `true` where the step ended an episode.
    pub dones: Vec<bool>,
    /// Critic value of the observation after the last step; used only when
    /// the rollout stops mid-episode.
    pub last_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Cumulative rewards of episodes that finished during this rollout.
    pub episode_rewards: Vec<f64>,
    /// Reward accumulated so far by an episode still running at rollout end.
    pub open_episode_reward: Option<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn has_advantages(&self) -> bool {
        self.advantages.len() == self.len()
    }
}

/// Plays `steps` environment steps with actions sampled from `policy`,
/// resetting the environment whenever an episode finishes.
pub fn collect_rollout<R: Rng + ?Sized>(
    env: &mut FdiEnv,
    policy: &PolicyParameters,
    steps: usize,
    rng: &mut R,
) -> Result<RolloutBuffer> {
    if policy.obs_dim() != env.obs_dim() || policy.n_targets() != env.n() {
        return Err(Error::Usage(format!(
            "policy expects {} observations and {} targets, env provides {} and {}",
            policy.obs_dim(),
            policy.n_targets(),
            env.obs_dim(),
            env.n()
        )));
    }
    if policy.n_coefs() != env.config().kappa.len() {
        return Err(Error::Usage("policy coefficient head does not match kappa".into()));
    }

    let obs_dim = env.obs_dim();
    let mut buf = RolloutBuffer {
        obs_dim,
        observations: Vec::with_capacity(steps * obs_dim),
        actions: Vec::with_capacity(steps),
        log_probs: Vec::with_capacity(steps),
        values: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        dones: Vec::with_capacity(steps),
        ..Default::default()
    };
    if env.is_done() {
        env.reset();
    }
    let mut obs = env.observation().values;
    for t in 0..steps {
        let out = policy.act(&obs, ActMode::Sample, rng)?;
        let action = crate::ppo::to_attack(env, out.choice);
        let result = env.step(action).map_err(|e| Error::Rollout { step: t, source: Box::new(e) })?;
        buf.observations.extend_from_slice(&obs);
        buf.actions.push(out.choice);
        buf.log_probs.push(out.log_prob);
        buf.values.push(out.value);
        buf.rewards.push(result.reward);
        buf.dones.push(result.done);
        if result.done {
            buf.episode_rewards.push(env.cumulative_reward()?);
            obs = env.reset().values;
        } else {
            obs = result.observation.values;
        }
    }
    if buf.dones.last() == Some(&false) {
        buf.last_value = policy.distribution(&obs)?.1;
        buf.open_episode_reward = Some(env.rewards().iter().sum());
    }
    Ok(buf)
}

/// Generalized advantage estimation. Steps flagged done bootstrap from 0;
/// the final step of a rollout that stops mid-episode bootstraps from
/// `last_value`.
pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    let n = buffer.len();
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let not_done = if buffer.dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 == n { buffer.last_value } else { buffer.values[t + 1] };
        let delta = buffer.rewards[t] + gamma * next_value * not_done - buffer.values[t];
        running = delta + gamma * lambda * not_done * running;
        advantages[t] = running;
    }
    buffer.returns = advantages.iter().zip(&buffer.values).map(|(a, v)| a + v).collect();
    buffer.advantages = advantages;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(rewards: &[f64], values: &[f64], dones: &[bool]) -> RolloutBuffer {
        RolloutBuffer {
            rewards: rewards.to_vec(),
            values: values.to_vec(),
            dones: dones.to_vec(),
            actions: vec![ActionChoice { target: 0, coef: 0 }; rewards.len()],
            ..Default::default()
        }
    }

    #[test]
    fn reward_to_go_with_unit_discount() {
        let r = [1.0, -2.0, 0.5, 3.0];
        let mut b = synthetic(&r, &[0.0; 4], &[false, false, false, true]);
        compute_gae(&mut b, 1.0, 1.0);
        assert_eq!(b.advantages, vec![2.5, 1.5, 3.5, 3.0]);
        assert_eq!(b.returns, b.advantages);
    }

    #[test]
    fn single_step_episode() {
        let mut b = synthetic(&[2.0], &[0.5], &[true]);
        compute_gae(&mut b, 0.99, 0.95);
        assert_eq!(b.advantages, vec![1.5]);
        assert_eq!(b.returns, vec![2.0]);
    }

    #[test]
    fn two_step_hand_recursion() {
        let mut b = synthetic(&[1.0, 1.0], &[0.0, 0.0], &[false, true]);
        compute_gae(&mut b, 0.99, 0.95);
        assert_eq!(b.advantages[1], 1.0);
        assert!((b.advantages[0] - 1.9405).abs() < 1e-12);
    }

    #[test]
    fn episode_boundary_blocks_credit() {
        let mut b = synthetic(&[1.0, 5.0], &[0.0, 0.0], &[true, true]);
        compute_gae(&mut b, 0.99, 0.95);
        assert_eq!(b.advantages, vec![1.0, 5.0]);
    }

    #[test]
    fn mid_episode_end_bootstraps() {
        let mut b = synthetic(&[1.0], &[0.0], &[false]);
        b.last_value = 2.0;
        compute_gae(&mut b, 0.5, 0.95);
        assert_eq!(b.advantages, vec![2.0]);
    }

    #[test]
    fn matches_direct_sum_definition() {
        // A_t = Σ_l (γλ)^l δ_{t+l} within one terminal episode
        let r = [0.3, -0.1, 0.7, 0.2, 1.1];
        let v = [0.5, 0.1, -0.2, 0.4, 0.0];
        let (g, l) = (0.9, 0.8);
        let mut b = synthetic(&r, &v, &[false, false, false, false, true]);
        compute_gae(&mut b, g, l);
        let delta: Vec<f64> = (0..5)
            .map(|t| r[t] + if t < 4 { g * v[t + 1] } else { 0.0 } - v[t])
            .collect();
        for t in 0..5 {
            let direct: f64 = (t..5).map(|u| (g * l).powi((u - t) as i32) * delta[u]).sum();
            assert!((b.advantages[t] - direct).abs() < 1e-12);
        }
    }
}
