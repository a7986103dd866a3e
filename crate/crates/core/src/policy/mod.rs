//! Actor-critic function approximator for the attack agent.
//!
//! Two separate tanh MLPs share the observation: the actor maps it to
//! `n + |κ|` logits (one categorical over target buses, one over
//! coefficients), the critic to a scalar state value. Gradients are computed
//! by hand through [`LossGraph`], and parameters are updated with Adam.

mod adam;
pub mod checkpoint;
mod dist;
mod mlp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{optimizer_step, OptimizerState, DEFAULT_LEARNING_RATE};
pub use dist::{log_softmax, ActionChoice, Categorical, MultiCategoricalDist};
pub use mlp::{Dense, Mlp, MlpCache};

pub const HIDDEN_LAYERS: [usize; 2] = [64, 64];
pub const OUTPUT_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub obs_dim: usize,
    pub n_targets: usize,
    pub n_coefs: usize,
    pub hidden: Vec<usize>,
}

impl Architecture {
    /// Observation `2n`, two hidden layers of 64.
    pub fn for_grid(n_buses: usize, n_coefs: usize) -> Self {
        Architecture::new(2 * n_buses, n_buses, n_coefs)
    }

    pub fn new(obs_dim: usize, n_targets: usize, n_coefs: usize) -> Self {
        Architecture {
            obs_dim,
            n_targets,
            n_coefs,
            hidden: HIDDEN_LAYERS.to_vec(),
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    fn sizes(&self, outputs: usize) -> Vec<usize> {
        std::iter::once(self.obs_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(outputs))
            .collect()
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        self.sizes(self.n_targets + self.n_coefs)
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        self.sizes(1)
    }

    /// `(name, shape)` of every tensor in storage order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (net, sizes) in [("actor", self.actor_sizes()), ("critic", self.critic_sizes())] {
            for (l, w) in sizes.windows(2).enumerate() {
                out.push((format!("{net}.{l}.weight"), vec![w[1], w[0]]));
                out.push((format!("{net}.{l}.bias"), vec![w[1]]));
            }
        }
        out
    }
}

fn mlp_tensors(m: &Mlp) -> impl Iterator<Item = &[f64]> {
    m.layers
        .iter()
        .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
}

fn mlp_tensors_mut(m: &mut Mlp) -> impl Iterator<Item = &mut Vec<f64>> {
    m.layers
        .iter_mut()
        .flat_map(|l| [&mut l.weight, &mut l.bias])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    pub architecture: Architecture,
    pub actor: Mlp,
    pub critic: Mlp,
}

/// Same layout as the parameters they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl Gradients {
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        mlp_tensors(&self.actor).chain(mlp_tensors(&self.critic))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        mlp_tensors_mut(&mut self.actor).chain(mlp_tensors_mut(&mut self.critic))
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Sampling mode for [`PolicyParameters::act`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    /// Per-factor argmax, lowest index on ties; never touches the RNG.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput {
    pub choice: ActionChoice,
    pub log_prob: f64,
    pub value: f64,
}

/// Batched forward pass with the per-sample quantities PPO needs. Holds the
/// layer caches so a [`LossGraph`] built on top can be differentiated.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub batch: usize,
    pub actions: Vec<ActionChoice>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub values: Vec<f64>,
    pub dists: Vec<MultiCategoricalDist>,
    actor_cache: MlpCache,
    critic_cache: MlpCache,
}

/// A scalar loss over one [`Evaluation`], represented by its value and its
/// derivatives with respect to the actor logits and critic outputs.
#[derive(Debug, Clone)]
pub struct LossGraph {
    pub evaluation: Evaluation,
    pub value: f64,
    /// `dL/d logits`, row-major `batch × (n + |κ|)`.
    pub d_logits: Vec<f64>,
    /// `dL/dV`, one per sample.
    pub d_values: Vec<f64>,
}

impl LossGraph {
    /// A loss that does not depend on the network outputs.
    pub fn constant(evaluation: Evaluation, value: f64) -> Self {
        let width = evaluation.dists.first().map_or(0, |d| d.target.probs.len() + d.coef.probs.len());
        LossGraph {
            d_logits: vec![0.0; evaluation.batch * width],
            d_values: vec![0.0; evaluation.batch],
            evaluation,
            value,
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.d_logits.iter_mut().for_each(|g| *g *= factor);
        self.d_values.iter_mut().for_each(|g| *g *= factor);
        self
    }
}

/// Seeded initialization: hidden weights uniform with std `1/sqrt(fan_in)`,
/// output layers scaled by [`OUTPUT_GAIN`], all biases zero.
pub fn init_policy(seed: u64, architecture: &Architecture) -> PolicyParameters {
    init_policy_with_gain(seed, architecture, OUTPUT_GAIN)
}

pub fn init_policy_with_gain(seed: u64, architecture: &Architecture, output_gain: f64) -> PolicyParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actor = Mlp::random(&architecture.actor_sizes(), output_gain, &mut rng);
    let critic = Mlp::random(&architecture.critic_sizes(), output_gain, &mut rng);
    PolicyParameters {
        architecture: architecture.clone(),
        actor,
        critic,
    }
}

impl PolicyParameters {
    pub fn n_targets(&self) -> usize {
        self.architecture.n_targets
    }

    pub fn n_coefs(&self) -> usize {
        self.architecture.n_coefs
    }

    pub fn obs_dim(&self) -> usize {
        self.architecture.obs_dim
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.architecture.tensor_shapes().into_iter().map(|(n, _)| n).collect()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        mlp_tensors(&self.actor).chain(mlp_tensors(&self.critic))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        mlp_tensors_mut(&mut self.actor).chain(mlp_tensors_mut(&mut self.critic))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().map(<[f64]>::len).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            actor: self.actor.zeros_like(),
            critic: self.critic.zeros_like(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().flatten().all(|x| x.is_finite())
    }

    fn check_obs(&self, obs: &[f64], batch: usize) -> Result<()> {
        if obs.len() != batch * self.obs_dim() {
            return Err(Error::Usage(format!(
                "observation batch has {} values, expected {batch} × {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        Ok(())
    }

    fn check_logits(&self, logits: &[f64]) -> Result<()> {
        if let Some(i) = logits.iter().position(|z| !z.is_finite()) {
            let layer = self.actor.layers.len() - 1;
            return Err(Error::Numeric {
                location: format!("actor.{layer} (output logits)"),
                message: format!("non-finite logit at index {i}"),
            });
        }
        Ok(())
    }

    /// Action distribution and state value for a single observation.
    pub fn distribution(&self, obs: &[f64]) -> Result<(MultiCategoricalDist, f64)> {
        self.check_obs(obs, 1)?;
        let logits = self.actor.forward(obs, 1);
        self.check_logits(logits.output())?;
        let value = self.critic.forward(obs, 1).output()[0];
        Ok((MultiCategoricalDist::from_logits(logits.output(), self.n_targets()), value))
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<ActOutput> {
        let (dist, value) = self.distribution(obs)?;
        let choice = match mode {
            ActMode::Sample => dist.sample(rng),
            ActMode::Greedy => dist.greedy(),
        };
        Ok(ActOutput {
            choice,
            log_prob: dist.log_prob(choice),
            value,
        })
    }

    pub fn act_greedy(&self, obs: &[f64]) -> Result<ActOutput> {
        let (dist, value) = self.distribution(obs)?;
        let choice = dist.greedy();
        Ok(ActOutput { choice, log_prob: dist.log_prob(choice), value })
    }

    /// Log-probabilities, entropies and values of `actions` under the current
    /// parameters, for a row-major observation batch.
    pub fn evaluate_actions(&self, obs_batch: &[f64], actions: &[ActionChoice]) -> Result<Evaluation> {
        let batch = actions.len();
        self.check_obs(obs_batch, batch)?;
        if let Some(a) = actions
            .iter()
            .find(|a| a.target >= self.n_targets() || a.coef >= self.n_coefs())
        {
            return Err(Error::Usage(format!(
                "action {a:?} out of range for {} targets × {} coefficients",
                self.n_targets(),
                self.n_coefs()
            )));
        }
        let actor_cache = self.actor.forward(obs_batch, batch);
        self.check_logits(actor_cache.output())?;
        let critic_cache = self.critic.forward(obs_batch, batch);
        let width = self.n_targets() + self.n_coefs();
        let dists: Vec<MultiCategoricalDist> = actor_cache
            .output()
            .chunks(width)
            .map(|z| MultiCategoricalDist::from_logits(z, self.n_targets()))
            .collect();
        let log_probs = dists.iter().zip(actions).map(|(d, &a)| d.log_prob(a)).collect();
        let entropies = dists.iter().map(MultiCategoricalDist::entropy).collect();
        let values = critic_cache.output().to_vec();
        Ok(Evaluation {
            batch,
            actions: actions.to_vec(),
            log_probs,
            entropies,
            values,
            dists,
            actor_cache,
            critic_cache,
        })
    }

    /// Reverse-mode gradients of `graph` with respect to every parameter.
    pub fn backward(&self, graph: &LossGraph) -> Gradients {
        let e = &graph.evaluation;
        Gradients {
            actor: self.actor.backward(&e.actor_cache, &graph.d_logits),
            critic: self.critic.backward(&e.critic_cache, &graph.d_values),
        }
    }
}
