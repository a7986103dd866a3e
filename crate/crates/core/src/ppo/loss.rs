//! Clipped-surrogate PPO loss and its derivatives with respect to the
//! network outputs.
//!
//! The objective maximized per minibatch is
//!
//! ```text
//! mean[min(y A, clip(y, 1-ε, 1+ε) A)] - c_V mean[(V - R)²] + c_H mean[H]
//! ```
//!
//! with `y = exp(log π(a|s) - log π_old(a|s))`. The returned [`LossGraph`]
//! carries its negation, which is what the optimizer minimizes.

use crate::error::{Error, Result};
use crate::policy::{ActionChoice, LossGraph, PolicyParameters};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// One minibatch of rollout data, row-major observations.
#[derive(Debug, Clone, Copy)]
pub struct Minibatch<'a> {
    pub observations: &'a [f64],
    pub actions: &'a [ActionChoice],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    /// Minimized: `policy_loss + c_V value_loss - c_H entropy`.
    pub total: f64,
    /// `-mean[min(y A, clip(y) A)]`.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub ratios: Vec<f64>,
    /// Fraction of samples where the clipped branch is active.
    pub clip_fraction: f64,
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

pub fn ppo_loss(
    policy: &PolicyParameters,
    batch: &Minibatch<'_>,
    coeffs: &LossCoefficients,
) -> Result<(LossGraph, LossBreakdown)> {
    let b = batch.actions.len();
    if b == 0
        || batch.old_log_probs.len() != b
        || batch.advantages.len() != b
        || batch.returns.len() != b
    {
        return Err(Error::Usage(format!("inconsistent minibatch of {b} actions")));
    }
    let eval = policy.evaluate_actions(batch.observations, batch.actions)?;
    let nt = policy.n_targets();
    let width = nt + policy.n_coefs();
    let inv_b = 1.0 / b as f64;
    let eps = coeffs.clip_epsilon;

    let mut d_logits = vec![0.0; b * width];
    let mut d_values = vec![0.0; b];
    let mut surrogate_sum = 0.0;
    let mut value_sum = 0.0;
    let mut entropy_sum = 0.0;
    let mut clipped = 0usize;
    let mut ratios = Vec::with_capacity(b);

    for i in 0..b {
        let dist = &eval.dists[i];
        let action = batch.actions[i];
        let adv = batch.advantages[i];
        let ratio = (eval.log_probs[i] - batch.old_log_probs[i]).exp();
        ratios.push(ratio);

        let unclipped = ratio * adv;
        let surrogate = clipped_surrogate(ratio, adv, eps);
        surrogate_sum += surrogate;
        // d surrogate / d log π: y A on the unclipped branch, 0 when the clip binds
        let d_logp = if unclipped <= surrogate { adv * ratio } else {
            clipped += 1;
            0.0
        };

        let h = eval.entropies[i];
        entropy_sum += h;
        let err = eval.values[i] - batch.returns[i];
        value_sum += err * err;

        let row = &mut d_logits[i * width..(i + 1) * width];
        for (cat, chosen, offset) in [(&dist.target, action.target, 0), (&dist.coef, action.coef, nt)] {
            let h_factor = cat.entropy();
            for (j, (&p, &logp)) in cat.probs.iter().zip(&cat.log_probs).enumerate() {
                let dlogp_dz = f64::from(j == chosen) - p;
                let dh_dz = -p * (logp + h_factor);
                row[offset + j] = inv_b * (-d_logp * dlogp_dz - coeffs.entropy_coef * dh_dz);
            }
        }
        d_values[i] = inv_b * coeffs.value_coef * 2.0 * err;
    }

    let policy_loss = -surrogate_sum * inv_b;
    let value_loss = value_sum * inv_b;
    let entropy = entropy_sum * inv_b;
    let total = policy_loss + coeffs.value_coef * value_loss - coeffs.entropy_coef * entropy;
    if !total.is_finite() {
        return Err(Error::Numeric {
            location: "ppo loss".into(),
            message: format!(
                "non-finite loss (policy {policy_loss}, value {value_loss}, entropy {entropy})"
            ),
        });
    }
    let breakdown = LossBreakdown {
        total,
        policy_loss,
        value_loss,
        entropy,
        ratios,
        clip_fraction: clipped as f64 * inv_b,
    };
    let graph = LossGraph {
        evaluation: eval,
        value: total,
        d_logits,
        d_values,
    };
    Ok((graph, breakdown))
}
