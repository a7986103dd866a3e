use rand::Rng;
use serde::{Deserialize, Serialize};

/// Indices of one multi-categorical action: bus and position in `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionChoice {
    pub target: usize,
    pub coef: usize,
}

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - lse).collect()
}

#[derive(Debug, Clone)]
pub struct Categorical {
    pub log_probs: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Self {
        let log_probs = log_softmax(logits);
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Categorical { log_probs, probs }
    }

    pub fn entropy(&self) -> f64 {
        -self.probs.iter().zip(&self.log_probs).map(|(p, l)| p * l).sum::<f64>()
    }

    /// Lowest index wins ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF sampling from a single uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Independent categorical factors over the target bus and the coefficient.
#[derive(Debug, Clone)]
pub struct MultiCategoricalDist {
    pub target: Categorical,
    pub coef: Categorical,
}

impl MultiCategoricalDist {
    pub fn from_logits(logits: &[f64], n_targets: usize) -> Self {
        MultiCategoricalDist {
            target: Categorical::from_logits(&logits[..n_targets]),
            coef: Categorical::from_logits(&logits[n_targets..]),
        }
    }

    pub fn probs_target(&self) -> &[f64] {
        &self.target.probs
    }

    pub fn probs_coef(&self) -> &[f64] {
        &self.coef.probs
    }

    pub fn log_prob(&self, a: ActionChoice) -> f64 {
        self.target.log_probs[a.target] + self.coef.log_probs[a.coef]
    }

    pub fn entropy(&self) -> f64 {
        self.target.entropy() + self.coef.entropy()
    }

    pub fn greedy(&self) -> ActionChoice {
        ActionChoice {
            target: self.target.mode(),
            coef: self.coef.mode(),
        }
    }

    /// Draws the target first, then the coefficient.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionChoice {
        let target = self.target.sample(rng);
        let coef = self.coef.sample(rng);
        ActionChoice { target, coef }
    }
}
