use serde::{Deserialize, Serialize};

use super::{Gradients, PolicyParameters};
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 3e-4;

/// Adam moments for every named tensor of a [`PolicyParameters`], in
/// [`PolicyParameters::tensor_names`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(policy: &PolicyParameters, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = policy.tensors().map(|t| vec![0.0; t.len()]).collect();
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-5,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

/// One bias-corrected Adam update in place. Non-finite gradients are rejected
/// before anything is modified.
pub fn optimizer_step(
    policy: &mut PolicyParameters,
    gradients: &Gradients,
    state: &mut OptimizerState,
) -> Result<()> {
    let shapes_match = gradients.tensors().count() == state.first_moment.len()
        && gradients
            .tensors()
            .zip(policy.tensors())
            .zip(&state.first_moment)
            .all(|((g, p), m)| g.len() == p.len() && m.len() == p.len());
    if !shapes_match {
        return Err(Error::Usage("gradient and optimizer shapes do not match the policy".into()));
    }
    for (name, g) in policy.tensor_names().iter().zip(gradients.tensors()) {
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                location: format!("gradient {name}[{i}]"),
                message: "non-finite gradient, update rejected".into(),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    let (lr, b1, b2, eps) = (state.learning_rate, state.beta1, state.beta2, state.epsilon);
    for (((p, g), m), v) in policy
        .tensors_mut()
        .zip(gradients.tensors())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{init_policy, Architecture};

    fn tiny() -> PolicyParameters {
        init_policy(5, &Architecture::new(2, 2, 3).with_hidden(vec![3]))
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = tiny();
        let before = p.clone();
        let mut state = OptimizerState::new(&p, DEFAULT_LEARNING_RATE);
        let g = p.zero_gradients();
        for _ in 0..3 {
            optimizer_step(&mut p, &g, &mut state).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = tiny();
        let before = p.clone();
        let mut state = OptimizerState::new(&p, DEFAULT_LEARNING_RATE);
        let mut g = p.zero_gradients();
        for t in g.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 1.0);
        }
        optimizer_step(&mut p, &g, &mut state).unwrap();
        // m̂ = v̂ = 1, so the step is lr / (1 + eps)
        let expected = DEFAULT_LEARNING_RATE / (1.0 + 1e-5);
        for (a, b) in before.tensors().zip(p.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!(((x - y) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn non_finite_gradient_rejected_without_update() {
        let mut p = tiny();
        let before = p.clone();
        let mut state = OptimizerState::new(&p, DEFAULT_LEARNING_RATE);
        let mut g = p.zero_gradients();
        g.tensors_mut().nth(2).unwrap()[0] = f64::NAN;
        assert!(matches!(optimizer_step(&mut p, &g, &mut state), Err(Error::Numeric { .. })));
        assert_eq!(p, before);
        assert_eq!(state.step, 0);
    }
}
