//! Episodic attack environment around the grid dynamics.
//!
//! An adversary controls the droop coefficient of one inverter per step. At
//! step `t` it picks `(target, k')`; the effective droop vector is the designed
//! one with `k[target] = k'`, the grid advances one Euler step, and the reward
//! compares the post-step frequency deviations with the no-attack baseline
//! trajectory started from the same initial condition.
//!
//! The initial condition is sampled once, when the environment is built, and
//! reused by every episode, so the map from an action sequence to its
//! cumulative reward is deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridParams, GridState, Trajectory};

/// One false-data-injection action: replace `k[target]` with `coefficient`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackAction {
    pub target: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// `δω_i = |ω_i| - |ω_i^base|`
    #[default]
    AbsDeviationDiff,
    /// `δω_i = ω_i - ω_i^base`
    SignedDiff,
}

impl RewardMode {
    pub fn per_bus_delta(self, omega: &[f64], baseline: &[f64]) -> Vec<f64> {
        omega
            .iter()
            .zip(baseline)
            .map(|(w, b)| match self {
                RewardMode::AbsDeviationDiff => w.abs() - b.abs(),
                RewardMode::SignedDiff => w - b,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub steps: usize,
    pub dt: f64,
    pub ic_noise_half_width: f64,
    pub seed: u64,
    /// Ordered set of replacement coefficients available to the adversary.
    pub kappa: Vec<f64>,
    pub reward_mode: RewardMode,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            steps: 500,
            dt: 0.01,
            ic_noise_half_width: 0.03,
            seed: 0,
            kappa: vec![-1.0, 0.0, 1.0],
            reward_mode: RewardMode::AbsDeviationDiff,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", format!("must be positive, found {}", self.dt)));
        }
        if !(self.ic_noise_half_width >= 0.0 && self.ic_noise_half_width.is_finite()) {
            return Err(Error::config(
                "ic_noise_half_width",
                format!("must be nonnegative, found {}", self.ic_noise_half_width),
            ));
        }
        if self.kappa.is_empty() {
            return Err(Error::config("kappa", "must contain at least one coefficient"));
        }
        for (i, k) in self.kappa.iter().enumerate() {
            if !k.is_finite() {
                return Err(Error::config(format!("kappa[{i}]"), "value must be finite"));
            }
            if self.kappa[..i].contains(k) {
                return Err(Error::config(format!("kappa[{i}]"), format!("duplicate coefficient {k}")));
            }
        }
        Ok(())
    }

    pub fn kappa_index(&self, coefficient: f64) -> Option<usize> {
        self.kappa.iter().position(|&k| k == coefficient)
    }
}

/// Observation vector `[ω_0..ω_{n-1}, θ_0..θ_{n-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    pub fn from_state(state: &GridState) -> Self {
        let mut values = Vec::with_capacity(2 * state.n());
        values.extend_from_slice(&state.omega);
        values.extend_from_slice(&state.theta);
        Observation { values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub per_bus_delta: Vec<f64>,
}

/// Initial condition: `equilibrium + U(-h, h)` per component.
///
/// Draws come from `ChaCha8Rng::seed_from_u64(seed)`, one `f64` in `[0, 1)`
/// per component: the first `n` perturb `θ_0..θ_{n-1}`, the next `n` perturb
/// `ω_0..ω_{n-1}`. Each draw `u` maps to `h·(2u - 1)`.
pub fn sample_initial_condition(equilibrium: &GridState, half_width: f64, seed: u64) -> GridState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = |x: &f64| x + half_width * (2.0 * rng.gen::<f64>() - 1.0);
    let theta = equilibrium.theta.iter().map(&mut noisy).collect();
    let omega = equilibrium.omega.iter().map(&mut noisy).collect();
    GridState { theta, omega }
}

/// Attack environment with a frozen initial condition.
#[derive(Debug, Clone)]
pub struct FdiEnv {
    params: GridParams,
    config: EpisodeConfig,
    initial: GridState,
    baseline: Trajectory,
    history: Vec<GridState>,
    t: usize,
    rewards: Vec<f64>,
    done: bool,
}

impl FdiEnv {
    pub fn new(params: GridParams, config: EpisodeConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let equilibrium = grid::solve_equilibrium(&params)?;
        let initial = sample_initial_condition(&equilibrium, config.ic_noise_half_width, config.seed);
        let baseline = grid::simulate(&params, &initial, config.steps, config.dt, None)?;
        Ok(FdiEnv {
            history: vec![initial.clone()],
            params,
            config,
            initial,
            baseline,
            t: 0,
            rewards: Vec::new(),
            done: false,
        })
    }

    pub fn reset(&mut self) -> Observation {
        self.history.clear();
        self.history.push(self.initial.clone());
        self.t = 0;
        self.rewards.clear();
        self.done = false;
        Observation::from_state(&self.initial)
    }

    /// Applies `action` for the transition `t -> t+1`.
    pub fn step(&mut self, action: AttackAction) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; call reset".into()));
        }
        let k = self.effective_droop(action)?;
        let current = self.history.last().expect("history is never empty");
        self.t += 1;
        let (state, overflowed) = match grid::euler_step(&self.params, current, &k, self.config.dt) {
            Ok(next) => (next, false),
            Err(Error::NumericOverflow { .. }) => (current.clone(), true),
            Err(e) => return Err(e),
        };
        let base = &self.baseline.states[self.t].omega;
        let per_bus_delta = self.config.reward_mode.per_bus_delta(&state.omega, base);
        let reward: f64 = per_bus_delta.iter().sum();
        self.rewards.push(reward);
        self.done = overflowed || self.t == self.config.steps;
        let observation = Observation::from_state(&state);
        if !overflowed {
            self.history.push(state);
        }
        Ok(StepResult {
            observation,
            reward,
            done: self.done,
            per_bus_delta,
        })
    }

    /// Designed droop with the single attacked entry replaced.
    pub fn effective_droop(&self, action: AttackAction) -> Result<Vec<f64>> {
        if action.target >= self.params.n() {
            return Err(Error::Usage(format!(
                "target bus {} out of range for {} buses",
                action.target,
                self.params.n()
            )));
        }
        if self.config.kappa_index(action.coefficient).is_none() {
            return Err(Error::Usage(format!(
                "coefficient {} not in the allowed set {:?}",
                action.coefficient, self.config.kappa
            )));
        }
        let mut k = self.params.droop.clone();
        k[action.target] = action.coefficient;
        Ok(k)
    }

    pub fn cumulative_reward(&self) -> Result<f64> {
        if !self.done {
            return Err(Error::Usage(format!(
                "episode still running at step {} of {}",
                self.t, self.config.steps
            )));
        }
        Ok(self.rewards.iter().sum())
    }

    pub fn observation(&self) -> Observation {
        Observation::from_state(self.history.last().expect("history is never empty"))
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn obs_dim(&self) -> usize {
        2 * self.params.n()
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn initial_state(&self) -> &GridState {
        &self.initial
    }

    pub fn baseline(&self) -> &Trajectory {
        &self.baseline
    }

    pub fn step_index(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// States visited in the current episode, initial condition included.
    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            dt: self.config.dt,
            states: self.history.clone(),
        }
    }
}

/// Builds an environment; see [`FdiEnv::new`].
pub fn make_env(params: GridParams, episode: EpisodeConfig) -> Result<FdiEnv> {
    FdiEnv::new(params, episode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::default_grid;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn short_config(steps: usize) -> EpisodeConfig {
        EpisodeConfig { steps, ..EpisodeConfig::default() }
    }

    #[test]
    fn same_seed_same_initial_condition() {
        let a = make_env(default_grid(), EpisodeConfig::default()).unwrap();
        let b = make_env(default_grid(), EpisodeConfig::default()).unwrap();
        assert_eq!(a.initial_state(), b.initial_state());
        let c = make_env(default_grid(), EpisodeConfig { seed: 1, ..Default::default() }).unwrap();
        assert_ne!(a.initial_state(), c.initial_state());
    }

    #[test]
    fn noise_stream_follows_documented_layout() {
        let eq = GridState::zeros(3);
        let ic = sample_initial_condition(&eq, 0.03, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws: Vec<f64> = (0..6).map(|_| 0.03 * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        assert_eq!(ic.theta, draws[..3]);
        assert_eq!(ic.omega, draws[3..]);
        assert!(draws.iter().all(|d| d.abs() <= 0.03));
    }

    #[test]
    fn zero_noise_gives_equilibrium_and_flat_baseline() {
        let cfg = EpisodeConfig { ic_noise_half_width: 0.0, ..Default::default() };
        let mut env = make_env(default_grid(), cfg).unwrap();
        assert_eq!(env.initial_state(), &GridState::zeros(10));
        assert!(env.baseline().states.iter().all(|s| s.omega.iter().all(|&w| w == 0.0)));
        env.reset();
        for t in 0..500 {
            let r = env.step(AttackAction { target: t % 10, coefficient: -1.0 }).unwrap();
            assert_eq!(r.reward, 0.0);
        }
        assert_eq!(env.cumulative_reward().unwrap(), 0.0);
    }

    #[test]
    fn baseline_matches_plain_simulation() {
        let env = make_env(default_grid(), EpisodeConfig::default()).unwrap();
        let sim = grid::simulate(&default_grid(), env.initial_state(), 500, 0.01, None).unwrap();
        assert_eq!(env.baseline(), &sim);
    }

    #[test]
    fn reset_is_idempotent_and_ordered() {
        let mut env = make_env(default_grid(), short_config(20)).unwrap();
        let a = env.reset();
        env.step(AttackAction { target: 6, coefficient: -1.0 }).unwrap();
        let b = env.reset();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), 20);
        let s = env.initial_state();
        assert_eq!(a.values[..10], s.omega[..]);
        assert_eq!(a.values[10..], s.theta[..]);
    }

    #[test]
    fn designed_coefficient_gives_zero_reward() {
        // bus 2 is designed with k = 1.0
        let mut env = make_env(default_grid(), EpisodeConfig::default()).unwrap();
        env.reset();
        loop {
            let r = env.step(AttackAction { target: 2, coefficient: 1.0 }).unwrap();
            assert_eq!(r.reward, 0.0);
            assert!(r.per_bus_delta.iter().all(|&d| d == 0.0));
            if r.done {
                break;
            }
        }
        assert_eq!(env.cumulative_reward().unwrap(), 0.0);
    }

    #[test]
    fn done_exactly_at_horizon_and_step_after_done_fails() {
        let mut env = make_env(default_grid(), short_config(5)).unwrap();
        env.reset();
        for t in 1..=5 {
            let r = env.step(AttackAction { target: 0, coefficient: 0.0 }).unwrap();
            assert_eq!(r.done, t == 5);
            assert_eq!(r.reward, r.per_bus_delta.iter().sum::<f64>());
        }
        assert!(matches!(
            env.step(AttackAction { target: 0, coefficient: 0.0 }),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn cumulative_reward_mid_episode_is_usage_error() {
        let mut env = make_env(default_grid(), short_config(5)).unwrap();
        env.reset();
        env.step(AttackAction { target: 0, coefficient: 0.0 }).unwrap();
        assert!(matches!(env.cumulative_reward(), Err(Error::Usage(_))));
    }

    #[test]
    fn rejects_invalid_actions() {
        let mut env = make_env(default_grid(), short_config(5)).unwrap();
        env.reset();
        assert!(env.step(AttackAction { target: 10, coefficient: 0.0 }).is_err());
        assert!(env.step(AttackAction { target: 0, coefficient: 0.5 }).is_err());
        assert_eq!(env.step_index(), 0);
    }

    #[test]
    fn overflow_terminates_episode_early() {
        let cfg = EpisodeConfig {
            steps: 500,
            kappa: vec![-1e5],
            ic_noise_half_width: 0.03,
            ..Default::default()
        };
        let mut env = make_env(default_grid(), cfg).unwrap();
        env.reset();
        let mut last = None;
        for _ in 0..500 {
            let r = env.step(AttackAction { target: 6, coefficient: -1e5 }).unwrap();
            let done = r.done;
            last = Some(r);
            if done {
                break;
            }
        }
        let last = last.unwrap();
        assert!(last.done);
        assert!(env.step_index() < 500);
        assert!(last.reward.is_finite());
        assert!(env.cumulative_reward().unwrap().is_finite());
    }

    #[test]
    fn invalid_config_rejected() {
        for cfg in [
            EpisodeConfig { steps: 0, ..Default::default() },
            EpisodeConfig { dt: 0.0, ..Default::default() },
            EpisodeConfig { ic_noise_half_width: -0.1, ..Default::default() },
            EpisodeConfig { kappa: vec![], ..Default::default() },
            EpisodeConfig { kappa: vec![1.0, 1.0], ..Default::default() },
        ] {
            assert!(make_env(default_grid(), cfg).is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn stealth_constraint_holds(target in 0usize..10, ci in 0usize..3) {
            let env = make_env(default_grid(), short_config(1)).unwrap();
            let coefficient = env.config().kappa[ci];
            let k = env.effective_droop(AttackAction { target, coefficient }).unwrap();
            let changed = k.iter().zip(&env.params().droop).filter(|(a, b)| a != b).count();
            prop_assert!(changed <= 1);
        }

        #[test]
        fn identical_actions_reproduce_bit_exactly(
            actions in proptest::collection::vec((0usize..10, 0usize..3), 40)
        ) {
            let run = || {
                let mut env = make_env(default_grid(), short_config(40)).unwrap();
                env.reset();
                actions
                    .iter()
                    .map(|&(t, c)| {
                        let r = env.step(AttackAction { target: t, coefficient: [-1.0, 0.0, 1.0][c] }).unwrap();
                        (r.observation, r.reward.to_bits(), r.per_bus_delta)
                    })
                    .collect::<Vec<_>>()
            };
            prop_assert_eq!(run(), run());
        }

        #[test]
        fn reward_modes_agree_on_nonnegative_frequencies(
            omega in proptest::collection::vec(0.0f64..1.0, 5),
            base in proptest::collection::vec(0.0f64..1.0, 5),
        ) {
            let a = RewardMode::AbsDeviationDiff.per_bus_delta(&omega, &base);
            let b = RewardMode::SignedDiff.per_bus_delta(&omega, &base);
            prop_assert_eq!(a, b);
        }
    }
}
