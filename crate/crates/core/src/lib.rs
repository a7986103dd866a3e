//! Frequency dynamics of droop-controlled power grids under false data
//! injection on droop coefficients, and a PPO attacker that learns
//! time-varying attack schedules.
//!
//! * [`grid`]: swing-equation model, explicit Euler integration, equilibrium solver.
//! * [`env`]: episodic attack environment with a frozen initial condition.
//! * [`baseline`]: exhaustive search over time-invariant attacks.
//! * [`policy`]: actor-critic networks, action distributions, Adam, checkpoints.
//! * [`ppo`]: rollouts, GAE, clipped-surrogate updates, greedy evaluation.
//! * [`io`]: TOML configuration, command runner, CSV/JSON artifacts.

pub mod baseline;
pub mod defaults;
pub mod env;
pub mod error;
pub mod grid;
pub mod io;
pub mod policy;
pub mod ppo;

pub use baseline::{enumerate_constant_attacks, ConstantAttackResult};
pub use defaults::default_grid;
pub use env::{make_env, AttackAction, EpisodeConfig, FdiEnv, Observation, RewardMode, StepResult};
pub use error::{Error, Result};
pub use grid::{simulate, solve_equilibrium, GridParams, GridState, Trajectory};
pub use policy::{init_policy, Architecture, PolicyParameters};
pub use ppo::{evaluate_policy, train, PpoConfig, TrainingMetrics};
