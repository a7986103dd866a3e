use fdi_grid::defaults::default_grid;
use fdi_grid::env::{make_env, EpisodeConfig};
use fdi_grid::policy::{init_policy, Architecture, OptimizerState};
use fdi_grid::ppo::{collect_rollout, compute_gae, ppo_loss, ppo_update, Minibatch, PpoConfig, RolloutBuffer};
use fdi_grid::PolicyParameters;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fresh_rollout(seed: u64) -> (PolicyParameters, RolloutBuffer) {
    let mut env = make_env(default_grid(), EpisodeConfig::default()).unwrap();
    let policy = init_policy(seed, &Architecture::for_grid(10, 3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = collect_rollout(&mut env, &policy, 500, &mut rng).unwrap();
    compute_gae(&mut buf, 0.99, 0.95);
    (policy, buf)
}

fn full_value_loss(policy: &PolicyParameters, buf: &RolloutBuffer) -> f64 {
    let batch = Minibatch {
        observations: &buf.observations,
        actions: &buf.actions,
        old_log_probs: &buf.log_probs,
        advantages: &buf.advantages,
        returns: &buf.returns,
    };
    ppo_loss(policy, &batch, &PpoConfig::default().loss_coefficients()).unwrap().1.value_loss
}

#[test]
fn value_loss_falls_over_first_epochs() {
    let (mut policy, buf) = fresh_rollout(0);
    let cfg = PpoConfig { update_epochs: 1, ..Default::default() };
    let mut opt = OptimizerState::new(&policy, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut losses = vec![full_value_loss(&policy, &buf)];
    for _ in 0..5 {
        ppo_update(&mut policy, &mut opt, &buf, &cfg, &mut rng).unwrap();
        losses.push(full_value_loss(&policy, &buf));
    }
    assert!(losses[5] < losses[0], "{losses:?}");
    let drops = losses.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(drops >= 4, "{losses:?}");
}

#[test]
fn first_minibatch_sees_unit_ratios() {
    let (mut policy, buf) = fresh_rollout(2);
    let cfg = PpoConfig { update_epochs: 2, ..Default::default() };
    let mut opt = OptimizerState::new(&policy, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stats = ppo_update(&mut policy, &mut opt, &buf, &cfg, &mut rng).unwrap();
    assert!(stats.first_minibatch.ratios.iter().all(|&r| r == 1.0));
    assert_eq!(stats.first_minibatch.clip_fraction, 0.0);
    // 500 samples in chunks of 64: seven full minibatches plus one of 52, per epoch
    assert_eq!(stats.minibatches, 16);
}

#[test]
fn updates_are_seed_deterministic() {
    let run = || {
        let (mut policy, buf) = fresh_rollout(5);
        let cfg = PpoConfig::default();
        let mut opt = OptimizerState::new(&policy, cfg.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        ppo_update(&mut policy, &mut opt, &buf, &cfg, &mut rng).unwrap();
        policy
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn policy_loss_equals_negative_mean_advantage_at_unit_ratio(
        seed in 0u64..1000,
        advs in proptest::collection::vec(-5.0f64..5.0, 32),
    ) {
        let (policy, buf) = fresh_rollout(seed % 7);
        let n = advs.len();
        let batch = Minibatch {
            observations: &buf.observations[..n * buf.obs_dim],
            actions: &buf.actions[..n],
            old_log_probs: &buf.log_probs[..n],
            advantages: &advs,
            returns: &buf.returns[..n],
        };
        let (_, br) = ppo_loss(&policy, &batch, &PpoConfig::default().loss_coefficients()).unwrap();
        let mean = advs.iter().sum::<f64>() / n as f64;
        prop_assert!((br.policy_loss + mean).abs() < 1e-12);
        prop_assert_eq!(br.clip_fraction, 0.0);
    }
}
