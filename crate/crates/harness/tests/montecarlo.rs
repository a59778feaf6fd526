use emphatic::analytics::value_function;
use emphatic::environments::miner::TRAP_ACTIVATION;
use emphatic::environments::{random_task, MinerLayout, MinerModel, MinerPolicies, MinerTask, RandomTaskLimits};
use emphatic::rng::stream;
use emphatic_harness::{monte_carlo_value, MinerRollout};

fn miner() -> (MinerRollout, MinerModel<f64>, MinerPolicies<f64>) {
    let layout = MinerLayout::canonical();
    let rollout = MinerRollout { layout: layout.clone(), activation: TRAP_ACTIVATION, task: MinerTask::new(&layout) };
    let policies = MinerPolicies::new(&layout);
    (rollout, MinerModel::new(layout, TRAP_ACTIVATION), policies)
}

#[test]
fn miner_rollouts_agree_with_exact_model() {
    let (rollout, model, policies) = miner();
    let start = rollout.layout.observation(rollout.layout.start(), false);
    for name in MinerPolicies::<f64>::TARGETS {
        let policy = policies.target(name).unwrap();
        let exact = value_function(&model.prediction_task(policy, &policies.behavior, &rollout.task)).unwrap()
            [model.start_state()];
        let est = monte_carlo_value(&rollout, policy, start, 200_000, 31).unwrap();
        let gap = (est.estimate - exact).abs();
        assert!(gap < 4.0 * est.stderr, "{name}: mc {} +- {} vs exact {exact}", est.estimate, est.stderr);
    }
}

#[test]
fn miner_policy_values_are_ordered() {
    let (rollout, _, policies) = miner();
    let start = rollout.layout.observation(rollout.layout.start(), false);
    let value = |name: &str| monte_carlo_value(&rollout, policies.target(name).unwrap(), start, 100_000, 5).unwrap();
    let (uniform, headfirst, cautious) = (value("uniform"), value("headfirst"), value("cautious"));
    for est in [&uniform, &headfirst, &cautious] {
        assert!(est.stderr < 0.01 * est.estimate, "{est:?}");
    }
    assert!(0.0 < uniform.estimate);
    assert!(uniform.estimate < headfirst.estimate);
    assert!(headfirst.estimate < cautious.estimate);
}

#[test]
fn tabular_rollouts_agree_with_value_function() {
    let task = random_task(&mut stream(17), &RandomTaskLimits::default()).unwrap();
    let v = value_function(&task).unwrap();
    for start in 0..task.num_states() {
        let est = monte_carlo_value(&task, &task.target, start, 100_000, start as u64).unwrap();
        let gap = (est.estimate - v[start]).abs();
        assert!(gap < 4.0 * est.stderr + 1e-12, "state {start}: mc {} +- {} vs {}", est.estimate, est.stderr, v[start]);
    }
}

#[test]
fn estimates_depend_only_on_seed() {
    let (rollout, _, policies) = miner();
    let start = rollout.layout.observation(rollout.layout.start(), false);
    let policy = policies.target("cautious").unwrap();
    let a = monte_carlo_value(&rollout, policy, start, 2_500, 9).unwrap();
    let b = monte_carlo_value(&rollout, policy, start, 2_500, 9).unwrap();
    let c = monte_carlo_value(&rollout, policy, start, 2_500, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.estimate, c.estimate);
}
