mod common;

use common::synthetic;
use krds_core::policy::{Policy, QTarget};
use krds_core::simulator::sample_goal;
use krds_core::trainer::{
    bellman_target, init_policy, run_episode, train, train_with, EpochRecord, EvalSummary,
    PolicyAgent, ReplayBuffer, TrainerConfig, STREAM_EPISODES,
};

fn small_config() -> TrainerConfig {
    let mut config = TrainerConfig {
        epochs: 4,
        sims_per_epoch: 20,
        eval_episodes: 40,
        ..TrainerConfig::default()
    };
    config.policy.hidden = 32;
    config
}

fn scripted(scores: &[f64]) -> Vec<EpochRecord> {
    let (o, data) = synthetic();
    let config = TrainerConfig {
        epochs: scores.len(),
        ..small_config()
    };
    let env = config.environment(&o, None).unwrap();
    let policy = init_policy(&config, &o, &data.train).unwrap();
    let scores = scores.to_vec();
    let mut evaluator = |_: &Policy, epoch: usize| {
        Ok(EvalSummary {
            success_rate: scores[epoch - 1],
            avg_turns: 1.0,
            match_rate: 0.0,
        })
    };
    let mut records = Vec::new();
    train_with(
        &config,
        &data.train,
        policy,
        &env,
        &mut evaluator,
        &mut |r| records.push(r.clone()),
    )
    .unwrap();
    records
}

#[test]
fn buffer_flushes_on_new_best_only() {
    let records = scripted(&[0.2, 0.5, 0.4, 0.6]);
    let flushed: Vec<usize> = records
        .iter()
        .filter(|r| r.flushed)
        .map(|r| r.epoch)
        .collect();
    assert_eq!(flushed, vec![1, 2, 4]);
    for r in &records {
        if r.flushed {
            assert_eq!(r.buffer_size, 0);
        } else {
            assert!(r.buffer_size > 0);
        }
    }
}

#[test]
fn ties_do_not_flush() {
    let records = scripted(&[0.5, 0.5, 0.3, 0.5, 0.51]);
    let flushed: Vec<usize> = records
        .iter()
        .filter(|r| r.flushed)
        .map(|r| r.epoch)
        .collect();
    assert_eq!(flushed, vec![1, 5]);
}

#[test]
fn best_snapshot_is_taken_at_the_best_epoch() {
    let (o, data) = synthetic();
    let config = small_config();
    let env = config.environment(&o, None).unwrap();
    let policy = init_policy(&config, &o, &data.train).unwrap();
    let scores = [0.1, 0.9, 0.2, 0.3];
    let mut seen = Vec::new();
    let mut evaluator = |p: &Policy, epoch: usize| {
        seen.push(p.clone());
        Ok(EvalSummary {
            success_rate: scores[epoch - 1],
            avg_turns: 2.0,
            match_rate: 0.0,
        })
    };
    let outcome = train_with(
        &config,
        &data.train,
        policy,
        &env,
        &mut evaluator,
        &mut |_| {},
    )
    .unwrap();
    assert_eq!(outcome.best.as_ref(), Some(&seen[1]));
    assert_eq!(&outcome.last, &seen[3]);
    assert_ne!(seen[1], seen[3]);
}

#[test]
fn zero_epochs_returns_untouched_policy() {
    let (o, data) = synthetic();
    let config = TrainerConfig {
        epochs: 0,
        ..small_config()
    };
    let env = config.environment(&o, None).unwrap();
    let policy = init_policy(&config, &o, &data.train).unwrap();
    let outcome = train(&config, &data.train, policy.clone(), &env, &mut |_| {}).unwrap();
    assert!(outcome.report.epochs.is_empty());
    assert!(outcome.best.is_none());
    assert_eq!(outcome.best_or_last(), &policy);
}

#[test]
fn same_seed_same_run() {
    let (o, data) = synthetic();
    let run = |seed: u64| {
        let config = TrainerConfig {
            seed,
            ..small_config()
        };
        let env = config.environment(&o, None).unwrap();
        let policy = init_policy(&config, &o, &data.train).unwrap();
        train(&config, &data.train, policy, &env, &mut |_| {}).unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.report, b.report);
    assert_eq!(a.last, b.last);
    assert_ne!(a.last, c.last);
}

/// Replays the first epoch by hand with the initial weights as the frozen
/// target and compares against the trainer.
#[test]
fn targets_come_from_the_previous_epoch() {
    let (o, data) = synthetic();
    let config = TrainerConfig {
        epochs: 1,
        steps_per_epoch: Some(8),
        ..small_config()
    };
    let env = config.environment(&o, None).unwrap();
    let initial = init_policy(&config, &o, &data.train).unwrap();

    let mut after_steps = None;
    let mut evaluator = |p: &Policy, _: usize| {
        after_steps = Some(p.clone());
        Ok(EvalSummary {
            success_rate: 0.0,
            avg_turns: 0.0,
            match_rate: 0.0,
        })
    };
    train_with(
        &config,
        &data.train,
        initial.clone(),
        &env,
        &mut evaluator,
        &mut |_| {},
    )
    .unwrap();
    let after_steps = after_steps.unwrap();

    let replay = |frozen_target: bool| {
        let mut rng = config.rng(STREAM_EPISODES);
        let mut buffer = ReplayBuffer::new(config.buffer_capacity);
        for _ in 0..config.sims_per_epoch {
            let goal = sample_goal(&data.train, &mut rng).unwrap();
            let mut agent = PolicyAgent {
                policy: &initial,
                epsilon: config.epsilon,
            };
            for t in run_episode(&env, &mut agent, goal, &mut rng)
                .unwrap()
                .transitions
            {
                buffer.push(t);
            }
        }
        let mut online = initial.clone();
        for _ in 0..8 {
            let batch = buffer.sample(config.batch_size, &mut rng);
            let target = if frozen_target {
                initial.clone()
            } else {
                online.clone()
            };
            let ys: Vec<f64> = batch
                .iter()
                .map(|t| bellman_target(t, &target, config.gamma))
                .collect();
            let examples: Vec<QTarget<'_>> = batch
                .iter()
                .zip(&ys)
                .map(|(t, &y)| QTarget {
                    features: &t.s,
                    action: t.a,
                    target: y,
                })
                .collect();
            online
                .backward_and_step(&examples, config.learning_rate)
                .unwrap();
        }
        online
    };
    assert_eq!(replay(true), after_steps);
    assert_ne!(replay(false), after_steps);
}

#[test]
fn report_serializes_one_line_per_epoch() {
    let records = scripted(&[0.1, 0.2, 0.3]);
    let report = krds_core::trainer::TrainingReport {
        config_fingerprint: "x".into(),
        epochs: records,
    };
    let text = report.to_json_lines();
    assert_eq!(text.lines().count(), 3);
    let first: EpochRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first.epoch, 1);
    assert_eq!(report.best_success(), Some(0.3));
}
