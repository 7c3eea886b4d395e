//! Deep Q-learning driver: simulated episodes, experience replay, a target
//! network refreshed once per epoch, and the best-model buffer flush.

mod episode;
mod error_model;
mod replay;

pub use episode::{
    run_episode, Agent, DialogueMode, Environment, EpisodeResult, PolicyAgent, RandomAgent,
    TurnView,
};
pub use error_model::{corrupt_frame, ErrorModel};
pub use replay::{ReplayBuffer, Transition, DEFAULT_CAPACITY};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KrdsError, Result};
use crate::metrics::{compute_metrics, fingerprint, EpisodeSummary, MetricsReport};
use crate::ontology::UserGoal;
use crate::policy::{Policy, PolicyConfig, QTarget};
use crate::simulator::{sample_goal, RewardScheme, DEFAULT_MAX_TURNS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub sims_per_epoch: usize,
    pub epochs: usize,
    pub eval_episodes: usize,
    /// Gradient steps per epoch; `None` means one pass of
    /// ⌈new transitions / batch⌉ batches.
    pub steps_per_epoch: Option<usize>,
    pub seed: u64,
    pub max_turns: usize,
    pub reward: RewardScheme,
    pub error_model: ErrorModel,
    pub mode: DialogueMode,
    pub policy: PolicyConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.9,
            epsilon: 0.1,
            batch_size: 32,
            learning_rate: 0.01,
            buffer_capacity: DEFAULT_CAPACITY,
            sims_per_epoch: 100,
            epochs: 300,
            eval_episodes: 500,
            steps_per_epoch: None,
            seed: 0,
            max_turns: DEFAULT_MAX_TURNS,
            reward: RewardScheme::recommended(),
            error_model: ErrorModel::default(),
            mode: DialogueMode::Frame,
            policy: PolicyConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(KrdsError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch size must be positive and fit in the buffer");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.max_turns == 0 {
            return bad("max turns must be positive");
        }
        if self.eval_episodes == 0 {
            return bad("eval episodes must be positive");
        }
        if self.policy.hidden == 0 {
            return bad("hidden size must be positive");
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        seeded_rng(self.seed, stream)
    }
}

/// Independent random streams derived from one seed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const STREAM_INIT: u64 = 0;
pub const STREAM_EPISODES: u64 = 1;
pub const STREAM_EVAL_GOALS: u64 = 2;
pub const STREAM_EVAL: u64 = 3;

/// r for terminal transitions, otherwise r + γ·max over the actions allowed
/// in the next state, scored by the target network.
pub fn bellman_target(t: &Transition, target: &Policy, gamma: f64) -> f64 {
    if t.done {
        return t.r;
    }
    let filter = target.flags().symptom_filter;
    let q = target.q_values(&t.s_next);
    let best = q
        .iter()
        .zip(&t.mask_next)
        .filter(|(_, &ok)| ok || !filter)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    t.r + gamma * best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub success_rate: f64,
    pub avg_turns: f64,
    pub match_rate: f64,
}

impl From<&MetricsReport> for EvalSummary {
    fn from(m: &MetricsReport) -> Self {
        EvalSummary {
            success_rate: m.accuracy,
            avg_turns: m.avg_turns,
            match_rate: m.match_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub eval_success: f64,
    pub avg_turns: f64,
    pub match_rate: f64,
    pub loss_mean: f64,
    pub buffer_size: usize,
    pub flushed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub config_fingerprint: String,
    pub epochs: Vec<EpochRecord>,
}

impl TrainingReport {
    pub fn best_success(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.eval_success).reduce(f64::max)
    }

    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("record serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub report: TrainingReport,
    /// Snapshot taken at the best evaluation; `None` for zero epochs.
    pub best: Option<Policy>,
    pub last: Policy,
}

impl TrainingOutcome {
    pub fn best_or_last(&self) -> &Policy {
        self.best.as_ref().unwrap_or(&self.last)
    }
}

/// Greedy episodes on the given goals, one per goal, in order.
pub fn evaluate_goals(
    policy: &Policy,
    goals: &[UserGoal],
    env: &Environment<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EpisodeSummary>> {
    let mut agent = PolicyAgent {
        policy,
        epsilon: 0.0,
    };
    goals
        .iter()
        .map(|g| {
            let r = run_episode(env, &mut agent, g, rng)?;
            Ok(EpisodeSummary {
                disease: r.disease,
                outcome: r.outcome,
                turns: r.turns,
                requests: r.requests,
                hits: r.hits,
            })
        })
        .collect()
}

/// Runs `episodes` greedy dialogues cycling through `goals`.
pub fn evaluate(
    policy: &Policy,
    goals: &[UserGoal],
    episodes: usize,
    env: &Environment<'_>,
    seed: u64,
    config_fingerprint: &str,
) -> Result<MetricsReport> {
    if episodes == 0 {
        return Err(KrdsError::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    if goals.is_empty() {
        return Err(KrdsError::validation("goals", "empty goal list"));
    }
    let picked: Vec<UserGoal> = (0..episodes)
        .map(|i| goals[i % goals.len()].clone())
        .collect();
    let summaries = evaluate_goals(policy, &picked, env, &mut seeded_rng(seed, STREAM_EVAL))?;
    Ok(compute_metrics(&summaries, config_fingerprint))
}

/// Fixed evaluation set: goals drawn with replacement from `train`.
pub fn eval_goal_set(config: &TrainerConfig, train: &[UserGoal]) -> Result<Vec<UserGoal>> {
    let mut rng = config.rng(STREAM_EVAL_GOALS);
    (0..config.eval_episodes)
        .map(|_| sample_goal(train, &mut rng).cloned())
        .collect()
}

/// Full training run with the standard evaluator.
pub fn train(
    config: &TrainerConfig,
    train_goals: &[UserGoal],
    policy: Policy,
    env: &Environment<'_>,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainingOutcome> {
    config.validate()?;
    let eval_goals = eval_goal_set(config, train_goals)?;
    let seed = config.seed;
    let mut evaluator = |p: &Policy, _epoch: usize| -> Result<EvalSummary> {
        let summaries = evaluate_goals(p, &eval_goals, env, &mut seeded_rng(seed, STREAM_EVAL))?;
        Ok(EvalSummary::from(&compute_metrics(&summaries, "")))
    };
    train_with(config, train_goals, policy, env, &mut evaluator, observer)
}

/// Training loop with an injectable evaluator.
pub fn train_with(
    config: &TrainerConfig,
    train_goals: &[UserGoal],
    mut policy: Policy,
    env: &Environment<'_>,
    evaluator: &mut dyn FnMut(&Policy, usize) -> Result<EvalSummary>,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainingOutcome> {
    config.validate()?;
    let mut rng = config.rng(STREAM_EPISODES);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut target = policy.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best = None;
    let mut records = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut fresh = 0;
        for _ in 0..config.sims_per_epoch {
            let goal = sample_goal(train_goals, &mut rng)?;
            let mut agent = PolicyAgent {
                policy: &policy,
                epsilon: config.epsilon,
            };
            let result = run_episode(env, &mut agent, goal, &mut rng)?;
            fresh += result.transitions.len();
            for t in result.transitions {
                buffer.push(t);
            }
        }

        let steps = config
            .steps_per_epoch
            .unwrap_or_else(|| fresh.div_ceil(config.batch_size));
        let mut losses = Vec::new();
        if buffer.len() >= config.batch_size {
            for _ in 0..steps {
                let batch = buffer.sample(config.batch_size, &mut rng);
                let targets: Vec<f64> = batch
                    .iter()
                    .map(|t| bellman_target(t, &target, config.gamma))
                    .collect();
                let examples: Vec<QTarget<'_>> = batch
                    .iter()
                    .zip(&targets)
                    .map(|(t, &y)| QTarget {
                        features: &t.s,
                        action: t.a,
                        target: y,
                    })
                    .collect();
                losses.push(policy.backward_and_step(&examples, config.learning_rate)?);
            }
        }

        let eval = evaluator(&policy, epoch)?;
        let flushed = eval.success_rate > best_score;
        if flushed {
            best_score = eval.success_rate;
            best = Some(policy.clone());
            buffer.clear();
        }
        target = policy.clone();

        let loss_mean = if losses.is_empty() {
            0.0
        } else {
            losses.iter().sum::<f64>() / losses.len() as f64
        };
        let record = EpochRecord {
            epoch,
            eval_success: eval.success_rate,
            avg_turns: eval.avg_turns,
            match_rate: eval.match_rate,
            loss_mean,
            buffer_size: buffer.len(),
            flushed,
        };
        observer(&record);
        records.push(record);
    }

    Ok(TrainingOutcome {
        report: TrainingReport {
            config_fingerprint: config.fingerprint(),
            epochs: records,
        },
        best,
        last: policy,
    })
}

/// Fresh policy for `config`: knowledge statistics from `train`, weights
/// from the init stream of the config seed.
pub fn init_policy(
    config: &TrainerConfig,
    ontology: &crate::ontology::Ontology,
    train: &[UserGoal],
) -> Result<Policy> {
    let stats = crate::knowledge::compute_knowledge_stats(train, ontology)?;
    Ok(Policy::new(
        ontology,
        &stats,
        config.max_turns,
        &config.policy,
        &mut config.rng(STREAM_INIT),
    ))
}

impl TrainerConfig {
    /// Simulation environment for this config; language mode needs `language`.
    pub fn environment<'a>(
        &'a self,
        ontology: &'a crate::ontology::Ontology,
        language: Option<&'a crate::language::LanguageLayer>,
    ) -> Result<Environment<'a>> {
        if self.mode == DialogueMode::Language && language.is_none() {
            return Err(KrdsError::Config(
                "language mode needs a lexicon and templates".into(),
            ));
        }
        Ok(Environment {
            ontology,
            scheme: &self.reward,
            max_turns: self.max_turns,
            error_model: self.error_model,
            mode: self.mode,
            language,
        })
    }
}
