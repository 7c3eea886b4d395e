use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::error_model::{corrupt_frame, ErrorModel};
use super::replay::Transition;
use crate::dialogue::{action_mask, encode_state, AgentAction, DialogueState, SemanticFrame};
use crate::error::{KrdsError, Result};
use crate::language::LanguageLayer;
use crate::ontology::{Ontology, UserGoal};
use crate::policy::{select_action, Policy};
use crate::simulator::{initial_frame, Outcome, RewardScheme, SimSession};

/// How the simulator talks to the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DialogueMode {
    /// Semantic frames passed directly.
    #[default]
    Frame,
    /// Both sides realized as text and parsed back.
    Language,
}

impl DialogueMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "frame" => Some(DialogueMode::Frame),
            "language" => Some(DialogueMode::Language),
            _ => None,
        }
    }
}

/// What an agent sees before choosing an action.
pub struct TurnView<'a> {
    pub state: &'a DialogueState,
    pub features: &'a [f64],
    pub allowed: &'a [bool],
}

pub trait Agent {
    fn act(&mut self, view: &TurnView<'_>, rng: &mut dyn rand::RngCore) -> usize;
}

/// ε-greedy over the Q-values of a policy, masked unless the policy's
/// symptom filter is off.
pub struct PolicyAgent<'a> {
    pub policy: &'a Policy,
    pub epsilon: f64,
}

impl Agent for PolicyAgent<'_> {
    fn act(&mut self, view: &TurnView<'_>, rng: &mut dyn rand::RngCore) -> usize {
        let q = self.policy.q_values(view.features);
        if self.policy.flags().symptom_filter {
            select_action(&q, view.allowed, self.epsilon, rng)
        } else {
            select_action(&q, &vec![true; q.len()], self.epsilon, rng)
        }
    }
}

/// Uniform over allowed actions.
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn act(&mut self, view: &TurnView<'_>, rng: &mut dyn rand::RngCore) -> usize {
        let allowed: Vec<usize> = (0..view.allowed.len())
            .filter(|&i| view.allowed[i])
            .collect();
        allowed[rng.gen_range(0..allowed.len())]
    }
}

impl<F> Agent for F
where
    F: FnMut(&TurnView<'_>) -> usize,
{
    fn act(&mut self, view: &TurnView<'_>, _rng: &mut dyn rand::RngCore) -> usize {
        self(view)
    }
}

#[derive(Clone, Copy)]
pub struct Environment<'a> {
    pub ontology: &'a Ontology,
    pub scheme: &'a RewardScheme,
    pub max_turns: usize,
    pub error_model: ErrorModel,
    pub mode: DialogueMode,
    pub language: Option<&'a LanguageLayer>,
}

impl<'a> Environment<'a> {
    pub fn frames(ontology: &'a Ontology, scheme: &'a RewardScheme, max_turns: usize) -> Self {
        Environment {
            ontology,
            scheme,
            max_turns,
            error_model: ErrorModel::default(),
            mode: DialogueMode::Frame,
            language: None,
        }
    }

    fn language(&self) -> Result<&'a LanguageLayer> {
        self.language
            .ok_or_else(|| KrdsError::Config("language mode needs a language layer".into()))
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub disease: String,
    pub outcome: Outcome,
    pub turns: usize,
    pub requests: usize,
    pub hits: usize,
    pub repeated_requests: usize,
    pub total_reward: f64,
    pub transitions: Vec<Transition>,
    /// Utterances in order, filled in language mode.
    pub transcript: Vec<String>,
}

fn user_turn<R: Rng + ?Sized>(
    env: &Environment<'_>,
    frame: &SemanticFrame,
    context: Option<usize>,
    transcript: &mut Vec<String>,
    rng: &mut R,
) -> Result<SemanticFrame> {
    let frame = match env.mode {
        DialogueMode::Frame => frame.clone(),
        DialogueMode::Language => {
            let lang = env.language()?;
            let text = lang.realize(frame, rng)?;
            let parsed = lang.parse_user(&text, context)?;
            transcript.push(text);
            parsed
        }
    };
    Ok(corrupt_frame(&frame, &env.error_model, rng))
}

/// Plays one simulated dialogue for `goal`.
pub fn run_episode<R: Rng>(
    env: &Environment<'_>,
    agent: &mut dyn Agent,
    goal: &UserGoal,
    rng: &mut R,
) -> Result<EpisodeResult> {
    let o = env.ontology;
    let t_max = env.max_turns;
    let mut session = SimSession::new(goal.clone(), t_max);
    let mut transcript = Vec::new();
    let opening = user_turn(env, &initial_frame(goal), None, &mut transcript, rng)?;
    let mut state = DialogueState::new(o).after_user(&opening, o)?;

    let mut transitions = Vec::new();
    let mut asked = BTreeSet::new();
    let (mut requests, mut hits, mut repeated) = (0, 0, 0);
    let mut total_reward = 0.0;
    loop {
        let features = encode_state(&state, o, t_max)?;
        let allowed = action_mask(&state.symptoms, o);
        let view = TurnView {
            state: &state,
            features: &features,
            allowed: &allowed,
        };
        let a = agent.act(&view, rng);
        let action = AgentAction::from_index(a, o).ok_or_else(|| {
            KrdsError::Shape(format!("agent chose action {a} of {}", o.action_count()))
        })?;
        if env.mode == DialogueMode::Language {
            let lang = env.language()?;
            let text = lang.realize_action(action, rng)?;
            let parsed = lang.parse_agent(&text)?;
            if parsed != action {
                return Err(KrdsError::Language(format!(
                    "agent utterance {text:?} parsed as {parsed:?}, expected {action:?}"
                )));
            }
            transcript.push(text);
        }
        let resp = session.respond(action, o, env.scheme)?;
        total_reward += resp.reward;
        if let AgentAction::RequestSymptom(s) = action {
            requests += 1;
            if resp.hit == Some(true) {
                hits += 1;
            }
            if !asked.insert(s) {
                repeated += 1;
            }
        }
        let after_agent = state.after_agent(action);
        if let Some(outcome) = resp.outcome {
            let s_next = encode_state(&after_agent, o, t_max)?;
            transitions.push(Transition {
                s: features,
                a,
                r: resp.reward,
                mask_next: action_mask(&after_agent.symptoms, o),
                s_next,
                done: true,
            });
            return Ok(EpisodeResult {
                disease: goal.disease_tag.clone(),
                outcome,
                turns: session.turn,
                requests,
                hits,
                repeated_requests: repeated,
                total_reward,
                transitions,
                transcript,
            });
        }
        let reply = user_turn(
            env,
            &resp.frame,
            after_agent.last_request,
            &mut transcript,
            rng,
        )?;
        let next = after_agent.after_user(&reply, o)?;
        transitions.push(Transition {
            s: features,
            a,
            r: resp.reward,
            s_next: encode_state(&next, o, t_max)?,
            done: false,
            mask_next: action_mask(&next.symptoms, o),
        });
        state = next;
    }
}
