//! Goal-driven patient simulator and reward schemes.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{AgentAction, AgentActionKind, SemanticFrame, SlotStatus, UserIntent};
use crate::error::{KrdsError, Result};
use crate::ontology::{Ontology, UserGoal};

pub const DEFAULT_MAX_TURNS: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardScheme {
    pub name: String,
    pub success: f64,
    pub failure: f64,
    /// Reward (≤ 0) for requesting a symptom the patient never discussed.
    pub miss_penalty: f64,
    /// Also penalize requests for symptoms the patient denies.
    #[serde(default)]
    pub penalize_denied: bool,
}

impl RewardScheme {
    pub const PRESETS: [&'static str; 5] = ["main", "R1", "R2", "R1*", "R2*"];

    pub fn new(
        name: impl Into<String>,
        success: f64,
        failure: f64,
        miss_penalty: f64,
    ) -> Result<Self> {
        let s = RewardScheme {
            name: name.into(),
            success,
            failure,
            miss_penalty,
            penalize_denied: false,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.success, self.failure, self.miss_penalty]
            .iter()
            .all(|x| x.is_finite());
        if !finite || !(self.success > 0.0 && self.failure < 0.0) || self.miss_penalty > 0.0 {
            return Err(KrdsError::Config(format!(
                "reward scheme needs success > 0 > failure and penalty <= 0, got ({}, {}, {})",
                self.success, self.failure, self.miss_penalty
            )));
        }
        Ok(())
    }

    /// Success 2L, failure −L, penalty −1 with L = 22.
    pub fn main_scheme() -> Self {
        Self::preset("main").expect("preset exists")
    }

    /// Smallest preset; keeps Bellman targets near the bounded range of the
    /// fused Q-values.
    pub fn recommended() -> Self {
        Self::preset("R2*").expect("preset exists")
    }

    pub fn preset(name: &str) -> Option<Self> {
        let (s, f, p) = match name {
            "main" => (44.0, -22.0, -1.0),
            "R1" => (22.0, -11.0, -1.0),
            "R2" => (11.0, -6.0, -1.0),
            "R1*" => (22.0, -11.0, -0.5),
            "R2*" => (11.0, -6.0, -0.25),
            _ => return None,
        };
        Some(RewardScheme {
            name: name.to_string(),
            success: s,
            failure: f,
            miss_penalty: p,
            penalize_denied: false,
        })
    }

    /// A preset name or a `success,failure,penalty` triple.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(p) = Self::preset(spec) {
            return Ok(p);
        }
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(KrdsError::Config(format!(
                "unknown reward scheme {spec:?} (presets: {})",
                Self::PRESETS.join(", ")
            )));
        }
        let nums = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| KrdsError::Config(format!("reward triple {spec:?}: {e}")))?;
        Self::new("custom", nums[0], nums[1], nums[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    /// Wrong disease informed, or the agent closed without a diagnosis.
    FailWrongDisease,
    FailMaxTurns,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::FailWrongDisease => "fail_wrong_disease",
            Outcome::FailMaxTurns => "fail_max_turns",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimSession {
    pub goal: UserGoal,
    pub turn: usize,
    pub max_turns: usize,
    pub done: bool,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserResponse {
    pub frame: SemanticFrame,
    pub reward: f64,
    /// Set once the session has ended.
    pub outcome: Option<Outcome>,
    /// For symptom requests: whether the symptom is among the implicit ones.
    pub hit: Option<bool>,
}

pub fn sample_goal<'a, R: Rng + ?Sized>(
    split: &'a [UserGoal],
    rng: &mut R,
) -> Result<&'a UserGoal> {
    split
        .choose(rng)
        .ok_or_else(|| KrdsError::validation("split", "empty goal list"))
}

fn status(v: bool) -> SlotStatus {
    if v {
        SlotStatus::True
    } else {
        SlotStatus::False
    }
}

/// Opening turn: ask for a diagnosis and disclose every explicit symptom.
pub fn initial_frame(goal: &UserGoal) -> SemanticFrame {
    let mut frame = SemanticFrame::user(UserIntent::RequestDisease);
    for (s, &v) in &goal.explicit_inform_slots {
        frame.slots.insert(s.clone(), status(v));
    }
    frame
}

impl SimSession {
    pub fn new(goal: UserGoal, max_turns: usize) -> Self {
        SimSession {
            goal,
            turn: 0,
            max_turns,
            done: false,
            outcome: None,
        }
    }

    fn finish(&mut self, outcome: Outcome) -> Option<Outcome> {
        self.done = true;
        self.outcome = Some(outcome);
        Some(outcome)
    }

    /// Answers one agent action. Each call is one agent turn; the session
    /// fails once `max_turns` agent turns pass without a diagnosis.
    pub fn respond(
        &mut self,
        action: AgentAction,
        ontology: &Ontology,
        scheme: &RewardScheme,
    ) -> Result<UserResponse> {
        if self.done {
            return Err(KrdsError::SessionClosed);
        }
        self.turn += 1;
        let mut hit = None;
        let (frame, mut reward, mut outcome) = match action.kind(ontology) {
            AgentActionKind::InformDisease => {
                let AgentAction::InformDisease(d) = action else {
                    unreachable!()
                };
                let closing = SemanticFrame::user(UserIntent::Closing);
                if ontology.diseases()[d] == self.goal.disease_tag {
                    (closing, scheme.success, self.finish(Outcome::Success))
                } else {
                    (
                        closing,
                        scheme.failure,
                        self.finish(Outcome::FailWrongDisease),
                    )
                }
            }
            AgentActionKind::Closing => (
                SemanticFrame::user(UserIntent::Closing),
                scheme.failure,
                self.finish(Outcome::FailWrongDisease),
            ),
            AgentActionKind::Thanks => (SemanticFrame::user(UserIntent::RequestDisease), 0.0, None),
            AgentActionKind::RequestSymptom => {
                let AgentAction::RequestSymptom(s) = action else {
                    unreachable!()
                };
                let name = &ontology.symptoms()[s];
                let implicit = self.goal.implicit_inform_slots.get(name).copied();
                let known = implicit.or_else(|| self.goal.explicit_inform_slots.get(name).copied());
                let st = known.map_or(SlotStatus::NotSure, status);
                hit = Some(implicit.is_some());
                let penalized = match implicit {
                    None => true,
                    Some(false) => scheme.penalize_denied,
                    Some(true) => false,
                };
                let frame =
                    SemanticFrame::user(UserIntent::for_status(st)).with_slot(name.clone(), st);
                (
                    frame,
                    if penalized { scheme.miss_penalty } else { 0.0 },
                    None,
                )
            }
        };
        if outcome.is_none() && self.turn >= self.max_turns {
            reward += scheme.failure;
            outcome = self.finish(Outcome::FailMaxTurns);
        }
        Ok(UserResponse {
            frame,
            reward,
            outcome,
            hit,
        })
    }
}
