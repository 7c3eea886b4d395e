//! Actions, semantic frames, the rule-based state tracker and the state
//! encoding fed to the Q-network.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{KrdsError, Result};
use crate::ontology::Ontology;

/// An agent action, identified by its position in the ontology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentAction {
    Greeting(usize),
    InformDisease(usize),
    RequestSymptom(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentActionKind {
    InformDisease,
    RequestSymptom,
    Thanks,
    Closing,
}

impl AgentActionKind {
    pub const ALL: [AgentActionKind; 4] = [
        AgentActionKind::InformDisease,
        AgentActionKind::RequestSymptom,
        AgentActionKind::Thanks,
        AgentActionKind::Closing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentActionKind::InformDisease => "inform_disease",
            AgentActionKind::RequestSymptom => "request_symptom",
            AgentActionKind::Thanks => "thanks",
            AgentActionKind::Closing => "closing",
        }
    }
}

impl AgentAction {
    pub fn index(self, ontology: &Ontology) -> usize {
        match self {
            AgentAction::Greeting(g) => g,
            AgentAction::InformDisease(d) => ontology.disease_action(d),
            AgentAction::RequestSymptom(s) => ontology.symptom_action(s),
        }
    }

    pub fn from_index(index: usize, ontology: &Ontology) -> Option<Self> {
        let g = ontology.num_greetings();
        let m = ontology.num_diseases();
        if index < g {
            Some(AgentAction::Greeting(index))
        } else if index < g + m {
            Some(AgentAction::InformDisease(index - g))
        } else if index < ontology.action_count() {
            Some(AgentAction::RequestSymptom(index - g - m))
        } else {
            None
        }
    }

    /// Greetings named `closing` end the dialogue; any other greeting acts
    /// as a `thanks`.
    pub fn kind(self, ontology: &Ontology) -> AgentActionKind {
        match self {
            AgentAction::Greeting(g) if ontology.greetings()[g] == "closing" => {
                AgentActionKind::Closing
            }
            AgentAction::Greeting(_) => AgentActionKind::Thanks,
            AgentAction::InformDisease(_) => AgentActionKind::InformDisease,
            AgentAction::RequestSymptom(_) => AgentActionKind::RequestSymptom,
        }
    }

    pub fn identifier(self, ontology: &Ontology) -> &str {
        match self {
            AgentAction::Greeting(g) => &ontology.greetings()[g],
            AgentAction::InformDisease(d) => &ontology.diseases()[d],
            AgentAction::RequestSymptom(s) => &ontology.symptoms()[s],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserIntent {
    RequestDisease,
    ConfirmSymptom,
    DenySymptom,
    NotSureSymptom,
    Closing,
}

impl UserIntent {
    pub const ALL: [UserIntent; 5] = [
        UserIntent::RequestDisease,
        UserIntent::ConfirmSymptom,
        UserIntent::DenySymptom,
        UserIntent::NotSureSymptom,
        UserIntent::Closing,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UserIntent::RequestDisease => "request_disease",
            UserIntent::ConfirmSymptom => "confirm_symptom",
            UserIntent::DenySymptom => "deny_symptom",
            UserIntent::NotSureSymptom => "not_sure_symptom",
            UserIntent::Closing => "closing",
        }
    }

    pub fn for_status(status: SlotStatus) -> Self {
        match status {
            SlotStatus::True => UserIntent::ConfirmSymptom,
            SlotStatus::False => UserIntent::DenySymptom,
            SlotStatus::NotSure => UserIntent::NotSureSymptom,
        }
    }

    fn needs_symptom(self) -> bool {
        matches!(
            self,
            UserIntent::ConfirmSymptom | UserIntent::DenySymptom | UserIntent::NotSureSymptom
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotStatus {
    True,
    False,
    NotSure,
}

impl SlotStatus {
    pub const ALL: [SlotStatus; 3] = [SlotStatus::True, SlotStatus::False, SlotStatus::NotSure];

    /// Tracker encoding: positive 1, negative −1, not sure −2.
    pub fn value(self) -> i8 {
        match self {
            SlotStatus::True => 1,
            SlotStatus::False => -1,
            SlotStatus::NotSure => -2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    User(UserIntent),
    Agent(AgentActionKind),
}

/// Intent plus slots, the common currency of NLU, NLG, tracker and
/// simulator. An agent `request_symptom` frame carries its symptom as a
/// single `not_sure` slot (the value is what is being asked).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticFrame {
    pub intent: Intent,
    #[serde(default)]
    pub slots: BTreeMap<String, SlotStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disease: Option<String>,
}

impl SemanticFrame {
    pub fn user(intent: UserIntent) -> Self {
        SemanticFrame {
            intent: Intent::User(intent),
            slots: BTreeMap::new(),
            disease: None,
        }
    }

    pub fn with_slot(mut self, symptom: impl Into<String>, status: SlotStatus) -> Self {
        self.slots.insert(symptom.into(), status);
        self
    }

    pub fn user_intent(&self) -> Option<UserIntent> {
        match self.intent {
            Intent::User(u) => Some(u),
            Intent::Agent(_) => None,
        }
    }

    pub fn from_action(action: AgentAction, ontology: &Ontology) -> Self {
        let mut frame = SemanticFrame {
            intent: Intent::Agent(action.kind(ontology)),
            slots: BTreeMap::new(),
            disease: None,
        };
        match action {
            AgentAction::InformDisease(d) => frame.disease = Some(ontology.diseases()[d].clone()),
            AgentAction::RequestSymptom(s) => {
                frame
                    .slots
                    .insert(ontology.symptoms()[s].clone(), SlotStatus::NotSure);
            }
            AgentAction::Greeting(_) => {}
        }
        frame
    }

    pub fn to_action(&self, ontology: &Ontology) -> Result<AgentAction> {
        let Intent::Agent(kind) = self.intent else {
            return Err(KrdsError::validation("frame", "not an agent frame"));
        };
        match kind {
            AgentActionKind::InformDisease => {
                let d = self
                    .disease
                    .as_deref()
                    .and_then(|d| ontology.disease_index(d))
                    .ok_or_else(|| KrdsError::validation("frame", "inform without disease"))?;
                Ok(AgentAction::InformDisease(d))
            }
            AgentActionKind::RequestSymptom => {
                let s = self
                    .slots
                    .keys()
                    .next()
                    .and_then(|s| ontology.symptom_index(s))
                    .ok_or_else(|| KrdsError::validation("frame", "request without symptom"))?;
                Ok(AgentAction::RequestSymptom(s))
            }
            AgentActionKind::Thanks | AgentActionKind::Closing => {
                let name = kind.as_str();
                let g = ontology
                    .greeting_index(name)
                    .or_else(|| {
                        // a custom greeting list may not name "thanks"
                        (0..ontology.num_greetings())
                            .find(|&g| AgentAction::Greeting(g).kind(ontology) == kind)
                    })
                    .ok_or_else(|| {
                        KrdsError::validation("frame", format!("no greeting action for {name}"))
                    })?;
                Ok(AgentAction::Greeting(g))
            }
        }
    }

    pub fn validate(&self, ontology: &Ontology) -> Result<()> {
        if let Some(bad) = self
            .slots
            .keys()
            .find(|s| ontology.symptom_index(s).is_none())
        {
            return Err(KrdsError::validation(
                "frame.slots",
                format!("unknown symptom {bad:?}"),
            ));
        }
        if let Some(d) = &self.disease {
            if ontology.disease_index(d).is_none() {
                return Err(KrdsError::validation(
                    "frame.disease",
                    format!("unknown disease {d:?}"),
                ));
            }
        }
        match self.intent {
            Intent::User(u) if u.needs_symptom() && self.slots.is_empty() => Err(
                KrdsError::validation("frame", format!("{} without a symptom slot", u.as_str())),
            ),
            Intent::Agent(AgentActionKind::RequestSymptom) if self.slots.len() != 1 => Err(
                KrdsError::validation("frame", "request_symptom needs exactly one symptom"),
            ),
            Intent::Agent(AgentActionKind::InformDisease) if self.disease.is_none() => Err(
                KrdsError::validation("frame", "inform_disease without disease"),
            ),
            _ => Ok(()),
        }
    }
}

/// Per-symptom status over {1, −1, −2, 0}; 0 means never mentioned.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymptomVector(Vec<i8>);

impl SymptomVector {
    pub fn unknown(n: usize) -> Self {
        SymptomVector(vec![0; n])
    }

    pub fn from_values(values: Vec<i8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(-2..=1).contains(*v)) {
            return Err(KrdsError::validation(
                "symptom vector",
                format!("value {v} outside {{1, -1, -2, 0}}"),
            ));
        }
        Ok(SymptomVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn is_known(&self, i: usize) -> bool {
        self.0[i] != 0
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub symptoms: SymptomVector,
    pub prev_agent: Option<AgentAction>,
    pub prev_user: Option<UserIntent>,
    pub turn: usize,
    pub last_request: Option<usize>,
}

impl DialogueState {
    pub fn new(ontology: &Ontology) -> Self {
        DialogueState {
            symptoms: SymptomVector::unknown(ontology.num_symptoms()),
            prev_agent: None,
            prev_user: None,
            turn: 0,
            last_request: None,
        }
    }

    /// State after the agent takes `action`; counts one agent turn.
    pub fn after_agent(&self, action: AgentAction) -> Self {
        DialogueState {
            symptoms: self.symptoms.clone(),
            prev_agent: Some(action),
            prev_user: self.prev_user,
            turn: self.turn + 1,
            last_request: match action {
                AgentAction::RequestSymptom(s) => Some(s),
                _ => None,
            },
        }
    }

    /// State after the user's frame has been tracked.
    pub fn after_user(&self, frame: &SemanticFrame, ontology: &Ontology) -> Result<Self> {
        Ok(DialogueState {
            symptoms: update_symptoms(self, frame, ontology)?,
            prev_agent: self.prev_agent,
            prev_user: frame.user_intent().or(self.prev_user),
            turn: self.turn,
            last_request: self.last_request,
        })
    }
}

/// Rule-based tracking: each slot overwrites its symptom's status; an
/// outstanding request the user did not address is recorded as not sure.
pub fn update_symptoms(
    state: &DialogueState,
    frame: &SemanticFrame,
    ontology: &Ontology,
) -> Result<SymptomVector> {
    let mut values = state.symptoms.0.clone();
    for (symptom, status) in &frame.slots {
        let i = ontology.symptom_index(symptom).ok_or_else(|| {
            KrdsError::validation("frame.slots", format!("unknown symptom {symptom:?}"))
        })?;
        values[i] = status.value();
    }
    if let Some(req) = state.last_request {
        if !frame.slots.contains_key(&ontology.symptoms()[req]) {
            values[req] = SlotStatus::NotSure.value();
        }
    }
    Ok(SymptomVector(values))
}

/// N + D + 5 + T + 1.
pub fn state_dim(ontology: &Ontology, max_turns: usize) -> usize {
    ontology.num_symptoms() + ontology.action_count() + UserIntent::ALL.len() + max_turns + 1
}

/// Feature layout: raw symptom values, one-hot previous agent action,
/// one-hot previous user intent, one-hot turn.
pub fn encode_state(
    state: &DialogueState,
    ontology: &Ontology,
    max_turns: usize,
) -> Result<Vec<f64>> {
    if state.turn > max_turns {
        return Err(KrdsError::Shape(format!(
            "turn {} exceeds max turns {max_turns}",
            state.turn
        )));
    }
    if state.symptoms.len() != ontology.num_symptoms() {
        return Err(KrdsError::Shape(format!(
            "symptom vector has {} entries, ontology has {}",
            state.symptoms.len(),
            ontology.num_symptoms()
        )));
    }
    let n = ontology.num_symptoms();
    let d = ontology.action_count();
    let mut out = vec![0.0; state_dim(ontology, max_turns)];
    for (o, &v) in out.iter_mut().zip(state.symptoms.values()) {
        *o = f64::from(v);
    }
    if let Some(a) = state.prev_agent {
        out[n + a.index(ontology)] = 1.0;
    }
    if let Some(u) = state.prev_user {
        out[n + d + u.index()] = 1.0;
    }
    out[n + d + UserIntent::ALL.len() + state.turn] = 1.0;
    Ok(out)
}

/// `true` where the action may be selected: every request for a symptom
/// with a known status is blocked.
pub fn action_mask(symptoms: &SymptomVector, ontology: &Ontology) -> Vec<bool> {
    let mut allowed = vec![true; ontology.action_count()];
    for s in 0..ontology.num_symptoms() {
        if symptoms.is_known(s) {
            allowed[ontology.symptom_action(s)] = false;
        }
    }
    allowed
}

pub fn mask_actions(q: &[f64], state: &DialogueState, ontology: &Ontology) -> Vec<f64> {
    assert_eq!(q.len(), ontology.action_count(), "q has wrong length");
    q.iter()
        .zip(action_mask(&state.symptoms, ontology))
        .map(|(&v, ok)| if ok { v } else { f64::NEG_INFINITY })
        .collect()
}

impl fmt::Display for AgentActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
