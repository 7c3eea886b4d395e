//! Live dialogue sessions between a person and a trained policy.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dialogue::{
    action_mask, encode_state, AgentAction, AgentActionKind, DialogueState, SemanticFrame,
    UserIntent,
};
use crate::error::{KrdsError, Result};
use crate::language::LanguageLayer;
use crate::policy::{greedy_action, Policy};
use crate::trainer::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Agent,
}

/// `success` means the agent reached a diagnosis; `failed` means it ran out
/// of turns or closed without one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Success,
    Failed,
}

impl SessionStatus {
    pub fn is_open(self) -> bool {
        self == SessionStatus::Open
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub utterance: String,
    pub frame: SemanticFrame,
    /// Action index, agent turns only.
    pub action: Option<usize>,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub transcript: Vec<TranscriptEntry>,
    pub state: DialogueState,
    pub status: SessionStatus,
    pub diagnosis: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReply {
    pub agent_utterance: String,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<String>,
}

/// Greedy, masked policy with a language layer over the same ontology.
#[derive(Debug, Clone)]
pub struct DiagnosisAgent {
    policy: Policy,
    language: LanguageLayer,
}

impl DiagnosisAgent {
    pub fn new(policy: Policy, language: LanguageLayer) -> Result<Self> {
        if policy.ontology() != language.ontology() {
            return Err(KrdsError::OntologyMismatch {
                expected: policy.ontology().hash(),
                found: language.ontology().hash(),
            });
        }
        Ok(DiagnosisAgent { policy, language })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn language(&self) -> &LanguageLayer {
        &self.language
    }

    /// Opens a session from the patient's self-report and returns the
    /// agent's first turn. Reports without any recognizable content are
    /// taken as a plain request for a diagnosis.
    pub fn start(
        &self,
        id: impl Into<String>,
        self_report: &str,
        now: u64,
    ) -> Result<(SessionRecord, AgentReply)> {
        if self_report.trim().is_empty() {
            return Err(KrdsError::validation("self_report", "empty text"));
        }
        let frame = match self.language.parse_user(self_report, None) {
            Ok(f) => f,
            Err(KrdsError::Unparseable(_)) => SemanticFrame::user(UserIntent::RequestDisease),
            Err(e) => return Err(e),
        };
        let o = self.policy.ontology();
        let mut record = SessionRecord {
            id: id.into(),
            transcript: Vec::new(),
            state: DialogueState::new(o).after_user(&frame, o)?,
            status: SessionStatus::Open,
            diagnosis: None,
        };
        record.transcript.push(TranscriptEntry {
            speaker: Speaker::User,
            utterance: self_report.to_string(),
            frame,
            action: None,
            timestamp: now,
        });
        let reply = self.agent_turn(&mut record, now)?;
        Ok((record, reply))
    }

    /// Tracks one patient message and answers it. The record is left
    /// untouched on error.
    pub fn reply(&self, record: &mut SessionRecord, text: &str, now: u64) -> Result<AgentReply> {
        if !record.status.is_open() {
            return Err(KrdsError::SessionClosed);
        }
        if text.trim().is_empty() {
            return Err(KrdsError::validation("text", "empty text"));
        }
        let o = self.policy.ontology();
        let frame = self.language.parse_user(text, record.state.last_request)?;
        let state = record.state.after_user(&frame, o)?;
        let mut next = record.clone();
        next.state = state;
        next.transcript.push(TranscriptEntry {
            speaker: Speaker::User,
            utterance: text.to_string(),
            frame,
            action: None,
            timestamp: now,
        });
        let reply = self.agent_turn(&mut next, now)?;
        *record = next;
        Ok(reply)
    }

    fn agent_turn(&self, record: &mut SessionRecord, now: u64) -> Result<AgentReply> {
        let o = self.policy.ontology();
        let features = encode_state(&record.state, o, self.policy.max_turns())?;
        let q = self.policy.q_values(&features);
        let a = greedy_action(&q, &action_mask(&record.state.symptoms, o));
        let action = AgentAction::from_index(a, o).expect("greedy index is in range");

        let digest = Sha256::digest(record.id.as_bytes());
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
        let mut rng = seeded_rng(seed, record.transcript.len() as u64);
        let utterance = self.language.realize_action(action, &mut rng)?;

        record.state = record.state.after_agent(action);
        match action.kind(o) {
            AgentActionKind::InformDisease => {
                record.status = SessionStatus::Success;
                record.diagnosis = Some(action.identifier(o).to_string());
            }
            AgentActionKind::Closing => record.status = SessionStatus::Failed,
            _ if record.state.turn >= self.policy.max_turns() => {
                record.status = SessionStatus::Failed
            }
            _ => {}
        }
        record.transcript.push(TranscriptEntry {
            speaker: Speaker::Agent,
            utterance: utterance.clone(),
            frame: SemanticFrame::from_action(action, o),
            action: Some(a),
            timestamp: now,
        });
        Ok(AgentReply {
            agent_utterance: utterance,
            status: record.status,
            diagnosis: record.diagnosis.clone(),
        })
    }
}
