//! Lexicon-driven semantic parsing.

use std::collections::BTreeMap;

use super::lexicon::{Entity, Item, Lexicon};
use crate::dialogue::{AgentAction, AgentActionKind, SemanticFrame, SlotStatus, UserIntent};
use crate::error::{KrdsError, Result};
use crate::ontology::Ontology;

/// Parses a patient utterance. `context` is the symptom the agent asked
/// about last, if any; bare answers ("yes", "not sure") attach to it.
pub fn parse_user(
    text: &str,
    lexicon: &Lexicon,
    ontology: &Ontology,
    context: Option<usize>,
) -> Result<SemanticFrame> {
    if text.trim().is_empty() {
        return Err(KrdsError::Unparseable(text.to_string()));
    }
    let clauses = lexicon.analyze(text);

    // slots in order of first mention; later mentions overwrite the status
    let mut order: Vec<usize> = Vec::new();
    let mut statuses: BTreeMap<usize, SlotStatus> = BTreeMap::new();
    for clause in &clauses {
        let status = lexicon.clause_status(clause);
        for item in clause {
            if let Item::Entity(Entity::Symptom(s)) = item {
                if statuses.insert(*s, status).is_none() {
                    order.push(*s);
                }
            }
        }
    }

    let frame_with = |intent: UserIntent, statuses: &BTreeMap<usize, SlotStatus>| {
        let mut f = SemanticFrame::user(intent);
        for (&s, &st) in statuses {
            f.slots.insert(ontology.symptoms()[s].clone(), st);
        }
        f
    };

    if lexicon.has_intent(&clauses, "request_disease") {
        return Ok(frame_with(UserIntent::RequestDisease, &statuses));
    }
    if lexicon.has_intent(&clauses, "closing") {
        return Ok(frame_with(UserIntent::Closing, &statuses));
    }
    if let Some(c) = context {
        if let Some(&st) = statuses.get(&c) {
            return Ok(frame_with(UserIntent::for_status(st), &statuses));
        }
        if let Some(st) = clauses.iter().find_map(|cl| lexicon.clause_polarity(cl)) {
            statuses.insert(c, st);
            return Ok(frame_with(UserIntent::for_status(st), &statuses));
        }
        if let Some(&first) = order.first() {
            return Ok(frame_with(
                UserIntent::for_status(statuses[&first]),
                &statuses,
            ));
        }
        statuses.insert(c, SlotStatus::NotSure);
        return Ok(frame_with(UserIntent::NotSureSymptom, &statuses));
    }
    match order.first() {
        Some(&first) => Ok(frame_with(
            UserIntent::for_status(statuses[&first]),
            &statuses,
        )),
        None => Err(KrdsError::Unparseable(text.to_string())),
    }
}

/// Parses an agent utterance back into its action.
pub fn parse_agent(text: &str, lexicon: &Lexicon, ontology: &Ontology) -> Result<AgentAction> {
    let clauses = lexicon.analyze(text);
    let mut first_symptom = None;
    for item in clauses.iter().flatten() {
        match item {
            Item::Entity(Entity::Disease(d)) => return Ok(AgentAction::InformDisease(*d)),
            Item::Entity(Entity::Symptom(s)) if first_symptom.is_none() => first_symptom = Some(*s),
            _ => {}
        }
    }
    if let Some(s) = first_symptom {
        return Ok(AgentAction::RequestSymptom(s));
    }
    let kind = if lexicon.has_intent(&clauses, "agent_closing") {
        AgentActionKind::Closing
    } else if lexicon.has_intent(&clauses, "agent_thanks") {
        AgentActionKind::Thanks
    } else {
        return Err(KrdsError::Unparseable(text.to_string()));
    };
    (0..ontology.num_greetings())
        .map(AgentAction::Greeting)
        .find(|a| a.kind(ontology) == kind)
        .ok_or_else(|| KrdsError::Language(format!("ontology has no {kind} greeting")))
}
