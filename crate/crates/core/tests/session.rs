mod common;

use common::synthetic;
use krds_core::dialogue::{state_dim, AgentAction, Intent, UserIntent};
use krds_core::knowledge::compute_knowledge_stats;
use krds_core::language::LanguageLayer;
use krds_core::policy::{Ablation, KnowledgeBranch, Policy, QNetworkParams};
use krds_core::session::{DiagnosisAgent, SessionRecord, SessionStatus, Speaker};
use krds_core::synthetic::synthetic_ontology;
use krds_core::trainer::{init_policy, TrainerConfig};
use krds_core::KrdsError;

/// Zero weights: every action scores the same apart from the knowledge term.
fn flat_agent(ablation: Ablation) -> DiagnosisAgent {
    let (o, data) = synthetic();
    let stats = compute_knowledge_stats(&data.train, &o).unwrap();
    let policy = Policy::from_parts(
        o.clone(),
        22,
        QNetworkParams::zeros(state_dim(&o, 22), 8, o.action_count()),
        stats.relation_init.clone(),
        KnowledgeBranch::from_stats(&stats, &o),
        ablation.flags(),
    )
    .unwrap();
    DiagnosisAgent::new(policy, LanguageLayer::demo(&o).unwrap()).unwrap()
}

#[test]
fn knowledge_prior_diagnoses_from_the_self_report() {
    let agent = flat_agent(Ablation::Full);
    let (record, reply) = agent
        .start("s1", "My baby has a cough and phlegm.", 10)
        .unwrap();
    assert_eq!(reply.status, SessionStatus::Success);
    assert_eq!(reply.diagnosis.as_deref(), Some("bronchitis"));
    assert_eq!(record.transcript.len(), 2);
    assert_eq!(record.transcript[0].speaker, Speaker::User);
    assert_eq!(
        record.transcript[1].action,
        Some(agent.policy().ontology().disease_action(3))
    );
    assert_eq!(record.transcript[1].timestamp, 10);
}

#[test]
fn session_fails_after_max_turns() {
    // all scores tie, so the agent keeps saying thanks
    let agent = flat_agent(Ablation::Relation);
    let (mut record, reply) = agent.start("s2", "What is wrong with my baby?", 0).unwrap();
    assert_eq!(reply.status, SessionStatus::Open);
    let mut turns = 1;
    while record.status.is_open() {
        let r = agent
            .reply(&mut record, "The baby has a cough.", turns)
            .unwrap();
        turns += 1;
        assert!(turns <= 22);
        if turns < 22 {
            assert_eq!(r.status, SessionStatus::Open);
        }
    }
    assert_eq!(turns, 22);
    assert_eq!(record.status, SessionStatus::Failed);
    assert!(record.diagnosis.is_none());
    assert!(matches!(
        agent.reply(&mut record, "hello", 99),
        Err(KrdsError::SessionClosed)
    ));
}

#[test]
fn failed_messages_leave_the_record_untouched() {
    let agent = flat_agent(Ablation::Relation);
    let (mut record, _) = agent.start("s3", "What is wrong with my baby?", 0).unwrap();
    let before = record.clone();
    assert!(matches!(
        agent.reply(&mut record, "   ", 1),
        Err(KrdsError::Validation { .. })
    ));
    // the agent said thanks, so there is no question to attach a bare answer to
    assert!(matches!(
        agent.reply(&mut record, "hmm", 1),
        Err(KrdsError::Unparseable(_))
    ));
    assert_eq!(record, before);
}

#[test]
fn empty_and_unrecognized_self_reports() {
    let agent = flat_agent(Ablation::Relation);
    assert!(matches!(
        agent.start("s4", "  ", 0),
        Err(KrdsError::Validation { .. })
    ));
    let (record, _) = agent.start("s4", "hello", 0).unwrap();
    assert_eq!(
        record.transcript[0].frame.intent,
        Intent::User(UserIntent::RequestDisease)
    );
    assert!(record.transcript[0].frame.slots.is_empty());
}

#[test]
fn trained_agent_never_repeats_and_always_ends() {
    let (o, data) = synthetic();
    let mut config = TrainerConfig::default();
    config.policy.hidden = 16;
    let policy = init_policy(&config, &o, &data.train).unwrap();
    let agent = DiagnosisAgent::new(policy, LanguageLayer::demo(&o).unwrap()).unwrap();
    for (i, answer) in ["Yes.", "No.", "I don't know."].iter().enumerate() {
        let (mut record, _) = agent
            .start(format!("t{i}"), "The baby is vomiting.", 0)
            .unwrap();
        while record.status.is_open() {
            agent.reply(&mut record, answer, 1).unwrap();
        }
        let requests: Vec<usize> = record
            .transcript
            .iter()
            .filter_map(|e| e.action)
            .filter(|&a| {
                matches!(
                    AgentAction::from_index(a, &o),
                    Some(AgentAction::RequestSymptom(_))
                )
            })
            .collect();
        let mut unique = requests.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), requests.len());
        assert!(record.state.turn <= 22);
    }
}

#[test]
fn replies_are_deterministic_per_session_id() {
    let agent = flat_agent(Ablation::Relation);
    let run = |id: &str| {
        let (mut record, _) = agent.start(id, "What is wrong?", 0).unwrap();
        for _ in 0..4 {
            agent.reply(&mut record, "No cough.", 0).unwrap();
        }
        record
            .transcript
            .iter()
            .map(|e| e.utterance.clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("a"));
}

#[test]
fn records_round_trip_through_json() {
    let agent = flat_agent(Ablation::Full);
    let (record, _) = agent.start("s5", "The baby has a runny nose.", 3).unwrap();
    let text = serde_json::to_string(&record).unwrap();
    let back: SessionRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back, record);
}

#[test]
fn language_must_share_the_ontology() {
    let agent = flat_agent(Ablation::Full);
    let other = LanguageLayer::demo(&synthetic_ontology(2, 2).unwrap()).unwrap();
    assert!(matches!(
        DiagnosisAgent::new(agent.policy().clone(), other),
        Err(KrdsError::OntologyMismatch { .. })
    ));
}
