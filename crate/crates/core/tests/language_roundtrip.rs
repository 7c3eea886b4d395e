mod common;

use krds_core::dialogue::{
    AgentAction, AgentActionKind, Intent, SemanticFrame, SlotStatus, UserIntent,
};
use krds_core::language::nlg::all_intents;
use krds_core::language::{LanguageLayer, LexiconFile, TemplateSet, MIN_TEMPLATES};
use krds_core::ontology::Ontology;
use krds_core::trainer::seeded_rng;
use rand::seq::SliceRandom;
use rand::Rng;

const FILLINGS: usize = 5;

fn demo_layer() -> LanguageLayer {
    let file = LexiconFile::demo();
    let o = Ontology::new(
        file.diseases.keys().cloned().collect(),
        file.symptoms.keys().cloned().collect(),
    )
    .unwrap();
    LanguageLayer::new(&o, &file, TemplateSet::demo()).unwrap()
}

/// A random frame of the given intent, plus the symptom the agent last asked
/// about when the frame answers a request.
fn filling<R: Rng>(intent: Intent, o: &Ontology, rng: &mut R) -> (SemanticFrame, Option<usize>) {
    let symptom = rng.gen_range(0..o.num_symptoms());
    match intent {
        Intent::Agent(kind) => {
            let action = match kind {
                AgentActionKind::InformDisease => {
                    AgentAction::InformDisease(rng.gen_range(0..o.num_diseases()))
                }
                AgentActionKind::RequestSymptom => AgentAction::RequestSymptom(symptom),
                AgentActionKind::Thanks => {
                    AgentAction::Greeting(o.greeting_index("thanks").unwrap())
                }
                AgentActionKind::Closing => {
                    AgentAction::Greeting(o.greeting_index("closing").unwrap())
                }
            };
            (SemanticFrame::from_action(action, o), None)
        }
        Intent::User(UserIntent::RequestDisease) => {
            let mut frame = SemanticFrame::user(UserIntent::RequestDisease);
            let mut all: Vec<usize> = (0..o.num_symptoms()).collect();
            all.shuffle(rng);
            for &s in &all[..rng.gen_range(0..=3)] {
                let st = *SlotStatus::ALL.choose(rng).unwrap();
                frame.slots.insert(o.symptoms()[s].clone(), st);
            }
            (frame, None)
        }
        Intent::User(UserIntent::Closing) => (SemanticFrame::user(UserIntent::Closing), None),
        Intent::User(u) => {
            let st = SlotStatus::ALL
                .into_iter()
                .find(|&st| UserIntent::for_status(st) == u)
                .unwrap();
            let frame = SemanticFrame::user(u).with_slot(o.symptoms()[symptom].clone(), st);
            (frame, Some(symptom))
        }
    }
}

fn round_trip(layer: &LanguageLayer, seed: u64) -> usize {
    let o = layer.ontology();
    let mut rng = seeded_rng(seed, 0);
    let mut checked = 0;
    for intent in all_intents() {
        let n = layer.templates().templates_for(intent).len();
        assert!(n >= MIN_TEMPLATES, "{intent:?} has {n} templates");
        for t in 0..n {
            for _ in 0..FILLINGS {
                let (frame, context) = filling(intent, o, &mut rng);
                let text = layer.realize_with(&frame, t).unwrap();
                match intent {
                    Intent::Agent(_) => {
                        let parsed = layer.parse_agent(&text).unwrap();
                        assert_eq!(SemanticFrame::from_action(parsed, o), frame, "{text:?}");
                    }
                    Intent::User(_) => {
                        let parsed = layer.parse_user(&text, context).unwrap();
                        assert_eq!(parsed, frame, "{text:?}");
                    }
                }
                checked += 1;
            }
        }
    }
    checked
}

#[test]
fn every_template_round_trips_on_demo_lexicon() {
    for seed in 0..4 {
        assert!(round_trip(&demo_layer(), seed) >= 9 * 4 * FILLINGS);
    }
}

#[test]
fn synthetic_ontology_round_trips() {
    let (o, _) = common::synthetic();
    round_trip(&LanguageLayer::demo(&o).unwrap(), 1);
}

#[test]
fn generic_identifiers_round_trip() {
    let o = krds_core::synthetic::synthetic_ontology(3, 2).unwrap();
    round_trip(&LanguageLayer::demo(&o).unwrap(), 2);
}
