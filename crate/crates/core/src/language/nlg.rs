//! Template-based generation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use super::lexicon::Lexicon;
use crate::dialogue::{AgentActionKind, Intent, SemanticFrame, SlotStatus, UserIntent};
use crate::error::{KrdsError, Result};
use crate::ontology::Ontology;

pub(crate) const DEMO_TEMPLATES: &str = include_str!("../../assets/demo_templates.json");

pub const MIN_TEMPLATES: usize = 4;

const PLACEHOLDERS: [&str; 3] = ["symptom", "disease", "symptoms"];

/// Template key for every realizable intent.
pub fn template_key(intent: Intent) -> String {
    match intent {
        Intent::Agent(k) => format!("agent.{}", k.as_str()),
        Intent::User(u) => format!("user.{}", u.as_str()),
    }
}

fn slot_key(status: SlotStatus) -> &'static str {
    match status {
        SlotStatus::True => "slot.true",
        SlotStatus::False => "slot.false",
        SlotStatus::NotSure => "slot.not_sure",
    }
}

pub fn all_intents() -> Vec<Intent> {
    AgentActionKind::ALL
        .iter()
        .map(|&k| Intent::Agent(k))
        .chain(UserIntent::ALL.iter().map(|&u| Intent::User(u)))
        .collect()
}

/// Action kind → templates with `{symptom}`, `{disease}` or `{symptoms}`
/// placeholders. `slot.*` entries render the per-symptom sentences that
/// replace `{symptoms}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: BTreeMap<String, Vec<String>>,
}

fn placeholders(template: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let end = rest[start..]
            .find('}')
            .ok_or_else(|| KrdsError::Language(format!("unclosed placeholder in {template:?}")))?;
        out.push(&rest[start + 1..start + end]);
        rest = &rest[start + end + 1..];
    }
    Ok(out)
}

impl TemplateSet {
    pub fn new(templates: BTreeMap<String, Vec<String>>) -> Result<Self> {
        for intent in all_intents() {
            let key = template_key(intent);
            let n = templates.get(&key).map_or(0, Vec::len);
            if n < MIN_TEMPLATES {
                return Err(KrdsError::Language(format!(
                    "{key} has {n} templates, need at least {MIN_TEMPLATES}"
                )));
            }
        }
        for status in SlotStatus::ALL {
            if templates.get(slot_key(status)).is_none_or(Vec::is_empty) {
                return Err(KrdsError::Language(format!("missing {}", slot_key(status))));
            }
        }
        for (key, list) in &templates {
            for t in list {
                for p in placeholders(t)? {
                    if !PLACEHOLDERS.contains(&p) {
                        return Err(KrdsError::Language(format!(
                            "unknown placeholder {{{p}}} in {key}"
                        )));
                    }
                }
            }
        }
        Ok(TemplateSet { templates })
    }

    pub fn demo() -> Self {
        let map = serde_json::from_str(DEMO_TEMPLATES).expect("bundled templates parse");
        Self::new(map).expect("bundled templates are valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| KrdsError::io(path, e))?;
        let map =
            serde_json::from_str(&text).map_err(|e| KrdsError::Parse(format!("templates: {e}")))?;
        Self::new(map)
    }

    pub fn templates_for(&self, intent: Intent) -> &[String] {
        self.templates
            .get(&template_key(intent))
            .map_or(&[], Vec::as_slice)
    }

    pub fn as_map(&self) -> &BTreeMap<String, Vec<String>> {
        &self.templates
    }
}

fn fill(template: &str, values: &[(&str, Option<&str>)]) -> Result<String> {
    let mut out = template.to_string();
    for p in placeholders(template)? {
        let v = values
            .iter()
            .find(|(k, _)| *k == p)
            .and_then(|(_, v)| *v)
            .ok_or_else(|| {
                KrdsError::Language(format!("cannot resolve {{{p}}} in {template:?}"))
            })?;
        out = out.replacen(&format!("{{{p}}}"), v, 1);
    }
    Ok(out.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Renders `frame` with template number `index` of its intent.
pub fn realize_with(
    frame: &SemanticFrame,
    index: usize,
    templates: &TemplateSet,
    lexicon: &Lexicon,
    ontology: &Ontology,
) -> Result<String> {
    let list = templates.templates_for(frame.intent);
    let template = list.get(index).ok_or_else(|| {
        KrdsError::Language(format!(
            "no template {index} for {}",
            template_key(frame.intent)
        ))
    })?;
    let symptom_surface = |id: &str| {
        ontology
            .symptom_index(id)
            .map(|i| lexicon.symptom_surface(i))
            .ok_or_else(|| KrdsError::Language(format!("unknown symptom {id:?}")))
    };

    let symptom = match frame.slots.len() {
        1 => Some(symptom_surface(
            frame.slots.keys().next().expect("one slot"),
        )?),
        _ => None,
    };
    let disease = match &frame.disease {
        Some(d) => Some(
            ontology
                .disease_index(d)
                .map(|i| lexicon.disease_surface(i))
                .ok_or_else(|| KrdsError::Language(format!("unknown disease {d:?}")))?,
        ),
        None => None,
    };
    let mut sentences = Vec::new();
    for (id, &status) in &frame.slots {
        let t = &templates.templates[slot_key(status)][0];
        sentences.push(fill(t, &[("symptom", Some(symptom_surface(id)?))])?);
    }
    let symptoms = sentences.join(" ");
    fill(
        template,
        &[
            ("symptom", symptom),
            ("disease", disease),
            ("symptoms", Some(&symptoms)),
        ],
    )
}

/// Uniform template choice.
pub fn realize<R: Rng + ?Sized>(
    frame: &SemanticFrame,
    templates: &TemplateSet,
    lexicon: &Lexicon,
    ontology: &Ontology,
    rng: &mut R,
) -> Result<String> {
    let n = templates.templates_for(frame.intent).len();
    if n == 0 {
        return Err(KrdsError::Language(format!(
            "no templates for {}",
            template_key(frame.intent)
        )));
    }
    realize_with(frame, rng.gen_range(0..n), templates, lexicon, ontology)
}
