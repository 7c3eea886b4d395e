//! Lexicon file format, compilation against an ontology, and clause-level
//! text analysis shared by the parser and the generator.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dialogue::SlotStatus;
use crate::error::{KrdsError, Result};
use crate::ontology::Ontology;

pub(crate) const DEMO_LEXICON: &str = include_str!("../../assets/demo_lexicon.json");

fn default_conjunctions() -> Vec<String> {
    ["and", "but", "or", "nor", "yet", "so"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// On-disk lexicon. Surface forms are matched case-insensitively; the first
/// surface of each entry is its canonical rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconFile {
    pub symptoms: BTreeMap<String, Vec<String>>,
    pub diseases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub negation: Vec<String>,
    #[serde(default)]
    pub uncertain: Vec<String>,
    #[serde(default = "default_conjunctions")]
    pub conjunctions: Vec<String>,
    #[serde(default)]
    pub intents: BTreeMap<String, Vec<String>>,
}

impl LexiconFile {
    pub fn demo() -> Self {
        serde_json::from_str(DEMO_LEXICON).expect("bundled lexicon parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| KrdsError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| KrdsError::Parse(format!("lexicon: {e}")))
    }

    /// The demo cue lists with entries restricted to `ontology`; identifiers
    /// the demo does not know get their identifier (underscores as spaces) as
    /// the only surface form.
    pub fn demo_for(ontology: &Ontology) -> Self {
        let demo = Self::demo();
        let pick = |ids: &[String], known: &BTreeMap<String, Vec<String>>| {
            ids.iter()
                .map(|id| {
                    let surfaces = known
                        .get(id)
                        .cloned()
                        .unwrap_or_else(|| vec![id.replace('_', " ")]);
                    (id.clone(), surfaces)
                })
                .collect()
        };
        LexiconFile {
            symptoms: pick(ontology.symptoms(), &demo.symptoms),
            diseases: pick(ontology.diseases(), &demo.diseases),
            ..demo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Entity {
    Symptom(usize),
    Disease(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Item {
    Word(String),
    Entity(Entity),
}

type Phrase = Vec<String>;

#[derive(Debug, Clone)]
pub struct Lexicon {
    /// First token → candidate phrases, longest first.
    entities: HashMap<String, Vec<(Phrase, Entity)>>,
    symptom_surface: Vec<String>,
    disease_surface: Vec<String>,
    negation: Vec<Phrase>,
    uncertain: Vec<Phrase>,
    conjunctions: Vec<String>,
    intents: HashMap<String, Vec<Phrase>>,
}

pub(crate) const INTENT_KEYS: [&str; 6] = [
    "request_disease",
    "closing",
    "confirm_symptom",
    "deny_symptom",
    "agent_thanks",
    "agent_closing",
];

/// Lowercased tokens with clause breaks (`None`) at punctuation.
fn raw_tokens(text: &str) -> Vec<Option<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<Option<String>>| {
        if !cur.is_empty() {
            out.push(Some(std::mem::take(cur)));
        }
    };
    for ch in text.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || matches!(ch, '\'' | '-' | '_') {
            cur.extend(ch.to_lowercase());
        } else if matches!(ch, ',' | '.' | ';' | ':' | '!' | '?') {
            flush(&mut cur, &mut out);
            out.push(None);
        } else {
            flush(&mut cur, &mut out);
        }
    }
    flush(&mut cur, &mut out);
    out
}

fn phrase_of(text: &str) -> Result<Phrase> {
    let raw = raw_tokens(text);
    if raw.iter().any(Option::is_none) {
        return Err(KrdsError::Language(format!(
            "phrase {text:?} contains punctuation"
        )));
    }
    let p: Phrase = raw.into_iter().flatten().collect();
    if p.is_empty() {
        return Err(KrdsError::Language("empty phrase".into()));
    }
    Ok(p)
}

fn phrases(list: &[String]) -> Result<Vec<Phrase>> {
    list.iter().map(|s| phrase_of(s)).collect()
}

fn find_phrase(items: &[Item], phrase: &[String]) -> bool {
    items.windows(phrase.len()).any(|w| {
        w.iter()
            .zip(phrase)
            .all(|(it, p)| matches!(it, Item::Word(t) if t == p))
    })
}

impl Lexicon {
    pub fn compile(file: &LexiconFile, ontology: &Ontology) -> Result<Self> {
        let conjunctions: Vec<String> =
            file.conjunctions.iter().map(|c| c.to_lowercase()).collect();
        let mut entities: HashMap<String, Vec<(Phrase, Entity)>> = HashMap::new();
        let mut seen: HashMap<Phrase, Entity> = HashMap::new();

        let mut add = |surfaces: &[String], entity: Entity, id: &str| -> Result<()> {
            if surfaces.is_empty() {
                return Err(KrdsError::Language(format!("{id:?} has no surface form")));
            }
            for s in surfaces {
                let p = phrase_of(s)?;
                if let Some(c) = p.iter().find(|t| conjunctions.contains(t)) {
                    return Err(KrdsError::Language(format!(
                        "surface {s:?} of {id:?} contains clause break {c:?}"
                    )));
                }
                match seen.get(&p) {
                    Some(&other) if other != entity => {
                        return Err(KrdsError::Language(format!(
                            "surface {s:?} is ambiguous between two entries"
                        )))
                    }
                    Some(_) => continue,
                    None => {
                        seen.insert(p.clone(), entity);
                    }
                }
                entities.entry(p[0].clone()).or_default().push((p, entity));
            }
            Ok(())
        };

        for (id, surfaces) in &file.symptoms {
            let i = ontology.symptom_index(id).ok_or_else(|| {
                KrdsError::Language(format!("lexicon symptom {id:?} not in ontology"))
            })?;
            add(surfaces, Entity::Symptom(i), id)?;
        }
        for (id, surfaces) in &file.diseases {
            let i = ontology.disease_index(id).ok_or_else(|| {
                KrdsError::Language(format!("lexicon disease {id:?} not in ontology"))
            })?;
            add(surfaces, Entity::Disease(i), id)?;
        }
        for list in entities.values_mut() {
            list.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        }

        let surface = |ids: &[String], map: &BTreeMap<String, Vec<String>>, what: &str| {
            ids.iter()
                .map(|id| {
                    map.get(id).and_then(|v| v.first()).cloned().ok_or_else(|| {
                        KrdsError::Language(format!("no surface form for {what} {id:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()
        };
        let symptom_surface = surface(ontology.symptoms(), &file.symptoms, "symptom")?;
        let disease_surface = surface(ontology.diseases(), &file.diseases, "disease")?;

        let mut intents = HashMap::new();
        for (k, v) in &file.intents {
            if !INTENT_KEYS.contains(&k.as_str()) {
                return Err(KrdsError::Language(format!(
                    "unknown intent trigger key {k:?}"
                )));
            }
            intents.insert(k.clone(), phrases(v)?);
        }
        Ok(Lexicon {
            entities,
            symptom_surface,
            disease_surface,
            negation: phrases(&file.negation)?,
            uncertain: phrases(&file.uncertain)?,
            conjunctions,
            intents,
        })
    }

    pub fn symptom_surface(&self, symptom: usize) -> &str {
        &self.symptom_surface[symptom]
    }

    pub fn disease_surface(&self, disease: usize) -> &str {
        &self.disease_surface[disease]
    }

    /// Splits into clauses and replaces the longest lexicon matches with
    /// entities.
    pub(crate) fn analyze(&self, text: &str) -> Vec<Vec<Item>> {
        let mut clauses = Vec::new();
        let mut words: Vec<String> = Vec::new();
        let close = |words: &mut Vec<String>, clauses: &mut Vec<Vec<Item>>| {
            if !words.is_empty() {
                clauses.push(self.match_entities(words));
                words.clear();
            }
        };
        for tok in raw_tokens(text) {
            match tok {
                Some(t) if self.conjunctions.contains(&t) => close(&mut words, &mut clauses),
                Some(t) => words.push(t),
                None => close(&mut words, &mut clauses),
            }
        }
        close(&mut words, &mut clauses);
        clauses
    }

    fn match_entities(&self, words: &[String]) -> Vec<Item> {
        let mut items = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let hit = self.entities.get(&words[i]).and_then(|cands| {
                cands
                    .iter()
                    .find(|(p, _)| words[i..].starts_with(p))
                    .map(|(p, e)| (p.len(), *e))
            });
            match hit {
                Some((len, e)) => {
                    items.push(Item::Entity(e));
                    i += len;
                }
                None => {
                    items.push(Item::Word(words[i].clone()));
                    i += 1;
                }
            }
        }
        items
    }

    fn has_any(items: &[Item], list: &[Phrase]) -> bool {
        list.iter().any(|p| find_phrase(items, p))
    }

    pub(crate) fn has_intent(&self, clauses: &[Vec<Item>], key: &str) -> bool {
        self.intents
            .get(key)
            .is_some_and(|list| clauses.iter().any(|c| Self::has_any(c, list)))
    }

    /// Status a clause assigns to the symptoms it mentions.
    pub(crate) fn clause_status(&self, items: &[Item]) -> SlotStatus {
        if Self::has_any(items, &self.uncertain) {
            SlotStatus::NotSure
        } else if Self::has_any(items, &self.negation) {
            SlotStatus::False
        } else {
            SlotStatus::True
        }
    }

    /// Bare answer polarity ("yes", "no", "not sure"), if the clause has one.
    pub(crate) fn clause_polarity(&self, items: &[Item]) -> Option<SlotStatus> {
        let listed = |key: &str| {
            self.intents
                .get(key)
                .is_some_and(|l| Self::has_any(items, l))
        };
        if Self::has_any(items, &self.uncertain) {
            Some(SlotStatus::NotSure)
        } else if Self::has_any(items, &self.negation) || listed("deny_symptom") {
            Some(SlotStatus::False)
        } else if listed("confirm_symptom") {
            Some(SlotStatus::True)
        } else {
            None
        }
    }
}
