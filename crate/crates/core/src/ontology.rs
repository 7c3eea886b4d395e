//! Disease/symptom universe, user goals, and the goal-file format.
//!
//! The action index layout is fixed by the ontology: greetings first, then
//! diseases, then symptoms. Everything that indexes actions (policy outputs,
//! the relation matrix, state encodings) goes through the helpers here.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KrdsError, Result};

pub const GOAL_FILE_VERSION: u32 = 1;
pub const DISEASE_SLOT: &str = "disease";

fn default_greetings() -> Vec<String> {
    vec!["thanks".to_string(), "closing".to_string()]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OntologyRepr {
    diseases: Vec<String>,
    symptoms: Vec<String>,
    #[serde(default = "default_greetings")]
    greeting_actions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "OntologyRepr", into = "OntologyRepr")]
pub struct Ontology {
    diseases: Vec<String>,
    symptoms: Vec<String>,
    greetings: Vec<String>,
    disease_index: HashMap<String, usize>,
    symptom_index: HashMap<String, usize>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.diseases == other.diseases
            && self.symptoms == other.symptoms
            && self.greetings == other.greetings
    }
}

impl Eq for Ontology {}

impl TryFrom<OntologyRepr> for Ontology {
    type Error = KrdsError;

    fn try_from(r: OntologyRepr) -> Result<Self> {
        Ontology::with_greetings(r.greeting_actions, r.diseases, r.symptoms)
    }
}

impl From<Ontology> for OntologyRepr {
    fn from(o: Ontology) -> Self {
        OntologyRepr {
            diseases: o.diseases,
            symptoms: o.symptoms,
            greeting_actions: o.greetings,
        }
    }
}

impl Ontology {
    pub fn new(diseases: Vec<String>, symptoms: Vec<String>) -> Result<Self> {
        Self::with_greetings(default_greetings(), diseases, symptoms)
    }

    pub fn with_greetings(
        greetings: Vec<String>,
        diseases: Vec<String>,
        symptoms: Vec<String>,
    ) -> Result<Self> {
        if diseases.is_empty() {
            return Err(KrdsError::validation("ontology", "no diseases"));
        }
        if symptoms.is_empty() {
            return Err(KrdsError::validation("ontology", "no symptoms"));
        }
        let mut seen = HashSet::new();
        for id in greetings.iter().chain(&diseases).chain(&symptoms) {
            if id.is_empty() {
                return Err(KrdsError::validation("ontology", "empty identifier"));
            }
            if !seen.insert(id.as_str()) {
                return Err(KrdsError::validation(
                    "ontology",
                    format!("duplicate identifier {id:?}"),
                ));
            }
        }
        let disease_index = diseases
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i))
            .collect();
        let symptom_index = symptoms
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Ontology {
            diseases,
            symptoms,
            greetings,
            disease_index,
            symptom_index,
        })
    }

    pub fn diseases(&self) -> &[String] {
        &self.diseases
    }

    pub fn symptoms(&self) -> &[String] {
        &self.symptoms
    }

    pub fn greetings(&self) -> &[String] {
        &self.greetings
    }

    pub fn num_diseases(&self) -> usize {
        self.diseases.len()
    }

    pub fn num_symptoms(&self) -> usize {
        self.symptoms.len()
    }

    pub fn num_greetings(&self) -> usize {
        self.greetings.len()
    }

    /// D = G + M + N.
    pub fn action_count(&self) -> usize {
        self.greetings.len() + self.diseases.len() + self.symptoms.len()
    }

    pub fn disease_index(&self, id: &str) -> Option<usize> {
        self.disease_index.get(id).copied()
    }

    pub fn symptom_index(&self, id: &str) -> Option<usize> {
        self.symptom_index.get(id).copied()
    }

    pub fn greeting_index(&self, id: &str) -> Option<usize> {
        self.greetings.iter().position(|g| g == id)
    }

    pub fn disease_action(&self, disease: usize) -> usize {
        self.greetings.len() + disease
    }

    pub fn symptom_action(&self, symptom: usize) -> usize {
        self.greetings.len() + self.diseases.len() + symptom
    }

    /// Stable content hash over the canonical action layout.
    pub fn hash(&self) -> String {
        let repr = OntologyRepr::from(self.clone());
        let canonical = serde_json::to_vec(&repr).expect("ontology serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGoal {
    pub disease_tag: String,
    #[serde(default)]
    pub explicit_inform_slots: BTreeMap<String, bool>,
    #[serde(default)]
    pub implicit_inform_slots: BTreeMap<String, bool>,
    #[serde(default = "default_request_slots")]
    pub request_slots: BTreeMap<String, bool>,
    #[serde(default)]
    pub self_report: Option<String>,
}

fn default_request_slots() -> BTreeMap<String, bool> {
    BTreeMap::from([(DISEASE_SLOT.to_string(), true)])
}

impl UserGoal {
    pub fn new(
        disease_tag: impl Into<String>,
        explicit: impl IntoIterator<Item = (String, bool)>,
        implicit: impl IntoIterator<Item = (String, bool)>,
    ) -> Self {
        UserGoal {
            disease_tag: disease_tag.into(),
            explicit_inform_slots: explicit.into_iter().collect(),
            implicit_inform_slots: implicit.into_iter().collect(),
            request_slots: default_request_slots(),
            self_report: None,
        }
    }

    pub fn validate(&self, ontology: &Ontology, location: &str) -> Result<()> {
        if ontology.disease_index(&self.disease_tag).is_none() {
            return Err(KrdsError::validation(
                format!("{location}.disease_tag"),
                format!("unknown disease {:?}", self.disease_tag),
            ));
        }
        for (field, slots) in [
            ("explicit_inform_slots", &self.explicit_inform_slots),
            ("implicit_inform_slots", &self.implicit_inform_slots),
        ] {
            if let Some(bad) = slots.keys().find(|s| ontology.symptom_index(s).is_none()) {
                return Err(KrdsError::validation(
                    format!("{location}.{field}"),
                    format!("unknown symptom {bad:?}"),
                ));
            }
        }
        if let Some(dup) = self
            .explicit_inform_slots
            .keys()
            .find(|s| self.implicit_inform_slots.contains_key(*s))
        {
            return Err(KrdsError::validation(
                location,
                format!("symptom {dup:?} is both explicit and implicit"),
            ));
        }
        if !self.request_slots.contains_key(DISEASE_SLOT) {
            return Err(KrdsError::validation(
                format!("{location}.request_slots"),
                "missing \"disease\" request slot",
            ));
        }
        Ok(())
    }

    /// Symptoms whose truth value is `true`, explicit or implicit.
    pub fn positive_symptoms(&self) -> impl Iterator<Item = &str> {
        self.explicit_inform_slots
            .iter()
            .chain(&self.implicit_inform_slots)
            .filter(|(_, &v)| v)
            .map(|(k, _)| k.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<UserGoal>,
    pub test: Vec<UserGoal>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GoalFile {
    format_version: u32,
    ontology: Ontology,
    train: Vec<UserGoal>,
    test: Vec<UserGoal>,
}

impl Dataset {
    pub fn validate(&self, ontology: &Ontology) -> Result<()> {
        if self.train.is_empty() {
            return Err(KrdsError::validation("train", "empty goal list"));
        }
        if self.test.is_empty() {
            return Err(KrdsError::validation("test", "empty goal list"));
        }
        for (split, goals) in [("train", &self.train), ("test", &self.test)] {
            for (i, g) in goals.iter().enumerate() {
                g.validate(ontology, &format!("{split}[{i}]"))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self, ontology: &Ontology) -> String {
        let file = GoalFile {
            format_version: GOAL_FILE_VERSION,
            ontology: ontology.clone(),
            train: self.train.clone(),
            test: self.test.clone(),
        };
        serde_json::to_string_pretty(&file).expect("goal file serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>, ontology: &Ontology) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json(ontology)).map_err(|e| KrdsError::io(path, e))
    }
}

/// Parses a goal file, returning its embedded ontology and the validated splits.
pub fn parse_goal_file(text: &str) -> Result<(Ontology, Dataset)> {
    let file: GoalFile =
        serde_json::from_str(text).map_err(|e| KrdsError::Parse(format!("goal file: {e}")))?;
    if file.format_version != GOAL_FILE_VERSION {
        return Err(KrdsError::FormatVersion(file.format_version));
    }
    let dataset = Dataset {
        train: file.train,
        test: file.test,
    };
    dataset.validate(&file.ontology)?;
    Ok((file.ontology, dataset))
}

pub fn load_goal_file(path: impl AsRef<Path>) -> Result<(Ontology, Dataset)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| KrdsError::io(path, e))?;
    parse_goal_file(&text)
}

/// Loads a goal file and checks it against an already-fixed ontology.
pub fn load_dataset(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Dataset> {
    let (file_ontology, dataset) = load_goal_file(path)?;
    if &file_ontology != ontology {
        return Err(KrdsError::OntologyMismatch {
            expected: ontology.hash(),
            found: file_ontology.hash(),
        });
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn toy() -> Ontology {
        Ontology::new(ids(&["d1", "d2"]), ids(&["s1", "s2", "s3"])).unwrap()
    }

    #[test]
    fn action_layout_is_greetings_diseases_symptoms() {
        let o = toy();
        assert_eq!(o.action_count(), 7);
        assert_eq!(o.disease_action(0), 2);
        assert_eq!(o.symptom_action(0), 4);
        assert_eq!(o.symptom_action(2), 6);
    }

    #[test]
    fn duplicate_identifiers_rejected() {
        assert!(Ontology::new(ids(&["x"]), ids(&["x"])).is_err());
        assert!(Ontology::new(ids(&["d", "d"]), ids(&["s"])).is_err());
        assert!(Ontology::new(ids(&["thanks"]), ids(&["s"])).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = toy();
        let b = Ontology::new(ids(&["d1", "d2"]), ids(&["s1", "s2", "s4"])).unwrap();
        assert_eq!(a.hash(), toy().hash());
        assert_ne!(a.hash(), b.hash());
    }

    fn goal_json(symptom: &str) -> String {
        format!(
            r#"{{"format_version":1,
                "ontology":{{"diseases":["d1","d2"],"symptoms":["s1","s2","s3"]}},
                "train":[{{"disease_tag":"d1","explicit_inform_slots":{{"s1":true}},
                          "implicit_inform_slots":{{"{symptom}":false}},
                          "request_slots":{{"disease":true}},"self_report":null}}],
                "test":[{{"disease_tag":"d2","explicit_inform_slots":{{}},
                         "implicit_inform_slots":{{"s3":true}},
                         "request_slots":{{"disease":true}},"self_report":"hi"}}]}}"#
        )
    }

    #[test]
    fn parses_valid_goal_file() {
        let (o, d) = parse_goal_file(&goal_json("s2")).unwrap();
        assert_eq!(o, toy());
        assert_eq!(d.train.len(), 1);
        assert_eq!(d.test[0].self_report.as_deref(), Some("hi"));
    }

    #[test]
    fn unknown_symptom_is_named() {
        let err = parse_goal_file(&goal_json("xyz")).unwrap_err().to_string();
        assert!(err.contains("xyz"), "{err}");
        assert!(err.contains("train[0]"), "{err}");
    }

    #[test]
    fn empty_goal_list_rejected() {
        let text = r#"{"format_version":1,"ontology":{"diseases":["d"],"symptoms":["s"]},
                      "train":[],"test":[]}"#;
        assert!(matches!(
            parse_goal_file(text),
            Err(KrdsError::Validation { .. })
        ));
    }

    #[test]
    fn malformed_file_is_parse_error() {
        assert!(matches!(
            parse_goal_file("{not json"),
            Err(KrdsError::Parse(_))
        ));
    }

    #[test]
    fn overlapping_explicit_implicit_rejected() {
        let o = toy();
        let g = UserGoal::new(
            "d1",
            [("s1".to_string(), true)],
            [("s1".to_string(), false)],
        );
        assert!(g.validate(&o, "g").is_err());
    }

    #[test]
    fn file_round_trip() {
        let (o, d) = parse_goal_file(&goal_json("s2")).unwrap();
        let (o2, d2) = parse_goal_file(&d.to_json(&o)).unwrap();
        assert_eq!(o, o2);
        assert_eq!(d, d2);
    }
}
