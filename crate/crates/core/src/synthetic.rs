//! Generated corpus with a separable disease/symptom structure: every disease
//! owns a disjoint block of symptoms, all of which are implicit in its goals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KrdsError, Result};
use crate::ontology::{Dataset, Ontology, UserGoal};
use crate::trainer::seeded_rng;

const DEMO_BLOCKS: [(&str, [&str; 3]); 4] = [
    (
        "infantile_diarrhea",
        ["watery_stool", "dehydration", "frequent_stools"],
    ),
    ("dyspepsia", ["vomiting", "bloating", "anorexia"]),
    (
        "upper_respiratory_infection",
        ["runny_nose", "sneezing", "sore_throat"],
    ),
    ("bronchitis", ["cough", "sputum", "wheezing"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub diseases: usize,
    pub symptoms_per_disease: usize,
    pub train_goals: usize,
    pub test_goals: usize,
    /// Probability that each of the disease's symptoms is present.
    pub p_present: f64,
    /// Probability that one present symptom is disclosed up front.
    pub p_explicit: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            diseases: 4,
            symptoms_per_disease: 3,
            train_goals: 200,
            test_goals: 200,
            p_present: 1.0,
            p_explicit: 0.3,
            seed: 7,
        }
    }
}

/// Disease `d` owns symptoms `d·k .. (d+1)·k`. The 4 × 3 shape reuses the
/// names of the bundled English lexicon.
pub fn synthetic_ontology(diseases: usize, per_disease: usize) -> Result<Ontology> {
    if diseases == 0 || per_disease == 0 {
        return Err(KrdsError::Config(
            "synthetic ontology needs diseases and symptoms".into(),
        ));
    }
    if diseases == 4 && per_disease == 3 {
        return Ontology::new(
            DEMO_BLOCKS.iter().map(|(d, _)| d.to_string()).collect(),
            DEMO_BLOCKS
                .iter()
                .flat_map(|(_, s)| s.iter().map(|x| x.to_string()))
                .collect(),
        );
    }
    Ontology::new(
        (0..diseases).map(|d| format!("disease_{d}")).collect(),
        (0..diseases * per_disease)
            .map(|s| format!("symptom_{s}"))
            .collect(),
    )
}

fn sample_goal<R: Rng>(o: &Ontology, config: &SyntheticConfig, rng: &mut R) -> UserGoal {
    let k = config.symptoms_per_disease;
    let d = rng.gen_range(0..o.num_diseases());
    let block = &o.symptoms()[d * k..(d + 1) * k];
    let mut implicit: Vec<(String, bool)> = block
        .iter()
        .map(|s| (s.clone(), rng.gen::<f64>() < config.p_present))
        .collect();
    let mut explicit = Vec::new();
    if rng.gen::<f64>() < config.p_explicit {
        let present: Vec<usize> = (0..implicit.len()).filter(|&i| implicit[i].1).collect();
        if !present.is_empty() {
            let i = present[rng.gen_range(0..present.len())];
            explicit.push(implicit.remove(i));
        }
    }
    UserGoal::new(o.diseases()[d].clone(), explicit, implicit)
}

pub fn generate(config: &SyntheticConfig) -> Result<(Ontology, Dataset)> {
    let o = synthetic_ontology(config.diseases, config.symptoms_per_disease)?;
    let ok = |p: f64| (0.0..=1.0).contains(&p);
    if !ok(config.p_present) || !ok(config.p_explicit) {
        return Err(KrdsError::Config(
            "synthetic probabilities must lie in [0, 1]".into(),
        ));
    }
    let mut rng = seeded_rng(config.seed, 0);
    let train = (0..config.train_goals)
        .map(|_| sample_goal(&o, config, &mut rng))
        .collect();
    let test = (0..config.test_goals)
        .map(|_| sample_goal(&o, config, &mut rng))
        .collect();
    let data = Dataset { train, test };
    data.validate(&o)?;
    Ok((o, data))
}
