//! Component ablation: trains each branch combination and scores it on the
//! test split.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::language::LanguageLayer;
use crate::metrics::MetricsReport;
use crate::ontology::{Dataset, Ontology};
use crate::policy::{Ablation, RelationInit};
use crate::trainer::{evaluate, init_policy, train, EpochRecord, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub name: &'static str,
    pub ablation: Ablation,
    pub relation_init: RelationInit,
}

pub const VARIANTS: [Variant; 5] = [
    Variant {
        name: "Basic DQN",
        ablation: Ablation::Basic,
        relation_init: RelationInit::Prior,
    },
    Variant {
        name: "DQN + relation branch*",
        ablation: Ablation::Relation,
        relation_init: RelationInit::Random,
    },
    Variant {
        name: "DQN + relation branch",
        ablation: Ablation::Relation,
        relation_init: RelationInit::Prior,
    },
    Variant {
        name: "DQN + knowledge branch",
        ablation: Ablation::Knowledge,
        relation_init: RelationInit::Prior,
    },
    Variant {
        name: "KR-DS (full)",
        ablation: Ablation::Full,
        relation_init: RelationInit::Prior,
    },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub ablation: Ablation,
    pub relation_init: RelationInit,
    pub seed: u64,
    pub best_eval_success: f64,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl AblationReport {
    pub fn rows_for<'a>(&'a self, variant: &'a str) -> impl Iterator<Item = &'a AblationRow> {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    /// Test accuracy averaged over seeds.
    pub fn mean_accuracy(&self, variant: &str) -> f64 {
        mean(self.rows_for(variant).map(|r| r.test.accuracy))
    }

    /// One line per variant, seeds averaged, per-disease columns in ontology
    /// order.
    pub fn table(&self, ontology: &Ontology) -> String {
        let mut out = String::from("variant\tseeds");
        for d in ontology.diseases() {
            out.push('\t');
            out.push_str(d);
        }
        out.push_str("\toverall\tmatch_rate\tavg_turns\n");
        for v in VARIANTS {
            let rows: Vec<&AblationRow> = self.rows_for(v.name).collect();
            if rows.is_empty() {
                continue;
            }
            let _ = write!(out, "{}\t{}", v.name, rows.len());
            for d in ontology.diseases() {
                let acc = mean(
                    rows.iter()
                        .filter_map(|r| r.test.per_disease.get(d).copied()),
                );
                let _ = write!(out, "\t{acc:.3}");
            }
            let _ = writeln!(
                out,
                "\t{:.3}\t{:.3}\t{:.2}",
                mean(rows.iter().map(|r| r.test.accuracy)),
                mean(rows.iter().map(|r| r.test.match_rate)),
                mean(rows.iter().map(|r| r.test.avg_turns)),
            );
        }
        out
    }
}

/// Trains every variant for every seed from `base`, keeping all other
/// settings. Each run is scored with its best snapshot on one greedy episode
/// per test goal.
pub fn run_ablation(
    base: &TrainerConfig,
    ontology: &Ontology,
    data: &Dataset,
    seeds: &[u64],
    language: Option<&LanguageLayer>,
    progress: &mut dyn FnMut(&AblationRow),
) -> Result<AblationReport> {
    let mut rows = Vec::new();
    for &seed in seeds {
        for v in VARIANTS {
            let mut config = base.clone();
            config.seed = seed;
            config.policy.flags = v.ablation.flags();
            config.policy.relation_init = v.relation_init;
            let env = config.environment(ontology, language)?;
            let policy = init_policy(&config, ontology, &data.train)?;
            let outcome = train(
                &config,
                &data.train,
                policy,
                &env,
                &mut |_: &EpochRecord| {},
            )?;
            let test = evaluate(
                outcome.best_or_last(),
                &data.test,
                data.test.len(),
                &env,
                seed,
                &config.fingerprint(),
            )?;
            let row = AblationRow {
                variant: v.name.to_string(),
                ablation: v.ablation,
                relation_init: v.relation_init,
                seed,
                best_eval_success: outcome.report.best_success().unwrap_or(0.0),
                test,
            };
            progress(&row);
            rows.push(row);
        }
    }
    Ok(AblationReport { rows })
}
