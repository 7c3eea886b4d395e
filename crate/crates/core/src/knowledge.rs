//! Dataset-derived conditional probabilities: the frozen knowledge-graph
//! weights and the initializer for the learnable relation matrix.

use serde::{Deserialize, Serialize};

use crate::error::{KrdsError, Result};
use crate::linalg::Matrix;
use crate::ontology::{Ontology, UserGoal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeStats {
    /// M×N, entry (d, s) = P(d | s).
    pub p_dis_given_sym: Matrix,
    /// N×M, entry (s, d) = P(s | d).
    pub p_sym_given_dis: Matrix,
    /// Length N, fraction of goals in which the symptom is present.
    pub p_sym_prior: Vec<f64>,
    /// D×D, column-stochastic.
    pub relation_init: Matrix,
}

/// Raw co-occurrence counts over the positive symptoms of each goal.
#[derive(Debug, Clone)]
struct Counts {
    goals: usize,
    symptom: Vec<u64>,
    disease: Vec<u64>,
    /// M×N
    disease_symptom: Vec<Vec<u64>>,
    /// N×N
    symptom_symptom: Vec<Vec<u64>>,
}

fn count(train: &[UserGoal], ontology: &Ontology) -> Result<Counts> {
    let (m, n) = (ontology.num_diseases(), ontology.num_symptoms());
    let mut c = Counts {
        goals: train.len(),
        symptom: vec![0; n],
        disease: vec![0; m],
        disease_symptom: vec![vec![0; n]; m],
        symptom_symptom: vec![vec![0; n]; n],
    };
    for (i, goal) in train.iter().enumerate() {
        let d = ontology.disease_index(&goal.disease_tag).ok_or_else(|| {
            KrdsError::validation(format!("train[{i}].disease_tag"), "unknown disease")
        })?;
        let mut present = Vec::new();
        for s in goal.positive_symptoms() {
            let idx = ontology.symptom_index(s).ok_or_else(|| {
                KrdsError::validation(format!("train[{i}]"), format!("unknown symptom {s:?}"))
            })?;
            present.push(idx);
        }
        present.sort_unstable();
        present.dedup();

        c.disease[d] += 1;
        for &s in &present {
            c.symptom[s] += 1;
            c.disease_symptom[d][s] += 1;
            for &t in &present {
                c.symptom_symptom[s][t] += 1;
            }
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Conditional probabilities estimated from the training goals. Only
/// symptoms marked `true` count as present.
pub fn compute_knowledge_stats(train: &[UserGoal], ontology: &Ontology) -> Result<KnowledgeStats> {
    if train.is_empty() {
        return Err(KrdsError::validation("train", "empty goal list"));
    }
    let c = count(train, ontology)?;
    let (m, n) = (ontology.num_diseases(), ontology.num_symptoms());

    let mut p_dis_given_sym = Matrix::zeros(m, n);
    let mut p_sym_given_dis = Matrix::zeros(n, m);
    for d in 0..m {
        for s in 0..n {
            let joint = c.disease_symptom[d][s];
            p_dis_given_sym.set(d, s, ratio(joint, c.symptom[s]));
            p_sym_given_dis.set(s, d, ratio(joint, c.disease[d]));
        }
    }
    let p_sym_prior = c
        .symptom
        .iter()
        .map(|&k| ratio(k, c.goals as u64))
        .collect();

    let mut relation_init = relation_cooccurrence(&c, ontology);
    normalize_columns(&mut relation_init);

    Ok(KnowledgeStats {
        p_dis_given_sym,
        p_sym_given_dis,
        p_sym_prior,
        relation_init,
    })
}

/// Relation matrix before column normalization: entry (i, j) is
/// P(unit j | unit i) over goal co-occurrence.
pub fn relation_cooccurrence_matrix(train: &[UserGoal], ontology: &Ontology) -> Result<Matrix> {
    Ok(relation_cooccurrence(&count(train, ontology)?, ontology))
}

fn relation_cooccurrence(c: &Counts, ontology: &Ontology) -> Matrix {
    let g = ontology.num_greetings();
    let (m, n) = (ontology.num_diseases(), ontology.num_symptoms());
    let dis = |d: usize| g + d;
    let sym = |s: usize| g + m + s;
    let mut r = Matrix::zeros(ontology.action_count(), ontology.action_count());

    for i in 0..g {
        r.set(i, i, 1.0);
    }
    // A goal carries exactly one disease.
    for d in 0..m {
        r.set(dis(d), dis(d), 1.0);
    }
    for s in 0..n {
        for t in 0..n {
            r.set(sym(s), sym(t), ratio(c.symptom_symptom[s][t], c.symptom[s]));
        }
        for d in 0..m {
            r.set(sym(s), dis(d), ratio(c.disease_symptom[d][s], c.symptom[s]));
        }
    }
    for d in 0..m {
        for s in 0..n {
            r.set(dis(d), sym(s), ratio(c.disease_symptom[d][s], c.disease[d]));
        }
    }
    r
}

/// Rescales every column to sum to one; all-zero columns become uniform.
pub fn normalize_columns(r: &mut Matrix) {
    let rows = r.rows();
    for j in 0..r.cols() {
        let sum = r.col_sum(j);
        if sum > 0.0 {
            for i in 0..rows {
                r.set(i, j, r.get(i, j) / sum);
            }
        } else {
            for i in 0..rows {
                r.set(i, j, 1.0 / rows as f64);
            }
        }
    }
}

/// Column-stochastic relation matrix built from training co-occurrence.
pub fn build_relation_init(train: &[UserGoal], ontology: &Ontology) -> Result<Matrix> {
    let mut r = relation_cooccurrence_matrix(train, ontology)?;
    normalize_columns(&mut r);
    Ok(r)
}

pub fn max_column_deviation(r: &Matrix) -> f64 {
    (0..r.cols())
        .map(|j| (r.col_sum(j) - 1.0).abs())
        .fold(0.0, f64::max)
}
