#![allow(dead_code, clippy::needless_range_loop)]

use krds_core::linalg::Matrix;
use krds_core::ontology::Dataset;
use krds_core::ontology::{Ontology, UserGoal};
use krds_core::policy::{BranchFlags, KnowledgeBranch, QNetworkParams};
use krds_core::synthetic::{generate, SyntheticConfig};
use rand::Rng;

pub fn ids(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn goal(disease: &str, implicit: &[(&str, bool)]) -> UserGoal {
    UserGoal::new(
        disease,
        Vec::new(),
        implicit
            .iter()
            .map(|(s, v)| (s.to_string(), *v))
            .collect::<Vec<_>>(),
    )
}

/// Two diseases, three symptoms, three goals.
pub fn toy_corpus() -> (Ontology, Vec<UserGoal>) {
    let o = Ontology::new(ids(&["d1", "d2"]), ids(&["s1", "s2", "s3"])).unwrap();
    let train = vec![
        goal("d1", &[("s1", true), ("s2", true)]),
        goal("d1", &[("s1", true)]),
        goal("d2", &[("s2", true), ("s3", true)]),
    ];
    (o, train)
}

pub fn synthetic() -> (Ontology, Dataset) {
    generate(&SyntheticConfig::default()).unwrap()
}

/// Plain nested loops over explicit indices.
pub fn naive_knowledge(symptoms: &[f64], kb: &KnowledgeBranch) -> Vec<f64> {
    let m = kb.p_dis_given_sym.rows();
    let n = kb.num_symptoms();
    let mut routed = vec![0.0; n];
    for s in 0..n {
        routed[s] = match symptoms[s] as i64 {
            1 => 1.0,
            -1 => -1.0,
            _ => kb.p_sym_prior[s],
        };
    }
    let mut p_dis = vec![0.0; m];
    for d in 0..m {
        for s in 0..n {
            p_dis[d] += kb.p_dis_given_sym.get(d, s) * routed[s];
        }
    }
    let mut p_sym = vec![0.0; n];
    for s in 0..n {
        for d in 0..m {
            p_sym[s] += kb.p_sym_given_dis.get(s, d) * p_dis[d];
        }
    }
    let mut out = vec![0.0; kb.greetings];
    out.extend(p_dis);
    out.extend(p_sym);
    out
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix {
    Matrix::from_row_major(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
    )
}

pub fn random_params<R: Rng>(s: usize, h: usize, d: usize, rng: &mut R) -> QNetworkParams {
    QNetworkParams {
        w1: random_matrix(h, s, 1.0, rng),
        b1: (0..h).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        w2: random_matrix(d, h, 1.0, rng),
        b2: (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect(),
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fused Q of one action, written out term by term.
pub fn naive_q(
    p: &QNetworkParams,
    r: &Matrix,
    flags: BranchFlags,
    s: &[f64],
    a: usize,
    k: f64,
) -> f64 {
    let (h, d) = (p.b1.len(), p.b2.len());
    let mut hidden = vec![0.0; h];
    for j in 0..h {
        let mut z = p.b1[j];
        for i in 0..s.len() {
            z += p.w1.get(j, i) * s[i];
        }
        hidden[j] = if z > 0.0 { z } else { 0.0 };
    }
    let mut a_r = vec![0.0; d];
    for i in 0..d {
        let mut z = p.b2[i];
        for j in 0..h {
            z += p.w2.get(i, j) * hidden[j];
        }
        a_r[i] = z;
    }
    let mut q = if flags.sigmoid_basic {
        logistic(a_r[a])
    } else {
        a_r[a]
    };
    if flags.relation {
        let mut a_f = 0.0;
        for i in 0..d {
            a_f += a_r[i] * r.get(i, a);
        }
        q += logistic(a_f);
    }
    if flags.knowledge {
        q += k;
    }
    q
}

pub struct Example {
    pub s: Vec<f64>,
    pub a: usize,
    pub y: f64,
    pub k: f64,
}

/// Mean squared error over the batch.
pub fn naive_loss(p: &QNetworkParams, r: &Matrix, flags: BranchFlags, batch: &[Example]) -> f64 {
    let mut total = 0.0;
    for e in batch {
        let q = naive_q(p, r, flags, &e.s, e.a, e.k);
        total += (q - e.y) * (q - e.y);
    }
    total / batch.len() as f64
}
