//! Knowledge-routed relational Q-network.
//!
//! Three branches produce length-D action vectors:
//!
//! * basic: `a_r = W2 · relu(W1 · s + b1) + b2`
//! * relation: `a_f = a_r · R` with a learnable D×D matrix `R`
//! * knowledge: two-hop propagation symptoms → diseases → symptoms through
//!   frozen conditional probabilities, padded with zeros for greetings
//!
//! and are fused as `a_t = σ(a_r) + σ(a_f) + a_k`. The fused vector is used
//! directly as Q(s, ·). Branches can be switched off for ablations; with both
//! extra branches off and `sigmoid_basic` unset the model is a plain DQN over
//! unbounded `a_r`.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KrdsError, Result};
use crate::knowledge::{normalize_columns, KnowledgeStats};
use crate::linalg::{dot, Matrix};
use crate::ontology::Ontology;

pub const DEFAULT_HIDDEN: usize = 512;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetworkParams {
    /// H×S
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// D×H
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl QNetworkParams {
    pub fn zeros(state_dim: usize, hidden: usize, actions: usize) -> Self {
        QNetworkParams {
            w1: Matrix::zeros(hidden, state_dim),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(actions, hidden),
            b2: vec![0.0; actions],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: usize,
        actions: usize,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(state_dim, hidden, actions);
        for (m, fan_in, fan_out) in [(&mut p.w1, state_dim, hidden), (&mut p.w2, hidden, actions)] {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            for w in m.as_mut_slice() {
                *w = dist.sample(rng);
            }
        }
        p
    }

    pub fn state_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn actions(&self) -> usize {
        self.w2.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|x| x.is_finite())
    }
}

/// Frozen knowledge-graph weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBranch {
    /// M×N
    pub p_dis_given_sym: Matrix,
    /// N×M
    pub p_sym_given_dis: Matrix,
    pub p_sym_prior: Vec<f64>,
    pub greetings: usize,
}

impl KnowledgeBranch {
    pub fn from_stats(stats: &KnowledgeStats, ontology: &Ontology) -> Self {
        KnowledgeBranch {
            p_dis_given_sym: stats.p_dis_given_sym.clone(),
            p_sym_given_dis: stats.p_sym_given_dis.clone(),
            p_sym_prior: stats.p_sym_prior.clone(),
            greetings: ontology.num_greetings(),
        }
    }

    pub fn num_symptoms(&self) -> usize {
        self.p_sym_prior.len()
    }

    pub fn action_count(&self) -> usize {
        self.greetings + self.p_dis_given_sym.rows() + self.num_symptoms()
    }
}

pub fn forward_basic(state: &[f64], params: &QNetworkParams) -> Vec<f64> {
    assert_eq!(state.len(), params.state_dim(), "state has wrong dimension");
    let hidden: Vec<f64> = params
        .w1
        .mul_vec(state)
        .into_iter()
        .zip(&params.b1)
        .map(|(z, b)| (z + b).max(0.0))
        .collect();
    params
        .w2
        .mul_vec(&hidden)
        .into_iter()
        .zip(&params.b2)
        .map(|(z, b)| z + b)
        .collect()
}

/// `a_f[j] = Σ_i a_r[i] · R[i, j]`.
pub fn forward_relation(a_r: &[f64], relation: &Matrix) -> Vec<f64> {
    relation.vec_mul(a_r)
}

/// Symptom probabilities used to route through the graph: positives count as
/// 1, negatives as −1, and unmentioned or not-sure symptoms fall back to
/// their prior.
pub fn routed_symptom_prior(symptoms: &[f64], kb: &KnowledgeBranch) -> Vec<f64> {
    symptoms
        .iter()
        .zip(&kb.p_sym_prior)
        .map(|(&v, &prior)| {
            if v == 1.0 {
                1.0
            } else if v == -1.0 {
                -1.0
            } else {
                prior
            }
        })
        .collect()
}

/// Knowledge-routed action vector `[0; G] ‖ P(dis) ‖ P(sym)`. `symptoms` holds
/// the tracker values (1, −1, −2, 0) as floats.
pub fn forward_knowledge(symptoms: &[f64], kb: &KnowledgeBranch) -> Vec<f64> {
    assert_eq!(
        symptoms.len(),
        kb.num_symptoms(),
        "symptom vector has wrong length"
    );
    let prior = routed_symptom_prior(symptoms, kb);
    let p_dis = kb.p_dis_given_sym.mul_vec(&prior);
    let p_sym = kb.p_sym_given_dis.mul_vec(&p_dis);
    let mut out = vec![0.0; kb.greetings];
    out.extend(p_dis);
    out.extend(p_sym);
    out
}

pub fn combine(a_r: &[f64], a_f: &[f64], a_k: &[f64]) -> Vec<f64> {
    assert!(
        a_r.len() == a_f.len() && a_f.len() == a_k.len(),
        "branch lengths differ"
    );
    a_r.iter()
        .zip(a_f)
        .zip(a_k)
        .map(|((&r, &f), &k)| sigmoid(r) + sigmoid(f) + k)
        .collect()
}

/// Highest-valued allowed action, ties to the lowest index.
pub fn greedy_action(q: &[f64], allowed: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in q.iter().zip(allowed).enumerate() {
        if ok && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best.expect("at least one action is always allowed")
}

/// ε-greedy over the allowed actions.
pub fn select_action<R: Rng + ?Sized>(
    q: &[f64],
    allowed: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let candidates: Vec<usize> = (0..q.len()).filter(|&i| allowed[i]).collect();
        *candidates
            .choose(rng)
            .expect("at least one action is always allowed")
    } else {
        greedy_action(q, allowed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchFlags {
    pub relation: bool,
    pub knowledge: bool,
    /// Squash the basic branch through a sigmoid. Off only for the plain
    /// DQN baseline, which uses raw `a_r` as Q-values.
    pub sigmoid_basic: bool,
    /// Re-normalize the columns of R after every update.
    #[serde(default)]
    pub renormalize_relation: bool,
    /// Block requests for symptoms whose status is already known.
    #[serde(default = "enabled")]
    pub symptom_filter: bool,
}

fn enabled() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Basic,
    Relation,
    Knowledge,
    Full,
}

impl Ablation {
    pub fn flags(self) -> BranchFlags {
        let (relation, knowledge) = match self {
            Ablation::Basic => (false, false),
            Ablation::Relation => (true, false),
            Ablation::Knowledge => (false, true),
            Ablation::Full => (true, true),
        };
        BranchFlags {
            relation,
            knowledge,
            sigmoid_basic: self != Ablation::Basic,
            renormalize_relation: false,
            symptom_filter: self != Ablation::Basic,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "basic" => Some(Ablation::Basic),
            "relation" => Some(Ablation::Relation),
            "knowledge" => Some(Ablation::Knowledge),
            "full" => Some(Ablation::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationInit {
    /// Column-normalized co-occurrence statistics.
    Prior,
    /// Uniform random entries, column-normalized.
    Random,
}

impl RelationInit {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "prior" => Some(RelationInit::Prior),
            "random" => Some(RelationInit::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub a_r: Vec<f64>,
    pub a_f: Vec<f64>,
    pub a_k: Vec<f64>,
    pub a_t: Vec<f64>,
}

/// One regression example: Q(features, action) should move toward `target`.
#[derive(Debug, Clone)]
pub struct QTarget<'a> {
    pub features: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// Gradients with the same shapes as the learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: QNetworkParams,
    pub relation: Matrix,
}

/// Batch loss and gradients for explicit parameters. `a_k[i]` is the
/// knowledge value of item `i`'s action.
#[allow(clippy::needless_range_loop)]
pub fn fused_loss_and_gradients(
    p: &QNetworkParams,
    relation: &Matrix,
    flags: BranchFlags,
    batch: &[QTarget<'_>],
    a_k: &[f64],
) -> Result<(f64, Gradients)> {
    let (h, d) = (p.hidden(), p.actions());
    let mut g = Gradients {
        params: QNetworkParams::zeros(p.state_dim(), h, d),
        relation: Matrix::zeros(d, d),
    };
    if a_k.len() != batch.len() {
        return Err(KrdsError::Shape(
            "one knowledge value per batch item".into(),
        ));
    }
    if batch.is_empty() {
        return Ok((0.0, g));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut z1 = vec![0.0; h];
    let mut hid = vec![0.0; h];
    let mut a_r = vec![0.0; d];
    let mut da_r = vec![0.0; d];
    let mut dz1 = vec![0.0; h];

    for (index, item) in batch.iter().enumerate() {
        let s = item.features;
        let a = item.action;
        if s.len() != p.state_dim() || a >= d {
            return Err(KrdsError::Shape(format!(
                "batch item {index}: |s|={} action={a}",
                s.len()
            )));
        }
        for j in 0..h {
            z1[j] = dot(p.w1.row(j), s) + p.b1[j];
            hid[j] = z1[j].max(0.0);
        }
        for i in 0..d {
            a_r[i] = dot(p.w2.row(i), &hid) + p.b2[i];
        }
        let a_f = if flags.relation {
            (0..d).map(|i| a_r[i] * relation.get(i, a)).sum()
        } else {
            0.0
        };
        let k = if flags.knowledge { a_k[index] } else { 0.0 };
        let q = fuse(flags, a_r[a], a_f, k);
        let err = q - item.target;
        let item_loss = err * err;
        if !item_loss.is_finite() {
            return Err(KrdsError::NonFinite {
                loss: item_loss,
                index,
                action: a,
                target: item.target,
            });
        }
        loss += item_loss * scale;
        let dq = 2.0 * err * scale;

        da_r.iter_mut().for_each(|x| *x = 0.0);
        if flags.relation {
            let sf = sigmoid(a_f);
            let df = dq * sf * (1.0 - sf);
            for i in 0..d {
                da_r[i] = df * relation.get(i, a);
                let gr = g.relation.get(i, a) + df * a_r[i];
                g.relation.set(i, a, gr);
            }
        }
        da_r[a] += if flags.sigmoid_basic {
            let sr = sigmoid(a_r[a]);
            dq * sr * (1.0 - sr)
        } else {
            dq
        };

        dz1.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..d {
            let gi = da_r[i];
            if gi == 0.0 {
                continue;
            }
            g.params.b2[i] += gi;
            let w2_row = p.w2.row(i);
            for ((gw, &hv), (dz, &w)) in g
                .params
                .w2
                .row_mut(i)
                .iter_mut()
                .zip(&hid)
                .zip(dz1.iter_mut().zip(w2_row))
            {
                *gw += gi * hv;
                *dz += gi * w;
            }
        }
        for j in 0..h {
            if z1[j] <= 0.0 {
                continue;
            }
            let gj = dz1[j];
            g.params.b1[j] += gj;
            for (gw, &sv) in g.params.w1.row_mut(j).iter_mut().zip(s) {
                if sv != 0.0 {
                    *gw += gj * sv;
                }
            }
        }
    }
    Ok((loss, g))
}

/// `a_t` for one action under the given branch flags.
#[inline]
pub fn fuse(flags: BranchFlags, r: f64, f: f64, k: f64) -> f64 {
    let mut q = if flags.sigmoid_basic { sigmoid(r) } else { r };
    if flags.relation {
        q += sigmoid(f);
    }
    if flags.knowledge {
        q += k;
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub(crate) ontology: Ontology,
    pub(crate) max_turns: usize,
    pub(crate) params: QNetworkParams,
    pub(crate) relation: Matrix,
    pub(crate) knowledge: KnowledgeBranch,
    pub(crate) flags: BranchFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub flags: BranchFlags,
    pub relation_init: RelationInit,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden: DEFAULT_HIDDEN,
            flags: Ablation::Full.flags(),
            relation_init: RelationInit::Prior,
        }
    }
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(
        ontology: &Ontology,
        stats: &KnowledgeStats,
        max_turns: usize,
        config: &PolicyConfig,
        rng: &mut R,
    ) -> Self {
        let s = crate::dialogue::state_dim(ontology, max_turns);
        let d = ontology.action_count();
        let params = QNetworkParams::glorot(s, config.hidden, d, rng);
        let relation = match config.relation_init {
            RelationInit::Prior => stats.relation_init.clone(),
            RelationInit::Random => {
                let mut r = Matrix::zeros(d, d);
                for x in r.as_mut_slice() {
                    *x = rng.gen::<f64>();
                }
                normalize_columns(&mut r);
                r
            }
        };
        Policy {
            ontology: ontology.clone(),
            max_turns,
            params,
            relation,
            knowledge: KnowledgeBranch::from_stats(stats, ontology),
            flags: config.flags,
        }
    }

    /// Assembles a policy from explicit parts, checking that all shapes agree.
    pub fn from_parts(
        ontology: Ontology,
        max_turns: usize,
        params: QNetworkParams,
        relation: Matrix,
        knowledge: KnowledgeBranch,
        flags: BranchFlags,
    ) -> Result<Self> {
        let d = ontology.action_count();
        let s = crate::dialogue::state_dim(&ontology, max_turns);
        let h = params.hidden();
        let ok = params.state_dim() == s
            && params.actions() == d
            && params.b1.len() == h
            && params.w2.cols() == h
            && params.b2.len() == d
            && relation.rows() == d
            && relation.cols() == d
            && knowledge.action_count() == d
            && knowledge.greetings == ontology.num_greetings()
            && knowledge.p_dis_given_sym.rows() == ontology.num_diseases()
            && knowledge.p_dis_given_sym.cols() == ontology.num_symptoms()
            && knowledge.p_sym_given_dis.rows() == ontology.num_symptoms()
            && knowledge.p_sym_given_dis.cols() == ontology.num_diseases();
        if !ok {
            return Err(KrdsError::Shape(format!(
                "policy parts disagree with ontology (S={s}, D={d})"
            )));
        }
        Ok(Policy {
            ontology,
            max_turns,
            params,
            relation,
            knowledge,
            flags,
        })
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn max_turns(&self) -> usize {
        self.max_turns
    }

    pub fn params(&self) -> &QNetworkParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut QNetworkParams {
        &mut self.params
    }

    pub fn relation(&self) -> &Matrix {
        &self.relation
    }

    pub fn relation_mut(&mut self) -> &mut Matrix {
        &mut self.relation
    }

    pub fn knowledge(&self) -> &KnowledgeBranch {
        &self.knowledge
    }

    pub fn flags(&self) -> BranchFlags {
        self.flags
    }

    /// Actions the policy may pick in `state`.
    pub fn allowed_actions(&self, state: &crate::dialogue::DialogueState) -> Vec<bool> {
        if self.flags.symptom_filter {
            crate::dialogue::action_mask(&state.symptoms, &self.ontology)
        } else {
            vec![true; self.ontology.action_count()]
        }
    }

    pub fn state_dim(&self) -> usize {
        self.params.state_dim()
    }

    pub fn action_count(&self) -> usize {
        self.params.actions()
    }

    fn symptoms_of<'a>(&self, features: &'a [f64]) -> &'a [f64] {
        &features[..self.ontology.num_symptoms()]
    }

    /// All branch outputs; disabled branches contribute zeros to `a_t`.
    pub fn forward(&self, features: &[f64]) -> PolicyOutput {
        let a_r = forward_basic(features, &self.params);
        let a_f = forward_relation(&a_r, &self.relation);
        let a_k = forward_knowledge(self.symptoms_of(features), &self.knowledge);
        let a_t = (0..a_r.len())
            .map(|i| fuse(self.flags, a_r[i], a_f[i], a_k[i]))
            .collect();
        PolicyOutput { a_r, a_f, a_k, a_t }
    }

    pub fn q_values(&self, features: &[f64]) -> Vec<f64> {
        let a_r = forward_basic(features, &self.params);
        let a_f = if self.flags.relation {
            forward_relation(&a_r, &self.relation)
        } else {
            vec![0.0; a_r.len()]
        };
        let a_k = if self.flags.knowledge {
            forward_knowledge(self.symptoms_of(features), &self.knowledge)
        } else {
            vec![0.0; a_r.len()]
        };
        (0..a_r.len())
            .map(|i| fuse(self.flags, a_r[i], a_f[i], a_k[i]))
            .collect()
    }

    /// Mean squared error of the batch and its gradient with respect to the
    /// Q-network weights and R. The knowledge branch is constant.
    pub fn loss_and_gradients(&self, batch: &[QTarget<'_>]) -> Result<(f64, Gradients)> {
        let mut a_k = Vec::with_capacity(batch.len());
        for (index, item) in batch.iter().enumerate() {
            if item.features.len() != self.params.state_dim()
                || item.action >= self.params.actions()
            {
                return Err(KrdsError::Shape(format!(
                    "batch item {index}: |s|={} action={}",
                    item.features.len(),
                    item.action
                )));
            }
            a_k.push(if self.flags.knowledge {
                forward_knowledge(self.symptoms_of(item.features), &self.knowledge)[item.action]
            } else {
                0.0
            });
        }
        fused_loss_and_gradients(&self.params, &self.relation, self.flags, batch, &a_k)
    }

    /// One plain SGD step on the batch; returns the pre-update loss.
    pub fn backward_and_step(&mut self, batch: &[QTarget<'_>], lr: f64) -> Result<f64> {
        let (loss, g) = self.loss_and_gradients(batch)?;
        self.apply_gradients(&g, lr);
        Ok(loss)
    }

    pub fn apply_gradients(&mut self, g: &Gradients, lr: f64) {
        fn step(w: &mut [f64], g: &[f64], lr: f64) {
            for (w, g) in w.iter_mut().zip(g) {
                *w -= lr * g;
            }
        }
        step(self.params.w1.as_mut_slice(), g.params.w1.as_slice(), lr);
        step(&mut self.params.b1, &g.params.b1, lr);
        step(self.params.w2.as_mut_slice(), g.params.w2.as_slice(), lr);
        step(&mut self.params.b2, &g.params.b2, lr);
        if self.flags.relation {
            step(self.relation.as_mut_slice(), g.relation.as_slice(), lr);
            if self.flags.renormalize_relation {
                normalize_columns(&mut self.relation);
            }
        }
    }
}
