//! Model bundle persistence.
//!
//! Two encodings carry the same content:
//!
//! * JSON (canonical): header fields and nested-array matrices in one object.
//! * Binary: `b"KRDQ"`, a little-endian `u32` header length, the JSON header,
//!   then row-major little-endian `f64` data for W1, b1, W2, b2, R,
//!   P(dis|sym), P(sym|dis) and the symptom prior, in that order.
//!
//! The header embeds the ontology and its hash; loading verifies both.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KrdsError, Result};
use crate::linalg::Matrix;
use crate::ontology::Ontology;
use crate::policy::{BranchFlags, KnowledgeBranch, Policy, QNetworkParams};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"KRDQ";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleFormat {
    Json,
    Binary,
}

impl BundleFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => BundleFormat::Binary,
            _ => BundleFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    ontology_hash: String,
    #[serde(rename = "S")]
    state_dim: usize,
    #[serde(rename = "H")]
    hidden: usize,
    #[serde(rename = "D")]
    actions: usize,
    flags: BranchFlags,
    max_turns: usize,
    ontology: Ontology,
}

#[derive(Serialize, Deserialize)]
struct KnowledgeRepr {
    p_dis_given_sym: Matrix,
    p_sym_given_dis: Matrix,
    p_sym_prior: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonBundle {
    #[serde(flatten)]
    header: Header,
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
    relation: Matrix,
    knowledge: KnowledgeRepr,
}

fn header_of(policy: &Policy) -> Header {
    Header {
        format_version: BUNDLE_FORMAT_VERSION,
        ontology_hash: policy.ontology.hash(),
        state_dim: policy.state_dim(),
        hidden: policy.params.hidden(),
        actions: policy.action_count(),
        flags: policy.flags,
        max_turns: policy.max_turns,
        ontology: policy.ontology.clone(),
    }
}

fn check_header(h: &Header) -> Result<()> {
    if h.format_version != BUNDLE_FORMAT_VERSION {
        return Err(KrdsError::FormatVersion(h.format_version));
    }
    let actual = h.ontology.hash();
    if actual != h.ontology_hash {
        return Err(KrdsError::OntologyMismatch {
            expected: h.ontology_hash.clone(),
            found: actual,
        });
    }
    Ok(())
}

fn assemble(
    h: Header,
    params: QNetworkParams,
    relation: Matrix,
    kb: KnowledgeRepr,
) -> Result<Policy> {
    if params.state_dim() != h.state_dim
        || params.hidden() != h.hidden
        || params.actions() != h.actions
    {
        return Err(KrdsError::Shape(format!(
            "header says S={} H={} D={}, weights are {}x{}x{}",
            h.state_dim,
            h.hidden,
            h.actions,
            params.state_dim(),
            params.hidden(),
            params.actions()
        )));
    }
    let knowledge = KnowledgeBranch {
        p_dis_given_sym: kb.p_dis_given_sym,
        p_sym_given_dis: kb.p_sym_given_dis,
        p_sym_prior: kb.p_sym_prior,
        greetings: h.ontology.num_greetings(),
    };
    Policy::from_parts(
        h.ontology,
        h.max_turns,
        params,
        relation,
        knowledge,
        h.flags,
    )
}

pub fn to_json(policy: &Policy) -> String {
    let bundle = JsonBundle {
        header: header_of(policy),
        w1: policy.params.w1.clone(),
        b1: policy.params.b1.clone(),
        w2: policy.params.w2.clone(),
        b2: policy.params.b2.clone(),
        relation: policy.relation.clone(),
        knowledge: KnowledgeRepr {
            p_dis_given_sym: policy.knowledge.p_dis_given_sym.clone(),
            p_sym_given_dis: policy.knowledge.p_sym_given_dis.clone(),
            p_sym_prior: policy.knowledge.p_sym_prior.clone(),
        },
    };
    serde_json::to_string(&bundle).expect("bundle serializes")
}

pub fn from_json(text: &str) -> Result<Policy> {
    let b: JsonBundle =
        serde_json::from_str(text).map_err(|e| KrdsError::Parse(format!("bundle: {e}")))?;
    check_header(&b.header)?;
    let params = QNetworkParams {
        w1: b.w1,
        b1: b.b1,
        w2: b.w2,
        b2: b.b2,
    };
    assemble(b.header, params, b.relation, b.knowledge)
}

pub fn to_bytes(policy: &Policy) -> Vec<u8> {
    let header = serde_json::to_vec(&header_of(policy)).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    let kb = &policy.knowledge;
    for block in [
        policy.params.w1.as_slice(),
        &policy.params.b1,
        policy.params.w2.as_slice(),
        &policy.params.b2,
        policy.relation.as_slice(),
        kb.p_dis_given_sym.as_slice(),
        kb.p_sym_given_dis.as_slice(),
        &kb.p_sym_prior,
    ] {
        for x in block {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(KrdsError::Parse("bundle truncated".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        Ok(Matrix::from_row_major(
            rows,
            cols,
            self.floats(rows * cols)?,
        ))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Policy> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err(KrdsError::Parse("bad bundle magic".into()));
    }
    let len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
    let h: Header = serde_json::from_slice(r.take(len)?)
        .map_err(|e| KrdsError::Parse(format!("bundle header: {e}")))?;
    check_header(&h)?;
    let (s, hd, d) = (h.state_dim, h.hidden, h.actions);
    let (m, n) = (h.ontology.num_diseases(), h.ontology.num_symptoms());
    let params = QNetworkParams {
        w1: r.matrix(hd, s)?,
        b1: r.floats(hd)?,
        w2: r.matrix(d, hd)?,
        b2: r.floats(d)?,
    };
    let relation = r.matrix(d, d)?;
    let kb = KnowledgeRepr {
        p_dis_given_sym: r.matrix(m, n)?,
        p_sym_given_dis: r.matrix(n, m)?,
        p_sym_prior: r.floats(n)?,
    };
    if !r.buf.is_empty() {
        return Err(KrdsError::Parse("trailing bytes after bundle".into()));
    }
    assemble(h, params, relation, kb)
}

pub fn save_bundle(policy: &Policy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match BundleFormat::for_path(path) {
        BundleFormat::Json => to_json(policy).into_bytes(),
        BundleFormat::Binary => to_bytes(policy),
    };
    std::fs::write(path, bytes).map_err(|e| KrdsError::io(path, e))
}

/// Loads either encoding, sniffing the magic bytes.
pub fn load_bundle(path: impl AsRef<Path>) -> Result<Policy> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| KrdsError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        from_bytes(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| KrdsError::Parse(e.to_string()))?;
        from_json(&text)
    }
}

/// Loads a bundle and requires it to have been trained on `ontology`.
pub fn load_bundle_for(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Policy> {
    let policy = load_bundle(path)?;
    if policy.ontology() != ontology {
        return Err(KrdsError::OntologyMismatch {
            expected: ontology.hash(),
            found: policy.ontology().hash(),
        });
    }
    Ok(policy)
}
