//! Dialogue engine for symptom-checking diagnosis driven by a
//! knowledge-routed relational deep Q-network.

pub mod api;
pub mod bundle;
pub mod dialogue;
pub mod error;
pub mod harness;
pub mod knowledge;
pub mod language;
pub mod linalg;
pub mod metrics;
pub mod ontology;
pub mod policy;
pub mod session;
pub mod simulator;
pub mod synthetic;
pub mod trainer;

pub use error::{KrdsError, Result};
