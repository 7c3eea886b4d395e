//! Diagnosis accuracy, symptom matching rate and dialogue length.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::simulator::Outcome;

/// The parts of an episode the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub disease: String,
    pub outcome: Outcome,
    pub turns: usize,
    pub requests: usize,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub match_rate: f64,
    pub avg_turns: f64,
    pub per_disease: BTreeMap<String, f64>,
    pub episodes: usize,
    pub config_fingerprint: String,
}

/// Accuracy is the success fraction; the matching rate pools hits over all
/// symptom requests and is 0 when nothing was requested.
pub fn compute_metrics(episodes: &[EpisodeSummary], config_fingerprint: &str) -> MetricsReport {
    let n = episodes.len();
    let successes = episodes.iter().filter(|e| e.outcome.is_success()).count();
    let requests: usize = episodes.iter().map(|e| e.requests).sum();
    let hits: usize = episodes.iter().map(|e| e.hits).sum();
    let turns: usize = episodes.iter().map(|e| e.turns).sum();
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for e in episodes {
        let entry = per.entry(e.disease.clone()).or_default();
        entry.0 += usize::from(e.outcome.is_success());
        entry.1 += 1;
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    MetricsReport {
        accuracy: ratio(successes, n),
        match_rate: ratio(hits, requests),
        avg_turns: ratio(turns, n),
        per_disease: per
            .into_iter()
            .map(|(k, (s, t))| (k, ratio(s, t)))
            .collect(),
        episodes: n,
        config_fingerprint: config_fingerprint.to_string(),
    }
}

/// Short stable digest of any serializable configuration.
pub fn fingerprint<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))[..16].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(d: &str, outcome: Outcome, turns: usize, requests: usize, hits: usize) -> EpisodeSummary {
        EpisodeSummary {
            disease: d.into(),
            outcome,
            turns,
            requests,
            hits,
        }
    }

    #[test]
    fn hand_computed_metrics() {
        let eps = [
            ep("a", Outcome::Success, 3, 2, 1),
            ep("a", Outcome::FailWrongDisease, 5, 4, 1),
            ep("b", Outcome::Success, 1, 0, 0),
            ep("b", Outcome::FailMaxTurns, 22, 21, 2),
        ];
        let m = compute_metrics(&eps, "x");
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.match_rate, 4.0 / 27.0);
        assert_eq!(m.avg_turns, 31.0 / 4.0);
        assert_eq!(m.per_disease["a"], 0.5);
        assert_eq!(m.per_disease["b"], 0.5);
        assert_eq!(m.episodes, 4);
    }

    #[test]
    fn no_requests_means_zero_match_rate() {
        let m = compute_metrics(&[ep("a", Outcome::Success, 1, 0, 0)], "x");
        assert_eq!(m.match_rate, 0.0);
        let m = compute_metrics(&[], "x");
        assert_eq!((m.accuracy, m.match_rate, m.avg_turns), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(fingerprint(&(1, "a")), fingerprint(&(1, "a")));
        assert_ne!(fingerprint(&(1, "a")), fingerprint(&(2, "a")));
        assert_eq!(fingerprint(&1).len(), 16);
    }
}
