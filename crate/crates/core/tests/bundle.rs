mod common;

use common::synthetic;
use krds_core::bundle::{
    from_bytes, from_json, load_bundle, load_bundle_for, save_bundle, to_bytes, to_json,
};
use krds_core::dialogue::{encode_state, DialogueState};
use krds_core::policy::{Ablation, Policy};
use krds_core::synthetic::synthetic_ontology;
use krds_core::trainer::{init_policy, TrainerConfig};
use krds_core::KrdsError;

fn policy(ablation: Ablation) -> Policy {
    let (o, data) = synthetic();
    let mut config = TrainerConfig::default();
    config.policy.hidden = 24;
    config.policy.flags = ablation.flags();
    init_policy(&config, &o, &data.train).unwrap()
}

#[test]
fn json_round_trip_is_byte_identical() {
    let p = policy(Ablation::Full);
    let text = to_json(&p);
    let back = from_json(&text).unwrap();
    assert_eq!(back, p);
    assert_eq!(to_json(&back), text);
}

#[test]
fn binary_round_trip_is_byte_identical() {
    for ablation in [Ablation::Basic, Ablation::Full] {
        let p = policy(ablation);
        let bytes = to_bytes(&p);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(to_bytes(&back), bytes);
    }
}

#[test]
fn reloaded_policy_gives_identical_q_values() {
    let p = policy(Ablation::Full);
    let dir = tempfile::tempdir().unwrap();
    let o = p.ontology().clone();
    let features = encode_state(&DialogueState::new(&o), &o, p.max_turns()).unwrap();
    for name in ["model.json", "model.bin"] {
        let path = dir.path().join(name);
        save_bundle(&p, &path).unwrap();
        let back = load_bundle_for(&path, &o).unwrap();
        assert_eq!(back.q_values(&features), p.q_values(&features));
    }
    let bin = std::fs::read(dir.path().join("model.bin")).unwrap();
    assert!(bin.starts_with(b"KRDQ"));
}

#[test]
fn tampered_ontology_hash_is_rejected() {
    let p = policy(Ablation::Full);
    let mut v: serde_json::Value = serde_json::from_str(&to_json(&p)).unwrap();
    v["ontology_hash"] = serde_json::Value::String("0".repeat(64));
    let err = from_json(&v.to_string()).unwrap_err();
    assert!(matches!(err, KrdsError::OntologyMismatch { .. }), "{err:?}");

    let mut v: serde_json::Value = serde_json::from_str(&to_json(&p)).unwrap();
    v["ontology"]["symptoms"][0] = serde_json::Value::String("renamed".into());
    assert!(matches!(
        from_json(&v.to_string()),
        Err(KrdsError::OntologyMismatch { .. })
    ));
}

#[test]
fn bundle_for_another_ontology_is_rejected() {
    let p = policy(Ablation::Full);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_bundle(&p, &path).unwrap();
    let other = synthetic_ontology(3, 2).unwrap();
    assert!(matches!(
        load_bundle_for(&path, &other),
        Err(KrdsError::OntologyMismatch { .. })
    ));
    assert!(load_bundle(&path).is_ok());
}

#[test]
fn corrupt_binary_is_rejected() {
    let p = policy(Ablation::Full);
    let bytes = to_bytes(&p);
    assert!(from_bytes(&bytes[..bytes.len() - 8]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(from_bytes(&extra).is_err());
    assert!(from_bytes(b"nope").is_err());
}

#[test]
fn format_version_is_checked() {
    let p = policy(Ablation::Full);
    let mut v: serde_json::Value = serde_json::from_str(&to_json(&p)).unwrap();
    v["format_version"] = serde_json::json!(99);
    assert!(matches!(
        from_json(&v.to_string()),
        Err(KrdsError::FormatVersion(99))
    ));
}
