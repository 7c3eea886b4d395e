#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use krds_core::dialogue::state_dim;
use krds_core::knowledge::compute_knowledge_stats;
use krds_core::language::LanguageLayer;
use krds_core::policy::{Ablation, KnowledgeBranch, Policy, QNetworkParams};
use krds_core::session::DiagnosisAgent;
use krds_core::synthetic::{generate, SyntheticConfig};
use krds_core::trainer::{init_policy, train, TrainerConfig};
use krds_server::{router, AppState, SessionStore};
use serde_json::Value;
use tower::ServiceExt;

/// Zero network weights: every score ties apart from the knowledge term.
pub fn flat_policy(ablation: Ablation) -> Policy {
    let (o, data) = generate(&SyntheticConfig::default()).unwrap();
    let stats = compute_knowledge_stats(&data.train, &o).unwrap();
    Policy::from_parts(
        o.clone(),
        22,
        QNetworkParams::zeros(state_dim(&o, 22), 8, o.action_count()),
        stats.relation_init.clone(),
        KnowledgeBranch::from_stats(&stats, &o),
        ablation.flags(),
    )
    .unwrap()
}

/// Short training run on the synthetic corpus, shared within a test binary.
pub fn trained_policy() -> Policy {
    static POLICY: OnceLock<Policy> = OnceLock::new();
    POLICY
        .get_or_init(|| {
            let (o, data) = generate(&SyntheticConfig::default()).unwrap();
            let config = TrainerConfig {
                epochs: 80,
                ..TrainerConfig::default()
            };
            let env = config.environment(&o, None).unwrap();
            let policy = init_policy(&config, &o, &data.train).unwrap();
            let outcome = train(&config, &data.train, policy, &env, &mut |_| {}).unwrap();
            outcome.best_or_last().clone()
        })
        .clone()
}

pub fn app_with(policy: Policy, store: SessionStore) -> Router {
    let language = LanguageLayer::demo(policy.ontology()).unwrap();
    let agent = DiagnosisAgent::new(policy, language).unwrap();
    router(Arc::new(AppState { agent, store }))
}

pub fn app(policy: Policy) -> Router {
    app_with(policy, SessionStore::in_memory())
}

pub async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req
        .body(Body::from(body.unwrap_or("").to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

pub async fn create(app: &Router, self_report: &str) -> (StatusCode, Value) {
    let body = serde_json::json!({ "self_report": self_report }).to_string();
    call(app, Method::POST, "/sessions", Some(&body)).await
}

pub async fn message(app: &Router, id: &str, text: &str) -> (StatusCode, Value) {
    let body = serde_json::json!({ "text": text }).to_string();
    call(
        app,
        Method::POST,
        &format!("/sessions/{id}/messages"),
        Some(&body),
    )
    .await
}

pub async fn fetch(app: &Router, id: &str) -> (StatusCode, Value) {
    call(app, Method::GET, &format!("/sessions/{id}"), None).await
}
