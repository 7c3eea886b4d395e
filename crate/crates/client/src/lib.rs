//! Typed client for the dialogue session service.

use krds_core::api::{
    CreateSessionRequest, CreateSessionResponse, ErrorBody, MessageRequest, MessageResponse,
};
use krds_core::session::SessionRecord;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{status}: {}", body.message)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected response {status}: {text}")]
    Unexpected { status: StatusCode, text: String },
    #[error(transparent)]
    Transport(#[from] reqwest::Error),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } | ClientError::Unexpected { status, .. } => {
                Some(*status)
            }
            ClientError::Transport(e) => e.status(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base_url` like `http://127.0.0.1:8080`.
    pub fn new(base_url: impl Into<String>) -> Self {
        Client {
            base: base_url.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api { status, body }),
            Err(_) => Err(ClientError::Unexpected { status, text }),
        }
    }

    pub async fn create_session(&self, self_report: &str) -> Result<CreateSessionResponse> {
        let body = CreateSessionRequest {
            self_report: self_report.to_string(),
        };
        let resp = self
            .http
            .post(format!("{}/sessions", self.base))
            .json(&body)
            .send()
            .await?;
        Self::decode(resp).await
    }

    pub async fn send_message(&self, id: &str, text: &str) -> Result<MessageResponse> {
        let body = MessageRequest {
            text: text.to_string(),
        };
        let resp = self
            .http
            .post(format!("{}/sessions/{id}/messages", self.base))
            .json(&body)
            .send()
            .await?;
        Self::decode(resp).await
    }

    pub async fn get_session(&self, id: &str) -> Result<SessionRecord> {
        let resp = self
            .http
            .get(format!("{}/sessions/{id}", self.base))
            .send()
            .await?;
        Self::decode(resp).await
    }
}
