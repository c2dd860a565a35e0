use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::AnnotateError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Body of one chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

/// Sends a chat request and returns the raw response body.
pub trait ChatBackend: Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, AnnotateError>;
}

/// Chat-completion endpoint over HTTP with an optional bearer token.
#[derive(Debug, Clone)]
pub struct HttpChatBackend {
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpChatBackend {
    pub fn new(
        endpoint: impl Into<String>,
        token: Option<String>,
        timeout: Duration,
    ) -> Result<Self, AnnotateError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AnnotateError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            token,
            client,
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, AnnotateError> {
        let mut req = self.client.post(&self.endpoint).json(request);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| AnnotateError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| AnnotateError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(AnnotateError::Transport(format!("status {status}: {body}")));
        }
        Ok(body)
    }
}

/// The assistant text of an OpenAI-style completion body, or the body
/// itself when it has no such field.
pub fn response_text(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
        })
        .unwrap_or_else(|| body.to_string())
}

/// First well-formed JSON object in `text` that has the key `key`.
/// Surrounding prose and code fences are skipped.
pub fn extract_document(text: &str, key: &str) -> Option<Value> {
    text.match_indices('{').find_map(|(pos, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v)) if v.get(key).is_some() => Some(v),
            _ => None,
        }
    })
}
