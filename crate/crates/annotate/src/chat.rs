//! Chat-completion clients: HTTP, canned fixtures, and a scripted queue for tests.

use crate::catalogs::fine_catalog;
use crate::description::PartDescription;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

pub const ENV_URL: &str = "SIMREADY_VLM_URL";
pub const ENV_KEY: &str = "SIMREADY_VLM_KEY";
pub const ENV_MODEL: &str = "SIMREADY_VLM_MODEL";
pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    /// Paths, URLs or data URLs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<String>,
}

impl ChatMessage {
    pub fn user(text: &str) -> Self {
        ChatMessage {
            role: Role::User,
            text: text.to_string(),
            images: vec![],
        }
    }

    pub fn assistant(text: &str) -> Self {
        ChatMessage {
            role: Role::Assistant,
            text: text.to_string(),
            images: vec![],
        }
    }

    pub fn with_images(mut self, images: &[String]) -> Self {
        self.images = images.to_vec();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    FineMaterial,
    Parameters,
    Feedback,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::FineMaterial => "fine_material",
            RequestKind::Parameters => "parameters",
            RequestKind::Feedback => "feedback",
        }
    }
}

/// Messages plus what they are about. Only offline clients look at the context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub kind: RequestKind,
    pub shape_name: String,
    /// Parts the answer should cover.
    pub parts: Vec<PartDescription>,
    /// 0 for the first parameter request, then one per feedback round.
    pub round: usize,
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChatError {
    #[error("chat endpoint is not configured (set {ENV_URL})")]
    NotConfigured,
    #[error("request failed: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response body: {0}")]
    Protocol(String),
    #[error("image `{path}` could not be read: {message}")]
    Image { path: String, message: String },
    #[error("scripted client has no response left")]
    Exhausted,
}

impl ChatError {
    fn retryable(&self) -> bool {
        match self {
            ChatError::Transport(_) => true,
            ChatError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(120),
        }
    }
}

/// OpenAI-style chat-completions endpoint.
pub struct HttpChatClient {
    url: String,
    api_key: Option<String>,
    model: String,
    retry: RetryPolicy,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(
        url: &str,
        api_key: Option<String>,
        model: &str,
        retry: RetryPolicy,
    ) -> Result<Self, ChatError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(retry.timeout)
            .build()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        Ok(HttpChatClient {
            url: url.to_string(),
            api_key,
            model: model.to_string(),
            retry,
            http,
        })
    }

    pub fn from_env(retry: RetryPolicy) -> Result<Self, ChatError> {
        let url = std::env::var(ENV_URL).map_err(|_| ChatError::NotConfigured)?;
        let key = std::env::var(ENV_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        Self::new(&url, key, &model, retry)
    }

    pub fn request_body(&self, request: &ChatRequest) -> Result<Value, ChatError> {
        let messages = request
            .messages
            .iter()
            .map(|m| {
                let mut content = vec![json!({"type": "text", "text": m.text})];
                for img in &m.images {
                    content
                        .push(json!({"type": "image_url", "image_url": {"url": image_url(img)?}}));
                }
                Ok(json!({"role": m.role, "content": content}))
            })
            .collect::<Result<Vec<_>, ChatError>>()?;
        Ok(json!({"model": self.model, "messages": messages}))
    }

    fn send_once(&self, body: &Value) -> Result<String, ChatError> {
        let mut req = self.http.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ChatError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let v: Value =
            serde_json::from_str(&text).map_err(|e| ChatError::Protocol(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ChatError::Protocol("missing choices[0].message.content".into()))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        let body = self.request_body(request)?;
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.send_once(&body) {
                Err(e) if e.retryable() && attempt < self.retry.attempts => {
                    tracing::warn!(attempt, error = %e, "chat request failed, retrying");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn image_url(img: &str) -> Result<String, ChatError> {
    if img.starts_with("http://") || img.starts_with("https://") || img.starts_with("data:") {
        return Ok(img.to_string());
    }
    let bytes = std::fs::read(img).map_err(|e| ChatError::Image {
        path: img.to_string(),
        message: e.to_string(),
    })?;
    let mime = match Path::new(img).extension().and_then(|e| e.to_str()) {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "image/png",
    };
    Ok(format!(
        "data:{mime};base64,{}",
        base64::engine::general_purpose::STANDARD.encode(bytes)
    ))
}

/// Offline client. Answers from `<dir>/<shape>.<kind>.txt` or `<dir>/<kind>.txt`
/// when such a file exists, otherwise with generated typical values.
#[derive(Clone, Debug, Default)]
pub struct MockClient {
    fixtures: Option<PathBuf>,
}

impl MockClient {
    pub fn new(fixtures: Option<PathBuf>) -> Self {
        MockClient { fixtures }
    }

    fn fixture(&self, request: &ChatRequest) -> Option<String> {
        let dir = self.fixtures.as_ref()?;
        let kind = request.kind.as_str();
        let shape = request
            .shape_name
            .replace(|c: char| !c.is_alphanumeric(), "_");
        [format!("{shape}.{kind}.txt"), format!("{kind}.txt")]
            .iter()
            .find_map(|name| std::fs::read_to_string(dir.join(name)).ok())
    }
}

/// Typical parameters per coarse material: (CID, E, nu, sigma_y or phi, rho).
fn typical(coarse: &str) -> (&'static str, f64, f64, Option<(&'static str, f64)>, f64) {
    match coarse {
        "ceramic" => ("M1", 5e8, 0.25, Some(("sigma_y", 3e7)), 2400.0),
        "fabric" => ("M0", 2e5, 0.3, None, 300.0),
        "leather" => ("M0", 5e5, 0.35, None, 900.0),
        "metal" => ("M2", 2e9, 0.3, Some(("sigma_y", 2.5e8)), 7800.0),
        "plant" => ("M0", 1e6, 0.3, None, 600.0),
        "plastic" => ("M1", 1e8, 0.35, Some(("sigma_y", 2e7)), 1000.0),
        "soil" => ("M3", 1e6, 0.3, Some(("phi", 0.5)), 1600.0),
        _ => ("M1", 1e8, 0.3, Some(("sigma_y", 2e7)), 600.0),
    }
}

pub fn generated_response(request: &ChatRequest) -> String {
    let mut out = serde_json::Map::new();
    for p in &request.parts {
        match request.kind {
            RequestKind::FineMaterial => {
                let fine = fine_catalog(&p.coarse_material).map_or("", |c| c[0]);
                out.insert(p.name.clone(), json!(fine));
            }
            RequestKind::Parameters | RequestKind::Feedback => {
                let (cid, e, nu, extra, rho) = typical(&p.coarse_material);
                // each feedback round softens the material
                let e = e * 0.5f64.powi(request.round as i32);
                let mut entry = serde_json::Map::new();
                entry.insert("CID".into(), json!(cid));
                entry.insert("E".into(), json!(e));
                entry.insert("nu".into(), json!(nu));
                if let Some((k, v)) = extra {
                    entry.insert(k.into(), json!(v));
                }
                entry.insert("rho".into(), json!(rho));
                out.insert(p.name.clone(), Value::Object(entry));
            }
        }
    }
    serde_json::to_string_pretty(&Value::Object(out)).unwrap()
}

impl ChatClient for MockClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        Ok(self
            .fixture(request)
            .unwrap_or_else(|| generated_response(request)))
    }
}

/// Returns queued responses in order and records every request.
#[derive(Default)]
pub struct ScriptedClient {
    responses: Mutex<VecDeque<Result<String, ChatError>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedClient {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedClient {
            responses: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            requests: Mutex::new(vec![]),
        }
    }

    pub fn push(&self, response: Result<String, ChatError>) {
        self.responses.lock().unwrap().push_back(response);
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        self.requests.lock().unwrap().push(request.clone());
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or(Err(ChatError::Exhausted))
    }
}
