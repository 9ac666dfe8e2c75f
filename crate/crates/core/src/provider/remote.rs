//! Chat-completions style HTTP client. Requests run on a background thread;
//! the control loop only ever polls a channel.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BehaviorProvider, Busy, ProviderFailure, ProviderRequest, ProviderResponse, RequestId, RequestLifecycle};
use crate::error::{invalid, Error, Result};
use crate::types::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Per-attempt timeout, seconds.
    pub timeout: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            timeout: 10.0,
            max_retries: 1,
            temperature: 0.0,
            api_key_env: "SOCNAV_API_KEY".into(),
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(invalid("remote timeout must be positive"));
        }
        if !self.endpoint.starts_with("http://") && !self.endpoint.starts_with("https://") {
            return Err(invalid("remote endpoint must be an http(s) URL"));
        }
        Ok(())
    }

    /// Longest a request can take across all attempts, plus a little slack.
    fn overall_timeout(&self) -> f64 {
        self.timeout * f64::from(self.max_retries + 1) + 1.0
    }
}

/// Request body in the common chat-completions shape.
pub fn request_body(config: &RemoteConfig, req: &ProviderRequest) -> Value {
    let mut content = vec![json!({"type": "text", "text": req.prompt})];
    match &req.scene {
        Some(Scene::Text { text }) => content.push(json!({"type": "text", "text": format!("Scene:\n{text}")})),
        Some(Scene::Image { mime, data }) => {
            let encoded = base64::engine::general_purpose::STANDARD.encode(data);
            content.push(json!({"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{encoded}")}}));
        }
        None => {}
    }
    json!({
        "model": config.model,
        "temperature": config.temperature,
        "messages": [{"role": "user", "content": content}],
    })
}

/// Pulls the assistant text out of a chat-completions reply.
pub fn response_text(body: &Value) -> Option<String> {
    let content = body.pointer("/choices/0/message/content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            let text: Vec<&str> = parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect();
            (!text.is_empty()).then(|| text.join("\n"))
        }
        _ => None,
    }
}

type Completion = (RequestId, std::result::Result<String, ProviderFailure>);

pub struct RemoteProvider {
    config: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    lifecycle: RequestLifecycle,
    tx: Sender<Completion>,
    rx: Receiver<Completion>,
}

impl RemoteProvider {
    /// Reads the bearer token from the configured environment variable.
    pub fn from_env(config: RemoteConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| Error::ProviderSetup(format!("environment variable {} is not set", config.api_key_env)))?;
        Self::new(config, Some(key))
    }

    pub fn new(config: RemoteConfig, api_key: Option<String>) -> Result<Self> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        let (tx, rx) = channel();
        Ok(Self {
            lifecycle: RequestLifecycle::new(config.overall_timeout()),
            config,
            api_key,
            agent,
            tx,
            rx,
        })
    }
}

fn attempt(agent: &ureq::Agent, url: &str, key: Option<&str>, body: &Value) -> std::result::Result<String, ProviderFailure> {
    let mut request = agent.post(url);
    if let Some(key) = key {
        request = request.header("Authorization", format!("Bearer {key}"));
    }
    let mut response = request.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => ProviderFailure::Timeout,
        other => ProviderFailure::Transport(other.to_string()),
    })?;
    let status = response.status();
    if !status.is_success() {
        return Err(ProviderFailure::Transport(format!("HTTP {status}")));
    }
    let value: Value = response
        .body_mut()
        .read_json()
        .map_err(|e| ProviderFailure::Transport(format!("bad response body: {e}")))?;
    response_text(&value).ok_or_else(|| ProviderFailure::Transport("response has no message content".into()))
}

impl BehaviorProvider for RemoteProvider {
    fn submit(&mut self, req: ProviderRequest) -> std::result::Result<(), Busy> {
        self.lifecycle.begin(req.request_id, req.issued_at)?;
        let body = request_body(&self.config, &req);
        let agent = self.agent.clone();
        let url = self.config.endpoint.clone();
        let key = self.api_key.clone();
        let attempts = self.config.max_retries + 1;
        let tx = self.tx.clone();
        let id = req.request_id;
        std::thread::spawn(move || {
            let mut result = Err(ProviderFailure::Transport("no attempt made".into()));
            for n in 0..attempts {
                result = attempt(&agent, &url, key.as_deref(), &body);
                match &result {
                    Ok(_) => break,
                    Err(e) => log::warn!("request {id} attempt {} failed: {e}", n + 1),
                }
            }
            // The receiver may be gone if the provider was dropped.
            let _ = tx.send((id, result));
        });
        Ok(())
    }

    fn poll_latest(&mut self, now: f64) -> Option<ProviderResponse> {
        while let Ok((id, result)) = self.rx.try_recv() {
            if !self.lifecycle.complete(id, result, now) {
                log::debug!("dropping stale completion for request {id}");
            }
        }
        self.lifecycle.expire(now);
        self.lifecycle.take()
    }
}
