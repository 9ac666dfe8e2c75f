//! Sources of directive text and the single-outstanding-request lifecycle
//! they share.

mod latency;
mod lifecycle;
mod oracle;
mod remote;
mod replay;
mod transcript;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{invalid, Result};
use crate::geometry::Vec2;
use crate::types::{Action, Observation, RobotState, Scene, SocialEntity};

pub use latency::{Delayed, LatencyModel};
pub use lifecycle::RequestLifecycle;
pub use oracle::{oracle_respond, OracleConfig, OracleProvider};
pub use remote::{RemoteConfig, RemoteProvider};
pub use replay::{ReplayEntry, ReplayProvider, ReplayScript, DEFAULT_REPLAY_WINDOW};
pub use transcript::{read_transcript, transcript_to_replay, write_transcript, TranscriptRecord};

pub type RequestId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub prompt: String,
    pub scene: Option<Scene>,
    pub issued_at: f64,
    pub request_id: RequestId,
}

impl ProviderRequest {
    pub fn new(prompt: String, scene: Option<Scene>, issued_at: f64, request_id: RequestId) -> Result<Self> {
        if prompt.trim().is_empty() {
            return Err(invalid("provider request prompt is empty"));
        }
        Ok(Self {
            prompt,
            scene,
            issued_at,
            request_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "type", content = "detail", rename_all = "snake_case")]
pub enum ProviderFailure {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request abandoned")]
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub raw_text: String,
    pub request_id: RequestId,
    pub issued_at: f64,
    pub completed_at: f64,
    pub latency: f64,
    /// Set when the request failed; `raw_text` is then empty.
    pub error: Option<ProviderFailure>,
}

impl ProviderResponse {
    pub fn ok(request_id: RequestId, issued_at: f64, completed_at: f64, raw_text: String) -> Self {
        Self {
            raw_text,
            request_id,
            issued_at,
            completed_at,
            latency: completed_at - issued_at,
            error: None,
        }
    }

    pub fn failed(request_id: RequestId, issued_at: f64, completed_at: f64, error: ProviderFailure) -> Self {
        Self {
            raw_text: String::new(),
            request_id,
            issued_at,
            completed_at,
            latency: completed_at - issued_at,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("a request is already in flight")]
pub struct Busy;

/// Non-blocking directive source. At most one request is in flight per
/// instance; completions are picked up with [`BehaviorProvider::poll_latest`].
pub trait BehaviorProvider: Send {
    fn submit(&mut self, req: ProviderRequest) -> std::result::Result<(), Busy>;

    /// Newest completed response, delivered exactly once.
    fn poll_latest(&mut self, now: f64) -> Option<ProviderResponse>;

    /// Abandons the in-flight request so a fresher one can be submitted.
    /// Returns false when the provider cannot cancel.
    fn supersede(&mut self) -> bool {
        false
    }

    /// Requests this provider has given up on since the last call.
    fn drain_abandoned(&mut self) -> Vec<RequestId> {
        Vec::new()
    }
}

/// Structured scene sent alongside the prompt in simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub stamp: f64,
    pub robot: RobotState,
    pub velocity: Action,
    pub goal: Vec2,
    pub entities: Vec<SocialEntity>,
}

impl SceneDescription {
    pub fn from_observation(obs: &Observation, goal: Vec2) -> Self {
        Self {
            stamp: obs.robot.stamp,
            robot: obs.robot,
            velocity: obs.current_action,
            goal,
            entities: obs.detections.clone(),
        }
    }

    pub fn to_scene(&self) -> Scene {
        Scene::Text {
            text: serde_json::to_string(self).expect("scene description serializes"),
        }
    }

    pub fn from_scene(scene: &Scene) -> Option<Self> {
        match scene {
            Scene::Text { text } => serde_json::from_str(text).ok(),
            Scene::Image { .. } => None,
        }
    }
}
