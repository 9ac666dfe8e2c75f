//! Per-episode trajectory log.

use serde::{Deserialize, Serialize};

use crate::episode::{EpisodeResult, StepRecord};
use crate::geometry::{Rect, Segment, Vec2};
use crate::metrics::Track;
use crate::scenario::{ScenarioName, ScenarioSpec};
use crate::sim::Doorway;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub provider: String,
    pub goal: Vec2,
    pub bounds: Rect,
    pub segments: Vec<Segment>,
    pub doorways: Vec<Doorway>,
    pub robot_radius: f64,
    pub humans: Vec<Track>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub meta: LogMeta,
    pub steps: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn new(spec: &ScenarioSpec, result: &EpisodeResult, provider: &str, robot_radius: f64) -> Self {
        Self {
            meta: LogMeta {
                scenario: spec.name,
                seed: spec.seed,
                provider: provider.to_string(),
                goal: spec.goal,
                bounds: spec.world.bounds,
                segments: spec.world.segments.clone(),
                doorways: spec.world.doorways.clone(),
                robot_radius,
                humans: result.humans.clone(),
            },
            steps: result.steps.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory log serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
