//! Directive-based social scoring.
//!
//! Builds the navigation prompt from the current observation, parses the
//! constrained `Move DIRECTION with SPEED` answer, maps it to a preferred
//! action and turns that into a per-candidate social cost.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{invalid, Result};
use crate::types::{
    Action, BehaviorDirective, Cost, CostWeights, Direction, EntityKind, Observation, RobotLimits, SocialEntity, Speed,
};

pub const DEFAULT_TASK: &str =
    "How will you navigate concerning the person in your view? You will need to follow general walking etiquette.";
pub const DEFAULT_RULES: [&str; 2] = [
    "Move to the right when passing by a person.",
    "Do not obstruct others' paths.",
];
pub const ANSWER_FORMAT: &str = "Move DIRECTION with SPEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplate {
    pub task_text: String,
    pub etiquette_rules: Vec<String>,
    pub answer_format_text: String,
    pub direction_options: Vec<String>,
    pub speed_options: Vec<String>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            task_text: DEFAULT_TASK.to_string(),
            etiquette_rules: DEFAULT_RULES.iter().map(|s| s.to_string()).collect(),
            answer_format_text: ANSWER_FORMAT.to_string(),
            direction_options: Direction::ALL.iter().map(|d| d.token().to_string()).collect(),
            speed_options: Speed::ALL.iter().map(|s| s.token().to_string()).collect(),
        }
    }
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        let dirs: Vec<&str> = Direction::ALL.iter().map(|d| d.token()).collect();
        let speeds: Vec<&str> = Speed::ALL.iter().map(|s| s.token()).collect();
        if self.direction_options != dirs || self.speed_options != speeds {
            return Err(invalid("prompt option lists must match the directive grammar"));
        }
        if self.task_text.trim().is_empty() {
            return Err(invalid("prompt task text is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedDeltas {
    pub slow_down: f64,
    pub speed_up: f64,
    pub constant: f64,
}

impl Default for SpeedDeltas {
    fn default() -> Self {
        Self {
            slow_down: -0.15,
            speed_up: 0.15,
            constant: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectionDeltas {
    pub left: f64,
    pub straight: f64,
    pub right: f64,
}

impl Default for DirectionDeltas {
    fn default() -> Self {
        Self {
            left: 0.5,
            straight: 0.0,
            right: -0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub delta_speed: SpeedDeltas,
    pub delta_direction: DirectionDeltas,
    pub staleness_ttl: f64,
    pub query_cooldown: f64,
    pub straight_band: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            delta_speed: SpeedDeltas::default(),
            delta_direction: DirectionDeltas::default(),
            staleness_ttl: 4.0,
            query_cooldown: 1.0,
            straight_band: 0.1,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_speed.constant != 0.0 || self.delta_direction.straight != 0.0 {
            return Err(invalid("`constant` and `straight` must map to a zero delta"));
        }
        if !(self.staleness_ttl > 0.0 && self.query_cooldown > 0.0 && self.straight_band > 0.0) {
            return Err(invalid("staleness ttl, query cooldown and straight band must be positive"));
        }
        Ok(())
    }

    pub fn delta_speed(&self, speed: Speed) -> f64 {
        match speed {
            Speed::SlowDown => self.delta_speed.slow_down,
            Speed::SpeedUp => self.delta_speed.speed_up,
            Speed::Constant => self.delta_speed.constant,
            Speed::Stop => 0.0,
        }
    }

    pub fn delta_direction(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Left => self.delta_direction.left,
            Direction::Straight => self.delta_direction.straight,
            Direction::Right => self.delta_direction.right,
        }
    }
}

/// Numeric target behaviour extracted from a directive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferredAction {
    pub v_h: f64,
    pub w_h: f64,
    pub source_directive: BehaviorDirective,
    pub stamp: f64,
}

impl PreferredAction {
    pub fn age(&self, now: f64) -> f64 {
        now - self.stamp
    }

    pub fn is_fresh(&self, now: f64, ttl: f64) -> bool {
        self.age(now) <= ttl
    }
}

/// Positive angular velocity reads as `left`.
pub fn heading_word(w: f64, band: f64) -> Direction {
    if w > band {
        Direction::Left
    } else if w < -band {
        Direction::Right
    } else {
        Direction::Straight
    }
}

pub fn build_prompt(obs: &Observation, template: &PromptTemplate, config: &ScoringConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Task:\n{}\n", template.task_text);
    let heading = heading_word(obs.current_action.w, config.straight_band);
    let _ = writeln!(
        out,
        "Ego state:\n- heading direction: {}\n- linear velocity: {:.2}\n",
        heading, obs.current_action.v
    );
    if !template.etiquette_rules.is_empty() {
        out.push_str("Remember:\n");
        for rule in &template.etiquette_rules {
            let _ = writeln!(out, "- {rule}");
        }
        out.push('\n');
    }
    let _ = write!(
        out,
        "Answer Format:\n{}\n- options for DIRECTION: {}\n- options for SPEED: {}",
        template.answer_format_text,
        template.direction_options.join(", "),
        template.speed_options.join(", ")
    );
    out
}

/// Renders a directive in the answer format.
pub fn format_directive(direction: Direction, speed: Speed) -> String {
    format!("Move {} with {}", direction.token(), speed.token())
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("no directive in response ({reason}): {raw:?}")]
pub struct ParseFailure {
    pub raw: String,
    pub reason: &'static str,
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn direction_at(words: &[String], i: usize) -> Option<Direction> {
    Direction::ALL.into_iter().find(|d| words[i] == d.token())
}

/// Speed token starting at word `i` and the number of words it spans.
fn speed_at(words: &[String], i: usize) -> Option<(Speed, usize)> {
    let next = words.get(i + 1).map(String::as_str);
    match (words[i].as_str(), next) {
        ("slow", Some("down")) => Some((Speed::SlowDown, 2)),
        ("speed", Some("up")) => Some((Speed::SpeedUp, 2)),
        ("constant", _) => Some((Speed::Constant, 1)),
        ("stop", _) => Some((Speed::Stop, 1)),
        _ => None,
    }
}

/// Extracts a directive. The strict `move <dir> with <speed>` form wins;
/// otherwise the first direction token and the first speed token anywhere
/// in the text are used.
pub fn parse_response(text: &str, stamp: f64) -> std::result::Result<BehaviorDirective, ParseFailure> {
    let w = words(text);
    for i in 0..w.len().saturating_sub(3) {
        if w[i] != "move" || w[i + 2] != "with" {
            continue;
        }
        if let (Some(dir), Some((speed, _))) = (direction_at(&w, i + 1), speed_at(&w, i + 3)) {
            return Ok(BehaviorDirective::new(dir, speed, stamp));
        }
    }
    let direction = (0..w.len()).find_map(|i| direction_at(&w, i));
    let speed = (0..w.len()).find_map(|i| speed_at(&w, i).map(|(s, _)| s));
    match (direction, speed) {
        (Some(d), Some(s)) => Ok(BehaviorDirective::new(d, s, stamp)),
        (None, _) => Err(ParseFailure {
            raw: text.to_string(),
            reason: "no direction token",
        }),
        (_, None) => Err(ParseFailure {
            raw: text.to_string(),
            reason: "no speed token",
        }),
    }
}

/// `stop` maps to an absolute halt; other speeds shift the current linear
/// velocity, and the direction sets the angular velocity outright.
pub fn directive_to_action(
    d: &BehaviorDirective,
    current: Action,
    limits: &RobotLimits,
    config: &ScoringConfig,
) -> PreferredAction {
    let (v_h, w_h) = if d.speed == Speed::Stop {
        (0.0, 0.0)
    } else {
        let v = (current.v + config.delta_speed(d.speed)).clamp(0.0, limits.v_max);
        let w = config.delta_direction(d.direction).clamp(-limits.w_max, limits.w_max);
        (v, w)
    };
    PreferredAction {
        v_h,
        w_h,
        source_directive: *d,
        stamp: d.stamp,
    }
}

pub fn social_cost(candidate: Action, pref: &PreferredAction, weights: &CostWeights) -> f64 {
    weights.w_l * (candidate.v - pref.v_h).abs() + weights.w_a * (candidate.w - pref.w_h).abs()
}

pub fn should_query(detections: &[SocialEntity], last_query: Option<f64>, now: f64, config: &ScoringConfig) -> bool {
    !detections.is_empty() && last_query.is_none_or(|t| now - t >= config.query_cooldown)
}

/// Weighted sum of the three terms; an infeasible obstacle term dominates.
pub fn total_cost(c_goal: f64, c_obst: Cost, c_social: f64, weights: &CostWeights) -> Cost {
    match c_obst {
        Cost::Infeasible => Cost::Infeasible,
        Cost::Value(o) => Cost::Value(weights.alpha * c_goal + weights.beta * o + weights.gamma * c_social),
    }
}

/// Latest preferred action, shared between the response path and the
/// planner. Writers replace the whole value.
#[derive(Debug, Clone, Default)]
pub struct PreferenceCell(Arc<Mutex<Option<PreferredAction>>>);

impl PreferenceCell {
    pub fn replace(&self, pref: PreferredAction) {
        *self.0.lock().expect("preference cell poisoned") = Some(pref);
    }

    pub fn snapshot(&self) -> Option<PreferredAction> {
        *self.0.lock().expect("preference cell poisoned")
    }
}

/// Gating and bookkeeping for one robot's scoring module.
#[derive(Debug, Clone, Default)]
pub struct ScoringState {
    pub preference: PreferenceCell,
    pub last_query: Option<f64>,
    /// Entity kinds present in the scene of the most recent query.
    pub last_query_kinds: BTreeSet<EntityKind>,
}

impl ScoringState {
    /// Preference still within its time-to-live.
    pub fn fresh_preference(&self, now: f64, config: &ScoringConfig) -> Option<PreferredAction> {
        self.preference.snapshot().filter(|p| p.is_fresh(now, config.staleness_ttl))
    }

    /// True when `detections` contain an entity kind the last query did not see.
    pub fn new_cue(&self, detections: &[SocialEntity]) -> bool {
        self.last_query.is_some() && detections.iter().any(|e| !self.last_query_kinds.contains(&e.kind))
    }

    pub fn record_query(&mut self, now: f64, detections: &[SocialEntity]) {
        self.last_query = Some(now);
        self.last_query_kinds = detections.iter().map(|e| e.kind).collect();
    }
}
