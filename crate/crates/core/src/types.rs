//! Domain value types shared by every subsystem.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};
use crate::geometry::Vec2;

/// Wraps an angle into `(-π, π]`. Angles already in range are returned
/// untouched so the operation is exactly idempotent.
pub fn normalize_angle(theta: f64) -> Result<f64> {
    ensure_finite(theta, "angle")?;
    Ok(wrap(theta))
}

pub(crate) fn wrap(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Robot pose plus the episode clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub stamp: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap(theta),
            stamp: 0.0,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite() && self.stamp.is_finite()
    }
}

/// Linear and angular velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub w: f64,
}

impl Action {
    pub const STOP: Action = Action { v: 0.0, w: 0.0 };

    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotLimits {
    pub v_min: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub accel_v: f64,
    pub accel_w: f64,
    pub radius: f64,
}

impl Default for RobotLimits {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 0.5,
            w_max: 1.0,
            accel_v: 0.5,
            accel_w: 2.0,
            radius: 0.2,
        }
    }
}

impl RobotLimits {
    pub fn validate(&self) -> Result<()> {
        let all = [self.v_min, self.v_max, self.w_max, self.accel_v, self.accel_w, self.radius];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("robot limits must be finite"));
        }
        if self.v_min > self.v_max {
            return Err(invalid("v_min exceeds v_max"));
        }
        if self.w_max < 0.0 || self.accel_v < 0.0 || self.accel_w < 0.0 || self.v_max < 0.0 {
            return Err(invalid("robot limit magnitudes must be non-negative"));
        }
        if self.radius <= 0.0 {
            return Err(invalid("robot radius must be positive"));
        }
        Ok(())
    }

    pub fn admits(&self, a: Action) -> bool {
        a.v >= self.v_min && a.v <= self.v_max && a.w.abs() <= self.w_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Human,
    Door,
    Gesture,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Human => "human",
            EntityKind::Door => "door",
            EntityKind::Gesture => "gesture",
        }
    }
}

/// A detected human, doorway or gesture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialEntity {
    pub kind: EntityKind,
    pub id: String,
    pub position: Vec2,
    #[serde(default)]
    pub velocity: Vec2,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl SocialEntity {
    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite() || !self.velocity.is_finite() {
            return Err(invalid(format!("entity {} has non-finite kinematics", self.id)));
        }
        if self.kind == EntityKind::Gesture && self.attributes.is_empty() {
            return Err(invalid(format!("gesture entity {} carries no attributes", self.id)));
        }
        Ok(())
    }

    pub fn gesture(&self) -> Option<&str> {
        (self.kind == EntityKind::Gesture)
            .then(|| self.attributes.get("gesture").map(String::as_str))
            .flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanBeam {
    pub bearing: f64,
    pub range: f64,
}

/// Payload that accompanies a prompt: either a structured text table or an
/// encoded camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scene {
    Text { text: String },
    Image { mime: String, data: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub robot: RobotState,
    pub current_action: Action,
    pub scan: Vec<ScanBeam>,
    pub detections: Vec<SocialEntity>,
    #[serde(default)]
    pub scene: Option<Scene>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Straight,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Left, Direction::Straight, Direction::Right];

    pub fn token(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Straight => "straight",
            Direction::Right => "right",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speed {
    SlowDown,
    SpeedUp,
    Constant,
    Stop,
}

impl Speed {
    pub const ALL: [Speed; 4] = [Speed::SlowDown, Speed::SpeedUp, Speed::Constant, Speed::Stop];

    pub fn token(self) -> &'static str {
        match self {
            Speed::SlowDown => "slow down",
            Speed::SpeedUp => "speed up",
            Speed::Constant => "constant",
            Speed::Stop => "stop",
        }
    }
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A parsed `Move DIRECTION with SPEED` answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDirective {
    pub direction: Direction,
    pub speed: Speed,
    pub stamp: f64,
}

impl BehaviorDirective {
    pub fn new(direction: Direction, speed: Speed, stamp: f64) -> Self {
        Self {
            direction,
            speed,
            stamp,
        }
    }
}

impl fmt::Display for BehaviorDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Move {} with {}", self.direction, self.speed)
    }
}

/// Weights of the composite cost (`alpha`, `beta`, `gamma`) and of the
/// social deviation term (`w_l`, `w_a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub w_l: f64,
    pub w_a: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 12.0,
            w_l: 1.0,
            w_a: 0.5,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma, self.w_l, self.w_a];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("cost weights must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}

/// A cost term that may be a hard constraint violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    Value(f64),
    Infeasible,
}

impl Cost {
    pub fn value(self) -> Option<f64> {
        match self {
            Cost::Value(v) => Some(v),
            Cost::Infeasible => None,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, Cost::Value(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub stamp: f64,
    pub state: RobotState,
    pub action: Action,
}

/// Fixed-step sequence of poses and the actions applied at them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, state: RobotState, action: Action) {
        self.points.push(TrajectoryPoint {
            stamp: state.stamp,
            state,
            action,
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }
}
