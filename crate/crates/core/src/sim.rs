//! Deterministic 2D world: unicycle kinematics, scripted pedestrians, range
//! scanning, the detection oracle and collision checks.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::{FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};
use crate::geometry::{ray_circle, ray_segment, segment_blocked, Rect, Segment, Vec2};
use crate::types::{wrap, Action, EntityKind, RobotLimits, RobotState, ScanBeam, SocialEntity};

pub const DEFAULT_HUMAN_RADIUS: f64 = 0.3;

/// Unicycle update with a straight segment per step.
pub fn step_robot(state: &RobotState, action: Action, dt: f64) -> Result<RobotState> {
    ensure_finite(dt, "dt")?;
    ensure_finite(action.v, "linear velocity")?;
    ensure_finite(action.w, "angular velocity")?;
    if !state.is_finite() {
        return Err(crate::Error::NonFinite("robot state"));
    }
    if dt <= 0.0 {
        return Err(invalid("dt must be positive"));
    }
    Ok(advance(state, action, dt))
}

pub(crate) fn advance(state: &RobotState, action: Action, dt: f64) -> RobotState {
    RobotState {
        x: state.x + action.v * state.theta.cos() * dt,
        y: state.y + action.v * state.theta.sin() * dt,
        theta: wrap(state.theta + action.w * dt),
        stamp: state.stamp + dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doorway {
    pub center: Vec2,
    pub width: f64,
    /// Direction of passage through the opening.
    pub orientation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Trigger {
    /// Fires once the world clock reaches `at`.
    Time { at: f64 },
    /// Fires once the robot centre is within `distance` of the pedestrian.
    RobotWithin { distance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventAction {
    EmitGesture { name: String, duration: f64 },
    Pause { duration: f64 },
    Resume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub trigger: Trigger,
    pub action: EventAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianScript {
    pub id: String,
    /// The first waypoint is the start position.
    pub waypoints: Vec<Vec2>,
    pub speed: f64,
    #[serde(default = "default_human_radius")]
    pub radius: f64,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

fn default_human_radius() -> f64 {
    DEFAULT_HUMAN_RADIUS
}

impl PedestrianScript {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(invalid(format!("pedestrian {} has no waypoints", self.id)));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(invalid(format!("pedestrian {} speed must be >= 0", self.id)));
        }
        if self.radius.is_nan() || self.radius <= 0.0 {
            return Err(invalid(format!("pedestrian {} radius must be > 0", self.id)));
        }
        Ok(())
    }
}

/// Static description of a world, as stored in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub bounds: Rect,
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub doorways: Vec<Doorway>,
    #[serde(default)]
    pub pedestrians: Vec<PedestrianScript>,
}

impl WorldSpec {
    pub fn open(bounds: Rect) -> Self {
        Self {
            bounds,
            segments: Vec::new(),
            doorways: Vec::new(),
            pedestrians: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pedestrians {
            p.validate()?;
        }
        let inside = |p: Vec2| self.bounds.contains(p);
        if !self.segments.iter().all(|s| inside(s.a) && inside(s.b))
            || !self.doorways.iter().all(|d| inside(d.center))
            || !self.pedestrians.iter().flat_map(|p| &p.waypoints).all(|w| inside(*w))
        {
            return Err(invalid("world geometry extends outside its bounds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveGesture {
    pub name: String,
    pub onset: f64,
    pub until: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub script: PedestrianScript,
    pub position: Vec2,
    pub velocity: Vec2,
    next_waypoint: usize,
    paused_until: Option<f64>,
    gesture: Option<ActiveGesture>,
    fired: Vec<bool>,
}

impl Pedestrian {
    fn new(script: PedestrianScript) -> Self {
        let position = script.waypoints[0];
        let fired = vec![false; script.events.len()];
        Self {
            script,
            position,
            velocity: Vec2::ZERO,
            next_waypoint: 1,
            paused_until: None,
            gesture: None,
            fired,
        }
    }

    pub fn id(&self) -> &str {
        &self.script.id
    }

    pub fn radius(&self) -> f64 {
        self.script.radius
    }

    pub fn active_gesture(&self, now: f64) -> Option<&ActiveGesture> {
        self.gesture.as_ref().filter(|g| now < g.until)
    }

    pub fn finished(&self) -> bool {
        self.next_waypoint >= self.script.waypoints.len()
    }

    fn is_paused(&self, now: f64) -> bool {
        self.paused_until.is_some_and(|t| now < t)
    }

    fn walk(&mut self, now: f64, dt: f64) {
        let start = self.position;
        if !self.is_paused(now) {
            let mut budget = self.script.speed * dt;
            while budget > 0.0 && !self.finished() {
                let target = self.script.waypoints[self.next_waypoint];
                let to_target = target - self.position;
                let dist = to_target.norm();
                if dist <= budget {
                    self.position = target;
                    budget -= dist;
                    self.next_waypoint += 1;
                } else {
                    self.position = self.position + to_target * (budget / dist);
                    budget = 0.0;
                }
            }
        }
        self.velocity = (self.position - start) * (1.0 / dt);
    }
}

/// Record of a scripted event that fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredEvent {
    pub time: f64,
    pub pedestrian: String,
    pub action: EventAction,
}

/// Snapshot of the world at `time`. Stepping produces a new snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub time: f64,
    pub bounds: Rect,
    pub segments: Vec<Segment>,
    pub doorways: Vec<Doorway>,
    pub pedestrians: Vec<Pedestrian>,
    pub events: Vec<FiredEvent>,
}

impl WorldModel {
    pub fn new(spec: &WorldSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            time: 0.0,
            bounds: spec.bounds,
            segments: spec.segments.clone(),
            doorways: spec.doorways.clone(),
            pedestrians: spec.pedestrians.iter().cloned().map(Pedestrian::new).collect(),
            events: Vec::new(),
        })
    }

    pub fn pedestrian(&self, id: &str) -> Option<&Pedestrian> {
        self.pedestrians.iter().find(|p| p.id() == id)
    }

    /// First onset time of a gesture with the given name, if any fired.
    pub fn gesture_onset(&self, name: &str) -> Option<f64> {
        self.events.iter().find_map(|e| match &e.action {
            EventAction::EmitGesture { name: n, .. } if n == name => Some(e.time),
            _ => None,
        })
    }
}

/// Advances every pedestrian by one step. Events are evaluated against the
/// pre-step state and each fires at most once.
pub fn step_world(world: &WorldModel, robot: &RobotState, dt: f64) -> WorldModel {
    let mut next = world.clone();
    let now = world.time;
    let robot_pos = robot.position();
    for ped in &mut next.pedestrians {
        for i in 0..ped.script.events.len() {
            if ped.fired[i] {
                continue;
            }
            let event = &ped.script.events[i];
            let due = match event.trigger {
                Trigger::Time { at } => now >= at,
                Trigger::RobotWithin { distance } => ped.position.distance(robot_pos) <= distance,
            };
            if !due {
                continue;
            }
            ped.fired[i] = true;
            let action = event.action.clone();
            match &action {
                EventAction::EmitGesture { name, duration } => {
                    ped.gesture = Some(ActiveGesture {
                        name: name.clone(),
                        onset: now,
                        until: now + duration,
                    });
                }
                EventAction::Pause { duration } => ped.paused_until = Some(now + duration),
                EventAction::Resume => ped.paused_until = None,
            }
            next.events.push(FiredEvent {
                time: now,
                pedestrian: ped.script.id.clone(),
                action,
            });
        }
        ped.walk(now, dt);
    }
    next.time = now + dt;
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub beams: usize,
    pub max_range: f64,
    /// Half-angle of the detection cone.
    pub fov_detect: f64,
    pub detect_range: f64,
    pub detect_latency: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            beams: 120,
            max_range: 10.0,
            fov_detect: FRAC_PI_4,
            detect_range: 8.0,
            detect_latency: 0.1,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if self.beams == 0 {
            return Err(invalid("sensor needs at least one beam"));
        }
        if !(self.max_range > 0.0 && self.fov_detect > 0.0 && self.detect_range > 0.0) {
            return Err(invalid("sensor ranges and angles must be positive"));
        }
        if self.detect_latency.is_nan() || self.detect_latency < 0.0 {
            return Err(invalid("detection latency must be non-negative"));
        }
        Ok(())
    }

    /// Beam bearings, strictly increasing over `(-π, π]`.
    pub fn bearings(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.beams as f64;
        (0..self.beams).map(move |i| -std::f64::consts::PI + (i as f64 + 1.0) * TAU / n)
    }
}

/// Simulated 360° range scan against walls and pedestrian discs.
pub fn render_scan(world: &WorldModel, robot: &RobotState, sensor: &SensorModel) -> Vec<ScanBeam> {
    let origin = robot.position();
    sensor
        .bearings()
        .map(|bearing| {
            let dir = Vec2::from_angle(robot.theta + bearing);
            let walls = world.segments.iter().filter_map(|s| ray_segment(origin, dir, s));
            let people = world
                .pedestrians
                .iter()
                .filter_map(|p| ray_circle(origin, dir, p.position, p.radius()));
            let range = walls
                .chain(people)
                .fold(sensor.max_range, f64::min)
                .clamp(0.0, sensor.max_range);
            ScanBeam { bearing, range }
        })
        .collect()
}

fn visible(world: &WorldModel, robot: &RobotState, sensor: &SensorModel, target: Vec2) -> bool {
    let rel = target - robot.position();
    let dist = rel.norm();
    if dist > sensor.detect_range {
        return false;
    }
    let bearing = wrap(rel.y.atan2(rel.x) - robot.theta);
    bearing.abs() <= sensor.fov_detect && !segment_blocked(robot.position(), target, &world.segments)
}

/// Instantaneous detection oracle: humans, their active gestures and
/// doorways inside the camera cone and not hidden behind walls.
pub fn detect_entities(world: &WorldModel, robot: &RobotState, sensor: &SensorModel) -> Vec<SocialEntity> {
    let mut out = Vec::new();
    for ped in &world.pedestrians {
        if !visible(world, robot, sensor, ped.position) {
            continue;
        }
        out.push(SocialEntity {
            kind: EntityKind::Human,
            id: ped.id().to_string(),
            position: ped.position,
            velocity: ped.velocity,
            attributes: BTreeMap::new(),
        });
        if let Some(g) = ped.active_gesture(world.time) {
            let mut attributes = BTreeMap::new();
            attributes.insert("gesture".to_string(), g.name.clone());
            out.push(SocialEntity {
                kind: EntityKind::Gesture,
                id: format!("{}/gesture", ped.id()),
                position: ped.position,
                velocity: ped.velocity,
                attributes,
            });
        }
    }
    for (i, door) in world.doorways.iter().enumerate() {
        if !visible(world, robot, sensor, door.center) {
            continue;
        }
        let mut attributes = BTreeMap::new();
        attributes.insert("width".to_string(), format!("{:.2}", door.width));
        out.push(SocialEntity {
            kind: EntityKind::Door,
            id: format!("door{i}"),
            position: door.center,
            velocity: Vec2::ZERO,
            attributes,
        });
    }
    out
}

/// Delays detector output by a fixed latency.
#[derive(Debug, Clone)]
pub struct DetectionBuffer {
    latency: f64,
    queue: VecDeque<(f64, Vec<SocialEntity>)>,
    current: Vec<SocialEntity>,
}

impl DetectionBuffer {
    pub fn new(latency: f64) -> Self {
        Self {
            latency,
            queue: VecDeque::new(),
            current: Vec::new(),
        }
    }

    pub fn push(&mut self, stamp: f64, detections: Vec<SocialEntity>) {
        self.queue.push_back((stamp, detections));
    }

    /// Detections captured at or before `now - latency`.
    pub fn available(&mut self, now: f64) -> &[SocialEntity] {
        while let Some((stamp, _)) = self.queue.front() {
            if *stamp <= now - self.latency + 1e-9 {
                let (_, dets) = self.queue.pop_front().expect("front checked");
                self.current = dets;
            } else {
                break;
            }
        }
        &self.current
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum CollisionReport {
    None,
    WithEntity(String),
    WithStatic,
}

impl CollisionReport {
    pub fn is_collision(&self) -> bool {
        !matches!(self, CollisionReport::None)
    }
}

/// Contact test with strict inequality at the boundary.
pub fn check_collision(world: &WorldModel, robot: &RobotState, limits: &RobotLimits) -> CollisionReport {
    let p = robot.position();
    if let Some(ped) = world
        .pedestrians
        .iter()
        .find(|ped| p.distance(ped.position) < limits.radius + ped.radius())
    {
        return CollisionReport::WithEntity(ped.id().to_string());
    }
    if world.segments.iter().any(|s| s.distance_to(p) < limits.radius) {
        return CollisionReport::WithStatic;
    }
    CollisionReport::None
}
