//! Deterministic rule-based stand-in for a vision-language model.

use serde::{Deserialize, Serialize};

use super::{BehaviorProvider, Busy, ProviderFailure, ProviderRequest, ProviderResponse, RequestLifecycle, SceneDescription};
use crate::error::{invalid, Result};
use crate::geometry::Vec2;
use crate::sim::advance;
use crate::social::format_directive;
use crate::types::{wrap, Direction, EntityKind, SocialEntity, Speed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Predicted separation at which an approaching person counts as oncoming.
    pub oncoming_range: f64,
    /// Maximum bearing of an oncoming person from the goal direction, radians.
    pub oncoming_bearing: f64,
    /// Lateral offset at which an oncoming person is passed comfortably.
    pub pass_clearance: f64,
    /// Largest heading deviation from the goal direction while sidestepping.
    pub max_sidestep_angle: f64,
    /// Speed below which sidestepping no longer slows the robot further.
    pub sidestep_speed: f64,
    /// How far ahead, in seconds, the robot's current motion is projected
    /// before steering around people or back toward the goal.
    pub anticipation: f64,
    /// Heading error beyond which the default rule steers back toward the
    /// goal, or around a person standing in the way.
    pub realign_angle: f64,
    /// Maximum distance along the robot's heading to a crossing point.
    pub crossing_range: f64,
    /// Crossing point closer than this calls for a full stop.
    pub imminent_distance: f64,
    /// How far past the crossing point a person must be before the path is clear.
    pub clear_margin: f64,
    /// A person this close to a doorway blocks it.
    pub door_radius: f64,
    /// Doorways farther than this are ignored.
    pub door_range: f64,
    /// Prediction horizon for person positions, seconds.
    pub lookahead: f64,
    /// People slower than this are treated as standing.
    pub moving_speed: f64,
    /// |cos| of the angle between headings separating oncoming from crossing.
    pub crossing_cos: f64,
    /// Below this robot speed with people around, ask to get going again.
    pub resume_speed: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            oncoming_range: 4.0,
            oncoming_bearing: 30f64.to_radians(),
            pass_clearance: 0.8,
            max_sidestep_angle: 15f64.to_radians(),
            sidestep_speed: 0.375,
            anticipation: 1.0,
            realign_angle: 15f64.to_radians(),
            crossing_range: 6.0,
            imminent_distance: 2.5,
            clear_margin: 0.8,
            door_radius: 2.0,
            door_range: 5.0,
            lookahead: 3.0,
            moving_speed: 0.2,
            crossing_cos: std::f64::consts::FRAC_1_SQRT_2,
            resume_speed: 0.1,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.oncoming_range,
            self.oncoming_bearing,
            self.pass_clearance,
            self.max_sidestep_angle,
            self.sidestep_speed,
            self.anticipation,
            self.realign_angle,
            self.crossing_range,
            self.imminent_distance,
            self.clear_margin,
            self.door_radius,
            self.door_range,
            self.lookahead,
            self.moving_speed,
            self.crossing_cos,
            self.resume_speed,
        ];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) || self.crossing_cos > 1.0 {
            return Err(invalid("oracle thresholds must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Smallest distance between two constant-velocity points over `[0, horizon]`.
fn min_separation(p: Vec2, vp: Vec2, q: Vec2, vq: Vec2, horizon: f64) -> f64 {
    let rel = q - p;
    let rv = vq - vp;
    let vv = rv.norm_sq();
    let t = if vv < 1e-12 {
        0.0
    } else {
        (-rel.dot(rv) / vv).clamp(0.0, horizon)
    };
    (rel + rv * t).norm()
}

fn humans(scene: &SceneDescription) -> impl Iterator<Item = &SocialEntity> {
    scene.entities.iter().filter(|e| e.kind == EntityKind::Human)
}

/// Maps a structured scene to a directive in the answer format. Rules are
/// checked in order: stop gesture, blocked doorway, oncoming person,
/// crossing person, resume after a halt, keep going.
pub fn oracle_respond(scene: &SceneDescription, config: &OracleConfig) -> String {
    let (direction, speed) = decide(scene, config);
    format_directive(direction, speed)
}

fn decide(scene: &SceneDescription, cfg: &OracleConfig) -> (Direction, Speed) {
    let p = scene.robot.position();
    let heading = scene.robot.heading();
    let robot_vel = heading * scene.velocity.v;

    if scene.entities.iter().any(|e| e.gesture() == Some("stop")) {
        return (Direction::Straight, Speed::Stop);
    }

    for door in scene.entities.iter().filter(|e| e.kind == EntityKind::Door) {
        let to_door = door.position - p;
        if to_door.dot(heading) <= 0.0 || to_door.norm() > cfg.door_range {
            continue;
        }
        let blocked = humans(scene).any(|h| {
            min_separation(door.position, Vec2::ZERO, h.position, h.velocity, cfg.lookahead) <= cfg.door_radius
        });
        if blocked {
            return (Direction::Straight, Speed::Stop);
        }
    }

    for h in humans(scene) {
        let speed = h.velocity.norm();
        if speed <= cfg.moving_speed {
            continue;
        }
        let dir = h.velocity * (1.0 / speed);
        let rel = h.position - p;
        // Measured from the direction of travel toward the goal, so turning
        // aside does not by itself end the encounter.
        let to_goal = scene.goal - p;
        let goal_angle = to_goal.y.atan2(to_goal.x);
        let bearing = wrap(rel.y.atan2(rel.x) - goal_angle);
        let approaching = h.velocity.dot(-rel) > 0.0;
        if dir.dot(heading) < -cfg.crossing_cos
            && approaching
            && bearing.abs() < cfg.oncoming_bearing
            && min_separation(p, robot_vel, h.position, h.velocity, cfg.lookahead) <= cfg.oncoming_range
        {
            // Sidestep until the person is far enough to the left, without
            // turning away from the goal more than needed.
            let lateral = to_goal.normalized().map_or(0.0, |g| g.cross(rel));
            let turned = wrap(scene.robot.theta - goal_angle);
            if lateral >= cfg.pass_clearance {
                return (Direction::Straight, Speed::SlowDown);
            }
            let speed = if scene.velocity.v > cfg.sidestep_speed {
                Speed::SlowDown
            } else {
                Speed::Constant
            };
            let side = if turned > -cfg.max_sidestep_angle {
                Direction::Right
            } else {
                Direction::Straight
            };
            return (side, speed);
        }
    }

    for h in humans(scene) {
        let speed = h.velocity.norm();
        if speed <= cfg.moving_speed {
            continue;
        }
        let dir = h.velocity * (1.0 / speed);
        let denom = heading.cross(dir);
        if dir.dot(heading).abs() > cfg.crossing_cos || denom.abs() < 1e-9 {
            continue;
        }
        let rel = h.position - p;
        // Robot reaches the crossing point after `s` metres, the person after `t`.
        let s = rel.cross(dir) / denom;
        let t = rel.cross(heading) / denom;
        if s > 0.0 && s <= cfg.crossing_range && t > -cfg.clear_margin && t <= cfg.crossing_range {
            // Moving toward the robot's left means the person came from its right.
            let side = if denom > 0.0 { Direction::Right } else { Direction::Left };
            let speed = if s <= cfg.imminent_distance {
                Speed::Stop
            } else {
                Speed::SlowDown
            };
            return (side, speed);
        }
    }

    let direction = steer_toward(scene, cfg);
    if !scene.entities.is_empty() && scene.velocity.v < cfg.resume_speed {
        return (direction, Speed::SpeedUp);
    }
    (direction, Speed::Constant)
}

/// Point the robot should head for: the goal, or a spot to the right of
/// the nearest person standing near the straight line to it.
fn aim_point(scene: &SceneDescription, cfg: &OracleConfig) -> Vec2 {
    let p = scene.robot.position();
    let Some(g) = (scene.goal - p).normalized() else {
        return scene.goal;
    };
    let right = Vec2::new(g.y, -g.x);
    humans(scene)
        .filter(|h| h.velocity.norm() <= cfg.moving_speed)
        .filter_map(|h| {
            let rel = h.position - p;
            let ahead = rel.dot(g);
            (ahead > 0.0 && rel.norm() <= cfg.oncoming_range && g.cross(rel).abs() < cfg.pass_clearance)
                .then_some((ahead, h.position))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(scene.goal, |(_, c)| c + right * cfg.pass_clearance)
}

fn steer_toward(scene: &SceneDescription, cfg: &OracleConfig) -> Direction {
    // Judge from where the current motion will have taken the robot, so a
    // turn already under way is not asked for again.
    let steps = (cfg.anticipation / 0.1).round() as usize;
    let ahead = (0..steps).fold(scene.robot, |s, _| advance(&s, scene.velocity, 0.1));
    let to_aim = aim_point(scene, cfg) - ahead.position();
    let err = wrap(to_aim.y.atan2(to_aim.x) - ahead.theta);
    if err > cfg.realign_angle {
        Direction::Left
    } else if err < -cfg.realign_angle {
        Direction::Right
    } else {
        Direction::Straight
    }
}

/// Answers every request at its issue time from the attached scene.
#[derive(Debug, Clone)]
pub struct OracleProvider {
    config: OracleConfig,
    lifecycle: RequestLifecycle,
}

impl OracleProvider {
    pub fn new(config: OracleConfig) -> Self {
        Self {
            config,
            lifecycle: RequestLifecycle::new(f64::INFINITY),
        }
    }
}

impl BehaviorProvider for OracleProvider {
    fn submit(&mut self, req: ProviderRequest) -> std::result::Result<(), Busy> {
        self.lifecycle.begin(req.request_id, req.issued_at)?;
        let result = req
            .scene
            .as_ref()
            .and_then(SceneDescription::from_scene)
            .map(|scene| oracle_respond(&scene, &self.config))
            .ok_or_else(|| ProviderFailure::Transport("request carries no structured scene".into()));
        self.lifecycle.complete(req.request_id, result, req.issued_at);
        Ok(())
    }

    fn poll_latest(&mut self, _now: f64) -> Option<ProviderResponse> {
        self.lifecycle.take()
    }

    fn supersede(&mut self) -> bool {
        self.lifecycle.supersede();
        true
    }
}
