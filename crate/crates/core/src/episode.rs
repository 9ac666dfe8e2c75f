//! Closed-loop episode runner: sense, gate, query, plan, step.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dwa::{plan, DwaConfig};
use crate::error::{invalid, Result};
use crate::geometry::Vec2;
use crate::metrics::{classify_crossed_behind, classify_pass_side, waited_at_door, PassSide, Track};
use crate::provider::{BehaviorProvider, ProviderFailure, ProviderRequest, SceneDescription, TranscriptRecord};
use crate::scenario::{ScenarioName, ScenarioSpec, STOP_GESTURE};
use crate::sim::{check_collision, detect_entities, render_scan, step_robot, step_world, DetectionBuffer, SensorModel, WorldModel};
use crate::social::{
    build_prompt, directive_to_action, parse_response, should_query, social_cost, PromptTemplate, ScoringConfig,
    ScoringState,
};
use crate::types::{Action, CostWeights, Observation, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionConfig {
    /// Constant-velocity look-ahead, seconds.
    pub horizon: f64,
    /// Distance beyond contact that triggers an intervention, metres.
    pub buffer: f64,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            horizon: 0.3,
            buffer: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureCheck {
    /// Speed below which the robot counts as halted.
    pub stop_speed: f64,
    /// Time allowed between gesture onset and the halt.
    pub window: f64,
}

impl Default for GestureCheck {
    fn default() -> Self {
        Self {
            stop_speed: 0.05,
            window: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub dwa: DwaConfig,
    pub weights: CostWeights,
    pub sensor: SensorModel,
    pub scoring: ScoringConfig,
    pub template: PromptTemplate,
    pub intervention: InterventionConfig,
    pub gesture: GestureCheck,
    /// Sleep so that simulated time tracks wall-clock time.
    pub real_time: bool,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.dwa.validate()?;
        self.weights.validate()?;
        self.sensor.validate()?;
        self.scoring.validate()?;
        self.template.validate()?;
        if !(self.intervention.horizon >= 0.0 && self.intervention.buffer >= 0.0) {
            return Err(invalid("intervention parameters must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    GoalReached,
    Collision,
    Intervention,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectiveOutcome {
    Applied,
    ParseFailure,
    ProviderError,
    /// Arrived later than the staleness limit allows.
    Stale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectiveEvent {
    pub t: f64,
    pub request_id: u64,
    pub latency: f64,
    pub raw_text: String,
    pub outcome: DirectiveOutcome,
    pub directive: Option<String>,
}

/// Per-step record for the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
    /// Cost terms of the chosen candidate; absent for the emergency rotation.
    pub c_goal: Option<f64>,
    pub c_obst: Option<f64>,
    pub c_social: Option<f64>,
    /// Directive whose preferred action shaped this step.
    pub directive: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub success: bool,
    pub reached_goal: bool,
    pub collision: bool,
    pub intervention: bool,
    pub end_reason: EndReason,
    pub time_to_goal: Option<f64>,
    pub min_human_distance: f64,
    pub pass_side: PassSide,
    pub gesture_onset: Option<f64>,
    pub stop_latency: Option<f64>,
    pub crossed_behind: Option<bool>,
    pub waited_at_door: Option<bool>,
    pub trajectory: Trajectory,
    pub steps: Vec<StepRecord>,
    pub humans: Vec<Track>,
    pub directive_log: Vec<DirectiveEvent>,
    pub transcript: Vec<TranscriptRecord>,
}

/// Smallest distance between two constant-velocity points over `[0, horizon]`.
fn projected_min_distance(p: Vec2, vp: Vec2, q: Vec2, vq: Vec2, horizon: f64) -> f64 {
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

/// Runs one episode. Without a provider the social term is switched off
/// entirely and the planner runs as plain DWA.
pub fn run_episode(
    spec: &ScenarioSpec,
    config: &EpisodeConfig,
    mut provider: Option<&mut dyn BehaviorProvider>,
) -> Result<EpisodeResult> {
    spec.validate()?;
    config.validate()?;
    let dt = config.dwa.dt;
    let limits = config.dwa.limits;
    let max_steps = (spec.time_limit / dt).round() as usize;

    let mut world = WorldModel::new(&spec.world)?;
    let mut robot = spec.robot_start;
    robot.stamp = world.time;
    let mut action = Action::STOP;
    let mut buffer = DetectionBuffer::new(config.sensor.detect_latency);
    let mut scoring = ScoringState::default();
    let mut next_request = 1u64;
    let mut pending: BTreeMap<u64, TranscriptRecord> = BTreeMap::new();

    let mut trajectory = Trajectory::new(dt);
    let mut steps = Vec::with_capacity(max_steps);
    let mut humans: Vec<Track> = world.pedestrians.iter().map(|p| Track::new(p.id(), p.radius())).collect();
    let mut directive_log = Vec::new();
    let mut transcript = Vec::new();

    let record_humans = |humans: &mut Vec<Track>, world: &WorldModel| {
        for (track, ped) in humans.iter_mut().zip(&world.pedestrians) {
            track.push(world.time, ped.position, ped.velocity);
        }
    };
    trajectory.push(robot, action);
    record_humans(&mut humans, &world);

    let mut end_reason = EndReason::TimeLimit;
    let mut reached_at = None;
    let mut collision = false;
    let mut intervention = false;
    let mut stop_latency = None;
    let clock = Instant::now();

    for _ in 0..max_steps {
        let now = world.time;
        let scan = render_scan(&world, &robot, &config.sensor);
        buffer.push(now, detect_entities(&world, &robot, &config.sensor));
        let detections = buffer.available(now).to_vec();
        let obs = Observation {
            robot,
            current_action: action,
            scan,
            detections,
            scene: None,
        };

        if let Some(p) = provider.as_deref_mut() {
            for id in p.drain_abandoned() {
                if let Some(mut rec) = pending.remove(&id) {
                    rec.error = Some(ProviderFailure::Superseded);
                    transcript.push(rec);
                }
            }
            if let Some(resp) = p.poll_latest(now) {
                if let Some(mut rec) = pending.remove(&resp.request_id) {
                    rec.completed_at = Some(resp.completed_at);
                    rec.received_at = Some(now);
                    rec.latency = Some(resp.latency);
                    rec.raw_response = resp.error.is_none().then(|| resp.raw_text.clone());
                    rec.error = resp.error.clone();
                    transcript.push(rec);
                }
                let mut event = DirectiveEvent {
                    t: now,
                    request_id: resp.request_id,
                    latency: resp.latency,
                    raw_text: resp.raw_text.clone(),
                    outcome: DirectiveOutcome::ProviderError,
                    directive: None,
                };
                if resp.error.is_none() {
                    if resp.latency > config.scoring.staleness_ttl {
                        event.outcome = DirectiveOutcome::Stale;
                    } else {
                        match parse_response(&resp.raw_text, now) {
                            Ok(d) => {
                                let pref = directive_to_action(&d, action, &limits, &config.scoring);
                                scoring.preference.replace(pref);
                                event.outcome = DirectiveOutcome::Applied;
                                event.directive = Some(d.to_string());
                            }
                            Err(e) => {
                                log::debug!("{e}");
                                event.outcome = DirectiveOutcome::ParseFailure;
                            }
                        }
                    }
                }
                directive_log.push(event);
            }

            let new_cue = scoring.new_cue(&obs.detections);
            if should_query(&obs.detections, scoring.last_query, now, &config.scoring) || new_cue {
                if new_cue {
                    p.supersede();
                }
                let prompt = build_prompt(&obs, &config.template, &config.scoring);
                let scene = SceneDescription::from_observation(&obs, spec.goal).to_scene();
                let id = next_request;
                let req = ProviderRequest::new(prompt, Some(scene), now, id)?;
                let record = TranscriptRecord {
                    request_id: id,
                    issued_at: now,
                    completed_at: None,
                    received_at: None,
                    latency: None,
                    prompt: req.prompt.clone(),
                    scene: match &req.scene {
                        Some(crate::types::Scene::Text { text }) => Some(text.clone()),
                        _ => None,
                    },
                    raw_response: None,
                    error: None,
                };
                if p.submit(req).is_ok() {
                    next_request += 1;
                    pending.insert(id, record);
                    scoring.record_query(now, &obs.detections);
                }
                // Completions from instant providers are picked up next step.
            }
        }

        let pref = provider
            .as_ref()
            .and_then(|_| scoring.fresh_preference(now, &config.scoring));
        let weights = config.weights;
        let social = pref.map(|pref| move |a: Action| social_cost(a, &pref, &weights));
        let result = plan(
            &obs,
            spec.goal,
            &config.weights,
            &config.dwa,
            social.as_ref().map(|f| f as &dyn Fn(Action) -> f64),
        );
        action = result.best;
        let eval = result.best_eval();
        let next_robot = step_robot(&robot, action, dt)?;
        let next_world = step_world(&world, &robot, dt);
        robot = next_robot;
        world = next_world;

        trajectory.push(robot, action);
        record_humans(&mut humans, &world);
        steps.push(StepRecord {
            t: robot.stamp,
            x: robot.x,
            y: robot.y,
            theta: robot.theta,
            v: action.v,
            w: action.w,
            c_goal: eval.map(|e| e.c_goal),
            c_obst: eval.and_then(|e| e.c_obst.value()),
            c_social: eval.map(|e| e.c_social),
            directive: pref.map(|p| p.source_directive.to_string()),
        });

        if stop_latency.is_none() {
            if let Some(onset) = world.gesture_onset(STOP_GESTURE) {
                if action.v.abs() < config.gesture.stop_speed {
                    stop_latency = Some((world.time - onset).max(0.0));
                }
            }
        }

        if check_collision(&world, &robot, &limits).is_collision() {
            collision = true;
            end_reason = EndReason::Collision;
            break;
        }
        let heading = robot.heading() * action.v;
        let imminent = world.pedestrians.iter().any(|ped| {
            projected_min_distance(robot.position(), heading, ped.position, ped.velocity, config.intervention.horizon)
                < limits.radius + ped.radius() + config.intervention.buffer
        });
        if imminent {
            intervention = true;
            end_reason = EndReason::Intervention;
            break;
        }
        if robot.position().distance(spec.goal) <= config.dwa.goal_tolerance {
            reached_at = Some(world.time);
            end_reason = EndReason::GoalReached;
            break;
        }
        if config.real_time {
            let target = Duration::from_secs_f64(world.time);
            if let Some(wait) = target.checked_sub(clock.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }

    for (_, mut rec) in pending {
        rec.error = Some(ProviderFailure::Superseded);
        transcript.push(rec);
    }
    transcript.sort_by_key(|r| r.request_id);

    let robot_track = Track::from_trajectory(&trajectory, limits.radius);
    let human = humans.first();
    let (min_human_distance, pass_side) = match human {
        Some(h) => classify_pass_side(&robot_track, h),
        None => (f64::INFINITY, PassSide::None),
    };
    let gesture_onset = world.gesture_onset(STOP_GESTURE);
    let reacted = gesture_onset.is_none()
        || stop_latency.is_some_and(|l| l <= config.gesture.window);
    let crossed_behind = match (spec.junction, human) {
        (Some(j), Some(h)) => Some(classify_crossed_behind(&robot_track, h, j)),
        _ => None,
    };
    let waited = match (spec.world.doorways.first(), human) {
        (Some(door), Some(h)) => Some(waited_at_door(&robot_track, h, door)),
        _ => None,
    };
    let reached_goal = reached_at.is_some();
    let stop_latency = if spec.name == ScenarioName::FrontalGesture { stop_latency } else { None };

    Ok(EpisodeResult {
        scenario: spec.name,
        seed: spec.seed,
        success: reached_goal && reacted,
        reached_goal,
        collision,
        intervention,
        end_reason,
        time_to_goal: reached_at,
        min_human_distance,
        pass_side,
        gesture_onset,
        stop_latency,
        crossed_behind,
        waited_at_door: waited,
        trajectory,
        steps,
        humans,
        directive_log,
        transcript,
    })
}
