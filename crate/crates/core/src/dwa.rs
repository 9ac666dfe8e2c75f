//! Dynamic-window local planner.
//!
//! Every admissible velocity pair in the acceleration-limited window is
//! rolled out for a short horizon and scored with the composite cost
//! `alpha * goal + beta * obstacle + gamma * social`. The social term is
//! supplied by the caller so the planner stays agnostic of where the
//! preferred action comes from.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Vec2;
use crate::sim::{advance, DEFAULT_HUMAN_RADIUS};
use crate::social::total_cost;
use crate::types::{wrap, Action, Cost, CostWeights, EntityKind, Observation, RobotLimits, RobotState, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalCostParams {
    pub k_dist: f64,
    pub k_head: f64,
}

impl Default for GoalCostParams {
    fn default() -> Self {
        Self {
            k_dist: 1.0,
            k_head: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObstacleCostParams {
    /// Extra clearance beyond the robot radius below which a rollout is infeasible.
    pub margin: f64,
    /// Upper bound on the reciprocal-clearance cost.
    pub clamp: f64,
    /// Clearance reported when nothing is in range.
    pub max_range: f64,
}

impl Default for ObstacleCostParams {
    fn default() -> Self {
        Self {
            margin: 0.05,
            clamp: 100.0,
            max_range: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaConfig {
    pub dt: f64,
    pub horizon: f64,
    pub v_samples: usize,
    pub w_samples: usize,
    pub limits: RobotLimits,
    pub goal_tolerance: f64,
    pub goal_cost: GoalCostParams,
    pub obstacle_cost: ObstacleCostParams,
    /// Radius assumed for detected humans when building the obstacle set.
    pub human_radius: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            horizon: 2.0,
            v_samples: 11,
            w_samples: 21,
            limits: RobotLimits::default(),
            goal_tolerance: 0.3,
            goal_cost: GoalCostParams::default(),
            obstacle_cost: ObstacleCostParams::default(),
            human_radius: DEFAULT_HUMAN_RADIUS,
        }
    }
}

impl DwaConfig {
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        if self.v_samples < 2 || self.w_samples < 2 {
            return Err(invalid("the velocity grid needs at least two samples per axis"));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(invalid("dt and horizon must be positive"));
        }
        let steps = (self.horizon / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.horizon).abs() > 1e-9 {
            return Err(invalid("horizon must be a positive multiple of dt"));
        }
        if self.goal_tolerance.is_nan() || self.goal_tolerance <= 0.0 {
            return Err(invalid("goal tolerance must be positive"));
        }
        let o = &self.obstacle_cost;
        if !(o.margin >= 0.0 && o.clamp > 0.0 && o.max_range > 0.0) {
            return Err(invalid("obstacle cost parameters out of range"));
        }
        Ok(())
    }

    pub fn rollout_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Velocity grid reachable from `current` within one control step, v-major
/// and ascending on both axes, endpoints included.
pub fn dynamic_window(current: Action, config: &DwaConfig) -> Vec<Action> {
    let l = &config.limits;
    let (v_lo, v_hi) = window_axis(current.v, l.accel_v * config.dt, l.v_min, l.v_max);
    let (w_lo, w_hi) = window_axis(current.w, l.accel_w * config.dt, -l.w_max, l.w_max);
    let vs = linspace(v_lo, v_hi, config.v_samples);
    let ws = linspace(w_lo, w_hi, config.w_samples);
    vs.iter()
        .flat_map(|&v| ws.iter().map(move |&w| Action::new(v, w)))
        .collect()
}

fn window_axis(current: f64, reach: f64, min: f64, max: f64) -> (f64, f64) {
    let lo = (current - reach).max(min);
    let hi = (current + reach).min(max);
    if lo <= hi {
        (lo, hi)
    } else if current < min {
        (min, min)
    } else {
        (max, max)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / last })
        .collect()
}

/// Constant-action forward simulation; the returned poses exclude the start.
pub fn rollout(state: &RobotState, action: Action, config: &DwaConfig) -> Trajectory {
    let mut traj = Trajectory::new(config.dt);
    let mut s = *state;
    for _ in 0..config.rollout_steps() {
        s = advance(&s, action, config.dt);
        traj.push(s, action);
    }
    traj
}

pub fn goal_cost(traj: &Trajectory, goal: Vec2, params: &GoalCostParams) -> f64 {
    let end = traj.last().expect("rollout is never empty").state;
    let to_goal = goal - end.position();
    let dist = to_goal.norm();
    let bearing_err = if dist < 1e-12 {
        0.0
    } else {
        wrap(to_goal.y.atan2(to_goal.x) - end.theta).abs()
    };
    params.k_dist * dist + params.k_head * bearing_err
}

/// Obstacle points from the latest scan plus discs for detected humans.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObstacleSet {
    pub points: Vec<Vec2>,
    pub discs: Vec<(Vec2, f64)>,
}

impl ObstacleSet {
    pub fn from_observation(obs: &Observation, max_range: f64, human_radius: f64) -> Self {
        let origin = obs.robot.position();
        let points = obs
            .scan
            .iter()
            .filter(|b| b.range < max_range)
            .map(|b| origin + Vec2::from_angle(obs.robot.theta + b.bearing) * b.range)
            .collect();
        let discs = obs
            .detections
            .iter()
            .filter(|e| e.kind == EntityKind::Human)
            .map(|e| (e.position, human_radius))
            .collect();
        Self { points, discs }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.discs.is_empty()
    }
}

/// Obstacles sorted by a lower bound on their distance from a reference
/// point, so clearance queries near that point can stop early.
struct SortedObstacles {
    origin: Vec2,
    /// (distance from origin to the nearest surface point, centre, radius)
    items: Vec<(f64, Vec2, f64)>,
}

impl SortedObstacles {
    fn new(set: &ObstacleSet, origin: Vec2) -> Self {
        let mut items: Vec<(f64, Vec2, f64)> = set
            .points
            .iter()
            .map(|&p| (p.distance(origin), p, 0.0))
            .chain(set.discs.iter().map(|&(c, r)| (c.distance(origin) - r, c, r)))
            .collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { origin, items }
    }

    /// Exact distance from `p` to the nearest obstacle surface, minus `radius`.
    fn clearance(&self, p: Vec2, radius: f64, cap: f64) -> f64 {
        let travel = p.distance(self.origin);
        let mut best = cap;
        for &(lower, centre, r) in &self.items {
            if lower - travel - radius >= best {
                break;
            }
            best = best.min(p.distance(centre) - r - radius);
        }
        best
    }
}

pub fn obstacle_cost(
    traj: &Trajectory,
    obstacles: &ObstacleSet,
    limits: &RobotLimits,
    params: &ObstacleCostParams,
) -> Cost {
    let origin = traj.points.first().map(|p| p.state.position()).unwrap_or_default();
    let sorted = SortedObstacles::new(obstacles, origin);
    obstacle_cost_sorted(traj, &sorted, limits, params)
}

fn obstacle_cost_sorted(
    traj: &Trajectory,
    sorted: &SortedObstacles,
    limits: &RobotLimits,
    params: &ObstacleCostParams,
) -> Cost {
    let mut min_clearance = params.max_range;
    for pt in &traj.points {
        let c = sorted.clearance(pt.state.position(), limits.radius, min_clearance);
        if c < params.margin {
            return Cost::Infeasible;
        }
        min_clearance = min_clearance.min(c);
    }
    Cost::Value((1.0 / min_clearance).min(params.clamp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub action: Action,
    pub c_goal: f64,
    pub c_obst: Cost,
    pub c_social: f64,
    pub total: Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub best: Action,
    /// Index into `candidates` of the chosen action; `None` for the emergency action.
    pub best_index: Option<usize>,
    pub candidates: Vec<CandidateEval>,
    pub infeasible_count: usize,
}

impl PlanResult {
    pub fn all_infeasible(&self) -> bool {
        self.best_index.is_none()
    }

    pub fn best_eval(&self) -> Option<&CandidateEval> {
        self.best_index.map(|i| &self.candidates[i])
    }
}

/// Orders two feasible candidates: lower total, then smaller |w|, then
/// larger v. Grid order is the caller's final key.
pub fn compare_candidates(a: &CandidateEval, b: &CandidateEval) -> Ordering {
    let ta = a.total.value().unwrap_or(f64::INFINITY);
    let tb = b.total.value().unwrap_or(f64::INFINITY);
    ta.total_cmp(&tb)
        .then_with(|| a.action.w.abs().total_cmp(&b.action.w.abs()))
        .then_with(|| b.action.v.total_cmp(&a.action.v))
}

/// Scores every window action and returns the cheapest feasible one.
/// `social` maps a candidate to its social cost; pass `None` for the plain
/// planner without a social term.
pub fn plan(
    obs: &Observation,
    goal: Vec2,
    weights: &CostWeights,
    config: &DwaConfig,
    social: Option<&dyn Fn(Action) -> f64>,
) -> PlanResult {
    let obstacles = ObstacleSet::from_observation(obs, config.obstacle_cost.max_range, config.human_radius);
    let sorted = SortedObstacles::new(&obstacles, obs.robot.position());
    let candidates: Vec<CandidateEval> = dynamic_window(obs.current_action, config)
        .into_iter()
        .map(|action| {
            let traj = rollout(&obs.robot, action, config);
            let c_goal = goal_cost(&traj, goal, &config.goal_cost);
            let c_obst = obstacle_cost_sorted(&traj, &sorted, &config.limits, &config.obstacle_cost);
            let c_social = social.map_or(0.0, |f| f(action));
            CandidateEval {
                action,
                c_goal,
                c_obst,
                c_social,
                total: total_cost(c_goal, c_obst, c_social, weights),
            }
        })
        .collect();

    let infeasible_count = candidates.iter().filter(|c| !c.total.is_feasible()).count();
    let best_index = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.total.is_feasible())
        .min_by(|(i, a), (j, b)| compare_candidates(a, b).then(i.cmp(j)))
        .map(|(i, _)| i);

    let best = match best_index {
        Some(i) => candidates[i].action,
        None => emergency_action(obs, &config.limits),
    };
    PlanResult {
        best,
        best_index,
        candidates,
        infeasible_count,
    }
}

/// Rotate in place toward the side whose scan returns are longer on average.
pub fn emergency_action(obs: &Observation, limits: &RobotLimits) -> Action {
    let mean = |pred: fn(f64) -> bool| {
        let (sum, n) = obs
            .scan
            .iter()
            .filter(|b| pred(b.bearing))
            .fold((0.0, 0usize), |(s, n), b| (s + b.range, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    let left = mean(|b| b > 0.0);
    let right = mean(|b| b < 0.0);
    let sign = if left >= right { 1.0 } else { -1.0 };
    Action::new(0.0, sign * limits.w_max)
}
