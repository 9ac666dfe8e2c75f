//! Social-compliance classifiers and per-scenario aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::episode::EpisodeResult;
use crate::geometry::Vec2;
use crate::scenario::ScenarioName;
use crate::sim::Doorway;
use crate::types::Trajectory;

/// Beyond this separation an encounter has no pass side.
pub const PASS_RANGE: f64 = 3.0;
/// Speed below which the robot counts as standing still.
pub const STATIONARY_SPEED: f64 = 0.05;
/// Minimum standing time that counts as waiting at a doorway.
pub const WAIT_DURATION: f64 = 1.0;
/// Waiting only counts this close to the doorway.
pub const WAIT_RADIUS: f64 = 5.0;
/// Half-length of the junction region along the person's path.
pub const CONFLICT_HALF_LENGTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TrackPoint {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }
}

/// Time-stamped positions and velocities of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: String,
    pub radius: f64,
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn new(id: &str, radius: f64) -> Self {
        Self {
            id: id.to_string(),
            radius,
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, position: Vec2, velocity: Vec2) {
        self.points.push(TrackPoint {
            t,
            x: position.x,
            y: position.y,
            vx: velocity.x,
            vy: velocity.y,
        });
    }

    pub fn from_trajectory(traj: &Trajectory, radius: f64) -> Self {
        let mut track = Track::new("robot", radius);
        for p in &traj.points {
            track.push(p.stamp, p.state.position(), p.state.heading() * p.action.v);
        }
        track
    }

    /// Last non-zero velocity direction at or before index `i`.
    fn heading_at(&self, i: usize) -> Option<Vec2> {
        self.points[..=i].iter().rev().find_map(|p| p.velocity().normalized())
    }

    /// Overall walking direction from first to last position.
    fn overall_direction(&self) -> Option<Vec2> {
        let first = self.points.first()?.position();
        let last = self.points.last()?.position();
        (last - first).normalized()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassSide {
    Left,
    Right,
    None,
}

/// Minimum separation and the side label at that instant. The label names
/// the convention followed: `Right` when the robot is on the person's left
/// as seen by the person, i.e. both kept to their right.
pub fn classify_pass_side(robot: &Track, human: &Track) -> (f64, PassSide) {
    let n = robot.points.len().min(human.points.len());
    let closest = (0..n)
        .map(|i| (i, robot.points[i].position().distance(human.points[i].position())))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((i, dist)) = closest else {
        return (f64::INFINITY, PassSide::None);
    };
    if dist > PASS_RANGE {
        return (dist, PassSide::None);
    }
    let Some(heading) = human.heading_at(i) else {
        return (dist, PassSide::None);
    };
    let offset = robot.points[i].position() - human.points[i].position();
    let side = heading.cross(offset);
    let label = if side > 0.0 {
        PassSide::Right
    } else if side < 0.0 {
        PassSide::Left
    } else {
        PassSide::None
    };
    (dist, label)
}

fn first_index(n: usize, pred: impl Fn(usize) -> bool) -> Option<usize> {
    (0..n).find(|&i| pred(i))
}

/// True when the robot crosses the person's path only after the person has
/// left the junction region, or when the robot is still short of the
/// junction and behind the person at the moment the person crosses.
pub fn classify_crossed_behind(robot: &Track, human: &Track, junction: Vec2) -> bool {
    let n = robot.points.len().min(human.points.len());
    let (Some(h_dir), Some(start)) = (human.overall_direction(), robot.points.first()) else {
        return false;
    };
    let Some(r_dir) = (junction - start.position()).normalized() else {
        return false;
    };
    let human_progress = |i: usize| (human.points[i].position() - junction).dot(h_dir);
    let robot_progress = |i: usize| (robot.points[i].position() - junction).dot(r_dir);

    let human_cross = first_index(n, |i| human_progress(i) >= 0.0);
    let human_exit = first_index(n, |i| human_progress(i) >= CONFLICT_HALF_LENGTH);
    let robot_cross = first_index(n, |i| robot_progress(i) >= 0.0);

    let after_exit = matches!((robot_cross, human_exit), (Some(r), Some(h)) if r >= h);
    let behind_at_crossing = human_cross.is_some_and(|i| {
        let robot_not_across = robot_cross.is_none_or(|r| r > i);
        let offset = robot.points[i].position() - human.points[i].position();
        robot_not_across && offset.dot(h_dir) < 0.0
    });
    after_exit || behind_at_crossing
}

/// True when the robot stood still near the doorway on its own side for a
/// while before the person came through, and went through only afterwards.
pub fn waited_at_door(robot: &Track, human: &Track, door: &Doorway) -> bool {
    let n = robot.points.len().min(human.points.len());
    if n == 0 {
        return false;
    }
    let normal = Vec2::from_angle(door.orientation);
    let side = |p: Vec2| (p - door.center).dot(normal).signum();
    let robot_side = side(robot.points[0].position());
    let human_side = side(human.points[0].position());
    let human_cross = first_index(n, |i| side(human.points[i].position()) != human_side);
    let robot_cross = first_index(n, |i| side(robot.points[i].position()) != robot_side);
    let (Some(hc), Some(rc)) = (human_cross, robot_cross) else {
        return false;
    };
    if rc <= hc {
        return false;
    }
    // The halt has to begin before the person is through, but may last
    // while they pass.
    let mut run_start: Option<f64> = None;
    for (i, p) in robot.points[..rc].iter().enumerate() {
        let pos = p.position();
        let waiting =
            p.velocity().norm() < STATIONARY_SPEED && pos.distance(door.center) <= WAIT_RADIUS && side(pos) == robot_side;
        if waiting && (run_start.is_some() || i < hc) {
            let t0 = *run_start.get_or_insert(p.t);
            if p.t - t0 >= WAIT_DURATION - 1e-9 {
                return true;
            }
        } else {
            run_start = None;
        }
    }
    false
}

/// Aggregates for one scenario. Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub scenario: ScenarioName,
    pub runs: usize,
    pub success_rate: f64,
    /// Collisions and interventions together.
    pub collision_rate: f64,
    pub intervention_rate: f64,
    pub pass_right_rate: f64,
    pub mean_min_dist_m: f64,
    pub mean_stop_latency_s: Option<f64>,
    pub crossed_behind_rate: Option<f64>,
    pub waited_at_door_rate: Option<f64>,
    pub mean_time_to_goal_s: Option<f64>,
}

pub const CSV_HEADER: &str = "scenario,runs,success_rate,collision_rate,intervention_rate,pass_right_rate,mean_min_dist_m,mean_stop_latency_s,crossed_behind_rate,waited_at_door_rate,mean_time_to_goal_s";

fn rate(hits: usize, n: usize) -> f64 {
    100.0 * hits as f64 / n as f64
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn optional_rate(flags: &[Option<bool>]) -> Option<f64> {
    let known: Vec<bool> = flags.iter().flatten().copied().collect();
    (!known.is_empty()).then(|| rate(known.iter().filter(|&&b| b).count(), known.len()))
}

/// Per-scenario metrics in canonical scenario order; scenarios without runs
/// are omitted.
pub fn aggregate(results: &[EpisodeResult]) -> Vec<ScenarioMetrics> {
    ScenarioName::KNOWN
        .into_iter()
        .filter_map(|name| {
            let runs: Vec<&EpisodeResult> = results.iter().filter(|r| r.scenario == name).collect();
            let n = runs.len();
            if n == 0 {
                return None;
            }
            let count = |f: &dyn Fn(&EpisodeResult) -> bool| runs.iter().filter(|r| f(r)).count();
            let min_dists: Vec<f64> = runs.iter().map(|r| r.min_human_distance).filter(|d| d.is_finite()).collect();
            let latencies: Vec<f64> = runs.iter().filter_map(|r| r.stop_latency).collect();
            let times: Vec<f64> = runs.iter().filter(|r| r.success).filter_map(|r| r.time_to_goal).collect();
            let crossed: Vec<Option<bool>> = runs.iter().map(|r| r.crossed_behind).collect();
            let waited: Vec<Option<bool>> = runs.iter().map(|r| r.waited_at_door).collect();
            Some(ScenarioMetrics {
                scenario: name,
                runs: n,
                success_rate: rate(count(&|r| r.success), n),
                collision_rate: rate(count(&|r| r.collision || r.intervention), n),
                intervention_rate: rate(count(&|r| r.intervention), n),
                pass_right_rate: rate(count(&|r| r.pass_side == PassSide::Right), n),
                mean_min_dist_m: mean(&min_dists).unwrap_or(f64::NAN),
                mean_stop_latency_s: mean(&latencies),
                crossed_behind_rate: optional_rate(&crossed),
                waited_at_door_rate: optional_rate(&waited),
                mean_time_to_goal_s: mean(&times),
            })
        })
        .collect()
}

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) if v.is_finite() => format!("{v:.4}"),
        _ => String::new(),
    }
}

pub fn metrics_csv(rows: &[ScenarioMetrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.runs,
            cell(Some(r.success_rate)),
            cell(Some(r.collision_rate)),
            cell(Some(r.intervention_rate)),
            cell(Some(r.pass_right_rate)),
            cell(Some(r.mean_min_dist_m)),
            cell(r.mean_stop_latency_s),
            cell(r.crossed_behind_rate),
            cell(r.waited_at_door_rate),
            cell(r.mean_time_to_goal_s),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight-line track sampled every 0.1 s.
    fn line(from: (f64, f64), vel: (f64, f64), n: usize) -> Track {
        let mut t = Track::new("x", 0.2);
        for i in 0..n {
            let s = i as f64 * 0.1;
            t.push(s, Vec2::new(from.0 + vel.0 * s, from.1 + vel.1 * s), Vec2::new(vel.0, vel.1));
        }
        t
    }

    #[test]
    fn head_on_keep_right_is_right() {
        // Robot heads +x on y=-0.5, person heads -x on y=+0.5: the person is on the robot's left.
        let robot = line((0.0, -0.5), (0.5, 0.0), 100);
        let human = line((10.0, 0.5), (-1.0, 0.0), 100);
        let (d, side) = classify_pass_side(&robot, &human);
        assert_eq!(side, PassSide::Right);
        assert!((d - 1.0).abs() < 0.1);
        let mirror = |t: &Track| Track {
            points: t.points.iter().map(|p| TrackPoint { y: -p.y, vy: -p.vy, ..*p }).collect(),
            ..t.clone()
        };
        assert_eq!(classify_pass_side(&mirror(&robot), &mirror(&human)).1, PassSide::Left);
    }

    #[test]
    fn distant_tracks_have_no_side() {
        let robot = line((0.0, -5.0), (0.5, 0.0), 50);
        let human = line((5.0, 5.0), (-1.0, 0.0), 50);
        assert_eq!(classify_pass_side(&robot, &human).1, PassSide::None);
    }

    #[test]
    fn waiting_for_the_junction_to_clear_is_behind() {
        // Person crosses x=5 going +y during t in [4, 6]; robot stands at x=3 until t=6.
        let human = line((5.0, -4.0), (0.0, 1.0), 150);
        let mut robot = Track::new("robot", 0.2);
        for i in 0..150 {
            let t = i as f64 * 0.1;
            let x = if t < 6.0 { 3.0 } else { 3.0 + 0.5 * (t - 6.0) };
            robot.push(t, Vec2::new(x, -0.05), Vec2::new(if t < 6.0 { 0.0 } else { 0.5 }, 0.0));
        }
        assert!(classify_crossed_behind(&robot, &human, Vec2::new(5.0, 0.0)));
    }

    #[test]
    fn cutting_in_front_is_not_behind() {
        // Robot reaches the junction at t=4, person at t=5.
        let robot = line((3.0, 0.0), (0.5, 0.0), 150);
        let human = line((5.0, -5.0), (0.0, 1.0), 150);
        assert!(!classify_crossed_behind(&robot, &human, Vec2::new(5.0, 0.0)));
    }

    #[test]
    fn stopped_robot_with_person_passing_ahead_is_behind() {
        let mut robot = line((4.0, -0.1), (0.0, 0.0), 80);
        for p in &mut robot.points {
            p.vx = 0.0;
        }
        let human = line((5.0, -3.0), (0.0, 1.0), 80);
        assert!(classify_crossed_behind(&robot, &human, Vec2::new(5.0, 0.0)));
    }

    fn door() -> Doorway {
        Doorway {
            center: Vec2::new(5.0, 0.0),
            width: 0.9,
            orientation: 0.0,
        }
    }

    fn robot_wait_then_go(wait_until: f64) -> Track {
        let mut robot = Track::new("robot", 0.2);
        for i in 0..200 {
            let t = i as f64 * 0.1;
            let x = if t < wait_until { 2.0 } else { 2.0 + 0.5 * (t - wait_until) };
            let v = if t < wait_until { 0.0 } else { 0.5 };
            robot.push(t, Vec2::new(x, 0.0), Vec2::new(v, 0.0));
        }
        robot
    }

    #[test]
    fn waiting_then_following_through_the_door() {
        // Person comes through x=5 at t=3.
        let human = line((8.0, 0.0), (-1.0, 0.0), 200);
        assert!(waited_at_door(&robot_wait_then_go(5.0), &human, &door()));
    }

    #[test]
    fn going_first_is_not_waiting() {
        let human = line((8.0, 0.0), (-1.0, 0.0), 200);
        let robot = line((2.0, 0.0), (0.5, 0.0), 200);
        assert!(!waited_at_door(&robot, &human, &door()));
    }

    #[test]
    fn brief_pause_is_not_waiting() {
        let human = line((8.0, 0.0), (-1.0, 0.0), 200);
        // Stands still for 0.5 s well before the person crosses at t=3,
        // then keeps rolling toward the door.
        let robot = robot_with_halt(2.0, 2.5);
        assert!(!waited_at_door(&robot, &human, &door()));
    }

    #[test]
    fn halt_that_spans_the_crossing_counts() {
        let human = line((8.0, 0.0), (-1.0, 0.0), 200);
        // Halts at t=2.5, half a second before the person is through, and
        // holds while they pass.
        let robot = robot_with_halt(2.5, 6.0);
        assert!(waited_at_door(&robot, &human, &door()));
    }

    #[test]
    fn halt_starting_after_the_crossing_is_not_waiting() {
        let human = line((8.0, 0.0), (-1.0, 0.0), 200);
        let robot = robot_with_halt(3.5, 7.0);
        assert!(!waited_at_door(&robot, &human, &door()));
    }

    /// Robot at y=-1 rolling at 0.5 m/s except while stationary in [from, to).
    fn robot_with_halt(from: f64, to: f64) -> Track {
        let mut robot = Track::new("robot", 0.2);
        let x_stop = 0.5 + 0.5 * from;
        for i in 0..200 {
            let t = i as f64 * 0.1;
            let standing = (from..to).contains(&t);
            let x = if t < from {
                0.5 + 0.5 * t
            } else if standing {
                x_stop
            } else {
                x_stop + 0.5 * (t - to)
            };
            robot.push(t, Vec2::new(x, -1.0), Vec2::new(if standing { 0.0 } else { 0.5 }, 0.0));
        }
        robot
    }

    #[test]
    fn csv_has_fixed_columns_and_blank_missing_values() {
        let row = ScenarioMetrics {
            scenario: ScenarioName::FrontalApproach,
            runs: 1,
            success_rate: 100.0,
            collision_rate: 0.0,
            intervention_rate: 0.0,
            pass_right_rate: 100.0,
            mean_min_dist_m: 1.25,
            mean_stop_latency_s: None,
            crossed_behind_rate: None,
            waited_at_door_rate: None,
            mean_time_to_goal_s: Some(20.5),
        };
        let csv = metrics_csv(&[row]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "frontal_approach,1,100.0000,0.0000,0.0000,100.0000,1.2500,,,,20.5000");
        assert_eq!(lines[1].split(',').count(), CSV_HEADER.split(',').count());
    }
}
