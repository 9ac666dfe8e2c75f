//! The four benchmark layouts with seeded start perturbations, plus an
//! empty sanity layout.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Rect, Segment, Vec2};
use crate::sim::{Doorway, EventAction, PedestrianScript, ScriptEvent, Trigger, WorldSpec, DEFAULT_HUMAN_RADIUS};
use crate::types::RobotState;

pub const CORRIDOR_WIDTH: f64 = 2.4;
pub const DOOR_WIDTH: f64 = 0.9;
pub const HUMAN_SPEED: f64 = 1.0;
pub const DEFAULT_TIME_LIMIT: f64 = 60.0;

/// Id of the scripted person in every scenario.
pub const HUMAN_ID: &str = "human";
pub const STOP_GESTURE: &str = "stop";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    FrontalApproach,
    FrontalGesture,
    Intersection,
    NarrowDoorway,
    /// Empty field without people; not part of the default suite.
    OpenField,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::FrontalApproach,
        ScenarioName::FrontalGesture,
        ScenarioName::Intersection,
        ScenarioName::NarrowDoorway,
    ];

    /// Every known layout, benchmark suite first.
    pub const KNOWN: [ScenarioName; 5] = [
        ScenarioName::FrontalApproach,
        ScenarioName::FrontalGesture,
        ScenarioName::Intersection,
        ScenarioName::NarrowDoorway,
        ScenarioName::OpenField,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::FrontalApproach => "frontal_approach",
            ScenarioName::FrontalGesture => "frontal_gesture",
            ScenarioName::Intersection => "intersection",
            ScenarioName::NarrowDoorway => "narrow_doorway",
            ScenarioName::OpenField => "open_field",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::KNOWN
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Half-width of the uniform jitter on start positions, metres.
    pub position: f64,
    /// Half-width of the uniform jitter on walking speed, m/s.
    pub speed: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            position: 0.1,
            speed: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub world: WorldSpec,
    pub robot_start: RobotState,
    pub goal: Vec2,
    pub time_limit: f64,
    pub seed: u64,
    pub perturbations: Perturbation,
    /// Crossing point of the two walking paths, for the intersection layout.
    #[serde(default)]
    pub junction: Option<Vec2>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        if !self.world.bounds.contains(self.goal) || !self.world.bounds.contains(self.robot_start.position()) {
            return Err(invalid("goal and robot start must lie inside the world bounds"));
        }
        if self.time_limit.is_nan() || self.time_limit <= 0.0 {
            return Err(invalid("time limit must be positive"));
        }
        Ok(())
    }
}

fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
    Segment::new(Vec2::new(ax, ay), Vec2::new(bx, by))
}

/// Closed axis-aligned box as four wall segments.
fn box_walls(min: Vec2, max: Vec2) -> Vec<Segment> {
    vec![
        seg(min.x, min.y, max.x, min.y),
        seg(max.x, min.y, max.x, max.y),
        seg(max.x, max.y, min.x, max.y),
        seg(min.x, max.y, min.x, min.y),
    ]
}

struct Jitter {
    rng: ChaCha8Rng,
    p: Perturbation,
}

impl Jitter {
    fn pos(&mut self) -> f64 {
        self.rng.gen_range(-self.p.position..=self.p.position)
    }

    fn speed(&mut self) -> f64 {
        HUMAN_SPEED + self.rng.gen_range(-self.p.speed..=self.p.speed)
    }
}

fn human(waypoints: Vec<Vec2>, speed: f64, events: Vec<ScriptEvent>) -> PedestrianScript {
    PedestrianScript {
        id: HUMAN_ID.to_string(),
        waypoints,
        speed,
        radius: DEFAULT_HUMAN_RADIUS,
        events,
    }
}

/// Straight corridor with the robot at one end and a person walking toward
/// it from the other.
fn corridor(j: &mut Jitter, events: Vec<ScriptEvent>) -> (WorldSpec, RobotState, Vec2) {
    let half = CORRIDOR_WIDTH / 2.0;
    let mut world = WorldSpec::open(Rect {
        min: Vec2::new(-0.5, -half - 0.5),
        max: Vec2::new(10.5, half + 0.5),
    });
    // Open at both ends, so the goal is not pinned against a wall.
    world.segments = vec![seg(0.0, -half, 10.0, -half), seg(0.0, half, 10.0, half)];
    let robot = RobotState::new(0.5 + j.pos(), j.pos(), 0.0);
    let start = Vec2::new(9.5 + j.pos(), j.pos());
    let end = Vec2::new(0.5, start.y);
    let speed = j.speed();
    world.pedestrians.push(human(vec![start, end], speed, events));
    (world, robot, Vec2::new(9.5, 0.0))
}

/// Builds a scenario layout. The seed drives all perturbations.
pub fn build_scenario(name: ScenarioName, seed: u64) -> ScenarioSpec {
    let perturbations = Perturbation::default();
    let mut j = Jitter {
        rng: ChaCha8Rng::seed_from_u64(seed),
        p: perturbations,
    };
    let mut junction = None;
    let (world, robot_start, goal) = match name {
        ScenarioName::FrontalApproach => corridor(&mut j, vec![]),
        ScenarioName::FrontalGesture => {
            let trigger = Trigger::RobotWithin { distance: 3.5 };
            let events = vec![
                ScriptEvent {
                    trigger,
                    action: EventAction::EmitGesture {
                        name: STOP_GESTURE.to_string(),
                        duration: 3.0,
                    },
                },
                // The person stands still after signalling.
                ScriptEvent {
                    trigger,
                    action: EventAction::Pause { duration: 1.0e6 },
                },
            ];
            corridor(&mut j, events)
        }
        ScenarioName::Intersection => intersection(&mut j, &mut junction),
        ScenarioName::NarrowDoorway => doorway(&mut j),
        ScenarioName::OpenField => open_field(&mut j),
    };
    ScenarioSpec {
        name,
        world,
        robot_start,
        goal,
        time_limit: DEFAULT_TIME_LIMIT,
        seed,
        perturbations,
        junction,
    }
}

/// Two perpendicular corridors crossing at (5, 0). The person starts in
/// the side corridor and is held back so that it reaches the junction
/// shortly before the robot would.
fn intersection(j: &mut Jitter, junction: &mut Option<Vec2>) -> (WorldSpec, RobotState, Vec2) {
    let h = CORRIDOR_WIDTH / 2.0;
    let (cx, arm) = (5.0, 6.0);
    let mut world = WorldSpec::open(Rect {
        min: Vec2::new(-0.5, -arm - 0.5),
        max: Vec2::new(10.5, arm + 0.5),
    });
    world.segments = vec![
        seg(0.0, -h, cx - h, -h),
        seg(cx - h, -h, cx - h, -arm),
        seg(cx - h, -arm, cx + h, -arm),
        seg(cx + h, -arm, cx + h, -h),
        seg(cx + h, -h, 10.0, -h),
        seg(10.0, h, cx + h, h),
        seg(cx + h, h, cx + h, arm),
        seg(cx + h, arm, cx - h, arm),
        seg(cx - h, arm, cx - h, h),
        seg(cx - h, h, 0.0, h),
    ];
    let robot = RobotState::new(0.5 + j.pos(), j.pos(), 0.0);
    let start = Vec2::new(cx + j.pos(), -arm + 0.5 + j.pos());
    let end = Vec2::new(start.x, arm - 0.5);
    let speed = j.speed();
    let hold = ScriptEvent {
        trigger: Trigger::Time { at: 0.0 },
        action: EventAction::Pause { duration: INTERSECTION_HOLD },
    };
    world.pedestrians.push(human(vec![start, end], speed, vec![hold]));
    *junction = Some(Vec2::new(cx, 0.0));
    (world, robot, Vec2::new(9.5, 0.0))
}

/// Seconds the crossing person waits before walking.
pub const INTERSECTION_HOLD: f64 = 1.5;

/// Two rooms joined by a narrow doorway at (5, 0). The person walks from
/// the far room through the doorway and then turns off to the side.
fn doorway(j: &mut Jitter) -> (WorldSpec, RobotState, Vec2) {
    let (x_wall, half_room, far) = (5.0, 3.0, 12.0);
    let gap = DOOR_WIDTH / 2.0;
    let mut world = WorldSpec::open(Rect {
        min: Vec2::new(-0.5, -half_room - 0.5),
        max: Vec2::new(far + 0.5, half_room + 0.5),
    });
    let mut segments = box_walls(Vec2::new(0.0, -half_room), Vec2::new(far, half_room));
    segments.push(seg(x_wall, -half_room, x_wall, -gap));
    segments.push(seg(x_wall, gap, x_wall, half_room));
    world.segments = segments;
    world.doorways.push(Doorway {
        center: Vec2::new(x_wall, 0.0),
        width: DOOR_WIDTH,
        orientation: 0.0,
    });
    let robot = RobotState::new(1.0 + j.pos(), j.pos(), 0.0);
    let start = Vec2::new(11.5 + j.pos(), 0.2 + j.pos());
    let speed = j.speed();
    let path = vec![start, Vec2::new(5.8, 0.0), Vec2::new(4.6, 0.0), Vec2::new(3.8, 1.3), Vec2::new(1.5, 2.2)];
    world.pedestrians.push(human(path, speed, vec![]));
    (world, robot, Vec2::new(9.0, 0.0))
}

fn open_field(j: &mut Jitter) -> (WorldSpec, RobotState, Vec2) {
    let world = WorldSpec::open(Rect {
        min: Vec2::new(-1.0, -3.0),
        max: Vec2::new(7.0, 3.0),
    });
    (world, RobotState::new(0.5 + j.pos(), j.pos(), 0.0), Vec2::new(5.0, 0.0))
}
