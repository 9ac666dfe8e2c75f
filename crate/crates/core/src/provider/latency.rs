//! Delays completions of a simulated provider.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BehaviorProvider, Busy, ProviderRequest, ProviderResponse, RequestId};
use crate::error::{invalid, Result};

/// Tolerance for comparing accumulated simulation time with release times.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LatencyModel {
    Fixed { seconds: f64 },
    Uniform { min: f64, max: f64, seed: u64 },
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LatencyModel::Fixed { seconds } => seconds.is_finite() && seconds >= 0.0,
            LatencyModel::Uniform { min, max, .. } => min.is_finite() && max.is_finite() && min >= 0.0 && min <= max,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("latency bounds must be finite, non-negative and ordered"))
        }
    }

    fn seed(&self) -> u64 {
        match *self {
            LatencyModel::Fixed { .. } => 0,
            LatencyModel::Uniform { seed, .. } => seed,
        }
    }
}

/// Wraps a provider so each completion surfaces only after a configured
/// delay. The wrapper counts as busy while a response is held back.
pub struct Delayed<P> {
    inner: P,
    model: LatencyModel,
    rng: ChaCha8Rng,
    held: VecDeque<(f64, ProviderResponse)>,
    abandoned: Vec<RequestId>,
}

impl<P: BehaviorProvider> Delayed<P> {
    pub fn new(inner: P, model: LatencyModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            inner,
            rng: ChaCha8Rng::seed_from_u64(model.seed()),
            model,
            held: VecDeque::new(),
            abandoned: Vec::new(),
        })
    }

    fn draw(&mut self) -> f64 {
        match self.model {
            LatencyModel::Fixed { seconds } => seconds,
            LatencyModel::Uniform { min, max, .. } if min == max => min,
            LatencyModel::Uniform { min, max, .. } => self.rng.gen_range(min..=max),
        }
    }

    fn collect(&mut self, now: f64) {
        while let Some(r) = self.inner.poll_latest(now) {
            let release = r.completed_at + self.draw();
            self.held.push_back((release, r));
        }
    }
}

impl<P: BehaviorProvider> BehaviorProvider for Delayed<P> {
    fn submit(&mut self, req: ProviderRequest) -> std::result::Result<(), Busy> {
        if !self.held.is_empty() {
            return Err(Busy);
        }
        let at = req.issued_at;
        self.inner.submit(req)?;
        self.collect(at);
        Ok(())
    }

    fn poll_latest(&mut self, now: f64) -> Option<ProviderResponse> {
        self.collect(now);
        let mut latest = None;
        while let Some((release, _)) = self.held.front() {
            if *release > now + TIME_EPS {
                break;
            }
            let (release, mut r) = self.held.pop_front().expect("front exists");
            r.completed_at = release;
            r.latency = release - r.issued_at;
            latest = Some(r);
        }
        latest
    }

    fn supersede(&mut self) -> bool {
        self.abandoned.extend(self.held.drain(..).map(|(_, r)| r.request_id));
        self.inner.supersede()
    }

    fn drain_abandoned(&mut self) -> Vec<RequestId> {
        let mut ids = std::mem::take(&mut self.abandoned);
        ids.extend(self.inner.drain_abandoned());
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{OracleConfig, OracleProvider, SceneDescription};
    use crate::types::{Action, RobotState};

    fn request(id: u64, at: f64) -> ProviderRequest {
        let scene = SceneDescription {
            stamp: at,
            robot: RobotState::new(0.0, 0.0, 0.0),
            velocity: Action::STOP,
            goal: crate::geometry::Vec2::new(1.0, 0.0),
            entities: vec![],
        };
        ProviderRequest::new("p".into(), Some(scene.to_scene()), at, id).unwrap()
    }

    #[test]
    fn fixed_delay_arithmetic() {
        let mut p = Delayed::new(OracleProvider::new(OracleConfig::default()), LatencyModel::Fixed { seconds: 2.5 }).unwrap();
        p.submit(request(1, 0.0)).unwrap();
        assert_eq!(p.submit(request(2, 0.1)), Err(Busy));
        assert!(p.poll_latest(2.4).is_none());
        let r = p.poll_latest(2.5).unwrap();
        assert_eq!((r.completed_at, r.latency), (2.5, 2.5));
        assert!(p.poll_latest(2.6).is_none());
        assert!(p.submit(request(3, 2.6)).is_ok());
    }

    #[test]
    fn zero_delay_answers_next_poll() {
        let mut p = Delayed::new(OracleProvider::new(OracleConfig::default()), LatencyModel::Fixed { seconds: 0.0 }).unwrap();
        p.submit(request(1, 1.0)).unwrap();
        assert!(p.poll_latest(1.0).is_some());
    }

    #[test]
    fn seeded_uniform_is_reproducible() {
        let delays = |seed| {
            let model = LatencyModel::Uniform { min: 2.0, max: 3.0, seed };
            let mut p = Delayed::new(OracleProvider::new(OracleConfig::default()), model).unwrap();
            let mut out = vec![];
            let mut t = 0.0;
            for id in 0..20 {
                p.submit(request(id, t)).unwrap();
                let r = (0..400).find_map(|k| p.poll_latest(t + k as f64 * 0.01)).unwrap();
                assert!((2.0 - 0.01..=3.0 + 0.01).contains(&r.latency));
                out.push(r.latency);
                t = r.completed_at;
            }
            out
        };
        assert_eq!(delays(5), delays(5));
        assert_ne!(delays(5), delays(6));
    }

    #[test]
    fn supersede_drops_held_response() {
        let mut p = Delayed::new(OracleProvider::new(OracleConfig::default()), LatencyModel::Fixed { seconds: 2.0 }).unwrap();
        p.submit(request(1, 0.0)).unwrap();
        assert!(p.supersede());
        p.submit(request(2, 0.5)).unwrap();
        let r = p.poll_latest(10.0).unwrap();
        assert_eq!(r.request_id, 2);
        assert_eq!(p.drain_abandoned(), vec![1]);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(LatencyModel::Uniform { min: 3.0, max: 2.0, seed: 0 }.validate().is_err());
        assert!(LatencyModel::Fixed { seconds: -1.0 }.validate().is_err());
    }
}
