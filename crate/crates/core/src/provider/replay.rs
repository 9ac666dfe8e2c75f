//! Scripted responses keyed by simulation time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BehaviorProvider, Busy, ProviderRequest, ProviderResponse, RequestId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub t: f64,
    pub text: String,
    /// Latency reported with the delivered response, seconds.
    #[serde(default)]
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayScript {
    entries: Vec<ReplayEntry>,
    delivered: Vec<bool>,
    /// Seconds after an entry's timestamp during which it can be delivered.
    window: f64,
}

pub const DEFAULT_REPLAY_WINDOW: f64 = 0.1;

impl ReplayScript {
    pub fn new(entries: Vec<ReplayEntry>, window: f64) -> Result<Self> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::Replay("window must be positive".into()));
        }
        if let Some(e) = entries.iter().find(|e| !e.t.is_finite() || e.t < 0.0) {
            return Err(Error::Replay(format!("bad timestamp {}", e.t)));
        }
        if let Some(e) = entries.iter().find(|e| !e.latency.is_finite() || e.latency < 0.0) {
            return Err(Error::Replay(format!("bad latency {}", e.latency)));
        }
        if entries.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::Replay("entries are not sorted by timestamp".into()));
        }
        let delivered = vec![false; entries.len()];
        Ok(Self {
            entries,
            delivered,
            window,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<ReplayEntry> =
            serde_json::from_str(text).map_err(|e| Error::Replay(format!("malformed replay file: {e}")))?;
        Self::new(entries, DEFAULT_REPLAY_WINDOW)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    /// Latest undelivered entry whose window contains `now`. Every entry in
    /// the window is marked delivered.
    pub fn respond(&mut self, now: f64) -> Option<&ReplayEntry> {
        let mut hit = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.t > now {
                break;
            }
            if !self.delivered[i] && now - e.t < self.window {
                self.delivered[i] = true;
                hit = Some(i);
            }
        }
        hit.map(|i| &self.entries[i])
    }
}

/// Provider that ignores requests and plays back a script. Submissions are
/// always accepted; each delivered entry is attributed to the most recent
/// request.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    script: ReplayScript,
    last_request: RequestId,
}

impl ReplayProvider {
    pub fn new(script: ReplayScript) -> Self {
        Self {
            script,
            last_request: 0,
        }
    }
}

impl BehaviorProvider for ReplayProvider {
    fn submit(&mut self, req: ProviderRequest) -> std::result::Result<(), Busy> {
        self.last_request = req.request_id;
        Ok(())
    }

    fn poll_latest(&mut self, now: f64) -> Option<ProviderResponse> {
        let e = self.script.respond(now)?;
        Some(ProviderResponse {
            latency: e.latency,
            ..ProviderResponse::ok(self.last_request, now - e.latency, now, e.text.clone())
        })
    }

    fn supersede(&mut self) -> bool {
        true
    }
}
