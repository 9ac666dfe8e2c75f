use std::collections::BTreeSet;

use super::{Busy, ProviderFailure, ProviderResponse, RequestId};

#[derive(Debug, Clone, Copy, PartialEq)]
struct InFlight {
    id: RequestId,
    issued_at: f64,
}

/// Bookkeeping for one provider instance: a single in-flight slot, a
/// completed-response cell and the ids whose late completions are dropped.
#[derive(Debug, Clone)]
pub struct RequestLifecycle {
    timeout: f64,
    in_flight: Option<InFlight>,
    completed: Option<ProviderResponse>,
    stale: BTreeSet<RequestId>,
    abandoned: Vec<RequestId>,
}

impl RequestLifecycle {
    pub fn new(timeout: f64) -> Self {
        Self {
            timeout,
            in_flight: None,
            completed: None,
            stale: BTreeSet::new(),
            abandoned: Vec::new(),
        }
    }

    pub fn in_flight(&self) -> bool {
        self.in_flight.is_some()
    }

    pub fn begin(&mut self, id: RequestId, issued_at: f64) -> Result<(), Busy> {
        if self.in_flight.is_some() {
            return Err(Busy);
        }
        self.in_flight = Some(InFlight { id, issued_at });
        Ok(())
    }

    /// Records a completion. Returns false when the id is stale or unknown.
    pub fn complete(&mut self, id: RequestId, result: Result<String, ProviderFailure>, at: f64) -> bool {
        match self.in_flight {
            Some(f) if f.id == id && !self.stale.contains(&id) => {
                self.in_flight = None;
                let at = at.max(f.issued_at);
                self.completed = Some(match result {
                    Ok(text) => ProviderResponse::ok(id, f.issued_at, at, text),
                    Err(e) => ProviderResponse::failed(id, f.issued_at, at, e),
                });
                true
            }
            _ => false,
        }
    }

    /// Surfaces a timeout for a request older than the configured limit.
    pub fn expire(&mut self, now: f64) {
        if let Some(f) = self.in_flight {
            if now - f.issued_at >= self.timeout {
                self.in_flight = None;
                self.stale.insert(f.id);
                self.completed = Some(ProviderResponse::failed(f.id, f.issued_at, now, ProviderFailure::Timeout));
            }
        }
    }

    pub fn supersede(&mut self) -> Option<RequestId> {
        let f = self.in_flight.take()?;
        self.stale.insert(f.id);
        self.abandoned.push(f.id);
        Some(f.id)
    }

    pub fn take(&mut self) -> Option<ProviderResponse> {
        self.completed.take()
    }

    pub fn drain_abandoned(&mut self) -> Vec<RequestId> {
        std::mem::take(&mut self.abandoned)
    }
}
