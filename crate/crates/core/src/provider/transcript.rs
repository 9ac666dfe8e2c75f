//! JSON-lines request/response log and conversion to replay scripts.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ProviderFailure, ReplayEntry, RequestId};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub request_id: RequestId,
    pub issued_at: f64,
    pub completed_at: Option<f64>,
    /// Control-loop time at which the response was picked up.
    #[serde(default)]
    pub received_at: Option<f64>,
    pub latency: Option<f64>,
    pub prompt: String,
    pub scene: Option<String>,
    pub raw_response: Option<String>,
    pub error: Option<ProviderFailure>,
}

pub fn write_transcript<W: Write>(mut out: W, records: &[TranscriptRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcript<R: BufRead>(input: R) -> Result<Vec<TranscriptRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(records)
}

/// Successful responses keyed by the time the control loop received them,
/// sorted. Older transcripts without a receipt time fall back to completion.
pub fn transcript_to_replay(records: &[TranscriptRecord]) -> Vec<ReplayEntry> {
    let mut entries: Vec<ReplayEntry> = records
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| {
            Some(ReplayEntry {
                t: r.received_at.or(r.completed_at)?,
                text: r.raw_response.clone()?,
                latency: r.latency.unwrap_or(0.0),
            })
        })
        .collect();
    entries.sort_by(|a, b| a.t.total_cmp(&b.t));
    entries
}
