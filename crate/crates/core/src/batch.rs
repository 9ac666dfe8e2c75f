//! Provider selection and multi-seed batches.

use serde::{Deserialize, Serialize};

use crate::episode::{run_episode, EpisodeConfig, EpisodeResult};
use crate::error::Result;
use crate::metrics::{aggregate, ScenarioMetrics};
use crate::provider::{
    BehaviorProvider, Delayed, LatencyModel, OracleConfig, OracleProvider, RemoteConfig, RemoteProvider, ReplayEntry,
    ReplayProvider, ReplayScript,
};
use crate::scenario::{build_scenario, ScenarioName};

/// Where directives come from. `Disabled` removes the social term entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProviderChoice {
    Disabled,
    Oracle {
        #[serde(default)]
        oracle: OracleConfig,
        #[serde(default)]
        latency: Option<LatencyModel>,
    },
    Replay {
        entries: Vec<ReplayEntry>,
        #[serde(default = "default_window")]
        window: f64,
    },
    Remote {
        #[serde(default)]
        remote: RemoteConfig,
    },
}

fn default_window() -> f64 {
    crate::provider::DEFAULT_REPLAY_WINDOW
}

impl Default for ProviderChoice {
    fn default() -> Self {
        ProviderChoice::Oracle {
            oracle: OracleConfig::default(),
            latency: None,
        }
    }
}

impl ProviderChoice {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProviderChoice::Disabled => Ok(()),
            ProviderChoice::Oracle { oracle, latency } => {
                oracle.validate()?;
                latency.map_or(Ok(()), |l| l.validate())
            }
            ProviderChoice::Replay { entries, window } => ReplayScript::new(entries.clone(), *window).map(|_| ()),
            ProviderChoice::Remote { remote } => remote.validate(),
        }
    }

    /// Fresh provider instance for one episode. Seeded latency draws are
    /// offset by the episode seed so each run has its own but repeatable
    /// delay sequence.
    pub fn build(&self, episode_seed: u64) -> Result<Option<Box<dyn BehaviorProvider>>> {
        Ok(match self {
            ProviderChoice::Disabled => None,
            ProviderChoice::Oracle { oracle, latency } => {
                let base = OracleProvider::new(*oracle);
                Some(match latency {
                    None => Box::new(base),
                    Some(model) => Box::new(Delayed::new(base, reseed(*model, episode_seed))?),
                })
            }
            ProviderChoice::Replay { entries, window } => {
                Some(Box::new(ReplayProvider::new(ReplayScript::new(entries.clone(), *window)?)))
            }
            ProviderChoice::Remote { remote } => Some(Box::new(RemoteProvider::from_env(remote.clone())?)),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ProviderChoice::Disabled => "disabled",
            ProviderChoice::Oracle { .. } => "oracle",
            ProviderChoice::Replay { .. } => "replay",
            ProviderChoice::Remote { .. } => "remote",
        }
    }
}

fn reseed(model: LatencyModel, episode_seed: u64) -> LatencyModel {
    match model {
        LatencyModel::Uniform { min, max, seed } => LatencyModel::Uniform {
            min,
            max,
            seed: seed ^ episode_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        },
        fixed => fixed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub results: Vec<EpisodeResult>,
    pub metrics: Vec<ScenarioMetrics>,
}

/// Runs every scenario for every seed, seeds in ascending order.
pub fn run_batch(
    scenarios: &[ScenarioName],
    seeds: &[u64],
    config: &EpisodeConfig,
    provider: &ProviderChoice,
) -> Result<BatchOutput> {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let mut results = Vec::with_capacity(scenarios.len() * seeds.len());
    for &name in scenarios {
        for &seed in &seeds {
            let spec = build_scenario(name, seed);
            let mut p = provider.build(seed)?;
            results.push(run_episode(&spec, config, p.as_deref_mut().map(|p| p as &mut dyn BehaviorProvider))?);
        }
    }
    let metrics = aggregate(&results);
    Ok(BatchOutput { results, metrics })
}
