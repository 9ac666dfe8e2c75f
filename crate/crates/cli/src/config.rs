//! Run configuration file and command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use socnav::batch::ProviderChoice;
use socnav::dwa::DwaConfig;
use socnav::episode::EpisodeConfig;
use socnav::provider::{LatencyModel, OracleConfig, RemoteConfig, ReplayScript, DEFAULT_REPLAY_WINDOW};
use socnav::scenario::ScenarioName;
use socnav::social::ScoringConfig;
use socnav::types::CostWeights;

pub const DEFAULT_RUNS: u64 = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProviderConfig {
    Remote {
        #[serde(default)]
        remote: RemoteConfig,
    },
    Oracle {
        #[serde(default)]
        oracle: OracleConfig,
        #[serde(default)]
        latency: Option<LatencyModel>,
    },
    Replay {
        path: PathBuf,
        #[serde(default = "default_window")]
        window: f64,
    },
}

fn default_window() -> f64 {
    DEFAULT_REPLAY_WINDOW
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Oracle {
            oracle: OracleConfig::default(),
            latency: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProviderKind {
    Remote,
    Oracle,
    Replay,
}

impl ProviderConfig {
    pub fn kind(&self) -> ProviderKind {
        match self {
            ProviderConfig::Remote { .. } => ProviderKind::Remote,
            ProviderConfig::Oracle { .. } => ProviderKind::Oracle,
            ProviderConfig::Replay { .. } => ProviderKind::Replay,
        }
    }

    /// Loads any referenced files and produces the core provider choice.
    pub fn resolve(&self) -> Result<ProviderChoice> {
        let choice = match self {
            ProviderConfig::Remote { remote } => ProviderChoice::Remote { remote: remote.clone() },
            ProviderConfig::Oracle { oracle, latency } => ProviderChoice::Oracle {
                oracle: *oracle,
                latency: *latency,
            },
            ProviderConfig::Replay { path, window } => {
                let script = ReplayScript::load(path).with_context(|| format!("loading replay {}", path.display()))?;
                ProviderChoice::Replay {
                    entries: script.entries().to_vec(),
                    window: *window,
                }
            }
        };
        choice.validate()?;
        Ok(choice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenarios: Vec<ScenarioName>,
    pub weights: CostWeights,
    pub dwa: DwaConfig,
    pub scoring: ScoringConfig,
    pub provider: ProviderConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenarios: ScenarioName::ALL.to_vec(),
            weights: CostWeights::default(),
            dwa: DwaConfig::default(),
            scoring: ScoringConfig::default(),
            provider: ProviderConfig::default(),
            seeds: (0..DEFAULT_RUNS).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Values given on the command line that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenarios: Vec<ScenarioName>,
    pub provider: Option<ProviderKind>,
    pub replay: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub runs: Option<u64>,
    pub out: Option<PathBuf>,
    pub gamma: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads `path`, or starts from defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_json(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if !o.scenarios.is_empty() {
            self.scenarios = o.scenarios.clone();
        }
        if o.seeds.is_some() && o.runs.is_some() {
            bail!("--seeds and --runs are mutually exclusive");
        }
        if let Some(seeds) = &o.seeds {
            self.seeds = seeds.clone();
        }
        if let Some(n) = o.runs {
            self.seeds = (0..n).collect();
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(g) = o.gamma {
            self.weights.gamma = g;
        }
        let kind = o.provider.or(o.replay.as_ref().map(|_| ProviderKind::Replay));
        if let Some(kind) = kind {
            if kind != ProviderKind::Replay && o.replay.is_some() {
                bail!("--replay only applies to the replay provider");
            }
            if kind != self.provider.kind() || o.replay.is_some() {
                self.provider = match kind {
                    ProviderKind::Remote => ProviderConfig::Remote {
                        remote: RemoteConfig::default(),
                    },
                    ProviderKind::Oracle => ProviderConfig::default(),
                    ProviderKind::Replay => ProviderConfig::Replay {
                        path: o.replay.clone().context("the replay provider needs --replay PATH")?,
                        window: DEFAULT_REPLAY_WINDOW,
                    },
                };
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            bail!("no scenarios selected");
        }
        if self.seeds.is_empty() {
            bail!("no seeds selected");
        }
        self.episode_config().validate()?;
        Ok(())
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            dwa: self.dwa,
            weights: self.weights,
            scoring: self.scoring,
            ..EpisodeConfig::default()
        }
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<()> {
        let dir = &self.output_dir;
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let probe = dir.join(".socnav-write-check");
        fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
        fs::remove_file(&probe)?;
        Ok(())
    }
}

/// Parses `3`, `0,4,7` or `0-20` (inclusive), and mixes of these.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let lo: u64 = a.trim().parse().map_err(|_| format!("bad seed `{a}`"))?;
                let hi: u64 = b.trim().parse().map_err(|_| format!("bad seed `{b}`"))?;
                if hi < lo {
                    return Err(format!("empty seed range `{part}`"));
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?),
        }
    }
    if seeds.is_empty() {
        return Err("empty seed list".into());
    }
    Ok(seeds)
}
