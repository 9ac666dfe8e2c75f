//! Command-line front end: single runs, batches, comparisons, plots and
//! transcript conversion.

mod config;
mod plot;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use socnav::batch::{run_batch, BatchOutput, ProviderChoice};
use socnav::episode::{run_episode, EpisodeResult};
use socnav::log::TrajectoryLog;
use socnav::metrics::{metrics_csv, ScenarioMetrics};
use socnav::provider::{read_transcript, transcript_to_replay, write_transcript, BehaviorProvider};
use socnav::scenario::{build_scenario, ScenarioName};

use config::{parse_seeds, Overrides, ProviderKind, RunConfig};

/// Seed list as one flag value, so clap does not treat it as repeated.
#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

fn parse_seed_list(text: &str) -> Result<SeedList, String> {
    parse_seeds(text).map(SeedList)
}

const EXIT_OK: u8 = 0;
const EXIT_SETUP: u8 = 1;
const EXIT_NOT_REACHED: u8 = 2;
const EXIT_COLLISION: u8 = 3;

#[derive(Parser)]
#[command(name = "socnav", version, about = "Social navigation simulator and benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its trajectory log and transcript.
    Run(Common),
    /// Run every selected scenario for every seed and write metrics.
    Batch(Common),
    /// Run two configurations on the same seeds and print metric deltas.
    Compare {
        /// Baseline configuration.
        a: PathBuf,
        /// Configuration compared against the baseline.
        b: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render trajectory logs as an overhead SVG.
    Plot {
        /// Trajectory log; repeat to overlay several.
        #[arg(long = "log", required = true)]
        logs: Vec<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a recorded transcript into a replay file.
    TranscriptToReplay { transcript: PathBuf, replay: PathBuf },
    /// Print the effective configuration after overrides.
    Config(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name; repeat or separate with commas.
    #[arg(long = "scenario", value_delimiter = ',')]
    scenarios: Vec<ScenarioName>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Seeds such as `0,3,5` or `0-20`.
    #[arg(long, value_parser = parse_seed_list)]
    seeds: Option<SeedList>,
    /// Use seeds 0..N.
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the social cost weight.
    #[arg(long)]
    gamma: Option<f64>,
    /// Where `run` writes the provider transcript (JSON lines).
    #[arg(long)]
    record_transcript: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            scenarios: self.scenarios.clone(),
            provider: self.provider,
            replay: self.replay.clone(),
            seeds: self.seeds.clone().map(|s| s.0),
            runs: self.runs,
            out: self.out.clone(),
            gamma: self.gamma,
        }
    }

    fn resolve(&self, path: Option<&Path>) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(path)?;
        cfg.apply(&self.overrides())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_SETUP } else { EXIT_OK });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_SETUP)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run(c) => cmd_run(&c),
        Command::Batch(c) => cmd_batch(&c),
        Command::Compare { a, b, common } => cmd_compare(&a, &b, &common),
        Command::Plot { logs, out } => cmd_plot(&logs, out.as_deref()),
        Command::TranscriptToReplay { transcript, replay } => cmd_transcript_to_replay(&transcript, &replay),
        Command::Config(c) => {
            println!("{}", c.resolve(c.config.as_deref())?.to_json());
            Ok(EXIT_OK)
        }
    }
}

fn episode_stem(r: &EpisodeResult) -> String {
    format!("{}_seed{}", r.scenario, r.seed)
}

fn write_log(path: &Path, r: &EpisodeResult, provider: &ProviderChoice, cfg: &RunConfig) -> Result<()> {
    let spec = build_scenario(r.scenario, r.seed);
    let log = TrajectoryLog::new(&spec, r, provider.label(), cfg.dwa.limits.radius);
    fs::write(path, log.to_json()).with_context(|| format!("writing {}", path.display()))
}

fn write_transcript_file(path: &Path, r: &EpisodeResult) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write_transcript(&mut out, &r.transcript)?;
    out.flush()?;
    Ok(())
}

fn summary(r: &EpisodeResult) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    let flag = |v: Option<bool>| v.map_or("-".to_string(), |b| b.to_string());
    format!(
        "scenario={} seed={} success={} end={} time_to_goal={} min_dist={:.3} pass_side={} stop_latency={} crossed_behind={} waited_at_door={} directives={}",
        r.scenario,
        r.seed,
        r.success,
        word(&r.end_reason),
        opt(r.time_to_goal),
        r.min_human_distance,
        word(&r.pass_side),
        opt(r.stop_latency),
        flag(r.crossed_behind),
        flag(r.waited_at_door),
        r.directive_log.len(),
    )
}

/// Serialized name of a unit enum variant.
fn word<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn exit_code(r: &EpisodeResult) -> u8 {
    if r.collision || r.intervention {
        EXIT_COLLISION
    } else if r.success {
        EXIT_OK
    } else {
        EXIT_NOT_REACHED
    }
}

fn cmd_run(c: &Common) -> Result<u8> {
    let cfg = c.resolve(c.config.as_deref())?;
    let [scenario] = cfg.scenarios[..] else {
        bail!("run needs exactly one scenario; select it with --scenario");
    };
    let seed = cfg.seeds[0];
    if cfg.seeds.len() > 1 {
        log::info!("run uses the first seed ({seed}) of {}", cfg.seeds.len());
    }
    cfg.prepare_output()?;
    let provider = cfg.provider.resolve()?;
    let spec = build_scenario(scenario, seed);
    let mut instance = provider.build(seed)?;
    let result = run_episode(
        &spec,
        &cfg.episode_config(),
        instance.as_deref_mut().map(|p| p as &mut dyn BehaviorProvider),
    )?;

    let stem = episode_stem(&result);
    write_log(&cfg.output_dir.join(format!("{stem}.json")), &result, &provider, &cfg)?;
    let transcript = c
        .record_transcript
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join(format!("{stem}.transcript.jsonl")));
    write_transcript_file(&transcript, &result)?;
    fs::write(cfg.output_dir.join("config.json"), cfg.to_json())?;
    println!("{}", summary(&result));
    Ok(exit_code(&result))
}

fn execute(cfg: &RunConfig, scenarios: &[ScenarioName]) -> Result<(ProviderChoice, BatchOutput)> {
    let provider = cfg.provider.resolve()?;
    let out = run_batch(scenarios, &cfg.seeds, &cfg.episode_config(), &provider)?;
    Ok((provider, out))
}

fn write_batch(dir: &Path, cfg: &RunConfig, provider: &ProviderChoice, out: &BatchOutput) -> Result<()> {
    let logs = dir.join("logs");
    fs::create_dir_all(&logs)?;
    for r in &out.results {
        let stem = episode_stem(r);
        write_log(&logs.join(format!("{stem}.json")), r, provider, cfg)?;
        write_transcript_file(&logs.join(format!("{stem}.transcript.jsonl")), r)?;
    }
    fs::write(dir.join("metrics.csv"), metrics_csv(&out.metrics))?;
    fs::write(dir.join("config.json"), cfg.to_json())?;
    Ok(())
}

fn cmd_batch(c: &Common) -> Result<u8> {
    if c.record_transcript.is_some() {
        bail!("--record-transcript applies to `run`; batches write one transcript per episode under logs/");
    }
    let cfg = c.resolve(c.config.as_deref())?;
    cfg.prepare_output()?;
    let (provider, out) = execute(&cfg, &cfg.scenarios)?;
    write_batch(&cfg.output_dir, &cfg, &provider, &out)?;
    print!("{}", metrics_csv(&out.metrics));
    Ok(EXIT_OK)
}

/// Named numeric columns of a metrics row; rates are percentages.
fn metric_values(m: &ScenarioMetrics) -> [(&'static str, Option<f64>); 9] {
    [
        ("success_rate", Some(m.success_rate)),
        ("collision_rate", Some(m.collision_rate)),
        ("intervention_rate", Some(m.intervention_rate)),
        ("pass_right_rate", Some(m.pass_right_rate)),
        ("mean_min_dist_m", Some(m.mean_min_dist_m).filter(|v| v.is_finite())),
        ("mean_stop_latency_s", m.mean_stop_latency_s),
        ("crossed_behind_rate", m.crossed_behind_rate),
        ("waited_at_door_rate", m.waited_at_door_rate),
        ("mean_time_to_goal_s", m.mean_time_to_goal_s),
    ]
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.4}"))
}

/// Rows of `scenario,metric,a,b,delta` with delta = b - a.
fn comparison_rows(a: &[ScenarioMetrics], b: &[ScenarioMetrics]) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    for (ma, mb) in a.iter().zip(b) {
        for ((name, va), (_, vb)) in metric_values(ma).into_iter().zip(metric_values(mb)) {
            let delta = va.zip(vb).map(|(x, y)| y - x);
            rows.push([ma.scenario.to_string(), name.to_string(), cell(va), cell(vb), cell(delta)]);
        }
    }
    rows
}

fn cmd_compare(a: &Path, b: &Path, c: &Common) -> Result<u8> {
    let cfg_a = c.resolve(Some(a))?;
    let mut cfg_b = c.resolve(Some(b))?;
    let shared: Vec<ScenarioName> =
        cfg_a.scenarios.iter().copied().filter(|s| cfg_b.scenarios.contains(s)).collect();
    if shared.is_empty() {
        bail!("the two configurations share no scenarios");
    }
    if cfg_b.seeds != cfg_a.seeds {
        log::info!("running both configurations on the seeds of {}", a.display());
        cfg_b.seeds = cfg_a.seeds.clone();
    }
    cfg_a.prepare_output()?;
    let (_, out_a) = execute(&cfg_a, &shared)?;
    let (_, out_b) = execute(&cfg_b, &shared)?;

    let rows = comparison_rows(&out_a.metrics, &out_b.metrics);
    let mut csv = String::from("scenario,metric,a,b,delta\n");
    for r in &rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
    }
    let dir = &cfg_a.output_dir;
    fs::write(dir.join("compare.csv"), &csv)?;
    fs::write(dir.join("metrics_a.csv"), metrics_csv(&out_a.metrics))?;
    fs::write(dir.join("metrics_b.csv"), metrics_csv(&out_b.metrics))?;

    println!("{:<18} {:<20} {:>10} {:>10} {:>10}", "scenario", "metric", "a", "b", "delta");
    for [s, m, va, vb, d] in &rows {
        println!("{s:<18} {m:<20} {va:>10} {vb:>10} {d:>10}");
    }
    Ok(EXIT_OK)
}

fn cmd_plot(paths: &[PathBuf], out: Option<&Path>) -> Result<u8> {
    let mut logs = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        logs.push(TrajectoryLog::from_json(&text).with_context(|| format!("parsing trajectory log {}", p.display()))?);
    }
    let svg = plot::render(&logs);
    match out {
        Some(path) => fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{svg}"),
    }
    Ok(EXIT_OK)
}

fn cmd_transcript_to_replay(transcript: &Path, replay: &Path) -> Result<u8> {
    let file = File::open(transcript).with_context(|| format!("opening {}", transcript.display()))?;
    let records = read_transcript(BufReader::new(file))?;
    let entries = transcript_to_replay(&records);
    fs::write(replay, serde_json::to_string_pretty(&entries)?)
        .with_context(|| format!("writing {}", replay.display()))?;
    println!("{} replay entries from {} records", entries.len(), records.len());
    Ok(EXIT_OK)
}
