use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn socnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socnav"))
        .args(args)
        .env_remove("SOCNAV_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn open_field_run_succeeds_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "out");
    let o = socnav(&["run", "--scenario", "open_field", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("scenario=open_field seed=0 success=true"));
    let out = Path::new(&out);
    assert!(out.join("open_field_seed0.json").is_file());
    assert!(out.join("open_field_seed0.transcript.jsonl").is_file());
    assert!(out.join("config.json").is_file());
}

#[test]
fn missing_config_is_a_setup_error() {
    let o = socnav(&["run", "--config", "/definitely/not/here.json", "--scenario", "open_field"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("reading config"), "{}", stderr(&o));
}

#[test]
fn malformed_config_and_bad_flags_exit_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", "{ not json");
    assert_eq!(code(&socnav(&["batch", "--config", &cfg])), 1);
    assert_eq!(code(&socnav(&["run", "--scenario", "hallway"])), 1);
    assert_eq!(code(&socnav(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&socnav(&["--help"])), 0);
}

#[test]
fn run_needs_a_single_scenario() {
    let o = socnav(&["run"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("exactly one scenario"));
}

#[test]
fn gesture_without_social_term_misses_the_goal() {
    let dir = TempDir::new().unwrap();
    let o = socnav(&["run", "--scenario", "frontal_gesture", "--gamma", "0", "--out", &path(&dir, "o")]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("success=false"));
}

#[test]
fn gesture_with_oracle_succeeds() {
    let dir = TempDir::new().unwrap();
    let o = socnav(&["run", "--scenario", "frontal_gesture", "--out", &path(&dir, "o")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn plain_planner_head_on_counts_as_collision() {
    let dir = TempDir::new().unwrap();
    let o = socnav(&["run", "--scenario", "frontal_approach", "--gamma", "0", "--out", &path(&dir, "o")]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("end=intervention") || stdout(&o).contains("end=collision"));
}

#[test]
fn remote_without_key_fails_setup() {
    let dir = TempDir::new().unwrap();
    let o = socnav(&["run", "--scenario", "open_field", "--provider", "remote", "--out", &path(&dir, "o")]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("SOCNAV_API_KEY"), "{}", stderr(&o));
}

#[test]
fn default_suite_batch_has_four_rows_and_is_repeatable() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a"), path(&dir, "b"));
    let first = socnav(&["batch", "--runs", "1", "--out", &a]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let second = socnav(&["batch", "--runs", "1", "--out", &b]);
    assert_eq!(code(&second), 0);

    let csv_a = fs::read(Path::new(&a).join("metrics.csv")).unwrap();
    let csv_b = fs::read(Path::new(&b).join("metrics.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("scenario,runs,"));
    assert!(rows[1..].iter().all(|r| r.split(',').nth(1) == Some("1")));
    assert_eq!(stdout(&first), text);

    for name in ["frontal_approach", "frontal_gesture", "intersection", "narrow_doorway"] {
        let log = format!("logs/{name}_seed0.json");
        let la = fs::read(Path::new(&a).join(&log)).unwrap();
        let lb = fs::read(Path::new(&b).join(&log)).unwrap();
        assert_eq!(la, lb, "{log}");
    }
}

#[test]
fn batch_rejects_single_transcript_path() {
    let o = socnav(&["batch", "--runs", "1", "--record-transcript", "/tmp/x.jsonl"]);
    assert_eq!(code(&o), 1);
}

fn compare_cell(stdout: &str, scenario: &str, metric: &str) -> Vec<String> {
    let line = stdout
        .lines()
        .find(|l| l.starts_with(scenario) && l.split_whitespace().nth(1) == Some(metric))
        .unwrap_or_else(|| panic!("no {scenario} {metric} row in\n{stdout}"));
    line.split_whitespace().skip(2).map(str::to_string).collect()
}

#[test]
fn compare_social_against_plain_on_gesture() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"scenarios": ["frontal_gesture"]}"#);
    let b = write(&dir, "b.json", r#"{"scenarios": ["frontal_gesture"], "weights": {"gamma": 0.0}}"#);
    let out = path(&dir, "cmp");
    let o = socnav(&["compare", &a, &b, "--runs", "3", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cells = compare_cell(&stdout(&o), "frontal_gesture", "success_rate");
    assert_eq!(cells, ["100.0000", "0.0000", "-100.0000"]);
    assert!(Path::new(&out).join("compare.csv").is_file());
}

#[test]
fn compare_identical_configs_gives_zero_deltas() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"scenarios": ["intersection"]}"#);
    let o = socnav(&["compare", &a, &a, "--runs", "2", "--out", &path(&dir, "cmp")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("cmp/compare.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let delta = row.rsplit(',').next().unwrap();
        assert!(delta.is_empty() || delta == "0.0000", "{row}");
    }
}

#[test]
fn compare_disjoint_scenarios_fails() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"scenarios": ["intersection"]}"#);
    let b = write(&dir, "b.json", r#"{"scenarios": ["narrow_doorway"]}"#);
    let o = socnav(&["compare", &a, &b, "--runs", "1", "--out", &path(&dir, "cmp")]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("share no scenarios"));
}

#[test]
fn effective_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let first = socnav(&["config", "--gamma", "0.5", "--seeds", "1-3,9", "--scenario", "intersection"]);
    assert_eq!(code(&first), 0);
    let dumped = write(&dir, "dump.json", &stdout(&first));
    let second = socnav(&["config", "--config", &dumped]);
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).contains("\"gamma\": 0.5"));
}

#[test]
fn plot_renders_and_overlays_logs() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "o");
    assert_eq!(code(&socnav(&["run", "--scenario", "intersection", "--out", &out])), 0);
    assert_eq!(code(&socnav(&["run", "--scenario", "intersection", "--seeds", "1", "--out", &out])), 0);
    let a = format!("{out}/intersection_seed0.json");
    let b = format!("{out}/intersection_seed1.json");
    let svg = path(&dir, "plot.svg");
    let o = socnav(&["plot", "--log", &a, "--log", &b, "--out", &svg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches(r#"<polyline class="robot"#).count(), 2);
    assert!(text.contains(r#"class="wall""#) && text.contains(r#"class="goal""#));

    let single = socnav(&["plot", "--log", &a]);
    assert_eq!(code(&single), 0);
    assert!(stdout(&single).starts_with("<svg"));
}

#[test]
fn plot_rejects_malformed_log() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"meta": 3}"#);
    let o = socnav(&["plot", "--log", &bad]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parsing trajectory log"));
}

#[test]
fn recorded_transcript_replays_the_same_trajectory() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a"), path(&dir, "b"));
    let transcript = path(&dir, "t.jsonl");
    let replay = path(&dir, "r.json");
    let args = ["run", "--scenario", "narrow_doorway", "--seeds", "2"];
    let first = socnav(&[&args[..], &["--out", &a, "--record-transcript", &transcript]].concat());
    assert_eq!(code(&first), 0, "{}", stdout(&first));
    assert!(fs::read_to_string(&transcript).unwrap().lines().count() > 0);

    let conv = socnav(&["transcript-to-replay", &transcript, &replay]);
    assert_eq!(code(&conv), 0, "{}", stderr(&conv));
    let second = socnav(&[&args[..], &["--out", &b, "--replay", &replay]].concat());
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    assert_eq!(stdout(&first), stdout(&second));

    let steps = |dir: &str| -> serde_json::Value {
        let text = fs::read_to_string(format!("{dir}/narrow_doorway_seed2.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()["steps"].clone()
    };
    assert_eq!(steps(&a), steps(&b));
}

#[test]
fn replay_provider_needs_a_file() {
    assert_eq!(code(&socnav(&["run", "--scenario", "open_field", "--provider", "replay"])), 1);
    let o = socnav(&["run", "--scenario", "open_field", "--replay", "/no/such/replay.json"]);
    assert_eq!(code(&o), 1);
}
