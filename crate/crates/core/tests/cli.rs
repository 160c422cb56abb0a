use std::path::Path;
use std::process::{Command, Output};

fn surf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surf")).args(args).output().unwrap()
}

const TINY: &str = "\
# tiny point-mass run
env = point_mass_reach
seed = 3
total_steps = 600
feedback_frequency = 200
max_budget = 10
queries_per_session = 5
reward.hidden = 16
agent.hidden = 16
agent.batch_size = 32
agent.pretrain_steps = 200
crop.segment_len = 20
crop.h_min = 14
crop.h_max = 18
ssl.batch_size = 8
ssl.epochs = 2
unlabeled_ratio = 4
eval_frequency = 300
eval_episodes = 1
";

fn write_config(dir: &Path) -> String {
    let path = dir.join("tiny.cfg");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_then_eval_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let o = surf(&["run", "--config", &cfg, "--ssl", "on", "--tda", "on", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("labels used       10"), "{stdout}");
    for f in ["config.txt", "metrics.jsonl", "checkpoint.bin", "summary.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let saved = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(saved.contains("max_budget = 10"));
    let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    for line in metrics.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    let o = surf(&["eval", "--checkpoint", out.join("checkpoint.bin").to_str().unwrap(), "--episodes", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("point_mass_reach mean return over 2 episodes"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = surf(&["run", "--config", &cfg, "--set", "ssl.gamma=3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn human_teacher_requires_server() {
    let o = surf(&["run", "--teacher", "human"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--serve"));
}

#[test]
fn malformed_override() {
    let o = surf(&["run", "--set", "seed"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("key=value"));
}
