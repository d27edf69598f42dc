use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beliefstate"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn simulate(dir: &Path) {
    let out = run(
        dir,
        &["simulate", "--log", "log.jsonl", "--gt", "gt.jsonl", "--knn", "knn.jsonl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn replay_reports_nine_objects() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out = run(dir.path(), &["replay", "--log", "log.jsonl", "--knn", "knn.jsonl"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("objects 9"), "{stdout}");
}

#[test]
fn inspect_dumps_belief_state() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out = run(dir.path(), &["inspect", "--log", "log.jsonl", "--knn", "knn.jsonl"]);
    assert!(out.status.success());
    let dump: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(dump.as_array().unwrap().len(), 9);
}

#[test]
fn gridsearch_emits_rows() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out = run(
        dir.path(),
        &[
            "gridsearch", "--log", "log.jsonl", "--knn", "knn.jsonl", "--gt", "gt.jsonl", "--acs",
            "1-3", "--cfs", "0.6,0.8", "--out", "grid.csv",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines[0], "ac,cf,mode,accuracy,precision,recall,coverage");
    assert_eq!(lines.len(), 1 + 3 * 2 * 2);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);

    // Missing file.
    assert_eq!(run(d, &["replay", "--log", "absent.jsonl"]).status.code(), Some(1));

    // Malformed record.
    std::fs::write(d.join("bad.jsonl"), "{\"timestamp\": 1.0,\n").unwrap();
    let out = run(d, &["replay", "--log", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:1:"));

    // Query parse error carries the script position.
    std::fs::write(d.join("q.txt"), "1 (detect (an object (color red)))\n2 (detect (an object))\n").unwrap();
    let out = run(d, &["query", "--log", "log.jsonl", "--script", "q.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q.txt:2:"));

    // Config violation.
    std::fs::write(d.join("cfg.toml"), "[resolution]\nsim_threshold = 2.0\n").unwrap();
    let out = run(d, &["replay", "--log", "log.jsonl", "--config", "cfg.toml"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(d, &["replay", "--log", "log.jsonl", "--ac", "0"]);
    assert_eq!(out.status.code(), Some(3));

    // Ground truth pointing at a hypothesis the log does not have.
    std::fs::write(
        d.join("gt_bad.jsonl"),
        "{\"timestamp\":0.0,\"hyp\":99,\"shape\":\"box\",\"color\":\"red\",\"class\":\"mug\"}\n",
    )
    .unwrap();
    let out = run(d, &["eval", "--log", "log.jsonl", "--knn", "knn.jsonl", "--gt", "gt_bad.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);
    std::fs::write(d.join("cfg.toml"), "[filters]\nenabled = true\n").unwrap();
    let out = run(
        d,
        &["replay", "--log", "log.jsonl", "--config", "cfg.toml", "--no-filters", "--report", "r.json"],
    );
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["processed"], report["scenes"]);
}
