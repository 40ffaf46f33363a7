//! End-to-end checks of the command-line binary: exit codes, output
//! layout, determinism, and the machine-readable error channel.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sonnet"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn sonnet");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Byte content of every data file under `dir`, keyed by relative path.
/// Skips `config_echo.toml`: it records the resolved output path, which
/// legitimately differs between otherwise identical runs.
fn tree_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> =
            std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().is_some_and(|n| n != "config_echo.toml") {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    for out in [&a, &b] {
        run_ok(bin().args(["synth", "--sessions", "2", "--duration-s", "90"]).args([
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    run_ok(bin().args(["synth", "--sessions", "2", "--duration-s", "90"]).args([
        "--seed",
        "6",
        "--out",
        c.to_str().unwrap(),
    ]));

    let snap_a = tree_snapshot(&a);
    let snap_b = tree_snapshot(&b);
    let paths = |snap: &[(String, Vec<u8>)]| snap.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    assert_eq!(paths(&snap_a), paths(&snap_b), "same seed, same layout");
    assert!(!snap_a.is_empty());
    for ((path, bytes_a), (_, bytes_b)) in snap_a.iter().zip(&snap_b) {
        assert!(bytes_a == bytes_b, "{path} must be byte-identical across same-seed runs");
    }

    let snap_c = tree_snapshot(&c);
    assert_eq!(paths(&snap_a), paths(&snap_c), "different seed keeps the same layout");
    assert!(
        snap_a.iter().zip(&snap_c).any(|((_, a), (_, c))| a != c),
        "different seed must change the synthesized content"
    );
}

#[test]
fn pipeline_runs_end_to_end_and_loso_has_one_fold_per_session() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();

    run_ok(bin().args([
        "synth",
        "--sessions",
        "3",
        "--duration-s",
        "300",
        "--seed",
        "9",
        "--out",
        out_s,
    ]));
    let sessions: Vec<String> = (0..3).map(|i| format!("synth_{i:02}")).collect();

    let mut windows_cmd = bin();
    windows_cmd.args(["windows", "--seed", "9", "--out", out_s]);
    for s in &sessions {
        windows_cmd.arg(out.join("synth").join(s));
    }
    run_ok(&mut windows_cmd);

    let mut loso_cmd = bin();
    loso_cmd.args(["loso", "--model", "linear", "--seed", "9", "--out", out_s]);
    for s in &sessions {
        loso_cmd.arg(out.join("windows").join(format!("{s}.win")));
    }
    run_ok(&mut loso_cmd);

    let report = std::fs::read_to_string(out.join("loso/cv_report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "fold,held_out,n_train,n_val,n_test,tp,fp,tn,fn,accuracy,precision,recall,f1,mcc,nmcc"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4, "one fold per session archive, plus the aggregate row");
    for (i, s) in sessions.iter().enumerate() {
        assert!(rows[i].starts_with(&format!("{i},{s},")), "row {i}: {}", rows[i]);
    }
    assert!(rows[3].starts_with("mean,,"), "last row aggregates the folds: {}", rows[3]);

    // Every command echoes the configuration it actually ran with.
    for sub in ["synth", "windows", "loso"] {
        let echo = out.join(sub).join("config_echo.toml");
        let text = std::fs::read_to_string(&echo).unwrap();
        assert!(text.contains("seed = 9"), "{sub} echo records the seed");
    }
}

#[test]
fn simulate_fixed_interval_gaps_are_wait_plus_transfer() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run_ok(bin().args([
        "simulate",
        "--strategy",
        "fixed_interval",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]));

    let log = std::fs::read_to_string(out.join("simulate/synth_00_fixed_interval.jsonl")).unwrap();
    let mut triggers: Vec<u64> = Vec::new();
    let mut completions: Vec<u64> = Vec::new();
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        match v["kind"].as_str() {
            Some("feed_trigger") => triggers.push(v["t_ms"].as_u64().unwrap()),
            Some("feed_complete") => completions.push(v["t_ms"].as_u64().unwrap()),
            _ => {}
        }
    }
    assert!(triggers.len() >= 2, "default 300 s session yields several feeds");
    assert_eq!(triggers[0], 44_500, "first trigger fires one wait after t = 0");
    // Wait (44.5 s) measured from each completion, plus the 9 s transfer,
    // gives a constant 53.5 s trigger-to-trigger cadence.
    for pair in triggers.windows(2) {
        assert_eq!(pair[1] - pair[0], 53_500);
    }
    for (t, c) in triggers.iter().zip(&completions) {
        assert_eq!(c - t, 9_000, "completion lands one transfer after its trigger");
    }
}

#[test]
fn out_dir_falls_back_to_environment_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let env_out = tmp.path().join("from_env");
    run_ok(
        bin()
            .args(["synth", "--sessions", "1", "--duration-s", "60", "--seed", "2"])
            .env("SONNET_OUT", &env_out)
            .current_dir(tmp.path()),
    );
    assert!(
        env_out.join("synth/synth_00/annotations.csv").exists(),
        "$SONNET_OUT is used when --out and the config file are absent"
    );
}

#[test]
fn errors_exit_nonzero_with_json_record_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp
        .path()
        .join("run");
    let missing = tmp.path().join("no_such_file.csv");
    let result = bin()
        .args(["ingest", missing.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!result.status.success());
    let stderr = String::from_utf8(result.stderr).unwrap();
    let record: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).expect("stderr ends with JSON");
    assert_eq!(record["error"]["kind"], "parse");
    assert!(record["error"]["message"].as_str().unwrap().contains("no_such_file"));
}

#[test]
fn metrics_scores_a_predictions_file() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = tmp.path().join("preds.csv");
    // 3 right out of 4 with one false positive and one miss avoided:
    // tp=2 (0.9, 0.5 at threshold 0.5), fn=0, tn=1, fp=1.
    std::fs::write(&preds, "score,label\n0.9,1\n0.5,1\n0.1,0\n0.7,0\n").unwrap();
    let out = tmp.path().join("run");
    run_ok(bin().args([
        "metrics",
        preds.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let table = std::fs::read_to_string(out.join("metrics/metrics.csv")).unwrap();
    assert!(table.contains("tp,2\n"), "{table}");
    assert!(table.contains("fp,1\n"), "{table}");
    assert!(table.contains("tn,1\n"), "{table}");
    assert!(table.contains("fn,0\n"), "{table}");
    assert!(table.contains("recall,1\n"), "{table}");
}
