use std::path::Path;
use std::process::{Command, Output};

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let o = cascade(&["--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in [
        "convergents", "synthesize", "select-scaling", "build-lambda", "verify-lambda", "resonance-report", "nf-check",
        "toy-run", "cascade-find", "nls-run", "shadow", "ratio", "plan-strong", "pipeline",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn convergents_of_golden_ratio() {
    let o = cascade(&["convergents", "--omega", "golden", "--count", "6"]);
    assert_eq!(code(&o), 0);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let qs: Vec<i64> = rows.as_array().unwrap().iter().map(|r| r["q"].as_i64().unwrap()).collect();
    assert_eq!(qs, vec![1, 1, 2, 3, 5, 8]);
    assert!(rows[0].get("error_bound").is_some() && rows[0].get("certified").is_some());
}

#[test]
fn lambda_round_trip_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("lambda.json");
    let f = file.to_str().unwrap();
    let o = cascade(&["build-lambda", "--N", "3", "--seed", "7", "--box", "50", "--p", "3", "--q", "2", "--out", f]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&cascade(&["verify-lambda", f])), 0);

    let mut v = json(&file);
    let dup = v["generations"][0][0].clone();
    v["generations"][1].as_array_mut().unwrap().push(dup);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(code(&cascade(&["verify-lambda", bad.to_str().unwrap()])), 1);

    let report = dir.path().join("res.json");
    let o = cascade(&["resonance-report", "--lambda", f, "--omega", "1;2", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&report)["stage"], "resonance");
}

#[test]
fn nf_check_reports_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("lambda.json");
    let f = file.to_str().unwrap();
    assert_eq!(code(&cascade(&["build-lambda", "--N", "2", "--seed", "3", "--box", "6", "--retries", "50", "--p", "5", "--q", "4", "--out", f])), 0);
    let out = dir.path().join("nf.json");
    let o = cascade(&["nf-check", "--lambda", f, "--omega", "1;4,1000000000000000000", "--depth", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert!((v["displacement_slope"].as_f64().unwrap() - 3.0).abs() < 0.1);
    assert!(v["remainder_slope"].as_f64().unwrap() >= 4.7);
}

#[test]
fn toy_run_writes_csv() {
    let o = cascade(&["toy-run", "--N", "5", "--initial", "cascade", "--samples", "10"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,re1,im1,re2,im2,re3,im3,re4,im4,re5,im5");
    assert_eq!(lines.count(), 11);
}

#[test]
fn cascade_find_meets_delta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("orbit.json");
    let o = cascade(&["cascade-find", "--N", "6", "--delta", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = json(&out);
    assert!(v["frac_end"].as_f64().unwrap() >= 0.9);
}

#[test]
fn errors_exit_with_two() {
    assert_eq!(code(&cascade(&["select-scaling", "--config", "no-such-preset"])), 2);
    assert_eq!(code(&cascade(&["convergents", "--omega", "1;0"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[lambda_set]\nn = 5\nseed = 0\n").unwrap();
    let o = cascade(&["pipeline", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[frequency]"));
}

#[test]
fn plan_strong_on_log_kind_is_an_error() {
    assert_eq!(code(&cascade(&["plan-strong", "--config", "square-case"])), 2);
    assert_eq!(code(&cascade(&["plan-strong", "--config", "desk-n5"])), 0);
}

#[test]
fn pipeline_runs_square_case() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = cascade(&["pipeline", "--config", "square-case", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&run.join("manifest.json"));
    assert!(m["verdicts"].as_array().unwrap().iter().all(|v| v["pass"] == true));
    for f in m["outputs"].as_array().unwrap() {
        assert!(run.join(f["file"].as_str().unwrap()).exists());
    }
}
