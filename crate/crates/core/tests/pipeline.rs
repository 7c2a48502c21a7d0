use nls_cascade::config::{Config, PRESETS};
use nls_cascade::pipeline::run_pipeline;
use nls_cascade::Error;

#[test]
fn same_config_gives_identical_outputs() {
    let cfg = Config::preset("desk-n5").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, _) = run_pipeline(&cfg, a.path()).unwrap();
    let (mb, _) = run_pipeline(&cfg, b.path()).unwrap();
    assert!(ma.passed(), "{:?}", ma.verdicts);
    for out in &ma.outputs {
        let x = std::fs::read(a.path().join(&out.file)).unwrap();
        let y = std::fs::read(b.path().join(&out.file)).unwrap();
        assert_eq!(x, y, "{} differs", out.file);
    }
    let x = std::fs::read(a.path().join("manifest.json")).unwrap();
    let y = std::fs::read(b.path().join("manifest.json")).unwrap();
    assert_eq!(x, y);
    assert_eq!(serde_json::to_string(&ma).unwrap(), serde_json::to_string(&mb).unwrap());
    assert!(a.path().join("timings.json").exists());
}

#[test]
fn missing_frequency_section_is_named() {
    let text = desk_text();
    let stripped: String = strip_section(text, "frequency");
    match Config::parse(&stripped) {
        Err(Error::ConfigError(msg)) => assert!(msg.contains("[frequency]"), "{msg}"),
        other => panic!("expected ConfigError, got {other:?}"),
    }
}

#[test]
fn missing_lambda_section_is_named() {
    let stripped = strip_section(desk_text(), "lambda_set");
    match Config::parse(&stripped) {
        Err(Error::ConfigError(msg)) => assert!(msg.contains("[lambda_set]"), "{msg}"),
        other => panic!("expected ConfigError, got {other:?}"),
    }
}

#[test]
fn stage_failure_names_the_stage() {
    let mut cfg = Config::preset("square-case").unwrap();
    cfg.experiment.lambdas = vec![0.5];
    let dir = tempfile::tempdir().unwrap();
    match run_pipeline(&cfg, dir.path()) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "shadow"),
        other => panic!("expected stage error, got {:?}", other.map(|_| ())),
    }
}

fn strip_section(text: &str, name: &str) -> String {
    let header = format!("[{name}]");
    let mut keep = true;
    let mut out = String::new();
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('[') {
            keep = t != header && !t.starts_with(&format!("[{name}."));
        }
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn desk_text() -> &'static str {
    PRESETS.iter().find(|(n, _)| *n == "desk-n5").unwrap().1
}
