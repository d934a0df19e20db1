use std::path::{Path, PathBuf};

use latem::inflation::{inflate_manifest, InflationFactor};
use latem::orchestrator::build_startup_plan;
use latem::orchestrator::manifest::{
    load_manifest, parse_manifest_json, parse_manifest_toml, ExperimentManifest, ManifestError, TimerUnit,
    ValidationKind,
};
use latem::orchestrator::plan::StepKind;
use latem::rational::Rational;

fn sample_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/manifests/five_nodes.toml")
}

fn sample() -> ExperimentManifest {
    load_manifest(&sample_path()).unwrap()
}

fn r(s: &str) -> Rational {
    s.parse().unwrap()
}

fn x(s: &str) -> InflationFactor {
    s.parse().unwrap()
}

#[test]
fn sample_manifest_loads() {
    let m = sample();
    assert_eq!(m.nodes.len(), 5);
    assert_eq!(m.nodes[4].name, "n5");
    assert_eq!(m.nodes[4].ip.to_string(), "10.0.0.5");
    assert!(m.node("n1").unwrap().has_role("validator"));
    assert_eq!(m.phases.len(), 4);
    assert!(m.base_dir.is_absolute());
    assert!(m.matrix_path().unwrap().exists());
}

#[test]
fn timers_and_stagger_scale() {
    let m = sample();
    let doubled = inflate_manifest(&m, x("2")).unwrap();
    assert_eq!(doubled.timers["block_time"].value, r("24"));
    assert_eq!(doubled.timers["tx_rate"].value, r("2"));
    assert_eq!(doubled.timers["tx_rate"].unit, TimerUnit::PerSecond);
    assert_eq!(doubled.timers["validators"].value, r("64"));
    assert_eq!(doubled.phase("geth").unwrap().stagger_ms, r("1000"));
    assert_eq!(doubled.delay.as_ref().unwrap().inflation.value(), r("4"));
}

#[test]
fn identity_and_composition() {
    let m = sample();
    assert_eq!(inflate_manifest(&m, InflationFactor::IDENTITY).unwrap(), m);
    let twice = inflate_manifest(&inflate_manifest(&m, x("3/2")).unwrap(), x("4")).unwrap();
    let once = inflate_manifest(&m, x("6")).unwrap();
    assert_eq!(twice, once);
    assert_eq!(once.timers["block_time"].value, r("72"));
}

#[test]
fn untagged_timer_is_a_lint_error() {
    let text = std::fs::read_to_string(sample_path())
        .unwrap()
        .replace("inflate = false\n", "");
    let m = parse_manifest_toml(&text, sample_path().parent().unwrap()).unwrap();
    let err = inflate_manifest(&m, x("2")).unwrap_err();
    assert_eq!(err.timers, vec!["validators".to_string()]);
}

#[test]
fn rto_follows_inflated_delays() {
    let rto_of = |m: &ExperimentManifest| {
        let plan = build_startup_plan(m).unwrap();
        let step = plan.step(&StepKind::Bpf).unwrap();
        let source = &step.artifacts.iter().find(|(n, _)| n.ends_with(".c")).unwrap().1;
        source
            .lines()
            .find_map(|l| l.trim().strip_prefix("const int timeout = "))
            .and_then(|rest| rest.split(';').next())
            .unwrap()
            .to_string()
    };
    // Largest delay 83.2ms x2 snaps to 170ms; with the 100ms margin one second suffices.
    assert_eq!(rto_of(&sample()), "1");
    // x20: 1660ms + 100ms needs 2 x 1760ms < 1000s, so 4s.
    assert_eq!(rto_of(&inflate_manifest(&sample(), x("10")).unwrap()), "4");
}

#[test]
fn json_interchange_round_trip() {
    let m = sample();
    let back = parse_manifest_json(&m.to_json(), &m.base_dir).unwrap();
    assert_eq!(back, m);
}

#[test]
fn json_errors_have_no_line() {
    let m = sample();
    let json = m.to_json().replace("\"10.0.0.5\"", "\"10.0.0.4\"");
    let err = parse_manifest_json(&json, &m.base_dir).unwrap_err();
    assert!(err.errors().iter().all(|e| e.line.is_none()));
    assert!(err
        .errors()
        .iter()
        .any(|e| matches!(e.kind, ValidationKind::DuplicateIp { .. })));
}

#[test]
fn toml_errors_are_located() {
    let text = std::fs::read_to_string(sample_path())
        .unwrap()
        .replace("signal = \"SIGUSR2\"", "signal = \"SIGBOGUS\"");
    let err = parse_manifest_toml(&text, ".").unwrap_err();
    let e = &err.errors()[0];
    assert!(matches!(&e.kind, ValidationKind::UnknownSignal { signal, .. } if signal == "SIGBOGUS"));
    let line = text.lines().position(|l| l.contains("SIGBOGUS")).unwrap() + 1;
    assert!(e.line.is_some_and(|l| l.abs_diff(line) <= 3), "{e}");
}

#[test]
fn missing_file_is_io_error() {
    let err = load_manifest(Path::new("/nonexistent/latem.toml")).unwrap_err();
    assert!(matches!(err, ManifestError::Io { .. }));
}
