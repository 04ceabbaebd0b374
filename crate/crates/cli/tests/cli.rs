//! End-to-end CLI checks: subcommands, file outputs, and exit codes
//! (0 success, 1 validation failure, 2 runtime error).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paas_core::repository::{build_zip, data_fixture, software_fixture};

fn paas() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paas"))
}

fn run(args: &[&str]) -> Output {
    paas().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn validate_archive_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("app.zip");
    fs::write(&good, software_fixture("Orders_App")).unwrap();
    let output = run(&["validate-archive", good.to_str().unwrap()]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(stdout(&output).contains("kind: software"));

    let data = dir.path().join("db.zip");
    fs::write(&data, data_fixture("Orders_Data")).unwrap();
    let output = run(&["validate-archive", data.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("kind: data"));

    let bad = dir.path().join("bad.zip");
    fs::write(
        &bad,
        build_zip(&[("A/x.txt", b"1".as_slice()), ("B/y.txt", b"2".as_slice())]),
    )
    .unwrap();
    let output = run(&["validate-archive", bad.to_str().unwrap()]);
    assert_eq!(code(&output), 1);

    let missing = dir.path().join("nothing.zip");
    let output = run(&["validate-archive", missing.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
}

#[test]
fn match_ranks_catalog() {
    let scenarios = scenarios_dir();
    let output = run(&[
        "match",
        "--template",
        scenarios.join("template.toml").to_str().unwrap(),
        "--catalog",
        scenarios.join("catalog.toml").to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let text = stdout(&output);
    // the exact-capacity offer wins; the Windows offer is filtered out
    let large_line = text.lines().find(|l| l.contains(" large")).unwrap();
    assert!(large_line.starts_with("1"), "ranking:\n{text}");
    assert!(!text.contains("win-large"));
}

#[test]
fn match_no_offer_is_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let template = dir.path().join("t.toml");
    fs::write(
        &template,
        "cpu_ghz = 1.0\ncpu_cores = 1\nmemory_gb = 1.0\ndisk_gb = 10.0\nos = \"Solaris\"\n",
    )
    .unwrap();
    let output = run(&[
        "match",
        "--template",
        template.to_str().unwrap(),
        "--catalog",
        scenarios_dir().join("catalog.toml").to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 1);
}

#[test]
fn run_then_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios_dir().join("minimal.toml");
    let output = run(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let trace = dir.path().join("minimal.trace.log");
    assert!(trace.exists());
    assert!(dir.path().join("minimal.metrics.txt").exists());
    let streams = dir.path().join("minimal.streams.tsv");
    assert!(streams.exists());

    let output = run(&["replay", trace.to_str().unwrap()]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(stdout(&output).contains("empty diff"));

    // a tampered trace must be flagged as a validation failure
    let original = fs::read_to_string(&trace).unwrap();
    let tampered = original.replacen("COMPLETE", "COMPLETE2", 1);
    assert_ne!(original, tampered);
    let tampered_path = dir.path().join("tampered.trace.log");
    fs::write(&tampered_path, tampered).unwrap();
    let output = run(&["replay", tampered_path.to_str().unwrap()]);
    assert_eq!(code(&output), 1);

    // the stream dump replays through the offline detector
    let output = run(&["replay-stream", streams.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("overload events"));
}

#[test]
fn run_rejects_invalid_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenarios_dir().join("minimal.toml"))
        .unwrap()
        .replace("rate_per_s = 1.0", "rate_per_s = -2.0");
    fs::write(&bad, text).unwrap();
    let output = run(&["run", bad.to_str().unwrap()]);
    assert_eq!(code(&output), 1);
    assert!(String::from_utf8_lossy(&output.stderr).contains("workload.rate_per_s"));
}

#[test]
fn state_dir_upload_publish_bind_flow() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state");
    fs::create_dir_all(&state).unwrap();
    fs::write(
        state.join("hosts.toml"),
        r#"
[[hosts]]
instance_id = "192.168.10.99"
cpu_ghz = 2.0
cpu_cores = 2
memory_gb = 1.0
disk_gb = 40.0
env = ["database"]

[[hosts]]
instance_id = "192.168.10.100"
cpu_ghz = 2.0
cpu_cores = 2
memory_gb = 1.0
disk_gb = 40.0
env = ["service-container"]
"#,
    )
    .unwrap();

    let app_zip = dir.path().join("app.zip");
    fs::write(&app_zip, software_fixture("Orders_App")).unwrap();
    let db_zip = dir.path().join("db.zip");
    fs::write(&db_zip, data_fixture("Orders_Data")).unwrap();

    let state_arg = state.to_str().unwrap();
    let output = run(&["upload", "--state", state_arg, "--provider", "vendor-a", app_zip.to_str().unwrap()]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let app_id = stdout(&output)
        .split_whitespace()
        .nth(2)
        .unwrap()
        .to_string();

    let output = run(&["upload", "--state", state_arg, "--provider", "vendor-a", db_zip.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    let db_id = stdout(&output).split_whitespace().nth(2).unwrap().to_string();

    // duplicate upload is rejected
    let output = run(&["upload", "--state", state_arg, "--provider", "vendor-a", app_zip.to_str().unwrap()]);
    assert_eq!(code(&output), 1);

    // publish the data service on the database host, software on the other
    let output = run(&[
        "publish", "--state", state_arg, "--component", &db_id, "--host", "192.168.10.99",
        "--name", "orders-db",
    ]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let output = run(&[
        "publish", "--state", state_arg, "--component", &app_id, "--host", "192.168.10.100",
        "--name", "orders",
    ]);
    assert_eq!(code(&output), 0);

    // software on a database-only host fails validation
    let output = run(&[
        "publish", "--state", state_arg, "--component", &app_id, "--host", "192.168.10.99",
        "--name", "orders2",
    ]);
    assert_eq!(code(&output), 1);

    // configuring its data source composes the pair; schemas default to record/query
    let output = run(&["bind", "--state", state_arg, "--software", "orders", "--data", "orders-db"]);
    assert_eq!(code(&output), 0, "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(stdout(&output).contains("binding: orders -> orders-db"));

    // the journal accumulated every mapping mutation and replays cleanly
    let journal = fs::read_to_string(state.join("journal.log")).unwrap();
    assert!(journal.contains("PUBLISH"));
    assert!(journal.contains("REGISTER"));
    assert!(journal.contains("COMPOSE"));
    assert!(journal.contains("BIND"));

    // bind again after reload: state survived across invocations
    let output = run(&["bind", "--state", state_arg, "--software", "orders", "--data", "orders-db"]);
    assert_eq!(code(&output), 0);
}
