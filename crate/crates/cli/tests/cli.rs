use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use taplab::adversary::golden_seed;
use taplab::engine::{simulate, EngineConfig};
use taplab::metrics::metrics_from_trace;
use taplab::sched_awake::Bal;

fn taplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taplab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(format!("{name}.json"));
    let path = path.to_str().unwrap().to_string();
    let mut args = vec!["gen", name, "-o", &path];
    args.extend_from_slice(extra);
    let o = taplab(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn run_matches_engine() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "golden-seed", &["--p", "8"]);
    let o = taplab(&["run", &path, "bal"]);
    assert!(o.status.success());
    let rec: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let tap = golden_seed(8).unwrap();
    let trace = simulate(&tap, &mut Bal::new(), EngineConfig::new(8)).unwrap();
    let m = metrics_from_trace(&trace, &tap).unwrap();
    assert_eq!(rec["awake"], m.awake.to_string());
    assert_eq!(rec["trt"], m.trt.to_string());
    assert_eq!(rec["instance_hash"], format!("{:016x}", tap.instance_hash()));
    assert_eq!(rec["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn csched_never_cancels() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "ballistic", &["--p", "16", "--j", "1"]);
    let o = taplab(&["run", &path, "csched"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rec["cancellations"], 0);
    assert_eq!(rec["budget_factor"], 4);
}

#[test]
fn cyclic_instance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"version":1,"p":2,"tasks":[{"id":0,"sigma":"1","pi":"1","arrival":"0","deps":[1]},{"id":1,"sigma":"1","pi":"1","arrival":"0","deps":[0]}]}"#,
    )
    .unwrap();
    let o = taplab(&["run", path.to_str().unwrap(), "bal"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cyclic dependencies"));
}

#[test]
fn cancelling_needs_permission() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "golden-seed", &["--p", "4"]);
    assert!(!taplab(&["run", &path, "canc"]).status.success());
    assert!(taplab(&["run", &path, "canc", "--allow-cancel"]).status.success());
    assert!(!taplab(&["run", &path, "no-such"]).status.success());
}

#[test]
fn sweep_is_deterministic() {
    let args = ["sweep", "--count", "12", "--schedulers", "bal,unk", "--seed", "7"];
    let a = taplab(&args);
    let b = taplab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance,scheduler,p,n,awake,trt,opt_awake,trt_lb,ratio_awake,ratio_trt_lb,max_ballistic_over_2sigma,violations"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 24);
    for r in rows {
        let ratio: taplab::Rational = r[8].parse().unwrap();
        let bound = if r[1] == "bal" { 3 } else { 6 };
        assert!(ratio <= taplab::Rational::from(bound));
        assert_eq!(r[11], "0");
    }
}

#[test]
fn seed_comes_from_environment() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_taplab"))
            .args(["gen", "random", "--p", "4"])
            .env("TAPLAB_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn oracle_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "golden-seed", &["--p", "4"]);
    let awake: Value = serde_json::from_str(&stdout(&taplab(&["oracle", &path, "awake"]))).unwrap();
    assert_eq!(awake["opt_awake"], "1");
    let lb: Value = serde_json::from_str(&stdout(&taplab(&["oracle", &path, "trt-lb"]))).unwrap();
    assert_eq!(lb["trt_lb"], "1");
    let grid: Value = serde_json::from_str(&stdout(&taplab(&["oracle", &path, "grid"]))).unwrap();
    assert_eq!(grid["grid"], "1/8");
}

#[test]
fn duel_reports_ratio() {
    let o = taplab(&["duel", "mwf-all-serial", "golden", "--p", "10"]);
    assert!(o.status.success());
    let rec: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rec["adversary"], "adv-golden");
    assert_eq!(rec["report"]["ratio_awake"], "987/610");
    assert!(rec["report"]["ratio_awake"].is_string());
}

#[test]
fn verify_only_oracle() {
    let o = taplab(&["verify", "--only", "oracle"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("PASS A1 "));
}

#[test]
fn mutated_balancer_fails_with_witness() {
    let o = taplab(&["verify", "--only", "A2", "--bal-scheduler", "bal-mutant", "--corpus", "60"]);
    assert!(!o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("FAIL A2 "));
    let witness = text.lines().find_map(|l| l.strip_prefix("  witness A2: ")).expect("witness line");
    taplab::Tap::from_json(witness).expect("witness is a valid instance");
}
