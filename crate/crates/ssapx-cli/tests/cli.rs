use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssapx"))
}

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn golden_solve_output() {
    let out = run(&["solve", "--input", &data("small.json"), "--eps", "0.0625", "--trace"]);
    assert_eq!(out.status.code(), Some(0));
    let golden = std::fs::read_to_string(data("small.golden.json")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn witness_resums_on_parse_back() {
    let out = run(&["solve", "--input", &data("small.json"), "--eps", "0.03", "--mode", "both"]);
    let v = json(&out);
    let items: Vec<u64> = serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(data("small.json")).unwrap())
        .unwrap()["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    for mode in ["approx", "exact"] {
        let r = &v[mode];
        let by_index: u64 = r["items"].as_array().unwrap().iter().map(|p| items[p[0].as_u64().unwrap() as usize] * p[1].as_u64().unwrap()).sum();
        let by_value: u64 = r["witness"].as_array().unwrap().iter().map(|p| p[0].as_u64().unwrap() * p[1].as_u64().unwrap()).sum();
        assert_eq!(by_index, r["value"].as_u64().unwrap());
        assert_eq!(by_value, r["value"].as_u64().unwrap());
    }
    assert_eq!(v["exact"]["certificate"]["exact"], true);
}

#[test]
fn malformed_input_exits_2() {
    let out = run(&["solve", "--input", &data("malformed.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
    let out = run(&["solve", "--input", &data("missing.json")]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "--problem", "partition"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_exits_3() {
    let out = run(&["solve", "--problem", "unbounded", "--gen", "uniform:n=50,max=1000000000,t=abs:900000000000", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_passes_on_generated_partition() {
    let out = run(&["solve", "--problem", "partition", "--gen", "uniform:n=50,seed=1", "--eps", "0.1", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let delta = v["approx"]["certificate"]["delta"].as_f64().unwrap();
    assert!(v["verify"]["ratio"].as_f64().unwrap() >= 1.0 - delta);
}

#[test]
fn stdin_input() {
    let mut child = bin().args(["solve", "--input", "-", "--mode", "exact"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(br#"{"problem":"unbounded","items":[4,6],"target":9}"#).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["exact"]["value"], 8);
}

#[test]
fn deterministic_across_runs_and_threads() {
    let args = ["solve", "--problem", "subset-sum", "--gen", "uniform:n=300,seed=5,max=1000000000", "--eps", "0.02", "--trace"];
    let a = bin().args(args).env("RAYON_NUM_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("RAYON_NUM_THREADS", "4").output().unwrap();
    let c = bin().args(args).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn dense_window_reaches_dense_regime() {
    let out = run(&["solve", "--problem", "subset-sum", "--gen", "dense-window:n=100,seed=1", "--eps", "0.0625", "--d", "4", "--regime", "dense", "--trace", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let trace = v["approx"]["trace"].as_array().unwrap();
    let regimes = trace.iter().find(|e| e[0] == "regimes").unwrap()[1].as_str().unwrap();
    assert!(regimes.contains("dense="), "{regimes}");
}

#[test]
fn gen_round_trips() {
    let out = run(&["gen", "--problem", "subset-sum", "smooth-heavy:n=12,seed=2,t=third"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let again = run(&["gen", "--problem", "subset-sum", "smooth-heavy:n=12,seed=2,t=third"]);
    assert_eq!(text.as_bytes(), &again.stdout[..]);
    let f = ssapx_cli::InstanceFile::parse(&text).unwrap();
    assert_eq!(f.to_canonical() + "\n", text);
}

#[test]
fn bench_emits_one_row_per_eps() {
    let out = run(&["bench", "--eps", "0.1,0.05,0.02", "--n", "40", "--max", "100000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().skip(1).all(|l| l.starts_with("subset-sum,40,")));
}

#[test]
fn timings_only_on_request() {
    let plain = json(&run(&["solve", "--input", &data("small.json")]));
    assert!(plain["approx"].get("timings_ms").is_none());
    let timed = json(&run(&["solve", "--input", &data("small.json"), "--eps", "0.03", "--timings"]));
    let phases: Vec<&str> = timed["approx"]["timings_ms"].as_array().unwrap().iter().map(|p| p[0].as_str().unwrap()).collect();
    assert_eq!(phases, ["preprocess", "group", "merge", "backtrack"]);
}
