use std::path::PathBuf;
use std::process::{Command, Output};

fn design(args: &[&str], config: Option<&PathBuf>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_design"));
    cmd.args(args).env_remove("REFAB_CONFIG");
    if let Some(c) = config {
        cmd.env("REFAB_CONFIG", c);
    }
    cmd.output().expect("design runs")
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("refab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const TRIANGLE: &str =
    "{\"n\":3,\"r\":2}\n{\"iid\":0,\"verts\":[0,1]}\n{\"iid\":1,\"verts\":[1,2]}\n{\"iid\":2,\"verts\":[0,2]}\n";
const PATH: &str = "{\"n\":3,\"r\":2}\n{\"iid\":0,\"verts\":[0,1]}\n{\"iid\":1,\"verts\":[1,2]}\n";

#[test]
fn decompose_exit_codes() {
    let ok = design(&["decompose", "--n", "9", "--q", "3", "--strategy", "exact-only"], None);
    assert_eq!(ok.status.code(), Some(0));
    let blocks: Vec<Vec<u32>> = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(blocks.len(), 12);

    assert_eq!(design(&["decompose", "--n", "8", "--q", "3"], None).status.code(), Some(2));

    let tight = scratch("tight.json", "{\"exact_budget\": 3, \"strategy\": \"exact-only\"}");
    assert_eq!(design(&["decompose", "--n", "15", "--q", "3"], Some(&tight)).status.code(), Some(3));
}

#[test]
fn divcheck_and_exact() {
    let tri = scratch("tri.jsonl", TRIANGLE);
    let path = scratch("path.jsonl", PATH);
    let out = design(&["divcheck", tri.to_str().unwrap(), "--q", "3"], None);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["divisible"], true);
    let out = design(&["divcheck", path.to_str().unwrap(), "--q", "3"], None);
    assert_eq!(out.status.code(), Some(2));

    let out = design(&["decompose-exact", tri.to_str().unwrap(), "--q", "3"], None);
    let blocks: Vec<Vec<u32>> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(blocks, vec![vec![0, 1, 2]]);
}

#[test]
fn certificates_are_json() {
    let tri = scratch("tri2.jsonl", TRIANGLE);
    let rmh: serde_json::Value =
        serde_json::from_slice(&design(&["rmh", "build", "--q", "3", "--m", "3", "--verify"], None).stdout).unwrap();
    assert_eq!(rmh["verified"], true);
    assert_eq!(rmh["vertices"].as_array().unwrap().len(), 12);

    let fake: serde_json::Value =
        serde_json::from_slice(&design(&["gadget", "fake", "--q", "3", "--r", "2"], None).stdout).unwrap();
    assert_eq!(fake["kind"], "FakeEdge");

    let out = design(&["refiner", "mrl", "--q", "3", "--in", tri.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let rf: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rf["verify"]["ok"], true);
    assert_eq!(rf["certificate"]["q_table"].as_array().unwrap().len(), 2);

    let out = design(&["omni", "verify", "--in", tri.to_str().unwrap(), "--q", "3", "--n", "40"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn experiment_csv() {
    let out = design(&["experiment", "--n", "9", "--trials", "0"], None);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("trial,seed,n,q,p"));
}
