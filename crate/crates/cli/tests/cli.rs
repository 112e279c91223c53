use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use stoqlab_core::npcert::{GapCgInstance, RelationKind};
use stoqlab_core::protocols::{build_product_test, build_sym_projector};
use stoqlab_core::rectclosure::{certified_no_instance, random_yes_instance};

fn dir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write(d: &Path, name: &str, v: &Value) -> String {
    let p = d.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn stoqlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stoqlab")).args(args).env_remove("STOQLAB_WORKERS").output().unwrap()
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn remark() -> Value {
    json!({"dims": [2, 2], "entries": [0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0]})
}

#[test]
fn sepval_and_mult_check() {
    let d = dir("sepval");
    let m = write(&d, "remark.json", &remark());
    let o = stoqlab(&["sepval", "--matrix", &m]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["schema_version"], 1);
    assert!((r["result"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    let o = stoqlab(&["mult-check", "--matrix", &m]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&o)["result"]["verdict"], "Excess");
    let id = write(&d, "id.json", &json!({"dims": [2, 2], "entries": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}));
    assert_eq!(stoqlab(&["mult-check", "--matrix", &id]).status.code(), Some(0));
}

#[test]
fn np5_honest_rejection_is_exact() {
    let d = dir("np5");
    let inst = GapCgInstance::cycle(4, 2, RelationKind::Disequality, 0.0).unwrap();
    let p = write(&d, "c4.json", &serde_json::to_value(inst.to_json()).unwrap());
    let csv = d.join("np5.csv");
    let o = stoqlab(&["np5", "--instance", &p, "--witness", "honest", "--mode", "rational", "--circuit", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["result"]["rejection"]["exact"], "1/8");
    assert!((r["result"]["circuit_acceptance"].as_f64().unwrap() - (1.0 - 1.0 / 16.0)).abs() < 1e-12);
    let text = fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("protocol,instance,witness,acceptance,rejection,ci_low,ci_high,seed"));
}

#[test]
fn np4_needs_seed_and_is_deterministic() {
    let d = dir("np4");
    let inst = GapCgInstance::cycle(12, 2, RelationKind::Disequality, 0.0).unwrap();
    let p = write(&d, "c12.json", &serde_json::to_value(inst.to_json()).unwrap());
    assert_eq!(stoqlab(&["np4", "--instance", &p]).status.code(), Some(2));
    let (a, b) = (d.join("a.json"), d.join("b.json"));
    for out in [&a, &b] {
        let o = stoqlab(&["np4", "--instance", &p, "--seed", "3", "--trials", "2000", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let r: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(r["seed"], 3);
    assert!(r["result"]["estimate"]["value"].as_f64().unwrap() >= 0.5);
}

#[test]
fn rect_closure_exit_codes() {
    let d = dir("rect");
    let yes = random_yes_instance(2, 1, 6, 4).unwrap().instance;
    let y = write(&d, "yes.json", &serde_json::to_value(&yes).unwrap());
    let o = stoqlab(&["rect-closure", "--instance", &y, "--gamma", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(report(&o)["result"]["report"]["seed"].is_array());
    let (no, g) = certified_no_instance(2, 1, 1, 0.05, 0).unwrap();
    let n = write(&d, "no.json", &serde_json::to_value(&no).unwrap());
    assert_eq!(stoqlab(&["rect-closure", "--instance", &n, "--gamma", &g.to_string()]).status.code(), Some(1));
    assert_eq!(stoqlab(&["rect-closure", "--instance", &n, "--parallel-seeds"]).status.code(), Some(1));
    assert_eq!(stoqlab(&["rect-closure", "--instance", &y, "--max-ell", "1"]).status.code(), Some(2));
}

#[test]
fn corrupted_instance_writes_nothing() {
    let d = dir("corrupt");
    let bad = d.join("bad.json");
    fs::write(&bad, "{\"width\": 3, \"gates\": [").unwrap();
    let out = d.join("report.json");
    let o = stoqlab(&["rect-closure", "--instance", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let g = write(&d, "gate.json", &json!({"width": 2, "gates": [{"kind": "CNOT", "qubits": [0, 0]}]}));
    assert_eq!(stoqlab(&["circuit", "--circuit", &g]).status.code(), Some(2));
}

#[test]
fn circuit_and_verify() {
    let d = dir("verify");
    let c = write(&d, "c.json", &json!({"width": 2, "gates": [{"kind": "X", "qubits": [0]}, {"kind": "CNOT", "qubits": [0, 1]}]}));
    let r = report(&stoqlab(&["circuit", "--circuit", &c, "--input", "00", "--table"]));
    assert_eq!(r["result"]["outputs"][0]["output"], "11");
    assert_eq!(r["result"]["bijective"], true);
    let v = build_product_test(2, 1).unwrap();
    let vp = write(&d, "v.json", &serde_json::to_value(&v).unwrap());
    let bell = write(&d, "bell.json", &json!({"width": 2, "subset": ["00", "11"]}));
    let pair = write(&d, "pair.json", &json!({"width": 4, "subset": ["0000", "0011", "1100", "1111"]}));
    let o = stoqlab(&["verify", "--verifier", &vp, "--witness", &pair, "--mode", "rational"]);
    assert_eq!(report(&o)["result"]["acceptance"]["exact"], "7/8");
    assert_eq!(stoqlab(&["verify", "--verifier", &vp, "--witness", &pair, "--c", "0.9"]).status.code(), Some(1));
    let o = stoqlab(&["product-test", "--k", "2", "--ell", "1", "--state", &bell, "--mode", "rational"]);
    let r = report(&o);
    assert_eq!(r["result"]["p_prod"]["exact"], "3/4");
    assert_eq!(r["result"]["acceptance"]["exact"], "7/8");
}

#[test]
fn constructors_emit_verifiers() {
    let d = dir("constructors");
    let v = build_product_test(1, 1).unwrap();
    let vp = write(&d, "v.json", &serde_json::to_value(&v).unwrap());
    let out = d.join("rep.json");
    let o = stoqlab(&["repeat", "--verifier", &vp, "--copies", "2", "--strong", "--verifier-out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: stoqlab_core::StoqVerifier = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(rep.layout.k, 2 * v.layout.k);
    let three = write(&d, "three.json", &serde_json::to_value(build_sym_projector(3, 1, 0).unwrap()).unwrap());
    let o = stoqlab(&["compress", "--verifier", &three, "--c", "0.9", "--s", "0.6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(report(&o)["result"]["params"]["lambda_value"].as_f64().unwrap() > 0.0);
    let o = stoqlab(&["compress", "--verifier", &three, "--c", "0.9", "--s", "1.2"]);
    assert_eq!(o.status.code(), Some(2));
    let sym = build_product_test(2, 1).unwrap();
    let sp = write(&d, "s.json", &serde_json::to_value(&sym).unwrap());
    let o = stoqlab(&["symmetrize", "--verifier", &sp, "--c", "0.9", "--s", "0.6", "--r", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = stoqlab(&["repeat", "--verifier", &vp, "--error-bits", "4", "--overlap-bound", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(report(&o)["result"]["copies"].as_u64().unwrap() >= 1);
}

#[test]
fn birthday_and_sos_round() {
    let o = stoqlab(&["birthday", "--seed", "1", "--trials", "20000"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert!((r["result"]["estimate"]["value"].as_f64().unwrap() - 0.5073).abs() < 0.02);
    assert_eq!(stoqlab(&["birthday"]).status.code(), Some(2));
    let d = dir("sos");
    let s = 0.5f64.sqrt();
    let oracle = write(&d, "o.json", &json!({"d": 2, "t": 2, "components": [{"w": 0.5, "v": [1.0, 0.0]}, {"w": 0.5, "v": [s, s]}]}));
    let m = write(&d, "m.json", &json!({"dims": [2, 2], "entries": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}));
    let o = stoqlab(&["sos-round", "--oracle", &oracle, "--matrix", &m, "--epsilon", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert!(r["result"]["result"]["final_hellinger"].as_f64().unwrap() <= 0.05 / (2.0 * 2f64.sqrt()) + 1e-12);
}

#[test]
fn cleancc_verdicts() {
    let d = dir("cleancc");
    let yes = write(&d, "yes.json", &json!({"n": 1, "dG": 1, "neighbors": [[1], [0]], "marked": [0, 0]}));
    let no = write(&d, "no.json", &json!({"n": 1, "dG": 1, "neighbors": [[1], [0]], "marked": [1, 0]}));
    let w = write(&d, "w.json", &json!({"width": 1, "subset": ["0", "1"]}));
    let o = stoqlab(&["cleancc", "--instance", &yes, "--witness", &w, "--mode", "rational", "--circuit"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r["result"]["witness_acceptance"]["exact"], "1");
    assert_eq!(r["result"]["circuit_agrees"], true);
    assert_eq!(stoqlab(&["cleancc", "--instance", &no]).status.code(), Some(1));
    assert_eq!(stoqlab(&["cleancc", "--exhaustive", "2", "--dg", "2"]).status.code(), Some(0));
}

#[test]
fn suite_filter() {
    let o = stoqlab(&["suite", "--only", "birthday"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r["result"]["criteria"].as_array().unwrap().len(), 1);
    assert_eq!(r["result"]["criteria"][0]["passed"], true);
    assert_eq!(stoqlab(&["suite", "--only", "nothing-matches"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(stoqlab(&["sepval"]).status.code(), Some(2));
    assert_eq!(stoqlab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(stoqlab(&["birthday", "--seed", "1", "--workers", "0"]).status.code(), Some(2));
}
