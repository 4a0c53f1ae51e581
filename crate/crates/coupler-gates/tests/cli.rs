use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_coupler-gates");

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("COUPLER_GATES_DEVICE").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

const SMALL_ZZ: &str = r#"{
  "schema_version": 1,
  "name": "small-zz",
  "experiment": { "kind": "zz-scan", "fc": { "start": 5.0, "stop": 6.0, "steps": 11 } }
}"#;

const SMALL_RB: &str = r#"{
  "schema_version": 1,
  "name": "small-rb",
  "seed": 7,
  "experiment": {
    "kind": "rb", "native": "cz", "lengths": [1, 5, 10, 20], "n_seq": 4,
    "model": { "kind": "depolarizing", "p": 0.01, "p_interleaved": 0.005 }
  }
}"#;

#[test]
fn every_bundled_scenario_validates() {
    let o = run(&["list-scenarios"]);
    assert!(o.status.success());
    let listing = String::from_utf8(o.stdout).unwrap();
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_owned();
        assert!(listing.contains(&name), "{name} missing from list-scenarios");
        let o = run(&["validate", path.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["status"], "ok");
    }
}

#[test]
fn unknown_kind_is_a_validation_error_listing_the_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "bad.json",
        r#"{ "schema_version": 1, "name": "x", "experiment": { "kind": "spectroscopy" } }"#,
    );
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "validation");
    let msg = e["error"]["message"].as_str().unwrap();
    assert!(msg.contains("zz-scan") && msg.contains("predistortion-check"), "{msg}");
}

#[test]
fn unknown_field_and_bad_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let extra = write(dir.path(), "extra.json", &SMALL_ZZ.replace("\"name\"", "\"colour\": 1, \"name\""));
    assert_eq!(run(&["validate", extra.to_str().unwrap()]).status.code(), Some(2));
    let version = write(dir.path(), "version.json", &SMALL_ZZ.replace("\"schema_version\": 1", "\"schema_version\": 99"));
    assert_eq!(run(&["validate", version.to_str().unwrap()]).status.code(), Some(2));
    let steps = write(dir.path(), "steps.json", &SMALL_ZZ.replace("\"steps\": 11", "\"steps\": 0"));
    let o = run(&["validate", steps.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("fc"));
    let p = write(dir.path(), "p.json", &SMALL_RB.replace("\"p\": 0.01", "\"p\": 1.5"));
    assert_eq!(run(&["validate", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = run(&["validate", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"]["kind"], "io");
    let p = write(dir.path(), "zz.json", SMALL_ZZ);
    let o = run(&["validate", p.to_str().unwrap(), "--device", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn failed_root_search_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "zzfree.json",
        r#"{
  "schema_version": 1,
  "name": "no-root",
  "experiment": { "kind": "zz-free-search", "range_ns": [30.0, 32.0], "fc_bracket": [4.2, 4.9] }
}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"]["kind"], "numerical");
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn runs_are_deterministic_and_stamped() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("zz.json", SMALL_ZZ), ("rb.json", SMALL_RB)] {
        let p = write(dir.path(), name, text);
        let (a, b) = (dir.path().join(format!("{name}.a")), dir.path().join(format!("{name}.b")));
        for out in [&a, &b] {
            let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "1"]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        let (ma, mb) = (manifest(&a), manifest(&b));
        assert_eq!(ma["outputs"], mb["outputs"]);
        assert_eq!(ma["scenario_sha256"], mb["scenario_sha256"]);
        let sha = ma["scenario_sha256"].as_str().unwrap();
        for f in ma["outputs"].as_array().unwrap() {
            let file = f["file"].as_str().unwrap();
            if file.ends_with(".csv") {
                let text = std::fs::read_to_string(a.join(file)).unwrap();
                let first = text.lines().next().unwrap();
                assert!(first.starts_with("# coupler-gates") && first.contains(sha), "{file}: {first}");
            }
        }
    }
    // a different seed changes the RB sequences
    let p = dir.path().join("rb.json");
    let c = dir.path().join("rb.c");
    assert!(run(&["run", p.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "8"]).status.success());
    assert_eq!(manifest(&c)["seed"], 8);
}

#[test]
fn workers_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "zz.json", SMALL_ZZ);
    let out = dir.path().join("o");
    let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
