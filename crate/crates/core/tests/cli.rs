use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn donn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_donn"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SMALL: &str = r#"{
  "task": "synth",
  "synthetic_count": 50,
  "output_dir": "out",
  "seed": 3,
  "train": {"epochs": 1},
  "geometry": {"grid_n": 64, "active_n": 24, "distance_m": 0.05, "layers": 2}
}"#;

#[test]
fn encode_train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), SMALL).unwrap();
    let o = donn(dir.path(), &["--config", "c.json", "encode"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read(dir.path().join("out/train.cache")).unwrap();
    assert_eq!(code(&donn(dir.path(), &["--config", "c.json", "encode"])), 0);
    assert_eq!(fs::read(dir.path().join("out/train.cache")).unwrap(), first);
    assert_eq!(fs::read_to_string(dir.path().join("out/config.json")).unwrap(), SMALL);

    let o = donn(dir.path(), &["--config", "c.json", "train"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("test accuracy"));
    let o = donn(dir.path(), &["--config", "c.json", "eval", "--levels", "256"]);
    assert_eq!(code(&o), 0);

    fs::write(dir.path().join("bits.txt"), "1".repeat(24 * 24)).unwrap();
    let o = donn(dir.path(), &["--config", "c.json", "predict", "--bits", "bits.txt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/prediction.json")).unwrap()).unwrap();
    assert_eq!(p["zero_signal"], false);
    fs::write(dir.path().join("short.txt"), "101").unwrap();
    assert_eq!(code(&donn(dir.path(), &["--config", "c.json", "predict", "--bits", "short.txt"])), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&donn(dir.path(), &["train"])), 1);
    assert_eq!(code(&donn(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&donn(dir.path(), &["--config", "missing.json", "train"])), 1);
    fs::write(dir.path().join("bad.json"), r#"{"task":"synth","epochs":3}"#).unwrap();
    assert_eq!(code(&donn(dir.path(), &["--config", "bad.json", "train"])), 1);
    fs::write(dir.path().join("cp.json"), r#"{"task":"cartpole"}"#).unwrap();
    assert_eq!(code(&donn(dir.path(), &["--config", "cp.json", "train"])), 1);

    // table task without a schema
    fs::write(dir.path().join("t.csv"), "a,label\nx,1\n").unwrap();
    fs::write(dir.path().join("m.json"), r#"{"task":"mos2","data":"t.csv"}"#).unwrap();
    let o = donn(dir.path(), &["--config", "m.json", "encode"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"), "{}", String::from_utf8_lossy(&o.stderr));

    // teacher that cannot converge in one episode
    fs::write(dir.path().join("rl.json"), r#"{"task":"cartpole","rl":{"dqn":{"max_episodes":1}}}"#).unwrap();
    assert_eq!(code(&donn(dir.path(), &["--config", "rl.json", "rl", "teach"])), 3);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = donn(dir.path(), &["selftest"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stderr);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
}
