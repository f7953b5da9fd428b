use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> String {
    format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn mssr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mssr")).args(args).env("MSSR_COLOR", "never").output().expect("spawn mssr")
}

fn code(args: &[&str]) -> i32 {
    mssr(args).status.code().expect("exit code")
}

fn json(args: &[&str]) -> Value {
    let out = mssr(args);
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}\n{}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["check", &corpus("seller.mssr"), "--process", "Main"]), 0);
    assert_eq!(code(&["check", &corpus("mpsc_sync.mssr"), "--process", "Main"]), 1);
    assert_eq!(code(&["progress", &corpus("exam4.mssr"), "--process", "P"]), 2);
    assert_eq!(code(&["simulate", &corpus("exam4.mssr"), "--process", "P", "--exhaustive"]), 2);
    assert_eq!(code(&["simulate", &corpus("seller.mssr"), "--process", "Main", "--exhaustive", "--states", "2"]), 3);
    assert_eq!(code(&["consistency", &corpus("seller.mssr"), "--global", "G"]), 0);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&["check", &corpus("seller.mssr"), "--process", "Nope"]), 64);
    assert_eq!(code(&["frobnicate"]), 64);
    assert_eq!(code(&["check", "/does/not/exist.mssr", "--process", "Main"]), 64);
    let out =
        Command::new(env!("CARGO_BIN_EXE_mssr")).args(["check", &corpus("seller.mssr"), "--process", "Main"]).env("MSSR_COLOR", "sometimes").output().unwrap();
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn json_reports_carry_a_schema() {
    let v = json(&["progress", &corpus("exam4.mssr"), "--process", "P", "--json"]);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["result"]["verdict"], "unsafe");
    assert_eq!(v["result"]["witness"]["first"], "(s[p][r], l1, 1)");

    let v = json(&["consistency", &corpus("satellite.mssr"), "--global", "Sat", "--json"]);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["report"]["consistent"], true);

    let v = json(&["project", &corpus("seller.mssr"), "--global", "G", "--json"]);
    assert!(v["projections"].as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn encodings_print_parsable_files() {
    let dir = std::env::temp_dir().join(format!("mssr-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (args, name) in [
        (vec!["encode", "mpsc", "--senders", "3"], "mpsc.mssr"),
        (vec!["encode", "mpsc", "--senders", "2", "--buffer", "1", "--messages", "2"], "buffered.mssr"),
        (vec!["encode", "mutex", "--threads", "1", "--script", &corpus("scripts/lock_unlock.txt")], "mutex.mssr"),
        (vec!["encode", "rwlock", "--threads", "2", "--script", &corpus("scripts/two_readers.txt")], "rwlock.mssr"),
    ] {
        let out = mssr(&args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let path = dir.join(name);
        std::fs::write(&path, &out.stdout).unwrap();
        let path = path.to_str().unwrap();
        assert_eq!(code(&["simulate", path, "--process", "Main", "--exhaustive", "--unfold", "16"]), 0, "{args:?}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn contended_lock_gets_stuck() {
    // While t1 holds the lock the server only answers try_lock from others.
    let out = mssr(&["encode", "mutex", "--threads", "2", "--script", &corpus("scripts/lock_unlock.txt")]);
    let path = std::env::temp_dir().join(format!("mssr-contended-{}.mssr", std::process::id()));
    std::fs::write(&path, &out.stdout).unwrap();
    assert_eq!(code(&["simulate", path.to_str().unwrap(), "--process", "Main", "--exhaustive"]), 2);
    std::fs::remove_file(&path).ok();
}

#[test]
fn seeded_runs_repeat() {
    let args = ["simulate", &corpus("satellite.mssr"), "--process", "Main", "--seed", "17", "--fuel", "40"];
    let a = mssr(&args);
    let b = mssr(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}
