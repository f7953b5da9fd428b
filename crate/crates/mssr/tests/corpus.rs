use std::path::PathBuf;

use mssr::progress::{check_progress, Verdict};
use mssr::reducer::{explore, ExploreConfig, Outcome};
use mssr::semantics::{check_consistency, proj_context};
use mssr::typecheck::typecheck;
use mssr::SourceFile;

fn load(name: &str) -> SourceFile {
    let path = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    SourceFile::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn outcome(sf: &SourceFile, process: &str) -> &'static str {
    let cfg = ExploreConfig { max_states: 50_000, ..ExploreConfig::default() };
    explore(sf.process(process).unwrap(), &cfg).outcome.name()
}

fn verdict(sf: &SourceFile, process: &str) -> &'static str {
    match check_progress(sf.process(process).unwrap()).unwrap().verdict {
        Verdict::Safe => "Safe",
        Verdict::Unsafe { .. } => "Unsafe",
        Verdict::Inconclusive { .. } => "Inconclusive",
    }
}

#[test]
fn every_global_is_consistent_with_its_projection() {
    for file in ["seller.mssr", "satellite.mssr", "exam4.mssr", "delegation.mssr", "mpsc_sync.mssr"] {
        let sf = load(file);
        assert!(!sf.globals.is_empty(), "{file}");
        for (name, g) in &sf.globals {
            let ctx = proj_context(g, "s").unwrap();
            let rep = check_consistency(g, &ctx, "s");
            assert!(rep.consistent && !rep.truncated, "{file}/{name}: {rep:?}");
        }
    }
}

#[test]
fn typed_examples_typecheck() {
    for (file, process) in
        [("seller.mssr", "Main"), ("satellite.mssr", "Main"), ("exam4.mssr", "P"), ("delegation.mssr", "Main"), ("mpsc_sync.mssr", "OneShot")]
    {
        let sf = load(file);
        if let Err(e) = typecheck(sf.process(process).unwrap(), &sf.globals) {
            panic!("{file}/{process}: {e}");
        }
    }
}

#[test]
fn untyped_main_is_rejected() {
    // Every sender fires, but the protocol allows only one of them.
    let sf = load("mpsc_sync.mssr");
    assert!(typecheck(sf.process("Main").unwrap(), &sf.globals).is_err());
}

#[test]
fn deadlocks_where_expected() {
    let cases = [
        ("seller.mssr", "Main", "DeadlockFree"),
        ("satellite.mssr", "Main", "DeadlockFree"),
        ("delegation.mssr", "Main", "DeadlockFree"),
        ("exam4.mssr", "P", "DeadlockFound"),
        ("mutex_lock_unlock.mssr", "Main", "DeadlockFree"),
        ("mutex_double_lock.mssr", "Main", "DeadlockFound"),
        ("rwlock_readers.mssr", "Main", "DeadlockFree"),
        ("rwlock_writer_reader.mssr", "Main", "DeadlockFound"),
    ];
    for (file, process, expected) in cases {
        let sf = load(file);
        assert_eq!(outcome(&sf, process), expected, "{file}/{process}");
        let v = verdict(&sf, process);
        if expected == "DeadlockFound" {
            assert_eq!(v, "Unsafe", "{file}/{process}");
        }
    }
}

#[test]
fn analysis_is_conservative_on_alternative_holders() {
    // Orders from the "t1 reads first" and "t2 reads first" branches are
    // unioned, which chains into a cycle no single run can follow.
    let sf = load("rwlock_readers.mssr");
    assert_eq!(verdict(&sf, "Main"), "Unsafe");
    assert_eq!(outcome(&sf, "Main"), "DeadlockFree");
}

#[test]
fn mpsc_main_finishes() {
    for file in ["mpsc_sync.mssr", "mpsc_buffered.mssr"] {
        let sf = load(file);
        let out = explore(sf.process("Main").unwrap(), &ExploreConfig { max_states: 50_000, ..ExploreConfig::default() }).outcome;
        assert!(matches!(out, Outcome::DeadlockFree), "{file}: {}", out.name());
    }
}

#[test]
fn files_survive_pretty_printing() {
    for entry in std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "mssr") {
            let sf = load(path.file_name().unwrap().to_str().unwrap());
            let again = SourceFile::parse(&sf.pretty()).unwrap();
            assert_eq!(again.globals, sf.globals, "{}", path.display());
            assert_eq!(again.processes, sf.processes, "{}", path.display());
        }
    }
}
