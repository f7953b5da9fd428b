//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use mssr::encodings::{self, MutexOp, RwOp};
use mssr::gen::{self, Limits};
use mssr::progress::{check_progress, Verdict, Witness};
use mssr::projection::{project, project_role};
use mssr::reducer::{explore, one_role_per_component, Exploration, ExploreConfig, Outcome, Step};
use mssr::semantics::{check_consistency, proj_context};
use mssr::typecheck::{subject_reduction_probe, typecheck};
use mssr::{parse_local, DomainSet, GlobalType, Process, Role, SourceFile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_mssr");

fn corpus_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus"))
}

fn corpus() -> Vec<(String, String, SourceFile)> {
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(corpus_dir()).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "mssr")).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let sf = SourceFile::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_name().unwrap().to_string_lossy().into_owned(), text, sf)
        })
        .collect()
}

fn load(name: &str) -> SourceFile {
    SourceFile::parse(&std::fs::read_to_string(corpus_dir().join(name)).unwrap()).unwrap()
}

fn mssr(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).env("MSSR_COLOR", "never").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn corpus_path(name: &str) -> String {
    corpus_dir().join(name).to_string_lossy().into_owned()
}

type Checked = Result<String, String>;
type Criterion = (&'static str, fn() -> Checked);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn same_local(got: &mssr::LocalType, want: &str) -> Result<(), String> {
    let want = parse_local(want).map_err(|e| e.to_string())?;
    ensure(got.canonical() == want.canonical(), format!("got {got}, want {want}"))
}

fn golden_projection() -> Checked {
    let seller = load("seller.mssr");
    let g = &seller.globals["G"];
    let rs = project_role(g, &Role::new("r_s")).map_err(|e| e.to_string())?;
    same_local(&rs, "exists& { r_b & purchase(). r_b + { price(int). r_b & { ok(). end, quit(). end } }, r_d & deliver(). r_d + { restock(str). end } }")?;
    let dom = DomainSet::new([Role::new("r_b"), Role::new("r_d")]);
    let r = project(g, &dom).map_err(|e| e.to_string())?;
    same_local(&r, "exists+ r_s { r_b : purchase(). r_s & { price(int). r_s + { ok(). end, quit(). end } }, r_d : deliver(). r_s & { restock(str). end } }")?;
    let sat = load("satellite.mssr");
    let g = &sat.globals["Sat"];
    let pc = project_role(g, &Role::new("p_c")).map_err(|e| e.to_string())?;
    same_local(
        &pc,
        "rec t . exists& { p_r & l_r(). p_r & { inq(str). p_r + { para(int). t }, mod(str). p_r & { para(int). t } }, p_y & l_y(). p_y & { data(str). p_y + { comm(int). t } } }",
    )?;
    let a = project(g, &DomainSet::new([Role::new("p_r"), Role::new("p_y")])).map_err(|e| e.to_string())?;
    same_local(
        &a,
        "rec t . exists+ p_c { p_r : l_r(). p_c + { inq(str). p_c & { para(int). t }, mod(str). p_c + { para(int). t } }, p_y : l_y(). p_c + { data(str). p_c & { comm(int). t } } }",
    )?;
    let (code, out) = mssr(&["project", &corpus_path("seller.mssr"), "--global", "G", "--role", "r_s"]);
    ensure(code == 0 && out.trim() == format!("r_s: {rs}"), format!("cli printed {out:?} with exit {code}"))?;
    Ok("seller r_s, seller {r_b, r_d}, satellite p_c and {p_r, p_y} match".into())
}

fn golden_typing() -> Checked {
    let seller = load("seller.mssr");
    let d = typecheck(&seller.processes["Main"], &seller.globals).map_err(|e| e.to_string())?;
    let spine = d.spine();
    ensure(spine.len() >= 2 && spine[..2] == ["T-new", "T-Par"], format!("root chain {spine:?}"))?;
    let rules = d.rules();
    ensure(rules.contains("T-exist") && rules.contains("T-select′"), format!("rules used {rules:?}"))?;
    let (code, _) = mssr(&["check", &corpus_path("seller.mssr"), "--process", "Main"]);
    ensure(code == 0, format!("check exited {code}"))?;
    Ok(format!("root chain {} -> {}, rules include T-exist and T-select′", spine[0], spine[1]))
}

fn golden_deadlock() -> Checked {
    let f = load("exam4.mssr");
    let p = &f.processes["P"];
    typecheck(p, &f.globals).map_err(|e| format!("P does not typecheck: {e}"))?;
    let rep = check_progress(p).map_err(|e| e.to_string())?;
    let first = "(s[p][r], l1, 1)";
    let second = "(s[r][p], l1, 1)";
    match &rep.verdict {
        Verdict::Unsafe { witness: Witness::Order { first: a, second: b } } if a.to_string() == first && b.to_string() == second => {}
        v => return Err(format!("verdict {v:?}")),
    }
    let (code, out) = mssr(&["progress", &corpus_path("exam4.mssr"), "--process", "P"]);
    ensure(code == 2 && out.contains(first) && out.contains(second), format!("progress exited {code}: {out}"))?;
    let (code, out) = mssr(&["simulate", &corpus_path("exam4.mssr"), "--process", "P", "--exhaustive", "--states", "10000", "--depth", "100"]);
    let lines: Vec<&str> = out.lines().collect();
    ensure(code == 2 && lines.len() == 1 && lines[0].starts_with("DeadlockFound"), format!("simulate exited {code}: {out}"))?;
    Ok(format!("typed, Unsafe with {first} ≺ {second}, DeadlockFound with an empty trace"))
}

fn executable_consistency() -> Checked {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let limits = Limits { roles: 4, exists: 1, depth: 4, recs: 2 };
    let (mut with_exists, mut with_recs, mut bounded) = (0, 0, 0);
    for i in 0..500 {
        let g = gen::global_type(&mut rng, limits, 10_000).ok_or("generator gave up")?;
        with_exists += usize::from(count(&g, &|g| matches!(g, GlobalType::Exist { .. })) > 0);
        with_recs += usize::from(count(&g, &|g| matches!(g, GlobalType::Rec { .. })) > 0);
        ensure(count(&g, &|g| matches!(g, GlobalType::Exist { .. })) <= 1, format!("#{i} has two existentials: {g}"))?;
        ensure(count(&g, &|g| matches!(g, GlobalType::Rec { .. })) <= 2, format!("#{i} has three binders: {g}"))?;
        ensure(mssr::projection::roles(&g).len() <= 4, format!("#{i} has too many roles: {g}"))?;
        let ctx = proj_context(&g, "s").map_err(|e| format!("#{i} {g}: {e}"))?;
        let rep = check_consistency(&g, &ctx, "s");
        ensure(rep.consistent, format!("#{i} {g}: {:?} after {:?}", rep.reason, rep.trace))?;
        // Loops that overtake each other forever have no finite global LTS.
        bounded += usize::from(rep.truncated);
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), format!("took {t:?}"))?;
    Ok(format!("500/500 consistent ({with_exists} with an existential, {with_recs} recursive, {bounded} checked up to the growth cap) in {t:.1?}"))
}

fn count(g: &GlobalType, pred: &dyn Fn(&GlobalType) -> bool) -> usize {
    let here = usize::from(pred(g));
    here + match g {
        GlobalType::Comm { branches, .. } => branches.iter().map(|b| count(&b.cont, pred)).sum(),
        GlobalType::Exist { rows, .. } => rows.iter().map(|r| count(&r.cont, pred)).sum(),
        GlobalType::Rec { body, .. } => count(body, pred),
        _ => 0,
    }
}

fn typed_corpus() -> Vec<(String, Process, BTreeMap<String, GlobalType>)> {
    let mut out = Vec::new();
    for (file, _, sf) in corpus() {
        for (name, p) in &sf.processes {
            if typecheck(p, &sf.globals).is_ok() {
                out.push((format!("{file}:{name}"), p.clone(), sf.globals.clone()));
            }
        }
    }
    out
}

fn subject_reduction() -> Checked {
    let start = Instant::now();
    let typed = typed_corpus();
    let mut checked = 0;
    for (name, p, globals) in &typed {
        let rep = subject_reduction_probe(p, globals, &ExploreConfig::default()).map_err(|f| format!("{name}: {} after {:?}", f.reason, f.path))?;
        checked += rep.checked;
    }
    ensure(start.elapsed() < Duration::from_secs(60), "too slow")?;
    Ok(format!("{} typed corpus processes, {checked} reachable states retyped", typed.len()))
}

fn typed_deadlock_freedom() -> Checked {
    let mut n = 0;
    for (name, p, _) in typed_corpus() {
        if !one_role_per_component(&p) {
            continue;
        }
        n += 1;
        let ex = explore(&p, &ExploreConfig::default());
        ensure(matches!(ex.outcome, Outcome::DeadlockFree), format!("{name}: {}", ex.outcome.name()))?;
    }
    ensure(n > 0, "no process qualified")?;
    Ok(format!("{n} typed single-role-per-component processes are DeadlockFree"))
}

fn progress_soundness() -> Checked {
    let start = Instant::now();
    let cfg = ExploreConfig::default();
    let mut cases: Vec<(String, Process)> = Vec::new();
    for (file, _, sf) in corpus() {
        for (name, p) in &sf.processes {
            cases.push((format!("{file}:{name}"), p.clone()));
        }
    }
    let corpus_cases = cases.len();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let small = Limits { roles: 3, depth: 3, ..Limits::default() };
    let mut fuzzed = 0;
    while fuzzed < 200 {
        let g1 = gen::global_type(&mut rng, small, 10_000).ok_or("generator gave up")?;
        let g2 = gen::global_type(&mut rng, small, 10_000).ok_or("generator gave up")?;
        let p = if fuzzed % 4 == 0 { gen::process_for(&mut rng, &g1, "G1") } else { gen::process_pair(&mut rng, &g1, "G1", &g2, "G2") };
        let Some(p) = p else { continue };
        let globals = BTreeMap::from([("G1".to_string(), g1), ("G2".to_string(), g2)]);
        if typecheck(&p, &globals).is_err() {
            continue;
        }
        cases.push((format!("fuzz #{fuzzed}"), p));
        fuzzed += 1;
    }
    let (mut safe, mut deadlocks) = (0, 0);
    for (name, p) in &cases {
        let verdict = check_progress(p).map_err(|e| format!("{name}: {e}"))?.verdict;
        let outcome = explore(p, &cfg).outcome;
        let is_safe = matches!(verdict, Verdict::Safe);
        let stuck = matches!(outcome, Outcome::DeadlockFound(_));
        safe += usize::from(is_safe);
        deadlocks += usize::from(stuck);
        ensure(!(is_safe && stuck), format!("{name}: Safe but DeadlockFound\n{}", mssr::pretty::process_multiline(p)))?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(300), format!("took {t:?}"))?;
    Ok(format!("{corpus_cases} corpus + {fuzzed} fuzzed: {safe} Safe, {deadlocks} DeadlockFound, 0 violations in {t:.1?}"))
}

/// `(session, sender, receiver, label)` of every synchronisation leading
/// to state `i`.
fn comms(ex: &Exploration, i: usize) -> Vec<(String, String, String, String)> {
    ex.path_to(i)
        .into_iter()
        .filter_map(|(t, _)| t.step.comm().map(|(s, a, b, l)| (s.to_string(), a.name().to_string(), b.name().to_string(), l.to_string())))
        .collect()
}

fn roomy() -> ExploreConfig {
    ExploreConfig { max_states: 100_000, max_depth: 200, max_unfold: 16, workers: 1 }
}

fn encodings_behave() -> Checked {
    // (a) one thread taking the lock twice
    let e = encodings::mutex(&[vec![MutexOp::Lock, MutexOp::Lock]], true).map_err(|e| e.to_string())?;
    let p = e.process("Main").unwrap();
    let v = check_progress(p).map_err(|e| e.to_string())?.verdict;
    let ex = explore(p, &roomy());
    let Outcome::DeadlockFound(trace) = &ex.outcome else { return Err(format!("(a) {}", ex.outcome.name())) };
    ensure(matches!(v, Verdict::Unsafe { .. }), format!("(a) progress says {v:?}"))?;
    // the thread is stuck right after its first critical section began
    let labels: Vec<String> = trace.steps.iter().filter_map(|(s, _)| s.comm().map(|c| c.3.to_string())).collect();
    ensure(labels.ends_with(&["l1".into()]) && labels.contains(&"ok".to_string()), format!("(a) trace {labels:?}"))?;

    // (b) lock then unlock
    let e = encodings::mutex(&[vec![MutexOp::Lock, MutexOp::Unlock]], true).map_err(|e| e.to_string())?;
    let ex = explore(e.process("Main").unwrap(), &roomy());
    ensure(matches!(ex.outcome, Outcome::DeadlockFree), format!("(b) {}", ex.outcome.name()))?;
    let done = (0..ex.states.len()).filter(|&i| ex.states[i].is_terminated()).count();
    ensure(done > 0, "(b) no run terminates")?;

    // (c) two readers hold their guards at the same time
    let e = encodings::rwlock(&[vec![RwOp::Read, RwOp::DropRead], vec![RwOp::Read, RwOp::DropRead]], true).map_err(|e| e.to_string())?;
    let ex = explore(e.process("Main").unwrap(), &roomy());
    ensure(matches!(ex.outcome, Outcome::DeadlockFree), format!("(c) {}", ex.outcome.name()))?;
    let both = (0..ex.states.len()).find(|&i| read_guards(&comms(&ex, i)).len() == 2);
    ensure(both.is_some(), "(c) no state with two read guards")?;

    // (d) capacity one, two eager senders, each sending once
    let e = encodings::mpsc_buffered(2, 1, 1, true).map_err(|e| e.to_string())?;
    let ex = explore(e.process("Main").unwrap(), &roomy());
    ensure(matches!(ex.outcome, Outcome::DeadlockFree), format!("(d) {}", ex.outcome.name()))?;
    let mut blocked = 0;
    for i in 0..ex.states.len() {
        let c = comms(&ex, i);
        let pushed = c.iter().filter(|x| x.2 == "sc" && x.3.starts_with("tx")).count();
        let popped = c.iter().filter(|x| x.3 == "rx").count();
        ensure(pushed <= popped + 1, format!("(d) {pushed} pushes, {popped} pops after {c:?}"))?;
        if pushed == 1 && popped == 0 {
            let first = c.iter().find(|x| x.3.starts_with("tx")).unwrap().1.clone();
            let other = if first == "p1" { "p2" } else { "p1" };
            let moves = ex.program.successors(&ex.states[i]);
            let other_moves = moves.iter().any(|(t, _)| matches!(&t.step, Step::Comm { .. }) && t.step.comm().unwrap().1.name() == other);
            let other_waiting = ex.states[i].threads.iter().any(|t| t.to_string().starts_with(&format!("c[{other}][sc] + x")));
            if other_waiting && !other_moves {
                blocked += 1;
            }
        }
    }
    ensure(blocked > 0, "(d) the second sender is never blocked")?;
    Ok(format!("(a) Unsafe + DeadlockFound, (b) DeadlockFree, (c) two read guards reached, (d) second sender blocked in {blocked} states"))
}

/// Threads holding a read guard after a sequence of synchronisations.
fn read_guards(comms: &[(String, String, String, String)]) -> BTreeSet<String> {
    let mut asked = BTreeSet::new();
    let mut held = BTreeSet::new();
    for (_, a, b, l) in comms {
        match l.as_str() {
            "read" => {
                asked.insert(a.clone());
            }
            "ok" if asked.remove(b) => {
                held.insert(b.clone());
            }
            "readEnd" => {
                held.remove(a);
            }
            _ => {}
        }
    }
    held
}

fn round_trip_and_determinism() -> Checked {
    let mut n = 0;
    for (file, text, sf) in corpus() {
        let again = SourceFile::parse(&sf.pretty()).map_err(|e| format!("{file}: {e}"))?;
        let names = |f: &SourceFile| f.decls.iter().map(|d| d.name.clone()).collect::<Vec<_>>();
        let same = again.globals == sf.globals && again.locals == sf.locals && again.processes == sf.processes && names(&again) == names(&sf);
        ensure(same, format!("{file}: printing changes the file"))?;
        ensure(again.pretty() == sf.pretty(), format!("{file}: printing is not stable"))?;
        ensure(!text.is_empty(), file.clone())?;
        n += 1;
    }
    let mut runs = 0;
    for (file, _, sf) in corpus() {
        for name in sf.processes.keys() {
            for seed in [0u64, 7, 42] {
                let args = ["simulate", &corpus_path(&file), "--process", name, "--seed", &seed.to_string()];
                let a = mssr(&args);
                let b = mssr(&args);
                ensure(a == b, format!("{file}:{name} seed {seed} differs"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{n} corpus files round-trip, {runs} seeded runs reproduce"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("golden projection", golden_projection),
        ("golden typing", golden_typing),
        ("golden deadlock", golden_deadlock),
        ("consistency of fuzzed global types", executable_consistency),
        ("subject reduction on the corpus", subject_reduction),
        ("deadlock freedom of typed single-role processes", typed_deadlock_freedom),
        ("soundness of the progress analysis", progress_soundness),
        ("encodings", encodings_behave),
        ("round trip and determinism", round_trip_and_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
