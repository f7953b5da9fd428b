//! Processes modelling Rust's `mpsc` channels, `Mutex` and `RwLock`.
//!
//! Servers are groups of recursive definitions over one session. Shared
//! data is an opaque unit token. Unless `shutdown` is off, every client
//! reports `done` to a `main` role when its script is over and `main` then
//! sends `stop` to the server in its idle state, so that a finished run
//! reduces to `0` rather than leaving the server waiting.

use std::fmt::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::calculus::Process;
use crate::parser::{parse_global, parse_process};
use crate::pretty::process_multiline;
use crate::types::GlobalType;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("at least one sender is needed")]
    NoSenders,
    #[error("at least one thread is needed")]
    NoThreads,
    #[error("the buffer needs room for at least one message")]
    NoBuffer,
    #[error("thread {0} has an empty script")]
    EmptyScript(usize),
    #[error("script has {found} thread sections, expected 1 or {expected}")]
    Sections { found: usize, expected: usize },
    #[error("line {line}: unknown verb `{verb}`")]
    Verb { line: usize, verb: String },
    #[error("thread {thread}: `{verb}` without a matching acquisition")]
    Unmatched { thread: usize, verb: String },
}

/// Generated declarations, ready to print as a source file.
#[derive(Clone, Debug)]
pub struct Encoding {
    pub globals: Vec<(String, GlobalType)>,
    pub processes: Vec<(String, Process)>,
}

impl Encoding {
    pub fn process(&self, name: &str) -> Option<&Process> {
        self.processes.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for (n, g) in &self.globals {
            let _ = writeln!(out, "global {n} = {g}\n");
        }
        for (n, p) in &self.processes {
            let _ = writeln!(out, "process {n} =\n{}", process_multiline(p));
        }
        out
    }
}

fn build(globals: Vec<(String, String)>, processes: Vec<(String, String)>) -> Encoding {
    Encoding {
        globals: globals.into_iter().map(|(n, g)| (n, parse_global(&g).expect("generated global parses"))).collect(),
        processes: processes
            .into_iter()
            .map(|(n, p)| {
                let q = parse_process(&p).unwrap_or_else(|e| panic!("generated process parses: {e}\n{p}"));
                (n, q)
            })
            .collect(),
    }
}

/// Synchronous channel, one clone of the transmitter per sender.
///
/// `OneShot` is typed against `Chan`: one sender fires and the receiver
/// takes whichever message comes. `Main` lets every sender fire and
/// receives once per sender; it is meant for the progress analysis and the
/// explorer.
pub fn mpsc_sync(senders: usize) -> Result<Encoding, EncodeError> {
    if senders == 0 {
        return Err(EncodeError::NoSenders);
    }
    let ids: Vec<usize> = (1..=senders).collect();
    let global = if senders == 1 {
        "p1 -> q : x1(int). end".to_string()
    } else {
        let rows: Vec<String> = ids.iter().map(|i| format!("p{i} -> q : x{i}(int). end")).collect();
        format!("exists {{ {} }}", rows.join(", "))
    };
    let recv = |k: &str| {
        if senders == 1 {
            format!("c[q][p1] & {{ x1(a). {k} }}")
        } else {
            let rows: Vec<String> = ids.iter().map(|i| format!("c[q][p{i}] & x{i}(a). {k}")).collect();
            format!("exists& {{ {} }}", rows.join(", "))
        }
    };
    let mut one = vec![recv("0"), "c[p1][q] + x1(1). 0".to_string()];
    one.extend(ids[1..].iter().map(|_| "0".to_string()));
    let mut k = "0".to_string();
    for _ in 0..senders {
        k = recv(&k);
    }
    let mut all = vec![k];
    all.extend(ids.iter().map(|i| format!("c[p{i}][q] + x{i}({i}). 0")));
    Ok(build(
        vec![("Chan".into(), global)],
        vec![("OneShot".into(), format!("new c : Chan . ({})", one.join(" | "))), ("Main".into(), format!("new c . ({})", all.join(" | ")))],
    ))
}

fn main_role(session: &str, clients: &[String], server: &str) -> String {
    let mut k = format!("{session}[main][{server}] + stop(). 0");
    for c in clients.iter().rev() {
        k = format!("{session}[main][{c}] & {{ done(). {k} }}");
    }
    k
}

fn finish(session: &str, me: &str, shutdown: bool) -> String {
    if shutdown {
        format!("{session}[{me}][main] + done(). 0")
    } else {
        "0".into()
    }
}

/// Buffered channel of capacity `buffer`: a server `sc` sits between
/// `senders` transmitters, each sending `messages` times, and the receiver
/// `q`, which receives every message.
pub fn mpsc_buffered(senders: usize, buffer: usize, messages: usize, shutdown: bool) -> Result<Encoding, EncodeError> {
    if senders == 0 {
        return Err(EncodeError::NoSenders);
    }
    if buffer == 0 {
        return Err(EncodeError::NoBuffer);
    }
    let ids: Vec<usize> = (1..=senders).collect();
    let push = |i: usize, k: usize| format!("c[sc][p{i}] & x{i}(). c[sc][p{i}] & {{ tx{i}(v). P{}() }}", k + 1);
    let pop = |k: usize| format!("c[sc][q] & xr(). c[sc][q] + rx(()). P{}()", k - 1);
    let mut defs = Vec::new();
    for k in 0..=buffer {
        let mut rows: Vec<String> = Vec::new();
        if k < buffer {
            rows.extend(ids.iter().map(|&i| push(i, k)));
        }
        if k > 0 {
            rows.push(pop(k));
        }
        if k == 0 && shutdown {
            rows.push("c[sc][main] & stop(). 0".into());
        }
        let body = if rows.len() == 1 { single_row(&rows[0]) } else { format!("exists& {{ {} }}", rows.join(", ")) };
        defs.push(format!("P{k}() = {body}"));
    }
    let mut threads = Vec::new();
    for &i in &ids {
        let mut t = finish("c", &format!("p{i}"), shutdown);
        for _ in 0..messages {
            t = format!("c[p{i}][sc] + x{i}(). c[p{i}][sc] + tx{i}(()). {t}");
        }
        threads.push(t);
    }
    let mut r = finish("c", "q", shutdown);
    for _ in 0..senders * messages {
        r = format!("c[q][sc] + xr(). c[q][sc] & {{ rx(a). {r} }}");
    }
    threads.push(r);
    if shutdown {
        let mut clients: Vec<String> = ids.iter().map(|i| format!("p{i}")).collect();
        clients.push("q".into());
        threads.push(main_role("c", &clients, "sc"));
    }
    threads.push("P0()".into());
    let p = format!("new c . def {} in ({})", defs.join(" and "), threads.join(" | "));
    Ok(build(vec![], vec![("Main".into(), p)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MutexOp {
    Lock,
    TryLock,
    Unlock,
}

impl FromStr for MutexOp {
    type Err = ();
    fn from_str(s: &str) -> Result<MutexOp, ()> {
        match s {
            "lock" => Ok(MutexOp::Lock),
            "try_lock" => Ok(MutexOp::TryLock),
            "unlock" => Ok(MutexOp::Unlock),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RwOp {
    Read,
    DropRead,
    Write,
    DropWrite,
}

impl FromStr for RwOp {
    type Err = ();
    fn from_str(s: &str) -> Result<RwOp, ()> {
        match s {
            "read" => Ok(RwOp::Read),
            "drop_read" => Ok(RwOp::DropRead),
            "write" => Ok(RwOp::Write),
            "drop_write" => Ok(RwOp::DropWrite),
            _ => Err(()),
        }
    }
}

/// Read a script: a line `thread` opens the next thread's section, other
/// lines hold one verb each, `#` starts a comment. A single section is
/// shared by all threads.
pub fn parse_script<T: FromStr + Clone>(text: &str, threads: usize) -> Result<Vec<Vec<T>>, EncodeError> {
    let mut sections: Vec<Vec<T>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "thread" {
            sections.push(Vec::new());
            continue;
        }
        let op = line.parse::<T>().map_err(|_| EncodeError::Verb { line: n + 1, verb: line.to_string() })?;
        if sections.is_empty() {
            sections.push(Vec::new());
        }
        sections.last_mut().unwrap().push(op);
    }
    match sections.len() {
        1 if threads > 1 => {
            let s = sections.pop().unwrap();
            Ok(vec![s; threads])
        }
        n if n == threads => Ok(sections),
        n => Err(EncodeError::Sections { found: n, expected: threads }),
    }
}

fn check_scripts<T>(scripts: &[Vec<T>]) -> Result<(), EncodeError> {
    if scripts.is_empty() {
        return Err(EncodeError::NoThreads);
    }
    if let Some(i) = scripts.iter().position(Vec::is_empty) {
        return Err(EncodeError::EmptyScript(i + 1));
    }
    Ok(())
}

/// Mutex server `sm` and one client per script. A `try_lock` that is
/// refused skips ahead to just after the matching `unlock`.
pub fn mutex(scripts: &[Vec<MutexOp>], shutdown: bool) -> Result<Encoding, EncodeError> {
    check_scripts(scripts)?;
    let ids: Vec<usize> = (1..=scripts.len()).collect();
    let mut p_rows: Vec<String> = ids
        .iter()
        .map(|i| format!("m[sm][t{i}] & l{i}(). m[sm][t{i}] & {{ lock(). m[sm][t{i}] + ok(()). P{i}(), try_lock(). m[sm][t{i}] + ok(()). P{i}() }}"))
        .collect();
    if shutdown {
        p_rows.push("m[sm][main] & stop(). 0".into());
    }
    let mut defs = vec![format!("P() = exists& {{ {} }}", p_rows.join(", "))];
    for &i in &ids {
        let rows: Vec<String> = ids
            .iter()
            .map(|&j| {
                if i == j {
                    format!("m[sm][t{j}] & l{j}(). m[sm][t{j}] & {{ unlock(d). P() }}")
                } else {
                    format!("m[sm][t{j}] & l{j}(). m[sm][t{j}] & {{ try_lock(). m[sm][t{j}] + block(). P{i}() }}")
                }
            })
            .collect();
        let body = if rows.len() == 1 { single_row(&rows[0]) } else { format!("exists& {{ {} }}", rows.join(", ")) };
        defs.push(format!("P{i}() = {body}"));
    }
    let mut threads = Vec::new();
    for (&i, script) in ids.iter().zip(scripts) {
        threads.push(mutex_client(i, script, 0, shutdown));
    }
    if shutdown {
        let clients: Vec<String> = ids.iter().map(|i| format!("t{i}")).collect();
        threads.push(main_role("m", &clients, "sm"));
    }
    threads.push("P()".into());
    let p = format!("new m . def {} in ({})", defs.join(" and "), threads.join(" | "));
    Ok(build(vec![], vec![("Main".into(), p)]))
}

/// `c[a][b] & l(). K` as a one-row branching `c[a][b] & { l(). K }`.
fn single_row(row: &str) -> String {
    let (head, tail) = row.split_once(" & ").unwrap();
    let (first, rest) = tail.split_once(". ").unwrap();
    format!("{head} & {{ {first}. {rest} }}")
}

fn mutex_client(i: usize, script: &[MutexOp], at: usize, shutdown: bool) -> String {
    let Some(op) = script.get(at) else {
        return finish("m", &format!("t{i}"), shutdown);
    };
    let req = |verb: &str| format!("m[t{i}][sm] + l{i}(). m[t{i}][sm] + {verb}(). ");
    let next = mutex_client(i, script, at + 1, shutdown);
    match op {
        MutexOp::Lock => format!("{}m[t{i}][sm] & {{ ok(d). {next} }}", req("lock")),
        MutexOp::TryLock => {
            let after = script[at + 1..].iter().position(|o| *o == MutexOp::Unlock).map_or(script.len(), |k| at + 1 + k + 1);
            let skip = mutex_client(i, script, after, shutdown);
            format!("{}m[t{i}][sm] & {{ ok(d). {next}, block(). {skip} }}", req("try_lock"))
        }
        MutexOp::Unlock => format!("m[t{i}][sm] + l{i}(). m[t{i}][sm] + unlock(()). {next}"),
    }
}

fn subset_name(a: &[usize]) -> String {
    let parts: Vec<String> = a.iter().map(ToString::to_string).collect();
    format!("PR_{}", parts.join("_"))
}

/// Readers-writer lock server `sm`. Reader states are indexed by the set
/// of threads holding a read guard.
pub fn rwlock(scripts: &[Vec<RwOp>], shutdown: bool) -> Result<Encoding, EncodeError> {
    check_scripts(scripts)?;
    for (t, s) in scripts.iter().enumerate() {
        let (mut r, mut w) = (0usize, 0usize);
        for op in s {
            match op {
                RwOp::Read => r += 1,
                RwOp::Write => w += 1,
                RwOp::DropRead if r == 0 => return Err(EncodeError::Unmatched { thread: t + 1, verb: "drop_read".into() }),
                RwOp::DropWrite if w == 0 => return Err(EncodeError::Unmatched { thread: t + 1, verb: "drop_write".into() }),
                RwOp::DropRead => r -= 1,
                RwOp::DropWrite => w -= 1,
            }
        }
    }
    let n = scripts.len();
    let ids: Vec<usize> = (1..=n).collect();
    let mut p_rows: Vec<String> = ids
        .iter()
        .map(|i| {
            format!("m[sm][t{i}] & l{i}(). m[sm][t{i}] & {{ read(). m[sm][t{i}] + ok(()). {}(), write(). m[sm][t{i}] + ok(()). PW{i}() }}", subset_name(&[*i]))
        })
        .collect();
    if shutdown {
        p_rows.push("m[sm][main] & stop(). 0".into());
    }
    let mut defs = vec![format!("P() = exists& {{ {} }}", p_rows.join(", "))];
    for mask in 1u32..(1 << n) {
        let a: Vec<usize> = ids.iter().copied().filter(|i| mask & (1 << (i - 1)) != 0).collect();
        let rows: Vec<String> = ids
            .iter()
            .map(|&x| {
                if a.contains(&x) {
                    let rest: Vec<usize> = a.iter().copied().filter(|&y| y != x).collect();
                    let k = if rest.is_empty() { "P".to_string() } else { subset_name(&rest) };
                    format!("m[sm][t{x}] & l{x}(). m[sm][t{x}] & {{ readEnd(). {k}() }}")
                } else {
                    let mut more = a.clone();
                    more.push(x);
                    more.sort();
                    format!("m[sm][t{x}] & l{x}(). m[sm][t{x}] & {{ read(). m[sm][t{x}] + ok(()). {}() }}", subset_name(&more))
                }
            })
            .collect();
        let body = if rows.len() == 1 { single_row(&rows[0]) } else { format!("exists& {{ {} }}", rows.join(", ")) };
        defs.push(format!("{}() = {body}", subset_name(&a)));
    }
    for &i in &ids {
        defs.push(format!("PW{i}() = m[sm][t{i}] & {{ l{i}(). m[sm][t{i}] & {{ writeEnd(d). P() }} }}"));
    }
    let mut threads = Vec::new();
    for (&i, script) in ids.iter().zip(scripts) {
        let mut k = finish("m", &format!("t{i}"), shutdown);
        for op in script.iter().rev() {
            let req = |verb: &str| format!("m[t{i}][sm] + l{i}(). m[t{i}][sm] + {verb}");
            k = match op {
                RwOp::Read => format!("{}(). m[t{i}][sm] & {{ ok(g). {k} }}", req("read")),
                RwOp::Write => format!("{}(). m[t{i}][sm] & {{ ok(g). {k} }}", req("write")),
                RwOp::DropRead => format!("{}(). {k}", req("readEnd")),
                RwOp::DropWrite => format!("{}(()). {k}", req("writeEnd")),
            };
        }
        threads.push(k);
    }
    if shutdown {
        let clients: Vec<String> = ids.iter().map(|i| format!("t{i}")).collect();
        threads.push(main_role("m", &clients, "sm"));
    }
    threads.push("P()".into());
    let p = format!("new m . def {} in ({})", defs.join(" and "), threads.join(" | "));
    Ok(build(vec![], vec![("Main".into(), p)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::SourceFile;
    use crate::progress::{check_progress, Verdict};
    use crate::reducer::{explore, ExploreConfig, Outcome};

    fn roomy() -> ExploreConfig {
        ExploreConfig { max_unfold: 12, ..ExploreConfig::default() }
    }

    #[test]
    fn sources_round_trip() {
        let encs = [
            mpsc_sync(3).unwrap(),
            mpsc_buffered(2, 2, 1, true).unwrap(),
            mutex(&[vec![MutexOp::Lock, MutexOp::Unlock], vec![MutexOp::TryLock, MutexOp::Unlock]], true).unwrap(),
            rwlock(&[vec![RwOp::Read, RwOp::DropRead], vec![RwOp::Write, RwOp::DropWrite]], false).unwrap(),
        ];
        for e in encs {
            let sf = SourceFile::parse(&e.to_source()).unwrap();
            assert_eq!(sf.processes.len(), e.processes.len());
            for (n, p) in &e.processes {
                assert_eq!(&sf.processes[n], p);
            }
        }
    }

    #[test]
    fn one_shot_typechecks() {
        let e = mpsc_sync(2).unwrap();
        let globals = e.globals.iter().cloned().collect();
        crate::typecheck::typecheck(e.process("OneShot").unwrap(), &globals).unwrap();
        assert!(matches!(explore(e.process("Main").unwrap(), &roomy()).outcome, Outcome::DeadlockFree));
    }

    #[test]
    fn double_lock_deadlocks() {
        let e = mutex(&[vec![MutexOp::Lock, MutexOp::Lock]], true).unwrap();
        let p = e.process("Main").unwrap();
        assert!(matches!(check_progress(p).unwrap().verdict, Verdict::Unsafe { .. }));
        assert!(matches!(explore(p, &roomy()).outcome, Outcome::DeadlockFound(_)));
    }

    #[test]
    fn lock_then_unlock_terminates() {
        let e = mutex(&[vec![MutexOp::Lock, MutexOp::Unlock]], true).unwrap();
        assert!(matches!(explore(e.process("Main").unwrap(), &roomy()).outcome, Outcome::DeadlockFree));
    }

    #[test]
    fn without_shutdown_the_server_waits() {
        let e = mutex(&[vec![MutexOp::Lock, MutexOp::Unlock]], false).unwrap();
        assert!(matches!(explore(e.process("Main").unwrap(), &roomy()).outcome, Outcome::DeadlockFound(_)));
    }

    #[test]
    fn refused_try_lock_skips_the_critical_section() {
        let s = [MutexOp::TryLock, MutexOp::Lock, MutexOp::Unlock, MutexOp::Lock];
        let t = mutex_client(1, &s, 0, false);
        assert!(t.contains("block(). m[t1][sm] + l1(). m[t1][sm] + lock()"), "{t}");
    }

    #[test]
    fn scripts() {
        let s: Vec<Vec<MutexOp>> = parse_script("lock # take it\nunlock\n", 2).unwrap();
        assert_eq!(s, vec![vec![MutexOp::Lock, MutexOp::Unlock]; 2]);
        let s: Vec<Vec<RwOp>> = parse_script("thread\nread\nthread\nwrite\n", 2).unwrap();
        assert_eq!(s[1], vec![RwOp::Write]);
        assert!(matches!(parse_script::<RwOp>("try_read\n", 1), Err(EncodeError::Verb { line: 1, .. })));
        assert!(matches!(parse_script::<MutexOp>("thread\nlock\nthread\nlock\n", 3), Err(EncodeError::Sections { found: 2, expected: 3 })));
        assert!(rwlock(&[vec![RwOp::DropRead]], true).is_err());
    }

    #[test]
    fn writer_without_drop_blocks_reader() {
        let e = rwlock(&[vec![RwOp::Write], vec![RwOp::Read]], true).unwrap();
        assert!(matches!(explore(e.process("Main").unwrap(), &roomy()).outcome, Outcome::DeadlockFound(_)));
        let e = rwlock(&[vec![RwOp::Write, RwOp::DropWrite]], true).unwrap();
        assert!(matches!(explore(e.process("Main").unwrap(), &roomy()).outcome, Outcome::DeadlockFree));
    }

    #[test]
    fn two_readers_share() {
        let e = rwlock(&[vec![RwOp::Read, RwOp::DropRead], vec![RwOp::Read, RwOp::DropRead]], true).unwrap();
        let ex = explore(e.process("Main").unwrap(), &roomy());
        assert!(matches!(ex.outcome, Outcome::DeadlockFree), "{}", ex.outcome.name());
    }

    #[test]
    fn buffered_channel_drains() {
        let e = mpsc_buffered(2, 1, 2, true).unwrap();
        let ex = explore(e.process("Main").unwrap(), &ExploreConfig { max_unfold: 20, ..roomy() });
        assert!(matches!(ex.outcome, Outcome::DeadlockFree), "{}", ex.outcome.name());
    }
}
