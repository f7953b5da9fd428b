use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mssr::encodings::{self, EncodeError, Encoding, MutexOp, RwOp};
use mssr::progress::{check_progress, Verdict};
use mssr::projection::{project, project_role, proper_domains, roles};
use mssr::reducer::{explore, run, ExploreConfig, Outcome, Terminal};
use mssr::semantics::{check_consistency, proj_context};
use mssr::typecheck::typecheck;
use mssr::{DomainSet, GlobalType, Process, Role, SourceFile};
use serde_json::{json, Value};

const OK: u8 = 0;
const FAILED: u8 = 1;
const UNSAFE: u8 = 2;
const INCONCLUSIVE: u8 = 3;
const USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "mssr", version, about = "Session types with multiple senders and a single receiver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Type check a process against the global types of its file
    Check {
        file: PathBuf,
        #[arg(long)]
        process: String,
        /// Print the derivation tree
        #[arg(long)]
        explain: bool,
        #[arg(long)]
        json: bool,
    },
    /// Project a global type onto a role or a domain set (all of them by default)
    Project {
        file: PathBuf,
        #[arg(long)]
        global: String,
        #[arg(long, conflicts_with = "domain")]
        role: Option<String>,
        /// Comma-separated senders of an existential interaction
        #[arg(long, value_delimiter = ',')]
        domain: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
    },
    /// Check that a global type and its projections simulate each other
    Consistency {
        file: PathBuf,
        #[arg(long)]
        global: String,
        #[arg(long)]
        json: bool,
    },
    /// Run the static progress analysis
    Progress {
        file: PathBuf,
        #[arg(long)]
        process: String,
        #[arg(long)]
        json: bool,
    },
    /// Execute a process, either along one random schedule or exhaustively
    Simulate(Simulate),
    /// Print a process modelling a Rust concurrency primitive
    #[command(subcommand)]
    Encode(Encode),
}

#[derive(Args)]
struct Simulate {
    file: PathBuf,
    #[arg(long)]
    process: String,
    #[arg(long, conflicts_with = "exhaustive")]
    seed: Option<u64>,
    /// Steps allowed on a single run
    #[arg(long, default_value_t = 1000)]
    fuel: usize,
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = 10_000)]
    states: usize,
    #[arg(long, default_value_t = 100)]
    depth: usize,
    /// Call unfoldings allowed along a path
    #[arg(long, default_value_t = 8)]
    unfold: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Encode {
    /// Channel with K senders; a buffer of 0 is a rendezvous channel
    Mpsc {
        #[arg(long)]
        senders: usize,
        #[arg(long, default_value_t = 0)]
        buffer: usize,
        /// Messages per sender (buffered channels only)
        #[arg(long, default_value_t = 1)]
        messages: usize,
        #[arg(long)]
        no_shutdown: bool,
    },
    /// Mutex server with one client per thread, driven by a lock/try_lock/unlock script
    Mutex {
        #[arg(long)]
        threads: usize,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        no_shutdown: bool,
    },
    /// Readers-writer lock server, driven by a read/drop_read/write/drop_write script
    Rwlock {
        #[arg(long)]
        threads: usize,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        no_shutdown: bool,
    },
}

struct Failure(u8, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Failure {
        Failure(USAGE, msg.into())
    }
}

#[derive(Clone, Copy)]
struct Style(bool);

impl Style {
    fn from_env() -> Result<Style, Failure> {
        match std::env::var("MSSR_COLOR").as_deref() {
            Err(_) | Ok("auto") => Ok(Style(std::io::stdout().is_terminal())),
            Ok("always") => Ok(Style(true)),
            Ok("never") => Ok(Style(false)),
            Ok(other) => Err(Failure::usage(format!("MSSR_COLOR must be auto, always or never, not `{other}`"))),
        }
    }

    fn good(self, s: &str) -> String {
        self.paint("32", s)
    }

    fn bad(self, s: &str) -> String {
        self.paint("31", s)
    }

    fn warn(self, s: &str) -> String {
        self.paint("33", s)
    }

    fn paint(self, code: &str, s: &str) -> String {
        if self.0 {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = Style::from_env().and_then(|style| dispatch(cli.command, style));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("mssr: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path) -> Result<SourceFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    SourceFile::parse(&text).map_err(|e| Failure(FAILED, format!("{}: {e}", path.display())))
}

fn process<'a>(sf: &'a SourceFile, name: &str) -> Result<&'a Process, Failure> {
    sf.processes.get(name).ok_or_else(|| Failure::usage(format!("no process named `{name}`")))
}

fn global<'a>(sf: &'a SourceFile, name: &str) -> Result<&'a GlobalType, Failure> {
    sf.globals.get(name).ok_or_else(|| Failure::usage(format!("no global type named `{name}`")))
}

fn emit(v: Value) {
    let mut v = v;
    v.as_object_mut().expect("json object").insert("schema".into(), json!(1));
    println!("{}", serde_json::to_string_pretty(&v).expect("serialisable"));
}

fn dispatch(cmd: Command, style: Style) -> Result<u8, Failure> {
    match cmd {
        Command::Check { file, process: name, explain, json } => {
            let sf = load(&file)?;
            let p = process(&sf, &name)?;
            let res = typecheck(p, &sf.globals);
            if json {
                match &res {
                    Ok(d) => emit(json!({ "command": "check", "process": name, "ok": true, "rules": d.spine(), "derivation": d })),
                    Err(e) => emit(json!({ "command": "check", "process": name, "ok": false, "error": e.to_string() })),
                }
            } else {
                match &res {
                    Ok(d) => {
                        println!("{name}: {}", style.good("well typed"));
                        if explain {
                            print!("{}", d.render());
                        }
                    }
                    Err(e) => println!("{name}: {}: {e}", style.bad("ill typed")),
                }
            }
            Ok(if res.is_ok() { OK } else { FAILED })
        }
        Command::Project { file, global: name, role, domain, json } => {
            let sf = load(&file)?;
            let g = global(&sf, &name)?;
            let mut targets: Vec<DomainSet> = match (role, domain) {
                (Some(r), _) => vec![DomainSet::single(Role::new(r))],
                (_, Some(d)) => vec![DomainSet::new(d.into_iter().map(Role::new))],
                _ => roles(g).into_iter().map(DomainSet::single).chain(proper_domains(g)).collect(),
            };
            targets.dedup();
            let mut rows = Vec::new();
            let mut failed = false;
            for t in &targets {
                let res = match t.as_single() {
                    Some(r) => project_role(g, r),
                    None => project(g, t),
                };
                let key = match t.as_single() {
                    Some(r) => ("role", json!(r.name())),
                    None => ("domain", json!(t.roles().iter().map(Role::name).collect::<Vec<_>>())),
                };
                match res {
                    Ok(l) => {
                        if !json {
                            println!("{}: {l}", display_target(t));
                        }
                        rows.push(json!({ key.0: key.1, "local_type": l.to_string() }));
                    }
                    Err(e) => {
                        failed = true;
                        if !json {
                            println!("{}: {}: {e}", display_target(t), style.bad("undefined"));
                        }
                        rows.push(json!({ key.0: key.1, "error": e.to_string() }));
                    }
                }
            }
            if json {
                emit(json!({ "command": "project", "global": name, "projections": rows }));
            }
            Ok(if failed { FAILED } else { OK })
        }
        Command::Consistency { file, global: name, json } => {
            let sf = load(&file)?;
            let g = global(&sf, &name)?;
            let ctx = proj_context(g, "s").map_err(|e| Failure(FAILED, e.to_string()))?;
            let rep = check_consistency(g, &ctx, "s");
            if json {
                emit(json!({ "command": "consistency", "global": name, "report": rep }));
            } else if rep.consistent && rep.truncated {
                println!("{name}: {} ({} states, bound reached)", style.warn("no disagreement found"), rep.states);
            } else if rep.consistent {
                println!("{name}: {} ({} states)", style.good("consistent"), rep.states);
            } else {
                println!("{name}: {}", style.bad("inconsistent"));
                for (k, step) in rep.trace.iter().enumerate() {
                    println!("{}: {step}", k + 1);
                }
                if let Some(r) = &rep.reason {
                    println!("{r}");
                }
            }
            Ok(match (rep.consistent, rep.truncated) {
                (false, _) => FAILED,
                (true, true) => INCONCLUSIVE,
                (true, false) => OK,
            })
        }
        Command::Progress { file, process: name, json } => {
            let sf = load(&file)?;
            let p = process(&sf, &name)?;
            let rep = check_progress(p).map_err(|e| Failure(FAILED, e.to_string()))?;
            let code = match &rep.verdict {
                Verdict::Safe => OK,
                Verdict::Unsafe { .. } => UNSAFE,
                Verdict::Inconclusive { .. } => INCONCLUSIVE,
            };
            if json {
                emit(json!({ "command": "progress", "process": name, "result": rep.verdict }));
            } else {
                match &rep.verdict {
                    Verdict::Safe => println!("{name}: {}", style.good("Safe")),
                    Verdict::Unsafe { witness } => println!("{name}: {}\nwitness: {witness}", style.bad("Unsafe")),
                    Verdict::Inconclusive { residue } => {
                        println!("{name}: {}", style.warn("Inconclusive"));
                        for r in residue {
                            println!("unresolved: {r}");
                        }
                    }
                }
            }
            Ok(code)
        }
        Command::Simulate(s) => simulate(s, style),
        Command::Encode(e) => {
            let enc = encode(e)?;
            print!("{}", enc.to_source());
            Ok(OK)
        }
    }
}

fn display_target(t: &DomainSet) -> String {
    match t.as_single() {
        Some(r) => r.name().to_string(),
        None => t.to_string(),
    }
}

fn simulate(s: Simulate, style: Style) -> Result<u8, Failure> {
    let sf = load(&s.file)?;
    let p = process(&sf, &s.process)?;
    if !s.exhaustive {
        let trace = run(p, s.seed.unwrap_or(0), s.fuel);
        let (word, code) = match trace.terminal {
            Terminal::Terminated => (style.good("terminated"), OK),
            Terminal::Deadlock => (style.bad("deadlock"), UNSAFE),
            Terminal::FuelExhausted => (style.warn("out of fuel"), INCONCLUSIVE),
        };
        if s.json {
            emit(json!({ "command": "simulate", "process": s.process, "seed": s.seed.unwrap_or(0), "trace": trace.lines(), "terminal": trace.terminal }));
        } else {
            for line in trace.lines() {
                println!("{line}");
            }
            println!("{word}");
        }
        return Ok(code);
    }
    if s.workers == 0 {
        return Err(Failure::usage("--workers must be at least 1"));
    }
    let cfg = ExploreConfig { max_states: s.states, max_depth: s.depth, max_unfold: s.unfold, workers: s.workers };
    let ex = explore(p, &cfg);
    let code = match ex.outcome {
        Outcome::DeadlockFree => OK,
        Outcome::DeadlockFound(_) => UNSAFE,
        Outcome::BoundExceeded => INCONCLUSIVE,
    };
    let trace = match &ex.outcome {
        Outcome::DeadlockFound(t) => t.lines(),
        _ => Vec::new(),
    };
    if s.json {
        emit(json!({ "command": "simulate", "process": s.process, "outcome": ex.outcome.name(), "states": ex.states.len(), "trace": trace }));
    } else {
        let word = match ex.outcome {
            Outcome::DeadlockFree => style.good("DeadlockFree"),
            Outcome::DeadlockFound(_) => style.bad("DeadlockFound"),
            Outcome::BoundExceeded => style.warn("BoundExceeded"),
        };
        println!("{word} ({} states)", ex.states.len());
        for line in trace {
            println!("{line}");
        }
    }
    Ok(code)
}

fn script_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(FAILED, format!("{}: {e}", path.display())))
}

fn encode(e: Encode) -> Result<Encoding, Failure> {
    let fail = |e: EncodeError| Failure(FAILED, e.to_string());
    match e {
        Encode::Mpsc { senders, buffer: 0, .. } => encodings::mpsc_sync(senders).map_err(fail),
        Encode::Mpsc { senders, buffer, messages, no_shutdown } => encodings::mpsc_buffered(senders, buffer, messages, !no_shutdown).map_err(fail),
        Encode::Mutex { threads, script, no_shutdown } => {
            let ops: Vec<Vec<MutexOp>> = encodings::parse_script(&script_text(&script)?, threads).map_err(fail)?;
            encodings::mutex(&ops, !no_shutdown).map_err(fail)
        }
        Encode::Rwlock { threads, script, no_shutdown } => {
            let ops: Vec<Vec<RwOp>> = encodings::parse_script(&script_text(&script)?, threads).map_err(fail)?;
            encodings::rwlock(&ops, !no_shutdown).map_err(fail)
        }
    }
}
