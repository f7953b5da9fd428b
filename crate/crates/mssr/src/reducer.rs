//! Reduction semantics: an interpreter with a seeded random scheduler and a
//! breadth-first explorer that serves as the deadlock oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{fresh, Channel, DefDecl, Param, Payload, Process, Role};
use crate::progress::freshen;

/// A closed process split into global definitions and running threads.
#[derive(Clone, Debug)]
pub struct Program {
    pub defs: BTreeMap<String, DefDecl>,
    /// Protocol names of sessions created before any communication.
    pub sessions: BTreeMap<String, Option<String>>,
    pub init: State,
    /// Top-level parallel components, in source order, before any step.
    pub components: Vec<Process>,
}

/// A reachable configuration: the multiset of running threads, kept sorted
/// and canonical so that structurally congruent states coincide.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub threads: Vec<Process>,
}

impl State {
    pub fn is_terminated(&self) -> bool {
        self.threads.is_empty()
    }

    pub fn as_process(&self) -> Process {
        Process::par(self.threads.iter().cloned())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_process())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RedexKind {
    BranchSync,
    ExistSync,
    CallUnfold,
}

/// One enabled reduction, named by the threads it involves.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Redex {
    pub kind: RedexKind,
    /// Sender then receiver for syncs; the single thread for an unfolding.
    pub participants: Vec<usize>,
    pub label: String,
    pub payload: Option<Payload>,
}

/// What happened in one step, for traces.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    Comm { sender: Channel, receiver: Channel, label: String, payload: Payload },
    Unfold { name: String },
}

impl Step {
    /// `(session, sender, receiver, label)` of a synchronisation.
    pub fn comm(&self) -> Option<(&str, &Role, &Role, &str)> {
        match self {
            Step::Comm { sender: Channel::Session { session, role: p }, receiver: Channel::Session { role: q, .. }, label, .. } => Some((session, p, q, label)),
            _ => None,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Comm { sender, receiver, label, .. } => write!(f, "{sender} --{label}--> {receiver}"),
            Step::Unfold { name } => write!(f, "unfold {name}"),
        }
    }
}

/// A step together with the sessions it created (name and protocol).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub step: Step,
    pub created: Vec<(String, Option<String>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Terminated,
    Deadlock,
    FuelExhausted,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub steps: Vec<(Step, State)>,
    pub terminal: Terminal,
}

impl Trace {
    pub fn lines(&self) -> Vec<String> {
        self.steps.iter().enumerate().map(|(i, (s, _))| format!("{}: {s}", i + 1)).collect()
    }
}

/// Runtime session names: `base#n`, smallest `n` not in use.
fn runtime_name(base: &str, in_use: &BTreeSet<String>) -> String {
    let stem = base.split('#').next().unwrap_or(base);
    (1..).map(|n| format!("{stem}#{n}")).find(|s| !in_use.contains(s)).unwrap()
}

/// Split `p` into definitions and threads. Definitions are lifted to the
/// top with their free variables turned into extra parameters; sessions
/// created outside any prefix are opened once and for all.
pub fn prepare(p: &Process) -> Program {
    let p = freshen(p);
    let mut taken = p.all_names();
    let mut defs = BTreeMap::new();
    let mut sessions = BTreeMap::new();
    let top = strip_static(&p, &mut sessions);
    let mut dynamic = BTreeSet::new();
    new_bound(&top, &mut dynamic);
    let top = lift(&top, &dynamic, &mut defs, &mut taken);
    let components = match &top {
        Process::Par(ps) => ps.clone(),
        q => vec![q.clone()],
    };
    let mut created = Vec::new();
    let init = normalize(vec![top], &mut created);
    for (s, g) in created {
        sessions.insert(s, g);
    }
    Program { defs, sessions, init, components }
}

fn strip_static(p: &Process, sessions: &mut BTreeMap<String, Option<String>>) -> Process {
    match p {
        Process::New { session, protocol, body } => {
            sessions.insert(session.clone(), protocol.clone());
            strip_static(body, sessions)
        }
        Process::Par(ps) => Process::par(ps.iter().map(|q| strip_static(q, sessions))),
        Process::Def { defs, scope } => Process::Def { defs: defs.clone(), scope: Box::new(strip_static(scope, sessions)) },
        q => q.clone(),
    }
}

/// Replace every free use of endpoint `from` by `to`.
fn replace_channel(p: &Process, from: &Channel, to: &Channel) -> Process {
    let rc = |c: &Channel| if c == from { to.clone() } else { c.clone() };
    let rp = |v: &Payload| match v {
        Payload::Chan(c) => Payload::Chan(rc(c)),
        l => l.clone(),
    };
    match p {
        Process::New { session, .. } if from.session() == Some(session) => p.clone(),
        Process::Select { subject, partner, label, payload, cont } => Process::Select {
            subject: rc(subject),
            partner: partner.clone(),
            label: label.clone(),
            payload: rp(payload),
            cont: Box::new(replace_channel(cont, from, to)),
        },
        Process::Branch { subject, partner, arms } => Process::Branch {
            subject: rc(subject),
            partner: partner.clone(),
            arms: arms.iter().map(|a| crate::calculus::Arm { cont: replace_channel(&a.cont, from, to), ..a.clone() }).collect(),
        },
        Process::Exist { subject, arms } => Process::Exist {
            subject: rc(subject),
            arms: arms.iter().map(|a| crate::calculus::ExistArm { cont: replace_channel(&a.cont, from, to), ..a.clone() }).collect(),
        },
        Process::Call { name, args } => Process::Call { name: name.clone(), args: args.iter().map(rp).collect() },
        _ => p.map_children(&mut |c| replace_channel(c, from, to)),
    }
}

fn endpoints(p: &Process, out: &mut BTreeSet<Channel>) {
    let mut note = |c: &Channel| {
        if let Channel::Session { .. } = c {
            out.insert(c.clone());
        }
    };
    match p {
        Process::Select { subject, payload, .. } => {
            note(subject);
            if let Payload::Chan(c) = payload {
                note(c);
            }
        }
        Process::Branch { subject, .. } | Process::Exist { subject, .. } => note(subject),
        Process::Call { args, .. } => args.iter().for_each(|a| {
            if let Payload::Chan(c) = a {
                note(c)
            }
        }),
        _ => {}
    }
    for c in p.children() {
        endpoints(c, out);
    }
}

fn new_bound(p: &Process, out: &mut BTreeSet<String>) {
    if let Process::New { session, .. } = p {
        out.insert(session.clone());
    }
    for c in p.children() {
        new_bound(c, out);
    }
}

/// `dynamic` holds sessions opened at run time; endpoints of those that a
/// definition uses from outside become parameters.
fn lift(p: &Process, dynamic: &BTreeSet<String>, table: &mut BTreeMap<String, DefDecl>, taken: &mut BTreeSet<String>) -> Process {
    match p {
        Process::Def { defs, scope } => {
            let names: BTreeSet<&String> = defs.iter().map(|d| &d.name).collect();
            // Free variables and non-static endpoints of the whole group.
            let mut vars = BTreeSet::new();
            let mut eps = BTreeSet::new();
            for d in defs {
                let params: BTreeSet<&String> = d.params.iter().map(|p| &p.name).collect();
                vars.extend(d.body.free_vars().into_iter().filter(|x| !params.contains(x)));
                let free = d.body.free_sessions();
                let mut es = BTreeSet::new();
                endpoints(&d.body, &mut es);
                eps.extend(es.into_iter().filter(|c| c.session().is_some_and(|s| free.contains(s) && dynamic.contains(s))));
            }
            let mut extra: Vec<(Payload, String)> = vars.iter().map(|x| (Payload::var(x.as_str()), x.clone())).collect();
            for c in &eps {
                let n = fresh(&c.to_string().replace(['[', ']'], "_"), taken);
                taken.insert(n.clone());
                extra.push((Payload::Chan(c.clone()), n));
            }
            let extend_calls = |q: &Process| -> Process { add_args(q, &names, &extra) };
            for d in defs {
                let mut body = extend_calls(&d.body);
                for (arg, name) in &extra {
                    if let Payload::Chan(c @ Channel::Session { .. }) = arg {
                        body = replace_channel(&body, c, &Channel::var(name.as_str()));
                    }
                }
                let body = lift(&body, dynamic, table, taken);
                let mut params = d.params.clone();
                params.extend(extra.iter().map(|(_, n)| Param { name: n.clone(), ty: None }));
                table.insert(d.name.clone(), DefDecl { name: d.name.clone(), params, body });
            }
            lift(&extend_calls(scope), dynamic, table, taken)
        }
        _ => p.map_children(&mut |c| lift(c, dynamic, table, taken)),
    }
}

fn add_args(p: &Process, names: &BTreeSet<&String>, extra: &[(Payload, String)]) -> Process {
    match p {
        Process::Call { name, args } if names.contains(name) => {
            let mut args = args.clone();
            args.extend(extra.iter().map(|(a, _)| a.clone()));
            Process::Call { name: name.clone(), args }
        }
        _ => p.map_children(&mut |c| add_args(c, names, extra)),
    }
}

/// Flatten, drop finished threads and open runtime sessions.
fn normalize(items: Vec<Process>, created: &mut Vec<(String, Option<String>)>) -> State {
    let mut out = Vec::new();
    let mut stack = items;
    stack.reverse();
    let mut pending_new = Vec::new();
    while let Some(p) = stack.pop() {
        match p {
            Process::Nil => {}
            Process::Par(ps) => stack.extend(ps.into_iter().rev()),
            Process::New { .. } => pending_new.push(p),
            Process::Def { scope, .. } => stack.push(*scope),
            q => out.push(q),
        }
    }
    // Open sessions after the rest is known so fresh names avoid clashes.
    while let Some(p) = pending_new.pop() {
        let Process::New { session, protocol, body } = p else { unreachable!() };
        let mut in_use: BTreeSet<String> = out.iter().flat_map(|t: &Process| t.free_sessions()).collect();
        in_use.extend(pending_new.iter().flat_map(|t| t.free_sessions()));
        in_use.extend(created.iter().map(|(s, _)| s.clone()));
        let name = runtime_name(&session, &in_use);
        created.push((name.clone(), protocol));
        let body = body.rename_session(&session, &name);
        let mut more = Vec::new();
        let inner = normalize(vec![body], created);
        more.extend(inner.threads);
        out.extend(more);
    }
    let mut threads: Vec<Process> = out.iter().map(Process::canonical).collect();
    threads.sort();
    State { threads }
}

impl Program {
    pub fn from_process(p: &Process) -> Program {
        prepare(p)
    }

    pub fn redexes(&self, s: &State) -> Vec<Redex> {
        let mut out = Vec::new();
        for (i, t) in s.threads.iter().enumerate() {
            match t {
                Process::Call { name, .. } if self.defs.contains_key(name) => {
                    out.push(Redex { kind: RedexKind::CallUnfold, participants: vec![i], label: name.clone(), payload: None });
                }
                Process::Select { subject: Channel::Session { session, role: p }, partner: q, label, payload, .. } => {
                    for (j, u) in s.threads.iter().enumerate() {
                        let kind = match u {
                            Process::Branch { subject: Channel::Session { session: s2, role: r }, partner, arms }
                                if s2 == session && r == q && partner == p && arms.iter().any(|a| a.label == *label) =>
                            {
                                RedexKind::BranchSync
                            }
                            Process::Exist { subject: Channel::Session { session: s2, role: r }, arms }
                                if s2 == session && r == q && arms.iter().any(|a| a.partner == *p && a.label == *label) =>
                            {
                                RedexKind::ExistSync
                            }
                            _ => continue,
                        };
                        if i != j {
                            out.push(Redex { kind, participants: vec![i, j], label: label.clone(), payload: Some(payload.clone()) });
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn step(&self, s: &State, r: &Redex) -> (Transition, State) {
        let mut rest: Vec<Process> = s.threads.iter().enumerate().filter(|(i, _)| !r.participants.contains(i)).map(|(_, t)| t.clone()).collect();
        let step = match r.kind {
            RedexKind::CallUnfold => {
                let Process::Call { name, args } = &s.threads[r.participants[0]] else { panic!("stale redex") };
                let d = &self.defs[name];
                let pairs: Vec<(String, Payload)> = d.params.iter().map(|p| p.name.clone()).zip(args.iter().cloned()).collect();
                rest.push(d.body.subst_many(&pairs));
                Step::Unfold { name: name.clone() }
            }
            RedexKind::BranchSync | RedexKind::ExistSync => {
                let (snd, rcv) = (&s.threads[r.participants[0]], &s.threads[r.participants[1]]);
                let Process::Select { subject, partner: _, label, payload, cont } = snd else { panic!("stale redex") };
                let Channel::Session { role: p, .. } = subject else { panic!("stale redex") };
                let (var, body, receiver) = match rcv {
                    Process::Branch { subject, arms, .. } => {
                        let a = arms.iter().find(|a| a.label == *label).expect("stale redex");
                        (&a.var, &a.cont, subject)
                    }
                    Process::Exist { subject, arms } => {
                        let a = arms.iter().find(|a| a.partner == *p && a.label == *label).expect("stale redex");
                        (&a.var, &a.cont, subject)
                    }
                    _ => panic!("stale redex"),
                };
                rest.push((**cont).clone());
                rest.push(if var == "_" { body.clone() } else { body.subst(var, payload) });
                Step::Comm { sender: subject.clone(), receiver: receiver.clone(), label: label.clone(), payload: payload.clone() }
            }
        };
        let mut created = Vec::new();
        let next = normalize(rest, &mut created);
        (Transition { step, created }, next)
    }

    pub fn successors(&self, s: &State) -> Vec<(Transition, State)> {
        self.redexes(s).iter().map(|r| self.step(s, r)).collect()
    }
}

/// Random run with a seeded scheduler.
pub fn run(p: &Process, seed: u64, fuel: usize) -> Trace {
    let prog = prepare(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = prog.init.clone();
    let mut steps = Vec::new();
    for _ in 0..fuel {
        let rs = prog.redexes(&s);
        if rs.is_empty() {
            let terminal = if s.is_terminated() { Terminal::Terminated } else { Terminal::Deadlock };
            return Trace { steps, terminal };
        }
        let r = &rs[rng.gen_range(0..rs.len())];
        let (t, next) = prog.step(&s, r);
        steps.push((t.step, next.clone()));
        s = next;
    }
    let terminal = if prog.redexes(&s).is_empty() {
        if s.is_terminated() {
            Terminal::Terminated
        } else {
            Terminal::Deadlock
        }
    } else {
        Terminal::FuelExhausted
    };
    Trace { steps, terminal }
}

#[derive(Clone, Copy, Debug)]
pub struct ExploreConfig {
    pub max_states: usize,
    /// Longest trace considered, in steps.
    pub max_depth: usize,
    /// Call unfoldings allowed along the path that first reaches a state.
    pub max_unfold: usize,
    pub workers: usize,
}

impl Default for ExploreConfig {
    fn default() -> ExploreConfig {
        ExploreConfig { max_states: 10_000, max_depth: 100, max_unfold: 8, workers: 1 }
    }
}

#[derive(Clone, Debug)]
pub enum Outcome {
    DeadlockFree,
    DeadlockFound(Trace),
    BoundExceeded,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::DeadlockFree => "DeadlockFree",
            Outcome::DeadlockFound(_) => "DeadlockFound",
            Outcome::BoundExceeded => "BoundExceeded",
        }
    }
}

/// The explored part of the state graph.
#[derive(Clone, Debug)]
pub struct Exploration {
    pub program: Program,
    pub states: Vec<State>,
    /// Predecessor on a shortest path, with the transition taken.
    pub parent: Vec<Option<(usize, Transition)>>,
    pub depth: Vec<usize>,
    pub outcome: Outcome,
}

impl Exploration {
    pub fn path_to(&self, mut i: usize) -> Vec<(Transition, usize)> {
        let mut out = Vec::new();
        while let Some((p, t)) = &self.parent[i] {
            out.push((t.clone(), i));
            i = *p;
        }
        out.reverse();
        out
    }

    pub fn trace_to(&self, i: usize, terminal: Terminal) -> Trace {
        Trace { steps: self.path_to(i).into_iter().map(|(t, j)| (t.step, self.states[j].clone())).collect(), terminal }
    }
}

pub fn explore(p: &Process, cfg: &ExploreConfig) -> Exploration {
    explore_program(prepare(p), cfg)
}

pub fn explore_program(program: Program, cfg: &ExploreConfig) -> Exploration {
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states = vec![program.init.clone()];
    let mut parent = vec![None];
    let mut depth = vec![0usize];
    let mut unfolds = vec![0usize];
    index.insert(program.init.clone(), 0);
    let mut frontier = vec![0usize];
    let mut bounded = false;
    let pool = (cfg.workers > 1).then(|| rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().ok()).flatten();
    while !frontier.is_empty() {
        let expand = |&i: &usize| (i, program.successors(&states[i]));
        let expanded: Vec<(usize, Vec<(Transition, State)>)> = match &pool {
            Some(pool) => pool.install(|| frontier.par_iter().map(expand).collect()),
            None => frontier.iter().map(expand).collect(),
        };
        // Dead ends are judged in frontier order so that the verdict does
        // not depend on the worker count.
        for (i, succ) in &expanded {
            if succ.is_empty() && !states[*i].is_terminated() {
                let trace = Trace { steps: vec![], terminal: Terminal::Deadlock };
                let mut ex = Exploration {
                    program: program.clone(),
                    states: states.clone(),
                    parent: parent.clone(),
                    depth: depth.clone(),
                    outcome: Outcome::DeadlockFound(trace),
                };
                ex.outcome = Outcome::DeadlockFound(ex.trace_to(*i, Terminal::Deadlock));
                return ex;
            }
        }
        let mut next = Vec::new();
        for (i, succ) in expanded {
            for (t, s) in succ {
                if index.contains_key(&s) {
                    continue;
                }
                let u = unfolds[i] + usize::from(matches!(t.step, Step::Unfold { .. }));
                if depth[i] + 1 > cfg.max_depth || u > cfg.max_unfold || states.len() >= cfg.max_states {
                    bounded = true;
                    continue;
                }
                index.insert(s.clone(), states.len());
                next.push(states.len());
                states.push(s);
                parent.push(Some((i, t)));
                depth.push(depth[i] + 1);
                unfolds.push(u);
            }
        }
        frontier = next;
    }
    let outcome = if bounded { Outcome::BoundExceeded } else { Outcome::DeadlockFree };
    Exploration { program, states, parent, depth, outcome }
}

/// Whether each top-level component uses exactly one role and no two
/// components share one; idle components are ignored.
pub fn one_role_per_component(p: &Process) -> bool {
    let prog = prepare(p);
    let mut seen = BTreeSet::new();
    for c in &prog.components {
        let rs = c.roles();
        if rs.is_empty() && c.is_nil() {
            continue;
        }
        if rs.len() != 1 || !seen.insert(rs.into_iter().next().unwrap()) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_process;

    const SHOP: &str = "new s : G . (exists& { s[r_s][r_b] & purchase(). s[r_s][r_b] + price(100). s[r_s][r_b] & { ok(). 0, quit(). 0 }, \
        s[r_s][r_d] & deliver(). s[r_s][r_d] + restock(\"bread\"). 0 } \
        | s[r_b][r_s] + purchase(). s[r_b][r_s] & { price(x). s[r_b][r_s] + ok(). 0 } | 0)";

    #[test]
    fn shop_has_one_initial_redex() {
        let prog = prepare(&parse_process(SHOP).unwrap());
        let rs = prog.redexes(&prog.init);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, RedexKind::ExistSync);
        let ex = explore_program(prog, &ExploreConfig::default());
        assert!(matches!(ex.outcome, Outcome::DeadlockFree));
        assert_eq!(ex.states.len(), 4);
    }

    #[test]
    fn crossed_wait_is_stuck_at_once() {
        let p = parse_process("new s : G . (s[p][r] & { l1(x1). s[p][q] + l2(2). 0 } | s[q][p] & { l2(x2). s[r][p] + l1(1). 0 })").unwrap();
        let ex = explore(&p, &ExploreConfig::default());
        match ex.outcome {
            Outcome::DeadlockFound(t) => assert!(t.steps.is_empty()),
            o => panic!("{o:?}"),
        }
        assert_eq!(run(&p, 0, 10).terminal, Terminal::Deadlock);
    }

    #[test]
    fn values_are_substituted() {
        let p = parse_process("(s[a][b] + v(7). 0 | s[b][a] & { v(x). s[b][c] + w(x). 0 } | s[c][b] & { w(y). 0 })").unwrap();
        let t = run(&p, 1, 10);
        assert_eq!(t.terminal, Terminal::Terminated);
        assert_eq!(t.lines(), vec!["1: s[a] --v--> s[b]", "2: s[b] --w--> s[c]"]);
        assert_eq!(t.steps[0].1.to_string(), "s[b][c] + w(7). 0 | s[c][b] & { w(_0). 0 }");
    }

    #[test]
    fn recursion_with_nested_definitions_and_runtime_sessions() {
        let p = parse_process(
            "def Loop(c) = c[b] + tick(). (def Inner(d) = d[b] & { tock(). Loop(d) } in Inner(c)) in \
             (Loop(s[a]) | def Echo(e) = e[a] & { tick(). e[a] + tock(). Echo(e) } in Echo(s[b]))",
        )
        .unwrap();
        let ex = explore(&p, &ExploreConfig { max_unfold: 10, ..ExploreConfig::default() });
        assert!(matches!(ex.outcome, Outcome::DeadlockFree), "{:?}", ex.outcome);
        let p = parse_process("def Spawn() = new t . (t[a][b] + x(). 0 | t[b][a] & { x(). 0 }) in (Spawn() | Spawn())").unwrap();
        let ex = explore(&p, &ExploreConfig::default());
        assert!(matches!(ex.outcome, Outcome::DeadlockFree));
        assert!(ex.states.iter().any(|s| s.to_string().contains("t#2")));
    }

    #[test]
    fn lifted_definitions_capture_free_variables() {
        let p = parse_process("s[b][a] & { v(x). def K() = s[b][c] + w(x). 0 in K() } | s[a][b] + v(5). 0 | s[c][b] & { w(y). 0 }").unwrap();
        let prog = prepare(&p);
        assert_eq!(prog.defs["K"].params.len(), 1);
        assert!(matches!(explore_program(prog, &ExploreConfig::default()).outcome, Outcome::DeadlockFree));
    }

    #[test]
    fn runs_are_reproducible() {
        let p = parse_process(SHOP).unwrap();
        let a = run(&p, 42, 20).lines();
        assert_eq!(a, run(&p, 42, 20).lines());
        assert_eq!(run(&p, 42, 20).terminal, Terminal::Terminated);
    }

    #[test]
    fn workers_do_not_change_the_verdict() {
        let p = parse_process(SHOP).unwrap();
        let one = explore(&p, &ExploreConfig::default());
        let four = explore(&p, &ExploreConfig { workers: 4, ..ExploreConfig::default() });
        assert_eq!(one.states, four.states);
    }

    #[test]
    fn role_partition() {
        assert!(one_role_per_component(&parse_process(SHOP).unwrap()));
        let p = parse_process("new s : G . (s[p][r] & { l1(x1). s[p][q] + l2(2). 0 } | s[q][p] & { l2(x2). s[r][p] + l1(1). 0 })").unwrap();
        assert!(!one_role_per_component(&p));
    }
}
