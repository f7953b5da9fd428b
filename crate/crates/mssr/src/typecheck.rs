//! The type system for processes: judgements `Θ; Γ ⊢ P` checked
//! syntax-directed, producing a derivation tree.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::calculus::{Channel, DefDecl, Payload, Process, Role};
use crate::projection::well_formed;
use crate::reducer::{prepare, ExploreConfig, State, Step};
use crate::semantics::{context_steps, proj_context, ChannelContext, ChannelKey, TypeAction};
use crate::types::{GlobalType, LocalType, Sort, TypeExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message}")]
pub struct TypeError {
    pub message: String,
}

fn fail<T>(message: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError { message: message.into() })
}

/// One node of a typing derivation.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Derivation {
    pub rule: String,
    /// The process the node types, cut short for display.
    pub subject: String,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    fn node(rule: &str, p: &Process, premises: Vec<Derivation>) -> Derivation {
        let mut subject = p.to_string();
        if subject.chars().count() > 72 {
            subject = subject.chars().take(69).collect::<String>() + "...";
        }
        Derivation { rule: rule.to_string(), subject, premises }
    }

    /// Rules along the leftmost spine, root first.
    pub fn spine(&self) -> Vec<&str> {
        let mut out = vec![self.rule.as_str()];
        let mut d = self;
        while let Some(first) = d.premises.first() {
            out.push(first.rule.as_str());
            d = first;
        }
        out
    }

    pub fn rules(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::from([self.rule.clone()]);
        for p in &self.premises {
            out.extend(p.rules());
        }
        out
    }

    pub fn render(&self) -> String {
        fn go(d: &Derivation, depth: usize, out: &mut String) {
            let _ = writeln!(out, "{}{}  {}", "  ".repeat(depth), d.rule, d.subject);
            for p in &d.premises {
                go(p, depth + 1, out);
            }
        }
        let mut out = String::new();
        go(self, 0, &mut out);
        out
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ParamTy {
    Basic(Sort),
    Chan(LocalType),
}

#[derive(Clone, Debug)]
struct Signature {
    params: Vec<ParamTy>,
    /// Per parameter, the labels the body may select on it. Used when a
    /// domain entry is handed over through a role endpoint.
    selects: Vec<BTreeSet<String>>,
}

/// Process names in scope with their signatures.
#[derive(Clone, Debug, Default)]
pub struct Theta {
    sigs: BTreeMap<String, Signature>,
}

#[derive(Clone, Default)]
struct Env {
    gamma: ChannelContext,
    basics: BTreeMap<String, Sort>,
}

pub struct Checker<'a> {
    globals: &'a BTreeMap<String, GlobalType>,
    /// Cap on the number of context splits tried at one parallel node.
    pub split_limit: usize,
}

type TResult = Result<Derivation, TypeError>;

fn key_of(c: &Channel) -> ChannelKey {
    match c {
        Channel::Var(x) => ChannelKey::Var(x.clone()),
        Channel::Session { session, role } => ChannelKey::role(session, role),
    }
}

impl<'a> Checker<'a> {
    pub fn new(globals: &'a BTreeMap<String, GlobalType>) -> Checker<'a> {
        Checker { globals, split_limit: 512 }
    }

    /// `∅; ∅ ⊢ P`.
    pub fn check_closed(&self, p: &Process) -> TResult {
        self.check_with(p, &ChannelContext::new(), &Theta::default())
    }

    /// `Θ; Γ ⊢ P`. A `def` block at the top of `p` extends Θ as usual.
    pub fn check_with(&self, p: &Process, gamma: &ChannelContext, theta: &Theta) -> TResult {
        self.check(p, Env { gamma: gamma.clone(), basics: BTreeMap::new() }, theta)
    }

    fn check(&self, p: &Process, env: Env, theta: &Theta) -> TResult {
        match p {
            Process::Nil => {
                if let Some((k, t)) = env.gamma.entries.iter().find(|(_, t)| !t.is_end()) {
                    return fail(format!("`{k}` still has type `{t}` where the process stops"));
                }
                Ok(Derivation::node("T-0", p, vec![]))
            }
            Process::New { session, protocol, body } => {
                let Some(name) = protocol else {
                    return fail(format!("session `{session}` is created without a protocol"));
                };
                let Some(g) = self.globals.get(name) else {
                    return fail(format!("unknown protocol `{name}`"));
                };
                if let Err(errs) = well_formed(g) {
                    return fail(format!("protocol `{name}` is not well formed: {}", errs[0]));
                }
                if env.gamma.entries.keys().any(|k| k.session() == Some(session)) {
                    return fail(format!("session `{session}` is already in use"));
                }
                let fresh = proj_context(g, session).map_err(|e| TypeError { message: e.to_string() })?;
                let mut env = env;
                env.gamma.entries.extend(fresh.entries);
                Ok(Derivation::node("T-new", p, vec![self.check(body, env, theta)?]))
            }
            Process::Par(ps) => self.par(p, ps, env, theta),
            Process::Select { subject, partner, label, payload, cont } => self.select(p, subject, partner, label, payload, cont, env, theta),
            Process::Branch { subject, partner, arms } => {
                let key = key_of(subject);
                let Some(t) = env.gamma.get(&key) else {
                    return fail(format!("`{subject}` has no type here"));
                };
                let LocalType::Branch { partner: q, branches } = t.unfold_head() else {
                    return fail(format!("`{subject}` has type `{t}`, which does not offer a branching"));
                };
                if q != *partner {
                    return fail(format!("`{subject}` receives from `{q}`, not `{partner}`"));
                }
                let want: BTreeSet<&String> = branches.iter().map(|b| &b.label).collect();
                let have: BTreeSet<&String> = arms.iter().map(|a| &a.label).collect();
                if !want.is_subset(&have) {
                    return fail(format!("branching on `{subject}` covers {have:?} but its type offers {want:?}"));
                }
                // Arms the type never selects are dead code and stay unchecked.
                let mut premises = Vec::new();
                for a in arms {
                    let Some(b) = branches.iter().find(|b| b.label == a.label) else { continue };
                    let mut env = env.clone();
                    env.gamma.insert(key.clone(), b.cont.clone());
                    bind(&mut env, &a.var, &b.payload)?;
                    premises.push(self.check(&a.cont, env, theta)?);
                }
                Ok(Derivation::node("T-branch", p, premises))
            }
            Process::Exist { subject, arms } => {
                let key = key_of(subject);
                let Some(t) = env.gamma.get(&key) else {
                    return fail(format!("`{subject}` has no type here"));
                };
                let LocalType::Exist { rows } = t.unfold_head() else {
                    return fail(format!("`{subject}` has type `{t}`, which is not an existential branching"));
                };
                let want: BTreeSet<(&Role, &String)> = rows.iter().map(|r| (&r.role, &r.label)).collect();
                let have: BTreeSet<(&Role, &String)> = arms.iter().map(|a| (&a.partner, &a.label)).collect();
                if !want.is_subset(&have) {
                    return fail(format!("existential branching on `{subject}` does not cover `{t}`"));
                }
                let mut premises = Vec::new();
                for a in arms {
                    let Some(r) = rows.iter().find(|r| r.role == a.partner && r.label == a.label) else { continue };
                    let mut env = env.clone();
                    env.gamma.insert(key.clone(), r.cont.clone());
                    bind(&mut env, &a.var, &r.payload)?;
                    premises.push(self.check(&a.cont, env, theta)?);
                }
                Ok(Derivation::node("T-exist", p, premises))
            }
            Process::Def { defs, scope } => {
                let (theta2, mut premises) = self.check_defs(defs, theta)?;
                premises.push(self.check(scope, env, &theta2)?);
                Ok(Derivation::node("T-def", p, premises))
            }
            Process::Call { name, args } => self.call(p, name, args, env, theta),
        }
    }

    /// Check a group of mutually recursive definitions, each body under its
    /// parameters only, and return Θ extended with the group.
    pub fn check_defs(&self, defs: &[DefDecl], theta: &Theta) -> Result<(Theta, Vec<Derivation>), TypeError> {
        let theta2 = self.def_group(defs, theta)?;
        let mut premises = Vec::new();
        for d in defs {
            let sig = &theta2.sigs[&d.name];
            let mut benv = Env::default();
            for (prm, ty) in d.params.iter().zip(&sig.params) {
                match ty {
                    ParamTy::Basic(s) => {
                        benv.basics.insert(prm.name.clone(), *s);
                    }
                    ParamTy::Chan(t) => {
                        benv.gamma.insert(ChannelKey::Var(prm.name.clone()), t.clone());
                    }
                }
            }
            let body = self.check(&d.body, benv, &theta2).map_err(|e| TypeError { message: format!("in `{}`: {}", d.name, e.message) })?;
            premises.push(body);
        }
        Ok((theta2, premises))
    }

    fn def_group(&self, defs: &[DefDecl], theta: &Theta) -> Result<Theta, TypeError> {
        let mut theta2 = theta.clone();
        for d in defs {
            let mut params = Vec::new();
            for prm in &d.params {
                match &prm.ty {
                    None => return fail(format!("parameter `{}` of `{}` needs a type", prm.name, d.name)),
                    Some(TypeExpr::Basic(s)) => params.push(ParamTy::Basic(*s)),
                    Some(TypeExpr::Local(t)) => params.push(ParamTy::Chan((**t).clone())),
                    Some(TypeExpr::Global(_)) => return fail(format!("parameter `{}` of `{}` cannot carry a global type", prm.name, d.name)),
                }
            }
            let selects = vec![BTreeSet::new(); params.len()];
            theta2.sigs.insert(d.name.clone(), Signature { params, selects });
        }
        // Labels selected on each parameter, closed under forwarding the
        // parameter to another call.
        loop {
            let mut changed = false;
            for d in defs {
                for (i, prm) in d.params.iter().enumerate() {
                    let found = selected_labels(&d.body, &prm.name, &theta2);
                    let sel = &mut theta2.sigs.get_mut(&d.name).unwrap().selects[i];
                    for l in found {
                        changed |= sel.insert(l);
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Ok(theta2)
    }

    #[allow(clippy::too_many_arguments)]
    fn select(&self, p: &Process, subject: &Channel, partner: &Role, label: &str, payload: &Payload, cont: &Process, mut env: Env, theta: &Theta) -> TResult {
        let key = key_of(subject);
        let held = env.gamma.get(&key).map(LocalType::unfold_head);
        match held {
            Some(LocalType::Select { partner: q, branches }) => {
                if q != *partner {
                    return fail(format!("`{subject}` sends to `{q}`, not `{partner}`"));
                }
                let Some(b) = branches.iter().find(|b| b.label == label) else {
                    return fail(format!("`{subject}` cannot select `{label}`"));
                };
                send_payload(&mut env, payload, &b.payload)?;
                env.gamma.insert(key, b.cont.clone());
                Ok(Derivation::node("T-select", p, vec![self.check(cont, env, theta)?]))
            }
            Some(LocalType::DomainSelect { partner: q, rows }) => {
                if q != *partner {
                    return fail(format!("`{subject}` sends to `{q}`, not `{partner}`"));
                }
                let row = match subject {
                    Channel::Session { role, .. } => rows.iter().find(|r| r.role == *role && r.label == label),
                    Channel::Var(_) => {
                        let mut it = rows.iter().filter(|r| r.label == label);
                        match (it.next(), it.next()) {
                            (Some(r), None) => Some(r),
                            (Some(_), Some(_)) => return fail(format!("label `{label}` names more than one row of the type of `{subject}`")),
                            _ => None,
                        }
                    }
                };
                let Some(row) = row else {
                    return fail(format!("`{subject}` has no row selecting `{label}`"));
                };
                send_payload(&mut env, payload, &row.payload)?;
                env.gamma.insert(key, row.cont.clone());
                Ok(Derivation::node("T-select′", p, vec![self.check(cont, env, theta)?]))
            }
            Some(t) if !t.is_end() => fail(format!("`{subject}` has type `{t}`, which does not offer a selection")),
            _ => {
                let Channel::Session { session, role } = subject else {
                    return fail(format!("`{subject}` has no type here"));
                };
                for dk in env.gamma.domains_of(session, role) {
                    let LocalType::DomainSelect { partner: q, rows } = env.gamma.get(&dk).unwrap().unfold_head() else {
                        continue;
                    };
                    if q != *partner {
                        continue;
                    }
                    let Some(row) = rows.iter().find(|r| r.role == *role && r.label == label) else {
                        continue;
                    };
                    let mut env = env.clone();
                    env.gamma.remove(&dk);
                    send_payload(&mut env, payload, &row.payload)?;
                    env.gamma.insert(key, row.cont.clone());
                    return Ok(Derivation::node("T-select′", p, vec![self.check(cont, env, theta)?]));
                }
                fail(format!("`{subject}` cannot select `{label}` towards `{partner}`"))
            }
        }
    }

    fn call(&self, p: &Process, name: &str, args: &[Payload], mut env: Env, theta: &Theta) -> TResult {
        let Some(sig) = theta.sigs.get(name) else {
            return fail(format!("`{name}` is not defined here"));
        };
        if sig.params.len() != args.len() {
            return fail(format!("`{name}` takes {} arguments, given {}", sig.params.len(), args.len()));
        }
        for (i, (ty, arg)) in sig.params.iter().zip(args).enumerate() {
            match ty {
                ParamTy::Basic(s) => check_basic(&env, arg, *s)?,
                ParamTy::Chan(t) => {
                    let Payload::Chan(c) = arg else {
                        return fail(format!("argument {} of `{name}` must be a channel", i + 1));
                    };
                    let key = key_of(c);
                    match env.gamma.get(&key) {
                        Some(u) if !u.is_end() => {
                            if !u.equiv(t) {
                                return fail(format!("argument `{c}` of `{name}` has type `{u}`, expected `{t}`"));
                            }
                            env.gamma.remove(&key);
                        }
                        _ => {
                            let Channel::Session { session, role } = c else {
                                return fail(format!("argument `{c}` of `{name}` has no type here"));
                            };
                            let dk = env.gamma.domains_of(session, role).into_iter().find(|dk| env.gamma.get(dk).unwrap().equiv(t));
                            let Some(dk) = dk else {
                                return fail(format!("argument `{c}` of `{name}` has type `end`, expected `{t}`"));
                            };
                            if let LocalType::DomainSelect { rows, .. } = t.unfold_head() {
                                if let Some(r) = rows.iter().find(|r| sig.selects[i].contains(&r.label) && r.role != *role) {
                                    return fail(format!("`{name}` may select row `{}` of `{}` but receives `{c}`", r.label, r.role));
                                }
                            }
                            env.gamma.remove(&dk);
                            env.gamma.remove(&key);
                        }
                    }
                }
            }
        }
        if let Some((k, t)) = env.gamma.entries.iter().find(|(_, t)| !t.is_end()) {
            return fail(format!("`{k}` still has type `{t}` after the call to `{name}`"));
        }
        Ok(Derivation::node("T-fun", p, vec![]))
    }

    fn par(&self, p: &Process, ps: &[Process], env: Env, theta: &Theta) -> TResult {
        let uses: Vec<BTreeSet<Channel>> = ps.iter().map(free_channels).collect();
        let mut options: Vec<(ChannelKey, Vec<usize>)> = Vec::new();
        for (k, t) in &env.gamma.entries {
            let users: Vec<usize> = (0..ps.len())
                .filter(|&i| match k {
                    ChannelKey::Var(x) => uses[i].contains(&Channel::Var(x.clone())),
                    ChannelKey::Role { session, role } => uses[i].contains(&Channel::endpoint(session.as_str(), role.clone())),
                    ChannelKey::Domain { session, roles } => roles.roles().iter().any(|r| uses[i].contains(&Channel::endpoint(session.as_str(), r.clone()))),
                })
                .collect();
            if users.is_empty() {
                if !t.is_end() {
                    return fail(format!("`{k}: {t}` is not used by any parallel component"));
                }
                continue;
            }
            options.push((k.clone(), users));
        }
        let total: usize = options.iter().map(|(_, u)| u.len()).try_fold(1usize, |a, n| a.checked_mul(n)).unwrap_or(usize::MAX);
        let tries = total.min(self.split_limit);
        let mut first_err = None;
        for n in 0..tries {
            let mut parts = vec![Env { gamma: ChannelContext::new(), basics: env.basics.clone() }; ps.len()];
            let mut rest = n;
            for (k, users) in &options {
                let i = users[rest % users.len()];
                rest /= users.len();
                parts[i].gamma.insert(k.clone(), env.gamma.get(k).unwrap().clone());
            }
            let result: Result<Vec<Derivation>, TypeError> = ps.iter().zip(parts).map(|(q, e)| self.check(q, e, theta)).collect();
            match result {
                Ok(premises) => return Ok(Derivation::node("T-Par", p, premises)),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(first_err.unwrap_or(TypeError { message: "no way to split the context".into() }))
    }
}

fn bind(env: &mut Env, var: &str, payload: &TypeExpr) -> Result<(), TypeError> {
    match payload {
        TypeExpr::Basic(s) => {
            env.basics.insert(var.to_string(), *s);
        }
        TypeExpr::Local(t) => {
            if var == "_" {
                return fail("a received channel must be bound to a name");
            }
            env.gamma.insert(ChannelKey::Var(var.to_string()), (**t).clone());
        }
        TypeExpr::Global(_) => return fail("global types cannot be received"),
    }
    Ok(())
}

fn check_basic(env: &Env, v: &Payload, s: Sort) -> Result<(), TypeError> {
    let got = match v {
        Payload::Lit(l) => l.sort(),
        Payload::Chan(Channel::Var(x)) => match env.basics.get(x) {
            Some(s) => *s,
            None => return fail(format!("`{x}` is not a {} value", s.keyword())),
        },
        Payload::Chan(c) => return fail(format!("`{c}` is a channel, expected a {} value", s.keyword())),
    };
    if got != s {
        return fail(format!("`{v}` is a {} value, expected {}", got.keyword(), s.keyword()));
    }
    Ok(())
}

fn send_payload(env: &mut Env, v: &Payload, ty: &TypeExpr) -> Result<(), TypeError> {
    match ty {
        TypeExpr::Basic(s) => check_basic(env, v, *s),
        TypeExpr::Local(t) => {
            let Payload::Chan(c) = v else {
                return fail(format!("`{v}` is not a channel"));
            };
            let key = key_of(c);
            match env.gamma.get(&key) {
                Some(u) if u.equiv(t) => {
                    env.gamma.remove(&key);
                    Ok(())
                }
                Some(u) => fail(format!("`{c}` has type `{u}`, expected `{t}`")),
                None => fail(format!("`{c}` has no type here")),
            }
        }
        TypeExpr::Global(_) => fail("global types cannot be sent"),
    }
}

/// Channels occurring free in `p`.
pub fn free_channels(p: &Process) -> BTreeSet<Channel> {
    let mut out = BTreeSet::new();
    for x in p.free_vars() {
        out.insert(Channel::Var(x));
    }
    let sessions = p.free_sessions();
    collect_endpoints(p, &sessions, &mut out);
    out
}

fn collect_endpoints(p: &Process, free: &BTreeSet<String>, out: &mut BTreeSet<Channel>) {
    let mut note = |c: &Channel| {
        if let Channel::Session { session, .. } = c {
            if free.contains(session) {
                out.insert(c.clone());
            }
        }
    };
    match p {
        Process::New { session, body, .. } => {
            if free.contains(session) {
                let mut inner = free.clone();
                inner.remove(session);
                collect_endpoints(body, &inner, out);
            } else {
                collect_endpoints(body, free, out);
            }
            return;
        }
        Process::Select { subject, payload, .. } => {
            note(subject);
            if let Payload::Chan(c) = payload {
                note(c);
            }
        }
        Process::Branch { subject, .. } | Process::Exist { subject, .. } => note(subject),
        Process::Call { args, .. } => {
            for a in args {
                if let Payload::Chan(c) = a {
                    note(c);
                }
            }
        }
        _ => {}
    }
    for c in p.children() {
        collect_endpoints(c, free, out);
    }
}

/// Labels selected on variable `x` inside `p`, following calls that
/// forward `x` to a parameter with known selections.
fn selected_labels(p: &Process, x: &str, theta: &Theta) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let shadows = |v: &str| v == x;
    match p {
        Process::Select { subject: Channel::Var(y), label, .. } if y == x => {
            out.insert(label.clone());
        }
        Process::Call { name, args } => {
            if let Some(sig) = theta.sigs.get(name) {
                for (i, a) in args.iter().enumerate() {
                    if *a == Payload::var(x) {
                        if let Some(s) = sig.selects.get(i) {
                            out.extend(s.iter().cloned());
                        }
                    }
                }
            }
        }
        _ => {}
    }
    match p {
        Process::Branch { arms, .. } => {
            for a in arms.iter().filter(|a| !shadows(&a.var)) {
                out.extend(selected_labels(&a.cont, x, theta));
            }
        }
        Process::Exist { arms, .. } => {
            for a in arms.iter().filter(|a| !shadows(&a.var)) {
                out.extend(selected_labels(&a.cont, x, theta));
            }
        }
        Process::Def { scope, .. } => out.extend(selected_labels(scope, x, theta)),
        _ => {
            for c in p.children() {
                out.extend(selected_labels(c, x, theta));
            }
        }
    }
    out
}

/// Typecheck a closed process against named protocols.
pub fn typecheck(p: &Process, globals: &BTreeMap<String, GlobalType>) -> TResult {
    Checker::new(globals).check_closed(p)
}

/// A reduction whose result no reachable context types.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeFailure {
    pub path: Vec<String>,
    pub process: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    /// Pairs of a reachable process and a context typing it.
    pub checked: usize,
    /// Some reductions lay beyond the bounds.
    pub truncated: bool,
}

/// Follow every reduction of `p` and look, at each step, for a context
/// transition that keeps the result typed.
pub fn subject_reduction_probe(p: &Process, globals: &BTreeMap<String, GlobalType>, cfg: &ExploreConfig) -> Result<ProbeReport, ProbeFailure> {
    let checker = Checker::new(globals);
    let prog = prepare(p);
    let failure = |path: Vec<String>, process: &State, reason: String| ProbeFailure { path, process: process.to_string(), reason };
    let defs: Vec<DefDecl> = prog.defs.values().cloned().collect();
    let theta = match checker.check_defs(&defs, &Theta::default()) {
        Ok((t, _)) => t,
        Err(e) => return Err(failure(vec![], &prog.init, e.message)),
    };
    let open = |gamma: &mut ChannelContext, created: &[(String, Option<String>)]| -> Result<(), String> {
        for (s, g) in created {
            let Some(name) = g else { return Err(format!("session `{s}` has no protocol")) };
            let Some(g) = globals.get(name) else { return Err(format!("unknown protocol `{name}`")) };
            let ctx = proj_context(g, s).map_err(|e| e.to_string())?;
            gamma.entries.extend(ctx.entries);
        }
        Ok(())
    };
    let mut gamma0 = ChannelContext::new();
    let statics: Vec<(String, Option<String>)> = prog.sessions.iter().map(|(s, g)| (s.clone(), g.clone())).collect();
    open(&mut gamma0, &statics).map_err(|e| failure(vec![], &prog.init, e))?;
    if let Err(e) = checker.check_with(&prog.init.as_process(), &gamma0, &theta) {
        return Err(failure(vec![], &prog.init, e.message));
    }
    type Node = (State, ChannelContext);
    let start: Node = (prog.init.clone(), gamma0.canonical());
    let mut seen: HashMap<Node, (Vec<String>, usize)> = HashMap::new();
    seen.insert(start.clone(), (vec![], 0));
    let mut queue = VecDeque::from([start]);
    let mut truncated = false;
    while let Some(node) = queue.pop_front() {
        let (path, unfolds) = seen[&node].clone();
        let (state, gamma) = &node;
        for (t, next) in prog.successors(state) {
            let mut path2 = path.clone();
            path2.push(t.step.to_string());
            let unfolds2 = unfolds + usize::from(matches!(t.step, Step::Unfold { .. }));
            let mut candidates = Vec::new();
            match t.step.comm() {
                Some((session, from, to, label)) => {
                    for (a, g2) in context_steps(gamma) {
                        if let TypeAction::Comm { session: s2, action } = a {
                            if s2 == session && action.sender == *from && action.receiver == *to && action.label == label {
                                candidates.push(g2);
                            }
                        }
                    }
                    if candidates.is_empty() {
                        return Err(failure(path2, &next, format!("the context cannot perform `{}`", t.step)));
                    }
                }
                None => candidates.push(gamma.clone()),
            }
            let mut typed = Vec::new();
            let mut last_err = String::new();
            for mut g2 in candidates {
                open(&mut g2, &t.created).map_err(|e| failure(path2.clone(), &next, e))?;
                match checker.check_with(&next.as_process(), &g2, &theta) {
                    Ok(_) => typed.push(g2.canonical()),
                    Err(e) => last_err = e.message,
                }
            }
            if typed.is_empty() {
                return Err(failure(path2, &next, last_err));
            }
            for g2 in typed {
                let n2 = (next.clone(), g2);
                if seen.contains_key(&n2) {
                    continue;
                }
                if path2.len() > cfg.max_depth || unfolds2 > cfg.max_unfold || seen.len() >= cfg.max_states {
                    truncated = true;
                    continue;
                }
                seen.insert(n2.clone(), (path2.clone(), unfolds2));
                queue.push_back(n2);
            }
        }
    }
    Ok(ProbeReport { checked: seen.len(), truncated })
}
