//! Process terms: syntax, substitution, structural congruence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::types::{canonical_name, Sort, TypeExpr};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Role(String);

impl Role {
    pub fn new(name: impl Into<String>) -> Role {
        let name = name.into();
        assert!(!name.is_empty(), "role names are non-empty");
        Role(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Role {
    fn from(s: &str) -> Role {
        Role::new(s)
    }
}

/// A channel: either a variable bound by a receive or a parameter, or the
/// endpoint `s[r]` of session `s` played by role `r`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Var(String),
    Session { session: String, role: Role },
}

impl Channel {
    pub fn var(x: impl Into<String>) -> Channel {
        Channel::Var(x.into())
    }

    pub fn endpoint(session: impl Into<String>, role: impl Into<Role>) -> Channel {
        Channel::Session { session: session.into(), role: role.into() }
    }

    pub fn session(&self) -> Option<&str> {
        match self {
            Channel::Session { session, .. } => Some(session),
            Channel::Var(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Int(i64),
    Bool(bool),
    /// Kept as written so that printing round-trips exactly.
    Real(String),
    Str(String),
    Unit,
}

impl Literal {
    pub fn sort(&self) -> Sort {
        match self {
            Literal::Int(_) => Sort::Int,
            Literal::Bool(_) => Sort::Bool,
            Literal::Real(_) => Sort::Real,
            Literal::Str(_) => Sort::Str,
            Literal::Unit => Sort::Unit,
        }
    }

    /// Some constant of the given sort.
    pub fn default_of(sort: Sort) -> Literal {
        match sort {
            Sort::Int => Literal::Int(1),
            Sort::Bool => Literal::Bool(true),
            Sort::Real => Literal::Real("1.0".into()),
            Sort::Str => Literal::Str("a".into()),
            Sort::Unit => Literal::Unit,
        }
    }
}

/// What a message carries or a call receives. `Chan(Channel::Var(x))`
/// stands for any variable, whether it holds a channel or a basic value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Payload {
    Lit(Literal),
    Chan(Channel),
}

impl Payload {
    pub const UNIT: Payload = Payload::Lit(Literal::Unit);

    pub fn var(x: impl Into<String>) -> Payload {
        Payload::Chan(Channel::Var(x.into()))
    }

    fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        if let Payload::Chan(Channel::Var(x)) = self {
            out.insert(x.clone());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arm {
    pub label: String,
    pub var: String,
    pub cont: Process,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExistArm {
    pub partner: Role,
    pub label: String,
    pub var: String,
    pub cont: Process,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Param {
    pub name: String,
    pub ty: Option<TypeExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Process,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    Nil,
    /// `new s : G . P`; the protocol names a global declaration.
    New {
        session: String,
        protocol: Option<String>,
        body: Box<Process>,
    },
    Par(Vec<Process>),
    Select {
        subject: Channel,
        partner: Role,
        label: String,
        payload: Payload,
        cont: Box<Process>,
    },
    Branch {
        subject: Channel,
        partner: Role,
        arms: Vec<Arm>,
    },
    /// Existential branching; every row shares `subject`.
    Exist {
        subject: Channel,
        arms: Vec<ExistArm>,
    },
    /// A group of (mutually recursive) definitions scoped over `scope`.
    Def {
        defs: Vec<DefDecl>,
        scope: Box<Process>,
    },
    Call {
        name: String,
        args: Vec<Payload>,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScopeError {
    #[error("call to undefined process `{0}`")]
    UnboundProcess(String),
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("unbound variable `{0}`")]
    UnboundVar(String),
    #[error("recursive call to `{0}` is not guarded by a prefix")]
    Unguarded(String),
    #[error("duplicate label `{0}` in a branching")]
    DuplicateLabel(String),
    #[error("duplicate definition `{0}` in one group")]
    DuplicateDef(String),
}

impl Process {
    /// Parallel composition, flattening nested compositions and dropping `0`.
    pub fn par(items: impl IntoIterator<Item = Process>) -> Process {
        let mut out = Vec::new();
        for p in items {
            match p {
                Process::Par(ps) => out.extend(ps),
                Process::Nil => {}
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Process::Nil,
            1 => out.pop().unwrap(),
            _ => Process::Par(out),
        }
    }

    pub fn is_nil(&self) -> bool {
        match self {
            Process::Nil => true,
            Process::Par(ps) => ps.iter().all(Process::is_nil),
            _ => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.fv(&mut Vec::new(), &mut out);
        out
    }

    fn fv(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let note = |c: &Channel, bound: &Vec<String>, out: &mut BTreeSet<String>| {
            if let Channel::Var(x) = c {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
        };
        match self {
            Process::Nil => {}
            Process::New { body, .. } => body.fv(bound, out),
            Process::Par(ps) => ps.iter().for_each(|p| p.fv(bound, out)),
            Process::Select { subject, payload, cont, .. } => {
                note(subject, bound, out);
                if let Payload::Chan(c) = payload {
                    note(c, bound, out);
                }
                cont.fv(bound, out);
            }
            Process::Branch { subject, arms, .. } => {
                note(subject, bound, out);
                for a in arms {
                    bound.push(a.var.clone());
                    a.cont.fv(bound, out);
                    bound.pop();
                }
            }
            Process::Exist { subject, arms } => {
                note(subject, bound, out);
                for a in arms {
                    bound.push(a.var.clone());
                    a.cont.fv(bound, out);
                    bound.pop();
                }
            }
            Process::Def { defs, scope } => {
                for d in defs {
                    let n = bound.len();
                    bound.extend(d.params.iter().map(|p| p.name.clone()));
                    d.body.fv(bound, out);
                    bound.truncate(n);
                }
                scope.fv(bound, out);
            }
            Process::Call { args, .. } => {
                for a in args {
                    if let Payload::Chan(c) = a {
                        note(c, bound, out);
                    }
                }
            }
        }
    }

    /// Session names occurring free (not bound by `new`).
    pub fn free_sessions(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.fs(&mut Vec::new(), &mut out);
        out
    }

    fn fs(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let note = |c: &Channel, bound: &Vec<String>, out: &mut BTreeSet<String>| {
            if let Channel::Session { session, .. } = c {
                if !bound.contains(session) {
                    out.insert(session.clone());
                }
            }
        };
        match self {
            Process::Nil => {}
            Process::New { session, body, .. } => {
                bound.push(session.clone());
                body.fs(bound, out);
                bound.pop();
            }
            Process::Par(ps) => ps.iter().for_each(|p| p.fs(bound, out)),
            Process::Select { subject, payload, cont, .. } => {
                note(subject, bound, out);
                if let Payload::Chan(c) = payload {
                    note(c, bound, out);
                }
                cont.fs(bound, out);
            }
            Process::Branch { subject, arms, .. } => {
                note(subject, bound, out);
                arms.iter().for_each(|a| a.cont.fs(bound, out));
            }
            Process::Exist { subject, arms } => {
                note(subject, bound, out);
                arms.iter().for_each(|a| a.cont.fs(bound, out));
            }
            Process::Def { defs, scope } => {
                defs.iter().for_each(|d| d.body.fs(bound, out));
                scope.fs(bound, out);
            }
            Process::Call { args, .. } => {
                for a in args {
                    if let Payload::Chan(c) = a {
                        note(c, bound, out);
                    }
                }
            }
        }
    }

    /// Every variable, session or process name appearing anywhere.
    pub fn all_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.names_into(&mut out);
        out
    }

    fn names_into(&self, out: &mut BTreeSet<String>) {
        let chan = |c: &Channel, out: &mut BTreeSet<String>| match c {
            Channel::Var(x) => {
                out.insert(x.clone());
            }
            Channel::Session { session, .. } => {
                out.insert(session.clone());
            }
        };
        match self {
            Process::Nil => {}
            Process::New { session, body, .. } => {
                out.insert(session.clone());
                body.names_into(out);
            }
            Process::Par(ps) => ps.iter().for_each(|p| p.names_into(out)),
            Process::Select { subject, payload, cont, .. } => {
                chan(subject, out);
                if let Payload::Chan(c) = payload {
                    chan(c, out);
                }
                cont.names_into(out);
            }
            Process::Branch { subject, arms, .. } => {
                chan(subject, out);
                for a in arms {
                    out.insert(a.var.clone());
                    a.cont.names_into(out);
                }
            }
            Process::Exist { subject, arms } => {
                chan(subject, out);
                for a in arms {
                    out.insert(a.var.clone());
                    a.cont.names_into(out);
                }
            }
            Process::Def { defs, scope } => {
                for d in defs {
                    out.insert(d.name.clone());
                    out.extend(d.params.iter().map(|p| p.name.clone()));
                    d.body.names_into(out);
                }
                scope.names_into(out);
            }
            Process::Call { name, args } => {
                out.insert(name.clone());
                for a in args {
                    if let Payload::Chan(c) = a {
                        chan(c, out);
                    }
                }
            }
        }
    }

    /// Capture-avoiding substitution of `value` for the variable `x`.
    pub fn subst(&self, x: &str, value: &Payload) -> Process {
        let mut fv = BTreeSet::new();
        value.free_vars_into(&mut fv);
        let sessions: BTreeSet<String> = match value {
            Payload::Chan(Channel::Session { session, .. }) => BTreeSet::from([session.clone()]),
            _ => BTreeSet::new(),
        };
        self.subst_in(x, value, &fv, &sessions)
    }

    fn subst_in(&self, x: &str, v: &Payload, fv: &BTreeSet<String>, vs: &BTreeSet<String>) -> Process {
        let chan = |c: &Channel| -> Channel {
            match (c, v) {
                (Channel::Var(y), Payload::Chan(w)) if y == x => w.clone(),
                _ => c.clone(),
            }
        };
        let pay = |p: &Payload| -> Payload {
            match p {
                Payload::Chan(Channel::Var(y)) if y == x => v.clone(),
                _ => p.clone(),
            }
        };
        // Rebind `var` in `cont`, renaming it first if it would capture.
        let binder = |var: &str, cont: &Process| -> (String, Process) {
            if var == x {
                return (var.to_string(), cont.clone());
            }
            if fv.contains(var) {
                let mut avoid = cont.all_names();
                avoid.extend(fv.iter().cloned());
                avoid.insert(x.to_string());
                let nv = fresh(var, &avoid);
                let renamed = cont.subst(var, &Payload::var(nv.clone()));
                (nv, renamed.subst_in(x, v, fv, vs))
            } else {
                (var.to_string(), cont.subst_in(x, v, fv, vs))
            }
        };
        match self {
            Process::Nil => Process::Nil,
            Process::New { session, protocol, body } => {
                if vs.contains(session) {
                    let mut avoid = body.all_names();
                    avoid.extend(vs.iter().cloned());
                    let ns = fresh(session, &avoid);
                    let renamed = body.rename_session(session, &ns);
                    Process::New { session: ns, protocol: protocol.clone(), body: Box::new(renamed.subst_in(x, v, fv, vs)) }
                } else {
                    Process::New { session: session.clone(), protocol: protocol.clone(), body: Box::new(body.subst_in(x, v, fv, vs)) }
                }
            }
            Process::Par(ps) => Process::Par(ps.iter().map(|p| p.subst_in(x, v, fv, vs)).collect()),
            Process::Select { subject, partner, label, payload, cont } => Process::Select {
                subject: chan(subject),
                partner: partner.clone(),
                label: label.clone(),
                payload: pay(payload),
                cont: Box::new(cont.subst_in(x, v, fv, vs)),
            },
            Process::Branch { subject, partner, arms } => Process::Branch {
                subject: chan(subject),
                partner: partner.clone(),
                arms: arms
                    .iter()
                    .map(|a| {
                        let (var, cont) = binder(&a.var, &a.cont);
                        Arm { label: a.label.clone(), var, cont }
                    })
                    .collect(),
            },
            Process::Exist { subject, arms } => Process::Exist {
                subject: chan(subject),
                arms: arms
                    .iter()
                    .map(|a| {
                        let (var, cont) = binder(&a.var, &a.cont);
                        ExistArm { partner: a.partner.clone(), label: a.label.clone(), var, cont }
                    })
                    .collect(),
            },
            Process::Def { defs, scope } => Process::Def {
                defs: defs
                    .iter()
                    .map(|d| {
                        if d.params.iter().any(|p| p.name == x) {
                            return d.clone();
                        }
                        let mut params = d.params.clone();
                        let mut body = d.body.clone();
                        for p in params.iter_mut() {
                            if fv.contains(&p.name) {
                                let mut avoid = body.all_names();
                                avoid.extend(fv.iter().cloned());
                                avoid.insert(x.to_string());
                                let nv = fresh(&p.name, &avoid);
                                body = body.subst(&p.name, &Payload::var(nv.clone()));
                                p.name = nv;
                            }
                        }
                        DefDecl { name: d.name.clone(), params, body: body.subst_in(x, v, fv, vs) }
                    })
                    .collect(),
                scope: Box::new(scope.subst_in(x, v, fv, vs)),
            },
            Process::Call { name, args } => Process::Call { name: name.clone(), args: args.iter().map(pay).collect() },
        }
    }

    /// Simultaneous substitution of arguments for parameters.
    pub fn subst_many(&self, pairs: &[(String, Payload)]) -> Process {
        if pairs.is_empty() {
            return self.clone();
        }
        // Route through fresh intermediates so that substitutions do not
        // interfere with one another.
        let mut avoid = self.all_names();
        for (x, v) in pairs {
            avoid.insert(x.clone());
            v.free_vars_into(&mut avoid);
        }
        let mut tmp = Vec::new();
        let mut p = self.clone();
        for (x, _) in pairs {
            let t = fresh(x, &avoid);
            avoid.insert(t.clone());
            p = p.subst(x, &Payload::var(t.clone()));
            tmp.push(t);
        }
        for (t, (_, v)) in tmp.iter().zip(pairs) {
            p = p.subst(t, v);
        }
        p
    }

    /// Rename free occurrences of session `old` to `new`.
    pub fn rename_session(&self, old: &str, new: &str) -> Process {
        let chan = |c: &Channel| -> Channel {
            match c {
                Channel::Session { session, role } if session == old => Channel::Session { session: new.to_string(), role: role.clone() },
                _ => c.clone(),
            }
        };
        let pay = |p: &Payload| -> Payload {
            match p {
                Payload::Chan(c) => Payload::Chan(chan(c)),
                _ => p.clone(),
            }
        };
        match self {
            Process::Nil => Process::Nil,
            Process::New { session, .. } if session == old => self.clone(),
            Process::New { session, protocol, body } => {
                Process::New { session: session.clone(), protocol: protocol.clone(), body: Box::new(body.rename_session(old, new)) }
            }
            Process::Par(ps) => Process::Par(ps.iter().map(|p| p.rename_session(old, new)).collect()),
            Process::Select { subject, partner, label, payload, cont } => Process::Select {
                subject: chan(subject),
                partner: partner.clone(),
                label: label.clone(),
                payload: pay(payload),
                cont: Box::new(cont.rename_session(old, new)),
            },
            Process::Branch { subject, partner, arms } => Process::Branch {
                subject: chan(subject),
                partner: partner.clone(),
                arms: arms.iter().map(|a| Arm { label: a.label.clone(), var: a.var.clone(), cont: a.cont.rename_session(old, new) }).collect(),
            },
            Process::Exist { subject, arms } => Process::Exist {
                subject: chan(subject),
                arms: arms
                    .iter()
                    .map(|a| ExistArm { partner: a.partner.clone(), label: a.label.clone(), var: a.var.clone(), cont: a.cont.rename_session(old, new) })
                    .collect(),
            },
            Process::Def { defs, scope } => Process::Def {
                defs: defs.iter().map(|d| DefDecl { name: d.name.clone(), params: d.params.clone(), body: d.body.rename_session(old, new) }).collect(),
                scope: Box::new(scope.rename_session(old, new)),
            },
            Process::Call { name, args } => Process::Call { name: name.clone(), args: args.iter().map(pay).collect() },
        }
    }

    /// Rename calls to process `old` (not shadowed) into `new`.
    pub fn rename_process(&self, old: &str, new: &str) -> Process {
        match self {
            Process::Call { name, args } if name == old => Process::Call { name: new.to_string(), args: args.clone() },
            Process::Def { defs, .. } if defs.iter().any(|d| d.name == old) => self.clone(),
            Process::Def { defs, scope } => Process::Def {
                defs: defs.iter().map(|d| DefDecl { name: d.name.clone(), params: d.params.clone(), body: d.body.rename_process(old, new) }).collect(),
                scope: Box::new(scope.rename_process(old, new)),
            },
            _ => self.map_children(&mut |p| p.rename_process(old, new)),
        }
    }

    /// Rebuild the node with `f` applied to each immediate sub-process
    /// (definition bodies included).
    pub fn map_children(&self, f: &mut dyn FnMut(&Process) -> Process) -> Process {
        match self {
            Process::Nil | Process::Call { .. } => self.clone(),
            Process::New { session, protocol, body } => Process::New { session: session.clone(), protocol: protocol.clone(), body: Box::new(f(body)) },
            Process::Par(ps) => Process::Par(ps.iter().map(&mut *f).collect()),
            Process::Select { subject, partner, label, payload, cont } => {
                Process::Select { subject: subject.clone(), partner: partner.clone(), label: label.clone(), payload: payload.clone(), cont: Box::new(f(cont)) }
            }
            Process::Branch { subject, partner, arms } => Process::Branch {
                subject: subject.clone(),
                partner: partner.clone(),
                arms: arms.iter().map(|a| Arm { label: a.label.clone(), var: a.var.clone(), cont: f(&a.cont) }).collect(),
            },
            Process::Exist { subject, arms } => Process::Exist {
                subject: subject.clone(),
                arms: arms.iter().map(|a| ExistArm { partner: a.partner.clone(), label: a.label.clone(), var: a.var.clone(), cont: f(&a.cont) }).collect(),
            },
            Process::Def { defs, scope } => Process::Def {
                defs: defs.iter().map(|d| DefDecl { name: d.name.clone(), params: d.params.clone(), body: f(&d.body) }).collect(),
                scope: Box::new(f(scope)),
            },
        }
    }

    /// Immediate sub-processes.
    pub fn children(&self) -> Vec<&Process> {
        match self {
            Process::Nil | Process::Call { .. } => vec![],
            Process::New { body, .. } => vec![body],
            Process::Par(ps) => ps.iter().collect(),
            Process::Select { cont, .. } => vec![cont],
            Process::Branch { arms, .. } => arms.iter().map(|a| &a.cont).collect(),
            Process::Exist { arms, .. } => arms.iter().map(|a| &a.cont).collect(),
            Process::Def { defs, scope } => defs.iter().map(|d| &d.body).chain(std::iter::once(&**scope)).collect(),
        }
    }

    /// Canonical representative of the structural-congruence class:
    /// bound names renamed by depth, compositions flattened and sorted,
    /// `P | 0` collapsed, arms ordered.
    pub fn canonical(&self) -> Process {
        self.canon(&mut Env::default())
    }

    fn canon(&self, env: &mut Env) -> Process {
        match self {
            Process::Nil => Process::Nil,
            Process::New { session, protocol, body } => {
                let name = env.bind_session(session);
                let b = body.canon(env);
                env.sessions.pop();
                Process::New { session: name, protocol: protocol.clone(), body: Box::new(b) }
            }
            Process::Par(ps) => {
                let mut items: Vec<Process> = Vec::new();
                for p in ps {
                    match p.canon(env) {
                        Process::Nil => {}
                        Process::Par(qs) => items.extend(qs),
                        q => items.push(q),
                    }
                }
                items.sort();
                Process::par(items)
            }
            Process::Select { subject, partner, label, payload, cont } => Process::Select {
                subject: env.chan(subject),
                partner: partner.clone(),
                label: label.clone(),
                payload: env.payload(payload),
                cont: Box::new(cont.canon(env)),
            },
            Process::Branch { subject, partner, arms } => {
                let subject = env.chan(subject);
                let mut arms: Vec<Arm> = arms
                    .iter()
                    .map(|a| {
                        let var = env.bind_var(&a.var);
                        let cont = a.cont.canon(env);
                        env.vars.pop();
                        Arm { label: a.label.clone(), var, cont }
                    })
                    .collect();
                arms.sort();
                Process::Branch { subject, partner: partner.clone(), arms }
            }
            Process::Exist { subject, arms } => {
                let subject = env.chan(subject);
                let mut arms: Vec<ExistArm> = arms
                    .iter()
                    .map(|a| {
                        let var = env.bind_var(&a.var);
                        let cont = a.cont.canon(env);
                        env.vars.pop();
                        ExistArm { partner: a.partner.clone(), label: a.label.clone(), var, cont }
                    })
                    .collect();
                arms.sort();
                Process::Exist { subject, arms }
            }
            Process::Def { defs, scope } => {
                let names: Vec<String> = defs.iter().map(|d| env.bind_proc(&d.name)).collect();
                let defs = defs
                    .iter()
                    .zip(&names)
                    .map(|(d, name)| {
                        let n = env.vars.len();
                        let params = d.params.iter().map(|p| Param { name: env.bind_var(&p.name), ty: p.ty.as_ref().map(TypeExpr::canonical) }).collect();
                        let body = d.body.canon(env);
                        env.vars.truncate(n);
                        DefDecl { name: name.clone(), params, body }
                    })
                    .collect();
                let scope = scope.canon(env);
                env.procs.truncate(env.procs.len() - names.len());
                Process::Def { defs, scope: Box::new(scope) }
            }
            Process::Call { name, args } => Process::Call { name: env.proc_name(name), args: args.iter().map(|a| env.payload(a)).collect() },
        }
    }

    /// Roles `r` such that some endpoint `s[r]` is used as a subject or
    /// handed to a call (where it becomes a subject after unfolding).
    pub fn roles(&self) -> BTreeSet<Role> {
        let mut out = BTreeSet::new();
        self.roles_into(&mut out);
        out
    }

    fn roles_into(&self, out: &mut BTreeSet<Role>) {
        match self {
            Process::Select { subject: Channel::Session { role, .. }, .. }
            | Process::Branch { subject: Channel::Session { role, .. }, .. }
            | Process::Exist { subject: Channel::Session { role, .. }, .. } => {
                out.insert(role.clone());
            }
            Process::Call { args, .. } => {
                for a in args {
                    if let Payload::Chan(Channel::Session { role, .. }) = a {
                        out.insert(role.clone());
                    }
                }
            }
            _ => {}
        }
        for c in self.children() {
            c.roles_into(out);
        }
    }
}

/// Structural congruence, decided by comparing canonical forms.
pub fn structurally_equivalent(p: &Process, q: &Process) -> bool {
    p.canonical() == q.canonical()
}

/// Checks that every call to `name` inside `body` sits under a prefix.
pub fn check_guarded(body: &Process, name: &str) -> Result<(), ScopeError> {
    fn go(p: &Process, name: &str) -> Result<(), ScopeError> {
        match p {
            Process::Call { name: n, .. } if n == name => Err(ScopeError::Unguarded(name.to_string())),
            Process::Select { .. } | Process::Branch { .. } | Process::Exist { .. } => Ok(()),
            Process::Def { defs, .. } if defs.iter().any(|d| d.name == name) => Ok(()),
            Process::Def { scope, .. } => go(scope, name),
            _ => p.children().into_iter().try_for_each(|c| go(c, name)),
        }
    }
    go(body, name)
}

/// Load-time checks: calls resolve with the right arity, variables are
/// bound, recursion is guarded and labels within one branching are unique.
pub fn check_well_scoped(p: &Process) -> Result<(), ScopeError> {
    fn go(p: &Process, procs: &mut Vec<(String, usize)>, vars: &mut Vec<String>) -> Result<(), ScopeError> {
        let var_ok = |c: &Channel, vars: &Vec<String>| match c {
            Channel::Var(x) if !vars.contains(x) => Err(ScopeError::UnboundVar(x.clone())),
            _ => Ok(()),
        };
        match p {
            Process::Nil => Ok(()),
            Process::New { body, .. } => go(body, procs, vars),
            Process::Par(ps) => ps.iter().try_for_each(|q| go(q, procs, vars)),
            Process::Select { subject, payload, cont, .. } => {
                var_ok(subject, vars)?;
                if let Payload::Chan(c) = payload {
                    var_ok(c, vars)?;
                }
                go(cont, procs, vars)
            }
            Process::Branch { subject, arms, .. } => {
                var_ok(subject, vars)?;
                let mut seen = BTreeSet::new();
                for a in arms {
                    if !seen.insert(&a.label) {
                        return Err(ScopeError::DuplicateLabel(a.label.clone()));
                    }
                    vars.push(a.var.clone());
                    go(&a.cont, procs, vars)?;
                    vars.pop();
                }
                Ok(())
            }
            Process::Exist { subject, arms } => {
                var_ok(subject, vars)?;
                let mut seen = BTreeSet::new();
                for a in arms {
                    if !seen.insert((&a.partner, &a.label)) {
                        return Err(ScopeError::DuplicateLabel(a.label.clone()));
                    }
                    vars.push(a.var.clone());
                    go(&a.cont, procs, vars)?;
                    vars.pop();
                }
                Ok(())
            }
            Process::Def { defs, scope } => {
                let mut seen = BTreeSet::new();
                for d in defs {
                    if !seen.insert(&d.name) {
                        return Err(ScopeError::DuplicateDef(d.name.clone()));
                    }
                }
                let n = procs.len();
                procs.extend(defs.iter().map(|d| (d.name.clone(), d.params.len())));
                for d in defs {
                    for other in defs {
                        check_guarded(&d.body, &other.name)?;
                    }
                    let m = vars.len();
                    vars.extend(d.params.iter().map(|p| p.name.clone()));
                    go(&d.body, procs, vars)?;
                    vars.truncate(m);
                }
                go(scope, procs, vars)?;
                procs.truncate(n);
                Ok(())
            }
            Process::Call { name, args } => {
                match procs.iter().rev().find(|(n, _)| n == name) {
                    None => return Err(ScopeError::UnboundProcess(name.clone())),
                    Some((_, arity)) if *arity != args.len() => return Err(ScopeError::Arity { name: name.clone(), expected: *arity, got: args.len() }),
                    _ => {}
                }
                for a in args {
                    if let Payload::Chan(c) = a {
                        var_ok(c, vars)?;
                    }
                }
                Ok(())
            }
        }
    }
    go(p, &mut Vec::new(), &mut Vec::new())
}

/// A name derived from `base` that avoids `avoid`.
pub fn fresh(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let stem = base.split('\'').next().filter(|s| !s.is_empty()).unwrap_or("x");
    (1..).map(|i| format!("{stem}'{i}")).find(|n| !avoid.contains(n)).expect("infinite supply")
}

#[derive(Default)]
struct Env {
    vars: Vec<(String, String)>,
    sessions: Vec<(String, String)>,
    procs: Vec<(String, String)>,
}

impl Env {
    fn depth(&self) -> usize {
        self.vars.len() + self.sessions.len() + self.procs.len()
    }

    fn bind_var(&mut self, x: &str) -> String {
        let n = canonical_name(self.depth());
        self.vars.push((x.to_string(), n.clone()));
        n
    }

    fn bind_session(&mut self, s: &str) -> String {
        let n = canonical_name(self.depth());
        self.sessions.push((s.to_string(), n.clone()));
        n
    }

    fn bind_proc(&mut self, x: &str) -> String {
        let n = canonical_name(self.depth());
        self.procs.push((x.to_string(), n.clone()));
        n
    }

    fn lookup(stack: &[(String, String)], x: &str) -> Option<String> {
        stack.iter().rev().find(|(k, _)| k == x).map(|(_, v)| v.clone())
    }

    fn proc_name(&self, x: &str) -> String {
        Env::lookup(&self.procs, x).unwrap_or_else(|| x.to_string())
    }

    fn chan(&self, c: &Channel) -> Channel {
        match c {
            Channel::Var(x) => Channel::Var(Env::lookup(&self.vars, x).unwrap_or_else(|| x.clone())),
            Channel::Session { session, role } => {
                Channel::Session { session: Env::lookup(&self.sessions, session).unwrap_or_else(|| session.clone()), role: role.clone() }
            }
        }
    }

    fn payload(&self, p: &Payload) -> Payload {
        match p {
            Payload::Chan(c) => Payload::Chan(self.chan(c)),
            lit => lit.clone(),
        }
    }
}

/// Definitions in scope, keyed by name; used by passes that need to look
/// up a callee.
pub type DefTable = BTreeMap<String, DefDecl>;

#[cfg(test)]
mod tests {
    use super::*;

    fn sel(sess: &str, role: &str, partner: &str, label: &str, cont: Process) -> Process {
        Process::Select {
            subject: Channel::endpoint(sess, role),
            partner: Role::new(partner),
            label: label.into(),
            payload: Payload::UNIT,
            cont: Box::new(cont),
        }
    }

    fn recv(subject: Channel, partner: &str, label: &str, var: &str, cont: Process) -> Process {
        Process::Branch { subject, partner: Role::new(partner), arms: vec![Arm { label: label.into(), var: var.into(), cont }] }
    }

    #[test]
    fn par_drops_nil_and_flattens() {
        let a = sel("s", "p", "q", "a", Process::Nil);
        let p = Process::par([Process::Nil, Process::par([a.clone(), Process::Nil]), Process::Nil]);
        assert_eq!(p, a);
        assert!(Process::par([Process::Nil, Process::Nil]).is_nil());
    }

    #[test]
    fn equivalence_up_to_commutation_and_renaming() {
        let a = sel("s", "p", "q", "a", Process::Nil);
        let b = recv(Channel::endpoint("s", "q"), "p", "a", "x", Process::Nil);
        let left = Process::New { session: "s".into(), protocol: None, body: Box::new(Process::Par(vec![a.clone(), b.clone()])) };
        let right = Process::New {
            session: "t".into(),
            protocol: None,
            body: Box::new(Process::Par(vec![b.rename_session("s", "t"), a.rename_session("s", "t"), Process::Nil])),
        };
        assert!(structurally_equivalent(&left, &right));
        assert!(!structurally_equivalent(&left, &a));
    }

    #[test]
    fn substitution_renames_binders_that_would_capture() {
        // x & l(y) . y + m(z)   with z := y  keeps the outer y free
        let inner = Process::Select {
            subject: Channel::var("y"),
            partner: Role::new("q"),
            label: "m".into(),
            payload: Payload::var("z"),
            cont: Box::new(Process::Nil),
        };
        let p = recv(Channel::var("x"), "q", "l", "y", inner);
        let out = p.subst("z", &Payload::var("y"));
        assert!(out.free_vars().contains("y"));
        assert!(out.free_vars().contains("x"));
        assert!(!out.free_vars().contains("z"));
    }

    #[test]
    fn substitution_stops_at_shadowing() {
        let inner =
            Process::Select { subject: Channel::var("x"), partner: Role::new("q"), label: "m".into(), payload: Payload::UNIT, cont: Box::new(Process::Nil) };
        let p = recv(Channel::var("c"), "q", "l", "x", inner);
        assert_eq!(p.subst("x", &Payload::Chan(Channel::endpoint("s", "p"))), p);
    }

    #[test]
    fn guardedness_of_calls() {
        let call = Process::Call { name: "X".into(), args: vec![] };
        assert!(check_guarded(&call, "X").is_err());
        assert!(check_guarded(&sel("s", "p", "q", "a", call.clone()), "X").is_ok());
        assert!(check_guarded(&Process::par([call.clone(), Process::Nil]), "X").is_err());
    }

    #[test]
    fn scope_errors() {
        let call = Process::Call { name: "X".into(), args: vec![Payload::UNIT] };
        assert_eq!(check_well_scoped(&call), Err(ScopeError::UnboundProcess("X".into())));
        let def = Process::Def { defs: vec![DefDecl { name: "X".into(), params: vec![], body: Process::Nil }], scope: Box::new(call) };
        assert!(matches!(check_well_scoped(&def), Err(ScopeError::Arity { .. })));
        let unbound = sel("s", "p", "q", "a", Process::Nil);
        let unbound = match unbound {
            Process::Select { partner, label, cont, .. } => Process::Select { subject: Channel::var("y"), partner, label, payload: Payload::UNIT, cont },
            _ => unreachable!(),
        };
        assert_eq!(check_well_scoped(&unbound), Err(ScopeError::UnboundVar("y".into())));
    }

    #[test]
    fn roles_include_call_arguments() {
        let p =
            Process::par([sel("s", "a", "b", "x", Process::Nil), Process::Call { name: "X".into(), args: vec![Payload::Chan(Channel::endpoint("s", "c"))] }]);
        let roles: Vec<String> = p.roles().iter().map(|r| r.name().to_string()).collect();
        assert_eq!(roles, vec!["a", "c"]);
    }
}
