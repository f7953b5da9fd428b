//! Global and local session types.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::calculus::Role;

/// Basic payload sorts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Int,
    Bool,
    Real,
    Str,
    Unit,
}

impl Sort {
    pub fn keyword(self) -> &'static str {
        match self {
            Sort::Int => "int",
            Sort::Bool => "bool",
            Sort::Real => "real",
            Sort::Str => "str",
            Sort::Unit => "unit",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Sort> {
        Some(match s {
            "int" => Sort::Int,
            "bool" => Sort::Bool,
            "real" => Sort::Real,
            "str" => Sort::Str,
            "unit" => Sort::Unit,
            _ => return None,
        })
    }
}

/// Payload type of a message: a basic sort, a shared global type, or a
/// delegated endpoint's local type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeExpr {
    Basic(Sort),
    Global(Box<GlobalType>),
    Local(Box<LocalType>),
}

impl TypeExpr {
    pub const UNIT: TypeExpr = TypeExpr::Basic(Sort::Unit);

    pub fn canonical(&self) -> TypeExpr {
        match self {
            TypeExpr::Basic(s) => TypeExpr::Basic(*s),
            TypeExpr::Global(g) => TypeExpr::Global(Box::new(g.canonical())),
            TypeExpr::Local(t) => TypeExpr::Local(Box::new(t.canonical())),
        }
    }

    /// Equality used for payloads: local types up to unfolding, the rest
    /// up to binder renaming.
    pub fn equiv(&self, other: &TypeExpr) -> bool {
        match (self, other) {
            (TypeExpr::Basic(a), TypeExpr::Basic(b)) => a == b,
            (TypeExpr::Global(a), TypeExpr::Global(b)) => a.canonical() == b.canonical(),
            (TypeExpr::Local(a), TypeExpr::Local(b)) => a.equiv(b),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GBranch {
    pub label: String,
    pub payload: TypeExpr,
    pub cont: GlobalType,
}

/// One row of an existential interaction: `sender -> receiver : label(payload).cont`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GRow {
    pub sender: Role,
    pub label: String,
    pub payload: TypeExpr,
    pub cont: GlobalType,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GlobalType {
    Comm { sender: Role, receiver: Role, branches: Vec<GBranch> },
    Exist { receiver: Role, rows: Vec<GRow> },
    Rec { var: String, body: Box<GlobalType> },
    Var(String),
    End,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LBranch {
    pub label: String,
    pub payload: TypeExpr,
    pub cont: LocalType,
}

/// Row of an existential branching (`role` is the sender being waited for)
/// or of a domain selection (`role` is the member that performs the send).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LRow {
    pub role: Role,
    pub label: String,
    pub payload: TypeExpr,
    pub cont: LocalType,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocalType {
    Select {
        partner: Role,
        branches: Vec<LBranch>,
    },
    Branch {
        partner: Role,
        branches: Vec<LBranch>,
    },
    /// Existential branching: receive from whichever listed sender acts first.
    Exist {
        rows: Vec<LRow>,
    },
    /// Projection of an existential interaction onto its domain set: exactly
    /// one member sends to `partner` and then continues as the row's type.
    DomainSelect {
        partner: Role,
        rows: Vec<LRow>,
    },
    Rec {
        var: String,
        body: Box<LocalType>,
    },
    Var(String),
    End,
}

/// A non-empty set of roles, used as the candidate senders of one
/// existential interaction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DomainSet(BTreeSet<Role>);

impl DomainSet {
    pub fn new(roles: impl IntoIterator<Item = Role>) -> DomainSet {
        let set: BTreeSet<Role> = roles.into_iter().collect();
        assert!(!set.is_empty(), "domain set must not be empty");
        DomainSet(set)
    }

    pub fn single(r: Role) -> DomainSet {
        DomainSet(BTreeSet::from([r]))
    }

    pub fn roles(&self) -> &BTreeSet<Role> {
        &self.0
    }

    pub fn contains(&self, r: &Role) -> bool {
        self.0.contains(r)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The only member of a singleton set.
    pub fn as_single(&self) -> Option<&Role> {
        if self.0.len() == 1 {
            self.0.iter().next()
        } else {
            None
        }
    }
}

impl fmt::Display for DomainSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, "}}")
    }
}

/// Name used for the `n`-th binder (counted from the root) in canonical forms.
pub(crate) fn canonical_name(depth: usize) -> String {
    format!("_{depth}")
}

fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.trim_end_matches(|c: char| c == '\'' || c.is_ascii_digit());
    let stem = if stem.is_empty() { "t" } else { stem };
    (0..).map(|i| format!("{stem}'{i}")).find(|n| !avoid.contains(n)).expect("infinite supply")
}

impl GlobalType {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            GlobalType::Comm { branches, .. } => {
                for b in branches {
                    b.cont.collect_free(bound, out);
                }
            }
            GlobalType::Exist { rows, .. } => {
                for r in rows {
                    r.cont.collect_free(bound, out);
                }
            }
            GlobalType::Rec { var, body } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            GlobalType::Var(t) => {
                if !bound.contains(t) {
                    out.insert(t.clone());
                }
            }
            GlobalType::End => {}
        }
    }

    fn all_binders(&self, out: &mut BTreeSet<String>) {
        match self {
            GlobalType::Comm { branches, .. } => branches.iter().for_each(|b| b.cont.all_binders(out)),
            GlobalType::Exist { rows, .. } => rows.iter().for_each(|r| r.cont.all_binders(out)),
            GlobalType::Rec { var, body } => {
                out.insert(var.clone());
                body.all_binders(out);
            }
            GlobalType::Var(t) => {
                out.insert(t.clone());
            }
            GlobalType::End => {}
        }
    }

    /// Capture-avoiding substitution of `with` for the free variable `var`.
    pub fn subst(&self, var: &str, with: &GlobalType) -> GlobalType {
        match self {
            GlobalType::Comm { sender, receiver, branches } => GlobalType::Comm {
                sender: sender.clone(),
                receiver: receiver.clone(),
                branches: branches.iter().map(|b| GBranch { label: b.label.clone(), payload: b.payload.clone(), cont: b.cont.subst(var, with) }).collect(),
            },
            GlobalType::Exist { receiver, rows } => GlobalType::Exist {
                receiver: receiver.clone(),
                rows: rows
                    .iter()
                    .map(|r| GRow { sender: r.sender.clone(), label: r.label.clone(), payload: r.payload.clone(), cont: r.cont.subst(var, with) })
                    .collect(),
            },
            GlobalType::Rec { var: v, body } => {
                if v == var {
                    return self.clone();
                }
                let fv = with.free_vars();
                if fv.contains(v) {
                    let mut avoid = fv;
                    body.all_binders(&mut avoid);
                    avoid.insert(var.to_string());
                    let nv = fresh_name(v, &avoid);
                    let renamed = body.subst(v, &GlobalType::Var(nv.clone()));
                    GlobalType::Rec { var: nv, body: Box::new(renamed.subst(var, with)) }
                } else {
                    GlobalType::Rec { var: v.clone(), body: Box::new(body.subst(var, with)) }
                }
            }
            GlobalType::Var(t) if t == var => with.clone(),
            GlobalType::Var(_) | GlobalType::End => self.clone(),
        }
    }

    /// One-step unfolding of a top-level recursion.
    pub fn unfold(&self) -> GlobalType {
        match self {
            GlobalType::Rec { var, body } => body.subst(var, self),
            _ => self.clone(),
        }
    }

    /// Unfold top-level recursions until the head is a communication, a
    /// variable or `end`. Guardedness makes this terminate; a bound guards
    /// against `rec t . t`.
    pub fn unfold_head(&self) -> GlobalType {
        let mut g = self.clone();
        for _ in 0..64 {
            match g {
                GlobalType::Rec { .. } => g = g.unfold(),
                _ => return g,
            }
        }
        g
    }

    /// Every recursion variable occurs under at least one interaction.
    pub fn is_guarded(&self) -> bool {
        fn go(g: &GlobalType, unguarded: &mut Vec<String>) -> bool {
            match g {
                GlobalType::Comm { branches, .. } => branches.iter().all(|b| go(&b.cont, &mut Vec::new())),
                GlobalType::Exist { rows, .. } => rows.iter().all(|r| go(&r.cont, &mut Vec::new())),
                GlobalType::Rec { var, body } => {
                    unguarded.push(var.clone());
                    let ok = go(body, unguarded);
                    unguarded.pop();
                    ok
                }
                GlobalType::Var(t) => !unguarded.contains(t),
                GlobalType::End => true,
            }
        }
        go(self, &mut Vec::new())
    }

    /// Canonical representative: branches sorted by label, rows by sender,
    /// recursion binders renamed by depth.
    pub fn canonical(&self) -> GlobalType {
        self.canon_at(&mut Vec::new())
    }

    fn canon_at(&self, env: &mut Vec<(String, String)>) -> GlobalType {
        match self {
            GlobalType::Comm { sender, receiver, branches } => {
                let mut bs: Vec<GBranch> =
                    branches.iter().map(|b| GBranch { label: b.label.clone(), payload: b.payload.canonical(), cont: b.cont.canon_at(env) }).collect();
                bs.sort();
                GlobalType::Comm { sender: sender.clone(), receiver: receiver.clone(), branches: bs }
            }
            GlobalType::Exist { receiver, rows } => {
                let mut rs: Vec<GRow> = rows
                    .iter()
                    .map(|r| GRow { sender: r.sender.clone(), label: r.label.clone(), payload: r.payload.canonical(), cont: r.cont.canon_at(env) })
                    .collect();
                rs.sort();
                GlobalType::Exist { receiver: receiver.clone(), rows: rs }
            }
            GlobalType::Rec { var, body } => {
                let name = canonical_name(env.len());
                env.push((var.clone(), name.clone()));
                let b = body.canon_at(env);
                env.pop();
                GlobalType::Rec { var: name, body: Box::new(b) }
            }
            GlobalType::Var(t) => match env.iter().rev().find(|(v, _)| v == t) {
                Some((_, n)) => GlobalType::Var(n.clone()),
                None => GlobalType::Var(t.clone()),
            },
            GlobalType::End => GlobalType::End,
        }
    }

    /// Interaction nesting depth (recursion binders do not count).
    pub fn depth(&self) -> usize {
        match self {
            GlobalType::Comm { branches, .. } => 1 + branches.iter().map(|b| b.cont.depth()).max().unwrap_or(0),
            GlobalType::Exist { rows, .. } => 1 + rows.iter().map(|r| r.cont.depth()).max().unwrap_or(0),
            GlobalType::Rec { body, .. } => body.depth(),
            GlobalType::Var(_) | GlobalType::End => 0,
        }
    }

    /// Number of interactions and rows, counted syntactically.
    pub fn size(&self) -> usize {
        match self {
            GlobalType::Comm { branches, .. } => branches.iter().map(|b| 1 + b.cont.size()).sum(),
            GlobalType::Exist { rows, .. } => rows.iter().map(|r| 1 + r.cont.size()).sum(),
            GlobalType::Rec { body, .. } => body.size(),
            GlobalType::Var(_) | GlobalType::End => 0,
        }
    }
}

impl LocalType {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            LocalType::Select { branches, .. } | LocalType::Branch { branches, .. } => {
                for b in branches {
                    b.cont.collect_free(bound, out);
                }
            }
            LocalType::Exist { rows } | LocalType::DomainSelect { rows, .. } => {
                for r in rows {
                    r.cont.collect_free(bound, out);
                }
            }
            LocalType::Rec { var, body } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            LocalType::Var(t) => {
                if !bound.contains(t) {
                    out.insert(t.clone());
                }
            }
            LocalType::End => {}
        }
    }

    fn all_binders(&self, out: &mut BTreeSet<String>) {
        match self {
            LocalType::Select { branches, .. } | LocalType::Branch { branches, .. } => branches.iter().for_each(|b| b.cont.all_binders(out)),
            LocalType::Exist { rows } | LocalType::DomainSelect { rows, .. } => rows.iter().for_each(|r| r.cont.all_binders(out)),
            LocalType::Rec { var, body } => {
                out.insert(var.clone());
                body.all_binders(out);
            }
            LocalType::Var(t) => {
                out.insert(t.clone());
            }
            LocalType::End => {}
        }
    }

    /// Apply `f` to every direct continuation.
    pub(crate) fn map_conts(&self, f: &mut dyn FnMut(&LocalType) -> LocalType) -> LocalType {
        let br = |bs: &Vec<LBranch>, f: &mut dyn FnMut(&LocalType) -> LocalType| -> Vec<LBranch> {
            bs.iter().map(|b| LBranch { label: b.label.clone(), payload: b.payload.clone(), cont: f(&b.cont) }).collect()
        };
        let rw = |rs: &Vec<LRow>, f: &mut dyn FnMut(&LocalType) -> LocalType| -> Vec<LRow> {
            rs.iter().map(|r| LRow { role: r.role.clone(), label: r.label.clone(), payload: r.payload.clone(), cont: f(&r.cont) }).collect()
        };
        match self {
            LocalType::Select { partner, branches } => LocalType::Select { partner: partner.clone(), branches: br(branches, f) },
            LocalType::Branch { partner, branches } => LocalType::Branch { partner: partner.clone(), branches: br(branches, f) },
            LocalType::Exist { rows } => LocalType::Exist { rows: rw(rows, f) },
            LocalType::DomainSelect { partner, rows } => LocalType::DomainSelect { partner: partner.clone(), rows: rw(rows, f) },
            LocalType::Rec { var, body } => LocalType::Rec { var: var.clone(), body: Box::new(f(body)) },
            LocalType::Var(_) | LocalType::End => self.clone(),
        }
    }

    pub fn subst(&self, var: &str, with: &LocalType) -> LocalType {
        match self {
            LocalType::Rec { var: v, body } => {
                if v == var {
                    return self.clone();
                }
                let fv = with.free_vars();
                if fv.contains(v) {
                    let mut avoid = fv;
                    body.all_binders(&mut avoid);
                    avoid.insert(var.to_string());
                    let nv = fresh_name(v, &avoid);
                    let renamed = body.subst(v, &LocalType::Var(nv.clone()));
                    LocalType::Rec { var: nv, body: Box::new(renamed.subst(var, with)) }
                } else {
                    LocalType::Rec { var: v.clone(), body: Box::new(body.subst(var, with)) }
                }
            }
            LocalType::Var(t) if t == var => with.clone(),
            LocalType::Var(_) | LocalType::End => self.clone(),
            _ => self.map_conts(&mut |c| c.subst(var, with)),
        }
    }

    pub fn unfold(&self) -> LocalType {
        match self {
            LocalType::Rec { var, body } => body.subst(var, self),
            _ => self.clone(),
        }
    }

    pub fn unfold_head(&self) -> LocalType {
        let mut t = self.clone();
        for _ in 0..64 {
            match t {
                LocalType::Rec { .. } => t = t.unfold(),
                _ => return t,
            }
        }
        t
    }

    pub fn is_end(&self) -> bool {
        matches!(self.unfold_head(), LocalType::End)
    }

    pub fn canonical(&self) -> LocalType {
        self.canon_at(&mut Vec::new())
    }

    fn canon_at(&self, env: &mut Vec<(String, String)>) -> LocalType {
        match self {
            LocalType::Rec { var, body } => {
                let name = canonical_name(env.len());
                env.push((var.clone(), name.clone()));
                let b = body.canon_at(env);
                env.pop();
                LocalType::Rec { var: name, body: Box::new(b) }
            }
            LocalType::Var(t) => match env.iter().rev().find(|(v, _)| v == t) {
                Some((_, n)) => LocalType::Var(n.clone()),
                None => LocalType::Var(t.clone()),
            },
            LocalType::End => LocalType::End,
            _ => {
                let mut out = self.map_conts(&mut |c| c.canon_at(env));
                match &mut out {
                    LocalType::Select { branches, .. } | LocalType::Branch { branches, .. } => {
                        for b in branches.iter_mut() {
                            b.payload = b.payload.canonical();
                        }
                        branches.sort();
                    }
                    LocalType::Exist { rows } | LocalType::DomainSelect { rows, .. } => {
                        for r in rows.iter_mut() {
                            r.payload = r.payload.canonical();
                        }
                        rows.sort();
                    }
                    _ => {}
                }
                out
            }
        }
    }

    /// Equi-recursive equality: the two types have the same infinite unfolding.
    pub fn equiv(&self, other: &LocalType) -> bool {
        let mut assumed = BTreeSet::new();
        equiv_co(&self.canonical(), &other.canonical(), &mut assumed)
    }
}

fn equiv_co(a: &LocalType, b: &LocalType, assumed: &mut BTreeSet<(LocalType, LocalType)>) -> bool {
    let key = (a.clone(), b.clone());
    if assumed.contains(&key) {
        return true;
    }
    assumed.insert(key);
    let (ha, hb) = (a.unfold_head(), b.unfold_head());
    let branches_eq = |x: &[LBranch], y: &[LBranch], assumed: &mut BTreeSet<_>| {
        let mx: BTreeMap<_, _> = x.iter().map(|b| (&b.label, b)).collect();
        let my: BTreeMap<_, _> = y.iter().map(|b| (&b.label, b)).collect();
        mx.len() == my.len()
            && mx.iter().all(|(l, bx)| match my.get(l) {
                Some(by) => bx.payload.equiv(&by.payload) && equiv_co(&bx.cont.canonical(), &by.cont.canonical(), assumed),
                None => false,
            })
    };
    let rows_eq = |x: &[LRow], y: &[LRow], assumed: &mut BTreeSet<_>| {
        let mx: BTreeMap<_, _> = x.iter().map(|r| ((&r.role, &r.label), r)).collect();
        let my: BTreeMap<_, _> = y.iter().map(|r| ((&r.role, &r.label), r)).collect();
        mx.len() == my.len()
            && mx.iter().all(|(k, rx)| match my.get(k) {
                Some(ry) => rx.payload.equiv(&ry.payload) && equiv_co(&rx.cont.canonical(), &ry.cont.canonical(), assumed),
                None => false,
            })
    };
    match (&ha, &hb) {
        (LocalType::End, LocalType::End) => true,
        (LocalType::Var(x), LocalType::Var(y)) => x == y,
        (LocalType::Select { partner: p, branches: x }, LocalType::Select { partner: q, branches: y })
        | (LocalType::Branch { partner: p, branches: x }, LocalType::Branch { partner: q, branches: y }) => p == q && branches_eq(x, y, assumed),
        (LocalType::Exist { rows: x }, LocalType::Exist { rows: y }) => rows_eq(x, y, assumed),
        (LocalType::DomainSelect { partner: p, rows: x }, LocalType::DomainSelect { partner: q, rows: y }) => p == q && rows_eq(x, y, assumed),
        _ => false,
    }
}
