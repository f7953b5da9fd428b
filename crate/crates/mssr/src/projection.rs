//! Projection of global types onto roles and domain sets, merging, and
//! well-formedness.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::calculus::Role;
use crate::types::{DomainSet, GlobalType, LBranch, LRow, LocalType};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("projection onto {target} is undefined: cannot merge `{left}` with `{right}` ({reason})")]
    Merge { target: DomainSet, left: String, right: String, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot merge `{left}` with `{right}`: {reason}")]
pub struct MergeError {
    pub left: String,
    pub right: String,
    pub reason: String,
}

fn merge_err(a: &LocalType, b: &LocalType, reason: impl Into<String>) -> MergeError {
    MergeError { left: a.to_string(), right: b.to_string(), reason: reason.into() }
}

/// Every role mentioned in `g`.
pub fn roles(g: &GlobalType) -> BTreeSet<Role> {
    let mut out = BTreeSet::new();
    fn go(g: &GlobalType, out: &mut BTreeSet<Role>) {
        match g {
            GlobalType::Comm { sender, receiver, branches } => {
                out.insert(sender.clone());
                out.insert(receiver.clone());
                branches.iter().for_each(|b| go(&b.cont, out));
            }
            GlobalType::Exist { receiver, rows } => {
                out.insert(receiver.clone());
                for r in rows {
                    out.insert(r.sender.clone());
                    go(&r.cont, out);
                }
            }
            GlobalType::Rec { body, .. } => go(body, out),
            GlobalType::Var(_) | GlobalType::End => {}
        }
    }
    go(g, &mut out);
    out
}

/// Sender sets of every existential interaction in `g`.
pub fn exdom(g: &GlobalType) -> BTreeSet<DomainSet> {
    let mut out = BTreeSet::new();
    fn go(g: &GlobalType, out: &mut BTreeSet<DomainSet>) {
        match g {
            GlobalType::Comm { branches, .. } => branches.iter().for_each(|b| go(&b.cont, out)),
            GlobalType::Exist { rows, .. } => {
                out.insert(DomainSet::new(rows.iter().map(|r| r.sender.clone())));
                rows.iter().for_each(|r| go(&r.cont, out));
            }
            GlobalType::Rec { body, .. } => go(body, out),
            GlobalType::Var(_) | GlobalType::End => {}
        }
    }
    go(g, &mut out);
    out
}

/// Domain sets that get their own context entry: those with at least two
/// members. A singleton domain `{q}` is just role `q`.
pub fn proper_domains(g: &GlobalType) -> BTreeSet<DomainSet> {
    exdom(g).into_iter().filter(|d| d.len() > 1).collect()
}

/// `g` projected onto the role set `a`.
pub fn project(g: &GlobalType, a: &DomainSet) -> Result<LocalType, ProjectionError> {
    proj(g, a).map_err(|e| ProjectionError::Merge { target: a.clone(), left: e.left, right: e.right, reason: e.reason })
}

pub fn project_role(g: &GlobalType, r: &Role) -> Result<LocalType, ProjectionError> {
    project(g, &DomainSet::single(r.clone()))
}

fn proj(g: &GlobalType, a: &DomainSet) -> Result<LocalType, MergeError> {
    match g {
        GlobalType::End => Ok(LocalType::End),
        GlobalType::Var(t) => Ok(LocalType::Var(t.clone())),
        GlobalType::Rec { var, body } => {
            let b = proj(body, a)?;
            Ok(match b {
                // Only the binder's own variable means "nothing to do here";
                // an outer variable must survive or the outer loop is lost.
                LocalType::Var(v) if v == *var => LocalType::End,
                b if !b.free_vars().contains(var) => b,
                b => LocalType::Rec { var: var.clone(), body: Box::new(b) },
            })
        }
        GlobalType::Comm { sender, receiver, branches } => {
            let conts = branches.iter().map(|b| proj(&b.cont, a)).collect::<Result<Vec<_>, _>>()?;
            let mk = |conts: Vec<LocalType>| -> Vec<LBranch> {
                branches.iter().zip(conts).map(|(b, cont)| LBranch { label: b.label.clone(), payload: b.payload.clone(), cont }).collect()
            };
            match a.as_single() {
                Some(r) if r == sender => Ok(LocalType::Select { partner: receiver.clone(), branches: mk(conts) }),
                Some(r) if r == receiver => Ok(LocalType::Branch { partner: sender.clone(), branches: mk(conts) }),
                _ => merge_all(conts),
            }
        }
        GlobalType::Exist { receiver, rows } => {
            let domain = DomainSet::new(rows.iter().map(|r| r.sender.clone()));
            if a.as_single() == Some(receiver) {
                let rows = rows
                    .iter()
                    .map(|r| Ok(LRow { role: r.sender.clone(), label: r.label.clone(), payload: r.payload.clone(), cont: proj(&r.cont, a)? }))
                    .collect::<Result<Vec<_>, MergeError>>()?;
                return Ok(LocalType::Exist { rows });
            }
            if *a == domain {
                // Each row continues as its own sender.
                let rows = rows
                    .iter()
                    .map(|r| {
                        let cont = proj(&r.cont, &DomainSet::single(r.sender.clone()))?;
                        Ok(LRow { role: r.sender.clone(), label: r.label.clone(), payload: r.payload.clone(), cont })
                    })
                    .collect::<Result<Vec<_>, MergeError>>()?;
                if rows.len() == 1 {
                    let r = rows.into_iter().next().unwrap();
                    return Ok(LocalType::Select { partner: receiver.clone(), branches: vec![LBranch { label: r.label, payload: r.payload, cont: r.cont }] });
                }
                return Ok(LocalType::DomainSelect { partner: receiver.clone(), rows });
            }
            if let Some(q) = a.as_single() {
                if domain.contains(q) {
                    // A domain member's behaviour from here on is carried by
                    // the domain entry; its own entry is idle.
                    return Ok(LocalType::End);
                }
            }
            let conts = rows.iter().map(|r| proj(&r.cont, a)).collect::<Result<Vec<_>, _>>()?;
            merge_all(conts)
        }
    }
}

fn merge_all(conts: Vec<LocalType>) -> Result<LocalType, MergeError> {
    let mut it = conts.into_iter();
    let first = it.next().unwrap_or(LocalType::End);
    it.try_fold(first, |acc, t| merge(&acc, &t))
}

/// The partial merge operator on local types.
pub fn merge(a: &LocalType, b: &LocalType) -> Result<LocalType, MergeError> {
    match (a, b) {
        (LocalType::End, LocalType::End) => Ok(LocalType::End),
        (LocalType::Var(x), LocalType::Var(y)) if x == y => Ok(a.clone()),
        (LocalType::Rec { var: x, body: bx }, LocalType::Rec { var: y, body: by }) => {
            let by = if x == y { (**by).clone() } else { by.subst(y, &LocalType::Var(x.clone())) };
            Ok(LocalType::Rec { var: x.clone(), body: Box::new(merge(bx, &by)?) })
        }
        (LocalType::Branch { partner: p, branches: xs }, LocalType::Branch { partner: q, branches: ys }) => {
            if p != q {
                return Err(merge_err(a, b, format!("branchings on different partners `{p}` and `{q}`")));
            }
            let mut out: BTreeMap<&str, LBranch> = BTreeMap::new();
            for x in xs {
                out.insert(&x.label, x.clone());
            }
            for y in ys {
                match out.get_mut(y.label.as_str()) {
                    Some(x) => {
                        if !x.payload.equiv(&y.payload) {
                            return Err(merge_err(a, b, format!("label `{}` carries different payloads", y.label)));
                        }
                        x.cont = merge(&x.cont, &y.cont)?;
                    }
                    None => {
                        out.insert(&y.label, y.clone());
                    }
                }
            }
            Ok(LocalType::Branch { partner: p.clone(), branches: order_like(xs, ys, out) })
        }
        (LocalType::Exist { rows: xs }, LocalType::Exist { rows: ys }) => {
            let mut out: Vec<LRow> = xs.clone();
            for y in ys {
                match out.iter_mut().find(|x| x.role == y.role) {
                    Some(x) => {
                        if x.label != y.label || !x.payload.equiv(&y.payload) {
                            return Err(merge_err(a, b, format!("sender `{}` has different rows", y.role)));
                        }
                        x.cont = merge(&x.cont, &y.cont)?;
                    }
                    None => out.push(y.clone()),
                }
            }
            Ok(LocalType::Exist { rows: out })
        }
        (LocalType::Select { .. }, LocalType::Select { .. }) | (LocalType::DomainSelect { .. }, LocalType::DomainSelect { .. }) => {
            if a.canonical() == b.canonical() {
                Ok(a.clone())
            } else {
                Err(merge_err(a, b, "selections must coincide"))
            }
        }
        _ => Err(merge_err(a, b, "incompatible shapes")),
    }
}

/// Keep the left operand's branch order, then new labels from the right.
fn order_like(xs: &[LBranch], ys: &[LBranch], mut merged: BTreeMap<&str, LBranch>) -> Vec<LBranch> {
    let mut out = Vec::new();
    for l in xs.iter().chain(ys).map(|b| b.label.as_str()) {
        if let Some(b) = merged.remove(l) {
            out.push(b);
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WellFormedError {
    #[error("unbound recursion variable `{0}`")]
    Unbound(String),
    #[error("unguarded recursion")]
    Unguarded,
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("domain member `{role}` of {domain} occurs outside its own row")]
    Escape { role: Role, domain: DomainSet },
    #[error("existential interactions with overlapping sender sets {0} and {1}")]
    Overlap(DomainSet, DomainSet),
    #[error("existential interaction over {0} nested inside one of its own rows")]
    Nested(DomainSet),
}

/// Well-formedness: closed, guarded, projectable onto every role and every
/// domain set, and each domain member confined to its own row.
pub fn well_formed(g: &GlobalType) -> Result<(), Vec<WellFormedError>> {
    let mut errs = Vec::new();
    if let Some(t) = g.free_vars().into_iter().next() {
        errs.push(WellFormedError::Unbound(t));
    }
    if !g.is_guarded() {
        errs.push(WellFormedError::Unguarded);
    }
    let domains: Vec<DomainSet> = proper_domains(g).into_iter().collect();
    for (i, d) in domains.iter().enumerate() {
        for e in &domains[i + 1..] {
            if d.roles().intersection(e.roles()).next().is_some() {
                errs.push(WellFormedError::Overlap(d.clone(), e.clone()));
            }
        }
    }
    if errs.is_empty() {
        confinement(g, &domains, &mut errs);
    }
    if errs.is_empty() {
        for r in roles(g) {
            if let Err(e) = project_role(g, &r) {
                errs.push(e.into());
            }
        }
        for d in &domains {
            if let Err(e) = project(g, d) {
                errs.push(e.into());
            }
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Members of a proper domain may only act inside their own row of an
/// existential interaction over that domain.
fn confinement(g: &GlobalType, domains: &[DomainSet], errs: &mut Vec<WellFormedError>) {
    fn go(g: &GlobalType, domains: &[DomainSet], inside: &BTreeSet<Role>, open: &BTreeSet<DomainSet>, errs: &mut Vec<WellFormedError>) {
        let check = |r: &Role, errs: &mut Vec<WellFormedError>| {
            if let Some(d) = domains.iter().find(|d| d.contains(r)) {
                if !inside.contains(r) {
                    let e = WellFormedError::Escape { role: r.clone(), domain: d.clone() };
                    if !errs.contains(&e) {
                        errs.push(e);
                    }
                }
            }
        };
        match g {
            GlobalType::Comm { sender, receiver, branches } => {
                check(sender, errs);
                check(receiver, errs);
                branches.iter().for_each(|b| go(&b.cont, domains, inside, open, errs));
            }
            GlobalType::Exist { receiver, rows } => {
                check(receiver, errs);
                let here = DomainSet::new(rows.iter().map(|r| r.sender.clone()));
                if here.len() > 1 {
                    if open.contains(&here) {
                        errs.push(WellFormedError::Nested(here.clone()));
                        return;
                    }
                    let mut open = open.clone();
                    open.insert(here);
                    for r in rows {
                        let mut own = inside.clone();
                        own.insert(r.sender.clone());
                        go(&r.cont, domains, &own, &open, errs);
                    }
                } else {
                    for r in rows {
                        check(&r.sender, errs);
                        go(&r.cont, domains, inside, open, errs);
                    }
                }
            }
            GlobalType::Rec { body, .. } => go(body, domains, inside, open, errs),
            GlobalType::Var(_) | GlobalType::End => {}
        }
    }
    go(g, domains, &BTreeSet::new(), &BTreeSet::new(), errs);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_global, parse_local};

    fn p(s: &str) -> GlobalType {
        parse_global(s).unwrap()
    }

    fn role(s: &str) -> Role {
        Role::new(s)
    }

    #[test]
    fn plain_projection() {
        let g = p("r -> p : { l1(int). p -> q : { l2(int). end } }");
        assert_eq!(project_role(&g, &role("r")).unwrap(), parse_local("p + { l1(int). end }").unwrap());
        assert_eq!(project_role(&g, &role("q")).unwrap(), parse_local("p & { l2(int). end }").unwrap());
        assert_eq!(project_role(&g, &role("p")).unwrap(), parse_local("r & { l1(int). q + { l2(int). end } }").unwrap());
    }

    #[test]
    fn merge_combines_branchings() {
        let g = p("a -> b : { x(). b -> c : { m(). end }, y(). b -> c : { n(). end } }");
        let t = project_role(&g, &role("c")).unwrap();
        assert_eq!(t.canonical(), parse_local("b & { m(). end, n(). end }").unwrap().canonical());
        assert!(well_formed(&g).is_ok());
    }

    #[test]
    fn merge_rejects_distinct_selections() {
        let g = p("a -> b : { x(). c -> b : { m(). end }, y(). c -> b : { n(). end } }");
        assert!(project_role(&g, &role("c")).is_err());
        assert!(well_formed(&g).is_err());
    }

    #[test]
    fn merge_laws() {
        let t = parse_local("q & { a(). end }").unwrap();
        let u = parse_local("q & { b(int). end }").unwrap();
        assert_eq!(merge(&t, &t).unwrap(), t);
        let tu = merge(&t, &u).unwrap();
        let ut = merge(&u, &t).unwrap();
        assert_eq!(tu.canonical(), ut.canonical());
        assert!(merge(&t, &LocalType::End).is_err());
        assert!(merge(&parse_local("q & { a(int). end }").unwrap(), &t).is_err());
    }

    #[test]
    fn recursion_without_the_role_collapses() {
        let g = p("rec t . a -> b : { x(). t }");
        assert_eq!(project_role(&g, &role("c")).unwrap(), LocalType::End);
        assert!(matches!(project_role(&g, &role("a")).unwrap(), LocalType::Rec { .. }));
    }

    #[test]
    fn singleton_domain_is_a_plain_select() {
        let g = p("exists { a -> c : x(). end }");
        assert_eq!(project_role(&g, &role("a")).unwrap(), parse_local("c + { x(). end }").unwrap());
        assert!(proper_domains(&g).is_empty());
    }

    #[test]
    fn confinement_violations() {
        let escape = p("exists { a -> c : x(). end, b -> c : y(). end }");
        assert!(well_formed(&escape).is_ok());
        let g = p("a -> c : z(). exists { a -> c : x(). end, b -> c : y(). end }");
        assert!(matches!(well_formed(&g).unwrap_err()[0], WellFormedError::Escape { .. }));
        let g = p("exists { a -> c : x(). b -> c : w(). end, b -> c : y(). end }");
        assert!(well_formed(&g).is_err());
        let g = p("exists { a -> c : x(). end, b -> c : y(). exists { b -> c : y(). end, d -> c : z(). end } }");
        assert!(well_formed(&g).is_err());
    }

    #[test]
    fn inner_binder_keeps_the_outer_loop() {
        let g = crate::parse_global("r1 -> r3 : { l1(). rec t1 . r1 -> r3 : { l2(). rec t2 . r1 -> r2 : { l3(str). t1 } } }").unwrap();
        let r3 = project_role(&g, &Role::new("r3")).unwrap();
        assert_eq!(r3.to_string(), "r1 & { l1(). rec t1 . r1 & { l2(). t1 } }");
    }
}
