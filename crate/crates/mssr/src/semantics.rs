//! Labelled transitions of global types and typing contexts, and the
//! consistency check between the two.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::calculus::Role;
use crate::projection::{project, project_role, proper_domains, roles, ProjectionError};
use crate::types::{DomainSet, GBranch, GRow, GlobalType, LocalType, TypeExpr};

/// Key of a typing-context entry.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelKey {
    /// A channel variable bound by a receive or a parameter.
    Var(String),
    /// `s[p]`.
    Role { session: String, role: Role },
    /// `s[A]`, the shared entry of a domain set.
    Domain { session: String, roles: DomainSet },
}

impl ChannelKey {
    pub fn role(session: &str, role: &Role) -> ChannelKey {
        ChannelKey::Role { session: session.to_string(), role: role.clone() }
    }

    pub fn session(&self) -> Option<&str> {
        match self {
            ChannelKey::Var(_) => None,
            ChannelKey::Role { session, .. } | ChannelKey::Domain { session, .. } => Some(session),
        }
    }
}

impl fmt::Display for ChannelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKey::Var(x) => f.write_str(x),
            ChannelKey::Role { session, role } => write!(f, "{session}[{role}]"),
            ChannelKey::Domain { session, roles } => write!(f, "{session}[{roles}]"),
        }
    }
}

/// A typing context Γ.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelContext {
    pub entries: BTreeMap<ChannelKey, LocalType>,
}

impl ChannelContext {
    pub fn new() -> ChannelContext {
        ChannelContext::default()
    }

    pub fn get(&self, k: &ChannelKey) -> Option<&LocalType> {
        self.entries.get(k)
    }

    pub fn insert(&mut self, k: ChannelKey, t: LocalType) -> Option<LocalType> {
        self.entries.insert(k, t)
    }

    pub fn remove(&mut self, k: &ChannelKey) -> Option<LocalType> {
        self.entries.remove(k)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every entry is (an unfolding of) `end`.
    pub fn all_end(&self) -> bool {
        self.entries.values().all(LocalType::is_end)
    }

    pub fn canonical(&self) -> ChannelContext {
        ChannelContext { entries: self.entries.iter().map(|(k, t)| (k.clone(), t.canonical())).collect() }
    }

    /// Domain entries of `session` that include `role`.
    pub fn domains_of(&self, session: &str, role: &Role) -> Vec<ChannelKey> {
        self.entries.keys().filter(|k| matches!(k, ChannelKey::Domain { session: s, roles } if s == session && roles.contains(role))).cloned().collect()
    }

    /// After a domain member has finished its row, the protocol may come
    /// back to an existential interaction over the same domain (through
    /// recursion). Such an entry is handed back to the domain key so that
    /// any member may answer the next round.
    pub fn release(&mut self) {
        let keys: Vec<ChannelKey> = self.entries.keys().cloned().collect();
        for k in keys {
            let ChannelKey::Role { session, role } = &k else { continue };
            let t = &self.entries[&k];
            let LocalType::DomainSelect { rows, .. } = t.unfold_head() else { continue };
            let senders = DomainSet::new(rows.iter().map(|r| r.role.clone()));
            if senders.len() < 2 || !senders.contains(role) {
                continue;
            }
            let dk = ChannelKey::Domain { session: session.clone(), roles: senders };
            if self.entries.contains_key(&dk) {
                continue;
            }
            let t = self.entries.insert(k.clone(), LocalType::End).unwrap();
            self.entries.insert(dk, t);
        }
    }
}

impl fmt::Display for ChannelContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, t)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {t}")?;
        }
        Ok(())
    }
}

/// The initial context of a session: every role and every proper domain
/// set gets its projection.
pub fn proj_context(g: &GlobalType, session: &str) -> Result<ChannelContext, ProjectionError> {
    let mut ctx = ChannelContext::new();
    for r in roles(g) {
        ctx.insert(ChannelKey::role(session, &r), project_role(g, &r)?);
    }
    for d in proper_domains(g) {
        let t = project(g, &d)?;
        ctx.insert(ChannelKey::Domain { session: session.to_string(), roles: d }, t);
    }
    Ok(ctx)
}

/// A synchronisation `sender -> receiver : label(payload)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommAction {
    pub sender: Role,
    pub receiver: Role,
    pub label: String,
    pub payload: TypeExpr,
}

impl fmt::Display for CommAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} : {}({})", self.sender, self.receiver, self.label, self.payload)
    }
}

/// Labels of context transitions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeAction {
    Output { session: String, from: Role, to: Role, label: String, payload: TypeExpr },
    Input { session: String, at: Role, from: Role, label: String, payload: TypeExpr },
    Comm { session: String, action: CommAction },
}

fn canon_action(mut a: CommAction) -> CommAction {
    a.payload = a.payload.canonical();
    a
}

/// Transitions of a global type. Interactions whose roles are disjoint from
/// the head may overtake it, provided every branch of the head offers them.
pub fn global_steps(g: &GlobalType) -> Vec<(CommAction, GlobalType)> {
    let mut stack = Vec::new();
    let mut out = steps_of(&g.canonical(), &mut stack);
    out.sort();
    out.dedup();
    out
}

fn steps_of(g: &GlobalType, stack: &mut Vec<GlobalType>) -> Vec<(CommAction, GlobalType)> {
    if stack.contains(g) {
        // Derivations are finite: a cycle through unfolding contributes nothing.
        return vec![];
    }
    stack.push(g.clone());
    let out = match g {
        GlobalType::End | GlobalType::Var(_) => vec![],
        GlobalType::Rec { .. } => steps_of(&g.unfold().canonical(), stack),
        GlobalType::Comm { sender, receiver, branches } => {
            let mut out: Vec<(CommAction, GlobalType)> = branches
                .iter()
                .map(|b| {
                    let a = CommAction { sender: sender.clone(), receiver: receiver.clone(), label: b.label.clone(), payload: b.payload.clone() };
                    (canon_action(a), b.cont.canonical())
                })
                .collect();
            let busy = [sender.clone(), receiver.clone()];
            let per_branch: Vec<_> = branches.iter().map(|b| steps_of(&b.cont.canonical(), stack)).collect();
            for (a, residues) in overtaking(&busy, &per_branch) {
                for conts in residues {
                    let branches = branches.iter().zip(conts).map(|(b, cont)| GBranch { label: b.label.clone(), payload: b.payload.clone(), cont }).collect();
                    out.push((a.clone(), GlobalType::Comm { sender: sender.clone(), receiver: receiver.clone(), branches }.canonical()));
                }
            }
            out
        }
        GlobalType::Exist { receiver, rows } => {
            let mut out: Vec<(CommAction, GlobalType)> = rows
                .iter()
                .map(|r| {
                    let a = CommAction { sender: r.sender.clone(), receiver: receiver.clone(), label: r.label.clone(), payload: r.payload.clone() };
                    (canon_action(a), r.cont.canonical())
                })
                .collect();
            let mut busy = vec![receiver.clone()];
            busy.extend(rows.iter().map(|r| r.sender.clone()));
            let per_row: Vec<_> = rows.iter().map(|r| steps_of(&r.cont.canonical(), stack)).collect();
            for (a, residues) in overtaking(&busy, &per_row) {
                for conts in residues {
                    let rows = rows
                        .iter()
                        .zip(conts)
                        .map(|(r, cont)| GRow { sender: r.sender.clone(), label: r.label.clone(), payload: r.payload.clone(), cont })
                        .collect();
                    out.push((a.clone(), GlobalType::Exist { receiver: receiver.clone(), rows }.canonical()));
                }
            }
            out
        }
    };
    stack.pop();
    out
}

/// Actions offered by every continuation and not involving `busy`, with
/// every combination of per-continuation residues.
fn overtaking(busy: &[Role], per_cont: &[Vec<(CommAction, GlobalType)>]) -> Vec<(CommAction, Vec<Vec<GlobalType>>)> {
    let Some(first) = per_cont.first() else { return vec![] };
    let candidates: BTreeSet<&CommAction> = first.iter().map(|(a, _)| a).filter(|a| !busy.contains(&a.sender) && !busy.contains(&a.receiver)).collect();
    let mut out = Vec::new();
    for a in candidates {
        let options: Vec<Vec<GlobalType>> = per_cont.iter().map(|steps| steps.iter().filter(|(b, _)| b == a).map(|(_, g)| g.clone()).collect()).collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        let mut combos: Vec<Vec<GlobalType>> = vec![vec![]];
        for opts in &options {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    opts.iter().map(move |o| {
                        let mut c = c.clone();
                        c.push(o.clone());
                        c
                    })
                })
                .collect();
        }
        out.push((a.clone(), combos));
    }
    out
}

/// Entries rewritten by an output; `None` removes the key.
type Update = Vec<(ChannelKey, Option<LocalType>)>;

struct Single {
    session: String,
    key: ChannelKey,
    /// Sending role and the context update it causes.
    output: Option<(Role, Role, String, TypeExpr, Update)>,
    inputs: Vec<(Role, Role, String, TypeExpr, LocalType)>,
}

fn singles(ctx: &ChannelContext) -> Vec<Single> {
    let mut out = Vec::new();
    for (k, t) in &ctx.entries {
        match k {
            ChannelKey::Var(_) => {}
            ChannelKey::Role { session, role } => match t.unfold_head() {
                LocalType::Select { partner, branches } => {
                    for b in branches {
                        out.push(Single {
                            session: session.clone(),
                            key: k.clone(),
                            output: Some((role.clone(), partner.clone(), b.label.clone(), b.payload.clone(), vec![(k.clone(), Some(b.cont.clone()))])),
                            inputs: vec![],
                        });
                    }
                }
                LocalType::Branch { partner, branches } => {
                    let inputs = branches.iter().map(|b| (role.clone(), partner.clone(), b.label.clone(), b.payload.clone(), b.cont.clone())).collect();
                    out.push(Single { session: session.clone(), key: k.clone(), output: None, inputs });
                }
                LocalType::Exist { rows } => {
                    let inputs = rows.iter().map(|r| (role.clone(), r.role.clone(), r.label.clone(), r.payload.clone(), r.cont.clone())).collect();
                    out.push(Single { session: session.clone(), key: k.clone(), output: None, inputs });
                }
                _ => {}
            },
            ChannelKey::Domain { session, .. } => {
                if let LocalType::DomainSelect { partner, rows } = t.unfold_head() {
                    for r in rows {
                        let own = ChannelKey::role(session, &r.role);
                        if ctx.get(&own).is_some_and(|t| !t.is_end()) {
                            continue;
                        }
                        out.push(Single {
                            session: session.clone(),
                            key: k.clone(),
                            output: Some((
                                r.role.clone(),
                                partner.clone(),
                                r.label.clone(),
                                r.payload.clone(),
                                vec![(k.clone(), None), (own, Some(r.cont.clone()))],
                            )),
                            inputs: vec![],
                        });
                    }
                }
            }
        }
    }
    out
}

/// Single-entry transitions (outputs and inputs) of a context.
pub fn context_actions(ctx: &ChannelContext) -> Vec<TypeAction> {
    let mut out = Vec::new();
    for s in singles(ctx) {
        if let Some((from, to, label, payload, _)) = &s.output {
            out.push(TypeAction::Output { session: s.session.clone(), from: from.clone(), to: to.clone(), label: label.clone(), payload: payload.clone() });
        }
        for (at, from, label, payload, _) in &s.inputs {
            out.push(TypeAction::Input { session: s.session.clone(), at: at.clone(), from: from.clone(), label: label.clone(), payload: payload.clone() });
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Synchronisations of a context: an output meets the matching input of
/// its partner in the same session.
pub fn context_steps(ctx: &ChannelContext) -> Vec<(TypeAction, ChannelContext)> {
    let ss = singles(ctx);
    let mut out = Vec::new();
    for o in &ss {
        let Some((from, to, label, payload, updates)) = &o.output else { continue };
        for i in &ss {
            if i.session != o.session || i.key == o.key {
                continue;
            }
            for (at, src, l, p, cont) in &i.inputs {
                if at != to || src != from || l != label || !p.equiv(payload) {
                    continue;
                }
                let mut next = ctx.clone();
                for (k, t) in updates {
                    match t {
                        Some(t) => next.insert(k.clone(), t.clone()),
                        None => next.remove(k),
                    };
                }
                next.insert(i.key.clone(), cont.clone());
                next.release();
                let action = canon_action(CommAction { sender: from.clone(), receiver: to.clone(), label: label.clone(), payload: payload.clone() });
                out.push((TypeAction::Comm { session: o.session.clone(), action }, next.canonical()));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    /// Shortest sequence of synchronisations leading to a disagreement.
    pub trace: Vec<String>,
    pub reason: Option<String>,
    pub states: usize,
    /// The search stopped at its state bound before covering everything.
    pub truncated: bool,
}

/// Decide whether `g` and `ctx` (restricted to `session`) simulate each
/// other step for step.
pub fn check_consistency(g: &GlobalType, ctx: &ChannelContext, session: &str) -> ConsistencyReport {
    check_consistency_bounded(g, ctx, session, 200_000)
}

/// Overtaking under recursion can make the global side infinite (an
/// independent loop runs arbitrarily far ahead). Global states larger than
/// this multiple of the start are not expanded and the report is marked
/// truncated.
pub const GROWTH_FACTOR: usize = 16;

pub fn check_consistency_bounded(g: &GlobalType, ctx: &ChannelContext, session: &str, max_states: usize) -> ConsistencyReport {
    type Node = (GlobalType, ChannelContext);
    let start: Node = (commute_normal(&g.canonical()), ctx.canonical());
    let cap = GROWTH_FACTOR * start.0.size().max(2);
    let mut truncated = false;
    let mut parent: BTreeMap<Node, Option<(Node, CommAction)>> = BTreeMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let trace_to = |parent: &BTreeMap<Node, Option<(Node, CommAction)>>, mut n: Node| {
        let mut out = Vec::new();
        while let Some(Some((p, a))) = parent.get(&n) {
            out.push(a.to_string());
            n = p.clone();
        }
        out.reverse();
        out
    };
    while let Some(node) = queue.pop_front() {
        let (gt, cx) = &node;
        let gsteps = global_steps(gt);
        let csteps: Vec<(CommAction, ChannelContext)> = context_steps(cx)
            .into_iter()
            .filter_map(|(a, c)| match a {
                TypeAction::Comm { session: s, action } if s == session => Some((action, c)),
                _ => None,
            })
            .collect();
        let gacts: BTreeSet<&CommAction> = gsteps.iter().map(|(a, _)| a).collect();
        let cacts: BTreeSet<&CommAction> = csteps.iter().map(|(a, _)| a).collect();
        if gacts != cacts {
            let reason = match (gacts.difference(&cacts).next(), cacts.difference(&gacts).next()) {
                (Some(a), _) => format!("global type can do `{a}` but the context cannot"),
                (None, Some(a)) => format!("context can do `{a}` but the global type cannot"),
                _ => unreachable!(),
            };
            return ConsistencyReport {
                consistent: false,
                trace: trace_to(&parent, node.clone()),
                reason: Some(reason),
                states: parent.len(),
                truncated: false,
            };
        }
        for (a, g2) in &gsteps {
            for (b, c2) in &csteps {
                if a != b {
                    continue;
                }
                let next = (commute_normal(g2), c2.clone());
                if parent.contains_key(&next) {
                    continue;
                }
                if parent.len() >= max_states {
                    return ConsistencyReport { consistent: true, trace: vec![], reason: None, states: parent.len(), truncated: true };
                }
                if next.0.size() > cap {
                    truncated = true;
                    continue;
                }
                parent.insert(next.clone(), Some((node.clone(), a.clone())));
                queue.push_back(next);
            }
        }
    }
    ConsistencyReport { consistent: true, trace: vec![], reason: None, states: parent.len(), truncated }
}

/// Reorder adjacent single-branch interactions with disjoint roles into a
/// fixed order. `p->q:l. r->s:m. G` and `r->s:m. p->q:l. G` have the same
/// transitions once overtaking is allowed, so this only merges states that
/// differ in the interleaving of independent prefixes.
pub fn commute_normal(g: &GlobalType) -> GlobalType {
    match g {
        GlobalType::Comm { sender, receiver, branches } if branches.len() == 1 => {
            let b = &branches[0];
            let cont = commute_normal(&b.cont);
            sift(sender, receiver, &b.label, &b.payload, cont)
        }
        GlobalType::Comm { sender, receiver, branches } => GlobalType::Comm {
            sender: sender.clone(),
            receiver: receiver.clone(),
            branches: branches.iter().map(|b| GBranch { cont: commute_normal(&b.cont), ..b.clone() }).collect(),
        },
        GlobalType::Exist { receiver, rows } => {
            GlobalType::Exist { receiver: receiver.clone(), rows: rows.iter().map(|r| GRow { cont: commute_normal(&r.cont), ..r.clone() }).collect() }
        }
        GlobalType::Rec { var, body } => GlobalType::Rec { var: var.clone(), body: Box::new(commute_normal(body)) },
        GlobalType::Var(_) | GlobalType::End => g.clone(),
    }
}

fn sift(sender: &Role, receiver: &Role, label: &str, payload: &TypeExpr, cont: GlobalType) -> GlobalType {
    let key = (sender, receiver, label, payload);
    if let GlobalType::Comm { sender: s2, receiver: r2, branches } = &cont {
        if let [b] = branches.as_slice() {
            let disjoint = ![s2, r2].iter().any(|x| *x == sender || *x == receiver);
            if disjoint && (s2, r2, b.label.as_str(), &b.payload) < key {
                let inner = sift(sender, receiver, label, payload, b.cont.clone());
                return GlobalType::Comm {
                    sender: s2.clone(),
                    receiver: r2.clone(),
                    branches: vec![GBranch { label: b.label.clone(), payload: b.payload.clone(), cont: inner }],
                };
            }
        }
    }
    GlobalType::Comm {
        sender: sender.clone(),
        receiver: receiver.clone(),
        branches: vec![GBranch { label: label.to_string(), payload: payload.clone(), cont }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_global;

    fn g(s: &str) -> GlobalType {
        parse_global(s).unwrap()
    }

    #[test]
    fn head_and_overtaking_steps() {
        let steps = global_steps(&g("a -> b : { x(). c -> d : { y(). end } }"));
        assert_eq!(steps.len(), 2);
        let steps = global_steps(&g("a -> b : { x(). c -> d : { y(). end }, z(). c -> d : { y(). end } }"));
        // two head branches plus c -> d overtaking
        assert_eq!(steps.len(), 3);
        let steps = global_steps(&g("a -> b : { x(). b -> c : { y(). end } }"));
        assert_eq!(steps.len(), 1);
    }

    #[test]
    fn recursive_steps_terminate() {
        let steps = global_steps(&g("rec t . a -> b : { x(). t }"));
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].1, g("rec t . a -> b : { x(). t }").canonical());
    }

    #[test]
    fn domain_entry_is_claimed_by_one_member() {
        let gt = g("exists { a -> c : x(). c -> a : { ok(). end }, b -> c : y(). end }");
        let ctx = proj_context(&gt, "s").unwrap();
        assert!(ctx.entries.contains_key(&ChannelKey::Domain { session: "s".into(), roles: DomainSet::new([Role::new("a"), Role::new("b")]) }));
        let steps = context_steps(&ctx);
        assert_eq!(steps.len(), 2);
        for (_, next) in &steps {
            assert!(!next.entries.keys().any(|k| matches!(k, ChannelKey::Domain { .. })));
        }
    }

    #[test]
    fn consistency_of_projection() {
        for src in [
            "a -> b : { x(). c -> d : { y(). end }, z(). c -> d : { y(). end } }",
            "rec t . exists { a -> c : x(). c -> a : { ok(). t }, b -> c : y(). t }",
            "a -> b : { x(int). b -> c : { y(). end, z(). end } }",
        ] {
            let gt = g(src);
            let ctx = proj_context(&gt, "s").unwrap();
            let rep = check_consistency(&gt, &ctx, "s");
            assert!(rep.consistent, "{src}: {:?}", rep);
        }
    }

    #[test]
    fn inconsistency_is_reported_with_a_trace() {
        let gt = g("a -> b : { x(). b -> a : { y(). end } }");
        let mut ctx = proj_context(&gt, "s").unwrap();
        ctx.insert(ChannelKey::role("s", &Role::new("a")), crate::parser::parse_local("b + { x(). b & { z(). end } }").unwrap());
        let rep = check_consistency(&gt, &ctx, "s");
        assert!(!rep.consistent);
        assert_eq!(rep.trace, vec!["a -> b : x(unit)".to_string()]);
    }

    #[test]
    fn independent_prefixes_commute() {
        let a = commute_normal(&g("c -> d : y(). a -> b : x(). end").canonical());
        let b = commute_normal(&g("a -> b : x(). c -> d : y(). end").canonical());
        assert_eq!(a, b);
        let dep = g("b -> c : y(). a -> b : x(). end").canonical();
        assert_eq!(commute_normal(&dep), dep);
        let acts = |t: &GlobalType| global_steps(t).into_iter().map(|(a, _)| a).collect::<Vec<_>>();
        assert_eq!(acts(&a), acts(&g("c -> d : y(). a -> b : x(). end")));
    }

    #[test]
    fn runaway_loops_stop_at_the_growth_cap() {
        let gt = g("rec t . a -> b : { x(). c -> d : { y(str). t } }");
        let ctx = proj_context(&gt, "s").unwrap();
        let rep = check_consistency(&gt, &ctx, "s");
        assert!(rep.consistent && rep.truncated);
        assert!(rep.states < 1000, "{}", rep.states);
    }
}
