//! Random well-formed global types and processes synthesised from their
//! projections, for fuzzing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::calculus::{Arm, Channel, DefDecl, ExistArm, Literal, Param, Payload, Process, Role};
use crate::projection::{project, project_role, proper_domains, roles, well_formed};
use crate::types::{GBranch, GRow, GlobalType, LocalType, Sort, TypeExpr};

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub roles: usize,
    pub exists: usize,
    pub depth: usize,
    pub recs: usize,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits { roles: 4, exists: 1, depth: 4, recs: 2 }
    }
}

const SORTS: [Sort; 4] = [Sort::Int, Sort::Bool, Sort::Str, Sort::Unit];

struct Draft<'a, R> {
    rng: &'a mut R,
    /// Roles free to interact here; domain members only join inside their
    /// own row.
    pool: Vec<Role>,
    domain: Vec<Role>,
    limits: Limits,
    exists: usize,
    recs: usize,
    labels: usize,
}

impl<R: Rng> Draft<'_, R> {
    fn label(&mut self) -> String {
        self.labels += 1;
        format!("l{}", self.labels)
    }

    fn pair(&mut self) -> Option<(Role, Role)> {
        let mut two: Vec<Role> = self.pool.choose_multiple(self.rng, 2).cloned().collect();
        let b = two.pop()?;
        Some((two.pop()?, b))
    }

    /// `vars` holds the recursion variables in scope; `guarded` says whether
    /// an interaction separates us from the innermost binder.
    fn global(&mut self, depth: usize, vars: &[String], guarded: bool) -> GlobalType {
        let stop = depth == 0 || (guarded && self.rng.gen_bool(0.2));
        if stop {
            return if guarded && !vars.is_empty() && self.rng.gen_bool(0.6) {
                GlobalType::Var(vars.choose(self.rng).unwrap().clone())
            } else {
                GlobalType::End
            };
        }
        let roll = self.rng.gen_range(0..10);
        if roll < 2 && self.recs < self.limits.recs {
            self.recs += 1;
            let var = format!("t{}", self.recs);
            let mut inner = vars.to_vec();
            inner.push(var.clone());
            let body = self.global(depth, &inner, false);
            return GlobalType::Rec { var, body: Box::new(body) };
        }
        let pair = self.pair();
        if (roll < 6 || pair.is_none()) && self.exists < self.limits.exists && !self.domain.is_empty() {
            self.exists += 1;
            let receiver = self.pool.choose(self.rng).unwrap().clone();
            let senders = self.domain.clone();
            let outer = self.pool.clone();
            let mut rows = Vec::new();
            for sender in senders {
                self.pool = outer.iter().cloned().chain([sender.clone()]).collect();
                let label = self.label();
                let payload = TypeExpr::Basic(*SORTS.choose(self.rng).unwrap());
                let cont = self.global(depth - 1, vars, true);
                rows.push(GRow { sender, label, payload, cont });
            }
            self.pool = outer;
            return GlobalType::Exist { receiver, rows };
        }
        let Some((sender, receiver)) = pair else {
            return if guarded && !vars.is_empty() { GlobalType::Var(vars[vars.len() - 1].clone()) } else { GlobalType::End };
        };
        let n = if self.rng.gen_bool(0.35) { 2 } else { 1 };
        let branches = (0..n)
            .map(|_| GBranch { label: self.label(), payload: TypeExpr::Basic(*SORTS.choose(self.rng).unwrap()), cont: self.global(depth - 1, vars, true) })
            .collect();
        GlobalType::Comm { sender, receiver, branches }
    }
}

/// Draw global types until one is well formed and has at least one
/// interaction; `None` after `tries` failures.
pub fn global_type<R: Rng>(rng: &mut R, limits: Limits, tries: usize) -> Option<GlobalType> {
    for _ in 0..tries {
        let n = rng.gen_range(2..=limits.roles.max(2));
        let mut names: Vec<Role> = (1..=n).map(|i| Role::new(format!("r{i}"))).collect();
        let mut domain = Vec::new();
        if limits.exists > 0 && n >= 3 && rng.gen_bool(0.6) {
            let k = rng.gen_range(2..n);
            names.shuffle(rng);
            domain = names.split_off(n - k);
        }
        let mut d = Draft { rng: &mut *rng, pool: names, domain, limits, exists: 0, recs: 0, labels: 0 };
        let g = d.global(limits.depth, &[], false);
        if !roles(&g).is_empty() && well_formed(&g).is_ok() {
            return Some(g);
        }
    }
    None
}

/// A process with one component per role (or per domain set) implementing
/// the projections of `g`, under `new s : name`. Selections and domain
/// claims are chosen at random; every branch is implemented.
pub fn process_for<R: Rng>(rng: &mut R, g: &GlobalType, name: &str) -> Option<Process> {
    let comps = components(rng, g, "s")?;
    Some(Process::New { session: "s".into(), protocol: Some(name.into()), body: Box::new(Process::Par(comps)) })
}

/// Two sessions `s : n1` and `t : n2` whose components are glued pairwise:
/// when one of two components is finite, the other runs after it. Such processes still typecheck but may deadlock
/// across sessions.
pub fn process_pair<R: Rng>(rng: &mut R, g1: &GlobalType, n1: &str, g2: &GlobalType, n2: &str) -> Option<Process> {
    let first = components(rng, g1, "s")?;
    let mut second = components(rng, g2, "t")?;
    second.shuffle(rng);
    let mut comps = Vec::new();
    for p in first {
        if !second.is_empty() && rng.gen_bool(0.8) {
            let q = second.pop().unwrap();
            match (is_finite(&p), is_finite(&q)) {
                (true, true) if rng.gen_bool(0.5) => comps.push(then(&q, &p)),
                (true, _) => comps.push(then(&p, &q)),
                (false, true) => comps.push(then(&q, &p)),
                (false, false) => comps.extend([p, q]),
            }
        } else {
            comps.push(p);
        }
    }
    comps.extend(second);
    comps.shuffle(rng);
    let body = Process::New { session: "t".into(), protocol: Some(n2.into()), body: Box::new(Process::Par(comps)) };
    Some(Process::New { session: "s".into(), protocol: Some(n1.into()), body: Box::new(body) })
}

fn components<R: Rng>(rng: &mut R, g: &GlobalType, session: &str) -> Option<Vec<Process>> {
    let domains = proper_domains(g);
    let mut comps = Vec::new();
    for r in roles(g) {
        if domains.iter().any(|d| d.contains(&r)) {
            continue;
        }
        let t = project_role(g, &r).ok()?;
        comps.push(Synth { rng: &mut *rng, fresh: 0, claimant: None }.local(&t, &Channel::endpoint(session, r.clone()), &[]));
    }
    for d in &domains {
        let members: Vec<Role> = d.roles().iter().cloned().collect();
        let who = members.choose(rng).unwrap().clone();
        let t = project(g, d).ok()?;
        let mut s = Synth { rng: &mut *rng, fresh: 0, claimant: Some(who.clone()) };
        comps.push(s.local(&t, &Channel::endpoint(session, who), &[]));
    }
    Some(comps)
}

fn is_finite(p: &Process) -> bool {
    match p {
        Process::Nil => true,
        Process::Select { cont, .. } => is_finite(cont),
        Process::Branch { arms, .. } => arms.iter().all(|a| is_finite(&a.cont)),
        Process::Exist { arms, .. } => arms.iter().all(|a| is_finite(&a.cont)),
        _ => false,
    }
}

/// `p` with every `0` replaced by `q`; `p` must be finite.
fn then(p: &Process, q: &Process) -> Process {
    match p {
        Process::Nil => q.clone(),
        Process::Select { subject, partner, label, payload, cont } => Process::Select {
            subject: subject.clone(),
            partner: partner.clone(),
            label: label.clone(),
            payload: payload.clone(),
            cont: Box::new(then(cont, q)),
        },
        Process::Branch { subject, partner, arms } => Process::Branch {
            subject: subject.clone(),
            partner: partner.clone(),
            arms: arms.iter().map(|a| Arm { cont: then(&a.cont, q), ..a.clone() }).collect(),
        },
        Process::Exist { subject, arms } => {
            Process::Exist { subject: subject.clone(), arms: arms.iter().map(|a| ExistArm { cont: then(&a.cont, q), ..a.clone() }).collect() }
        }
        other => other.clone(),
    }
}

struct Synth<'a, R> {
    rng: &'a mut R,
    fresh: usize,
    claimant: Option<Role>,
}

impl<R: Rng> Synth<'_, R> {
    fn var(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    /// Implement `t` on channel `c`. `recs` maps recursion variables to the
    /// definitions standing for them and to their closed types.
    fn local(&mut self, t: &LocalType, c: &Channel, recs: &[(String, String, LocalType)]) -> Process {
        match t {
            LocalType::End => Process::Nil,
            LocalType::Var(v) => {
                let name = recs.iter().rev().find(|(x, ..)| x == v).map(|(_, d, _)| d.clone()).unwrap_or_else(|| v.clone());
                Process::Call { name, args: vec![Payload::Chan(c.clone())] }
            }
            LocalType::Rec { var, body } => {
                self.fresh += 1;
                let def = format!("X{}", self.fresh);
                let x = format!("c{}", self.fresh);
                // parameter types must be closed
                let closed = recs.iter().rev().fold(t.clone(), |acc, (y, _, ty)| acc.subst(y, ty));
                let mut inner = recs.to_vec();
                inner.push((var.clone(), def.clone(), closed.clone()));
                let body = self.local(body, &Channel::var(x.clone()), &inner);
                Process::Def {
                    defs: vec![DefDecl { name: def.clone(), params: vec![Param { name: x, ty: Some(TypeExpr::Local(Box::new(closed))) }], body }],
                    scope: Box::new(Process::Call { name: def, args: vec![Payload::Chan(c.clone())] }),
                }
            }
            LocalType::Select { partner, branches } => {
                let b = branches.choose(self.rng).unwrap();
                let cont = self.local(&b.cont, c, recs);
                Process::Select { subject: c.clone(), partner: partner.clone(), label: b.label.clone(), payload: payload(&b.payload), cont: Box::new(cont) }
            }
            LocalType::DomainSelect { partner, rows } => {
                let who = self.claimant.clone();
                let row = rows.iter().find(|r| Some(&r.role) == who.as_ref()).unwrap_or(&rows[0]);
                let cont = self.local(&row.cont, c, recs);
                Process::Select { subject: c.clone(), partner: partner.clone(), label: row.label.clone(), payload: payload(&row.payload), cont: Box::new(cont) }
            }
            LocalType::Branch { partner, branches } => Process::Branch {
                subject: c.clone(),
                partner: partner.clone(),
                arms: branches.iter().map(|b| Arm { label: b.label.clone(), var: self.var(), cont: self.local(&b.cont, c, recs) }).collect(),
            },
            LocalType::Exist { rows } => Process::Exist {
                subject: c.clone(),
                arms: rows
                    .iter()
                    .map(|r| ExistArm { partner: r.role.clone(), label: r.label.clone(), var: self.var(), cont: self.local(&r.cont, c, recs) })
                    .collect(),
            },
        }
    }
}

fn payload(t: &TypeExpr) -> Payload {
    match t {
        TypeExpr::Basic(s) => Payload::Lit(Literal::default_of(*s)),
        _ => Payload::UNIT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{check_consistency, proj_context};
    use crate::typecheck::typecheck;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn generated_types_stay_within_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut typed = 0;
        let mut rejected = 0;
        for _ in 0..200 {
            let g = global_type(&mut rng, Limits::default(), 1000).unwrap();
            assert!(roles(&g).len() <= 4);
            assert!(g.depth() <= 4 + 2, "{g}");
            let ctx = proj_context(&g, "s").unwrap();
            let rep = check_consistency(&g, &ctx, "s");
            assert!(rep.consistent, "{g}: {:?}", rep.reason);
            let p = process_for(&mut rng, &g, "G").unwrap();
            let globals = BTreeMap::from([("G".to_string(), g.clone())]);
            match typecheck(&p, &globals) {
                Ok(_) => typed += 1,
                Err(e) => {
                    rejected += 1;
                    eprintln!("{g}\n{}\n{e}\n", crate::pretty::process_multiline(&p));
                }
            }
        }
        assert_eq!(rejected, 0, "{typed} typed");
    }
}
