//! Printing in the concrete syntax accepted by [`crate::parser`].

use std::fmt::{self, Display, Formatter, Write};

use crate::calculus::{Channel, Literal, Payload, Process};
use crate::types::{GlobalType, LocalType, TypeExpr};

impl Display for TypeExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Basic(s) => f.write_str(s.keyword()),
            TypeExpr::Global(g) => write!(f, "<{g}>"),
            TypeExpr::Local(t) => write!(f, "{t}"),
        }
    }
}

fn payload_ty(t: &TypeExpr) -> String {
    if *t == TypeExpr::UNIT {
        String::new()
    } else {
        t.to_string()
    }
}

impl Display for GlobalType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            GlobalType::Comm { sender, receiver, branches } => {
                write!(f, "{sender} -> {receiver} : {{ ")?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}({}). {}", b.label, payload_ty(&b.payload), b.cont)?;
                }
                f.write_str(" }")
            }
            GlobalType::Exist { receiver, rows } => {
                f.write_str("exists { ")?;
                for (i, r) in rows.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{} -> {receiver} : {}({}). {}", r.sender, r.label, payload_ty(&r.payload), r.cont)?;
                }
                f.write_str(" }")
            }
            GlobalType::Rec { var, body } => write!(f, "rec {var} . {body}"),
            GlobalType::Var(t) => f.write_str(t),
            GlobalType::End => f.write_str("end"),
        }
    }
}

impl Display for LocalType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            LocalType::Select { partner, branches } | LocalType::Branch { partner, branches } => {
                let op = if matches!(self, LocalType::Select { .. }) { '+' } else { '&' };
                write!(f, "{partner} {op} {{ ")?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}({}). {}", b.label, payload_ty(&b.payload), b.cont)?;
                }
                f.write_str(" }")
            }
            LocalType::Exist { rows } => {
                f.write_str("exists& { ")?;
                for (i, r) in rows.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{} & {}({}). {}", r.role, r.label, payload_ty(&r.payload), r.cont)?;
                }
                f.write_str(" }")
            }
            LocalType::DomainSelect { partner, rows } => {
                write!(f, "exists+ {partner} {{ ")?;
                for (i, r) in rows.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{} : {}({}). {}", r.role, r.label, payload_ty(&r.payload), r.cont)?;
                }
                f.write_str(" }")
            }
            LocalType::Rec { var, body } => write!(f, "rec {var} . {body}"),
            LocalType::Var(t) => f.write_str(t),
            LocalType::End => f.write_str("end"),
        }
    }
}

impl Display for Channel {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Var(x) => f.write_str(x),
            Channel::Session { session, role } => write!(f, "{session}[{role}]"),
        }
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(n) => write!(f, "{n}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Real(s) => f.write_str(s),
            Literal::Str(s) => {
                f.write_char('"')?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_char('"')
            }
            Literal::Unit => f.write_str("()"),
        }
    }
}

impl Display for Payload {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Lit(l) => write!(f, "{l}"),
            Payload::Chan(c) => write!(f, "{c}"),
        }
    }
}

fn binder(var: &str) -> &str {
    if var == "_" {
        ""
    } else {
        var
    }
}

/// Print in a position where only a prefix-level term may appear.
struct Unary<'a>(&'a Process);

impl Display for Unary<'_> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self.0 {
            Process::Par(_) | Process::Def { .. } => write!(f, "({})", self.0),
            p => write!(f, "{p}"),
        }
    }
}

impl Display for Process {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Process::Nil => f.write_str("0"),
            Process::New { session, protocol, body } => match protocol {
                Some(g) => write!(f, "new {session} : {g} . {}", Unary(body)),
                None => write!(f, "new {session} . {}", Unary(body)),
            },
            Process::Par(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "{}", Unary(p))?;
                }
                Ok(())
            }
            Process::Select { subject, partner, label, payload, cont } => {
                let arg = if *payload == Payload::UNIT { String::new() } else { payload.to_string() };
                write!(f, "{subject}[{partner}] + {label}({arg}). {}", Unary(cont))
            }
            Process::Branch { subject, partner, arms } => {
                write!(f, "{subject}[{partner}] & {{ ")?;
                for (i, a) in arms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}({}). {}", a.label, binder(&a.var), Unary(&a.cont))?;
                }
                f.write_str(" }")
            }
            Process::Exist { subject, arms } => {
                f.write_str("exists& { ")?;
                for (i, a) in arms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{subject}[{}] & {}({}). {}", a.partner, a.label, binder(&a.var), Unary(&a.cont))?;
                }
                f.write_str(" }")
            }
            Process::Def { defs, scope } => {
                f.write_str("def ")?;
                for (i, d) in defs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    write!(f, "{}(", d.name)?;
                    for (j, p) in d.params.iter().enumerate() {
                        if j > 0 {
                            f.write_str(", ")?;
                        }
                        match &p.ty {
                            Some(t) => write!(f, "{} : {t}", p.name)?,
                            None => f.write_str(&p.name)?,
                        }
                    }
                    write!(f, ") = {}", d.body)?;
                }
                write!(f, " in {scope}")
            }
            Process::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Multi-line rendering of a process, one parallel component or definition
/// per line. Parses back to the same term.
pub fn process_multiline(p: &Process) -> String {
    fn go(p: &Process, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match p {
            Process::Par(ps) => {
                for (i, q) in ps.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(if i == 0 { "( " } else { "| " });
                    match q {
                        Process::Def { .. } | Process::Par(_) => {
                            out.push_str("(\n");
                            go(q, indent + 2, out);
                            out.push_str(&pad);
                            out.push_str("  )\n");
                        }
                        _ => {
                            out.push_str(&Unary(q).to_string());
                            out.push('\n');
                        }
                    }
                }
                out.push_str(&pad);
                out.push_str(")\n");
            }
            Process::New { session, protocol, body } => {
                out.push_str(&pad);
                match protocol {
                    Some(g) => out.push_str(&format!("new {session} : {g} .\n")),
                    None => out.push_str(&format!("new {session} .\n")),
                }
                match **body {
                    Process::Def { .. } => {
                        out.push_str(&pad);
                        out.push_str("(\n");
                        go(body, indent + 1, out);
                        out.push_str(&pad);
                        out.push_str(")\n");
                    }
                    _ => go(body, indent, out),
                }
            }
            Process::Def { defs, scope } => {
                for (i, d) in defs.iter().enumerate() {
                    let head = Process::Def { defs: vec![d.clone()], scope: Box::new(Process::Nil) }.to_string();
                    let head = head.strip_suffix(" in 0").unwrap_or(&head).to_string();
                    let head = if i == 0 { head } else { head.replacen("def ", "and ", 1) };
                    out.push_str(&pad);
                    out.push_str(&head);
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push_str("in\n");
                go(scope, indent, out);
            }
            _ => {
                out.push_str(&pad);
                out.push_str(&p.to_string());
                out.push('\n');
            }
        }
    }
    let mut out = String::new();
    go(p, 0, &mut out);
    out
}
