//! Text syntax for global types, local types and processes.
//!
//! ```text
//! global G = r_b -> r_s : { purchase(unit) . r_s -> r_b : { price(int) . end } }
//! process P = new s : G . (s[r_s][r_b] & { purchase(x) . s[r_s][r_b] + price(100) . 0 }
//!                        | s[r_b][r_s] + purchase() . s[r_b][r_s] & { price(p) . 0 })
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::calculus::{Arm, Channel, DefDecl, ExistArm, Literal, Param, Payload, Process, Role};
use crate::types::{GBranch, GRow, GlobalType, LBranch, LRow, LocalType, Sort, TypeExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Real(String),
    Str(String),
    Arrow,
    Colon,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Dot,
    Plus,
    Amp,
    Bar,
    Eq,
    Lt,
    Gt,
    ExistsAmp,
    ExistsPlus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Real(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::ExistsAmp => f.write_str("`exists&`"),
            Tok::ExistsPlus => f.write_str("`exists+`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const KEYWORDS: &[&str] =
    &["global", "local", "process", "exists", "rec", "end", "new", "def", "and", "in", "int", "bool", "real", "str", "unit", "true", "false"];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

struct Lexed {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(src: &str) -> Result<Lexed, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |m: String, line, col| ParseError { message: m, line, col };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            if word == "exists" && i < chars.len() && (chars[i] == '&' || chars[i] == '+') {
                let t = if chars[i] == '&' { Tok::ExistsAmp } else { Tok::ExistsPlus };
                i += 1;
                col += 1;
                toks.push((t, l0, c0));
            } else {
                toks.push((Tok::Ident(word), l0, c0));
            }
            continue;
        }
        let negative_number = c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || negative_number {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut real = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            if real {
                toks.push((Tok::Real(text), l0, c0));
            } else {
                let n = text.parse::<i64>().map_err(|e| err(format!("bad integer `{text}`: {e}"), l0, c0))?;
                toks.push((Tok::Int(n), l0, c0));
            }
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err("unterminated string".into(), l0, c0)),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = chars.get(i + 1).copied();
                        match e {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            _ => return Err(err("bad escape in string".into(), line, col)),
                        }
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            toks.push((Tok::Str(s), l0, c0));
            continue;
        }
        let t = match c {
            '-' if chars.get(i + 1) == Some(&'>') => {
                bump(2, &mut i, &mut col);
                toks.push((Tok::Arrow, l0, c0));
                continue;
            }
            ':' => Tok::Colon,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '+' => Tok::Plus,
            '&' => Tok::Amp,
            '|' => Tok::Bar,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            other => return Err(err(format!("unexpected character `{other}`"), l0, c0)),
        };
        bump(1, &mut i, &mut col);
        toks.push((t, l0, c0));
    }
    toks.push((Tok::Eof, line, col));
    Ok(Lexed { toks })
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Parser> {
        Ok(Parser { toks: lex(src)?.toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (_, line, col) = self.toks[self.pos];
        Err(ParseError { message: message.into(), line, col })
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    /// A non-keyword identifier.
    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.next();
                Ok(s)
            }
            t => self.error(format!("expected {what}, found {t}")),
        }
    }

    fn role(&mut self) -> PResult<Role> {
        self.ident("a role").map(Role::new)
    }

    fn finish(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error(format!("unexpected {} after end of term", self.peek()))
        }
    }

    fn comma_list<T>(&mut self, close: Tok, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = vec![item(self)?];
        while *self.peek() == Tok::Comma {
            self.next();
            out.push(item(self)?);
        }
        self.expect(close)?;
        Ok(out)
    }

    // ---- types ----

    fn gtype(&mut self) -> PResult<GlobalType> {
        if self.is_kw("end") {
            self.next();
            return Ok(GlobalType::End);
        }
        if self.is_kw("rec") {
            self.next();
            let var = self.ident("a recursion variable")?;
            self.expect(Tok::Dot)?;
            let body = self.gtype()?;
            return Ok(GlobalType::Rec { var, body: Box::new(body) });
        }
        if self.is_kw("exists") {
            self.next();
            self.expect(Tok::LBrace)?;
            let rows = self.comma_list(Tok::RBrace, |p| {
                let sender = p.role()?;
                p.expect(Tok::Arrow)?;
                let receiver = p.role()?;
                p.expect(Tok::Colon)?;
                let (label, payload, cont) = p.gbranch_tail()?;
                Ok((receiver, GRow { sender, label, payload, cont }))
            })?;
            let receiver = rows[0].0.clone();
            if rows.iter().any(|(r, _)| *r != receiver) {
                return self.error("all rows of an existential interaction need the same receiver");
            }
            let rows: Vec<GRow> = rows.into_iter().map(|(_, r)| r).collect();
            let mut seen = BTreeSet::new();
            for r in &rows {
                if !seen.insert(&r.sender) {
                    return self.error(format!("sender `{}` appears twice in one existential interaction", r.sender));
                }
                if r.sender == receiver {
                    return self.error(format!("role `{}` cannot send to itself", r.sender));
                }
            }
            return Ok(GlobalType::Exist { receiver, rows });
        }
        let name = self.ident("a global type")?;
        if *self.peek() != Tok::Arrow {
            return Ok(GlobalType::Var(name));
        }
        self.next();
        let sender = Role::new(name);
        let receiver = self.role()?;
        if sender == receiver {
            return self.error(format!("role `{sender}` cannot send to itself"));
        }
        self.expect(Tok::Colon)?;
        let branches = if *self.peek() == Tok::LBrace {
            self.next();
            self.comma_list(Tok::RBrace, |p| p.gbranch_tail())?
        } else {
            vec![self.gbranch_tail()?]
        };
        let branches: Vec<GBranch> = branches.into_iter().map(|(label, payload, cont)| GBranch { label, payload, cont }).collect();
        self.distinct(branches.iter().map(|b| &b.label))?;
        Ok(GlobalType::Comm { sender, receiver, branches })
    }

    fn distinct<'a>(&self, labels: impl Iterator<Item = &'a String>) -> PResult<()> {
        let mut seen = BTreeSet::new();
        for l in labels {
            if !seen.insert(l) {
                return self.error(format!("duplicate label `{l}`"));
            }
        }
        Ok(())
    }

    fn gbranch_tail(&mut self) -> PResult<(String, TypeExpr, GlobalType)> {
        let label = self.ident("a label")?;
        let payload = self.payload_type()?;
        self.expect(Tok::Dot)?;
        let cont = self.gtype()?;
        Ok((label, payload, cont))
    }

    /// `( btype? )`; an empty payload is `unit`.
    fn payload_type(&mut self) -> PResult<TypeExpr> {
        self.expect(Tok::LParen)?;
        if *self.peek() == Tok::RParen {
            self.next();
            return Ok(TypeExpr::UNIT);
        }
        let t = self.btype()?;
        self.expect(Tok::RParen)?;
        Ok(t)
    }

    fn btype(&mut self) -> PResult<TypeExpr> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(sort) = Sort::from_keyword(s) {
                self.next();
                return Ok(TypeExpr::Basic(sort));
            }
        }
        if *self.peek() == Tok::Lt {
            self.next();
            let g = self.gtype()?;
            self.expect(Tok::Gt)?;
            return Ok(TypeExpr::Global(Box::new(g)));
        }
        Ok(TypeExpr::Local(Box::new(self.ltype()?)))
    }

    fn ltype(&mut self) -> PResult<LocalType> {
        if self.is_kw("end") {
            self.next();
            return Ok(LocalType::End);
        }
        if self.is_kw("rec") {
            self.next();
            let var = self.ident("a recursion variable")?;
            self.expect(Tok::Dot)?;
            let body = self.ltype()?;
            return Ok(LocalType::Rec { var, body: Box::new(body) });
        }
        if *self.peek() == Tok::ExistsAmp {
            self.next();
            self.expect(Tok::LBrace)?;
            let rows = self.comma_list(Tok::RBrace, |p| {
                let role = p.role()?;
                p.expect(Tok::Amp)?;
                let (label, payload, cont) = p.lbranch_tail()?;
                Ok(LRow { role, label, payload, cont })
            })?;
            self.distinct_rows(&rows)?;
            return Ok(LocalType::Exist { rows });
        }
        if *self.peek() == Tok::ExistsPlus {
            self.next();
            let partner = self.role()?;
            self.expect(Tok::LBrace)?;
            let rows = self.comma_list(Tok::RBrace, |p| {
                let role = p.role()?;
                p.expect(Tok::Colon)?;
                let (label, payload, cont) = p.lbranch_tail()?;
                Ok(LRow { role, label, payload, cont })
            })?;
            self.distinct_rows(&rows)?;
            return Ok(LocalType::DomainSelect { partner, rows });
        }
        let name = self.ident("a local type")?;
        let select = match self.peek() {
            Tok::Plus => true,
            Tok::Amp => false,
            _ => return Ok(LocalType::Var(name)),
        };
        self.next();
        let partner = Role::new(name);
        let item = |p: &mut Self| {
            let (label, payload, cont) = p.lbranch_tail()?;
            Ok(LBranch { label, payload, cont })
        };
        let branches = if *self.peek() == Tok::LBrace {
            self.next();
            self.comma_list(Tok::RBrace, item)?
        } else {
            vec![item(self)?]
        };
        self.distinct(branches.iter().map(|b| &b.label))?;
        Ok(if select { LocalType::Select { partner, branches } } else { LocalType::Branch { partner, branches } })
    }

    fn distinct_rows(&self, rows: &[LRow]) -> PResult<()> {
        let mut seen = BTreeSet::new();
        for r in rows {
            if !seen.insert(&r.role) {
                return self.error(format!("role `{}` appears in two rows", r.role));
            }
        }
        Ok(())
    }

    fn lbranch_tail(&mut self) -> PResult<(String, TypeExpr, LocalType)> {
        let label = self.ident("a label")?;
        let payload = self.payload_type()?;
        self.expect(Tok::Dot)?;
        let cont = self.ltype()?;
        Ok((label, payload, cont))
    }

    // ---- processes ----

    fn proc(&mut self) -> PResult<Process> {
        let mut items = vec![self.unary()?];
        while *self.peek() == Tok::Bar {
            self.next();
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Process::Par(items) })
    }

    fn unary(&mut self) -> PResult<Process> {
        match self.peek().clone() {
            Tok::Int(0) => {
                self.next();
                Ok(Process::Nil)
            }
            Tok::LParen => {
                self.next();
                let p = self.proc()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Tok::ExistsAmp => {
                self.next();
                self.expect(Tok::LBrace)?;
                let rows = self.comma_list(Tok::RBrace, |p| {
                    let (subject, partner) = p.endpoint()?;
                    p.expect(Tok::Amp)?;
                    let (label, var, cont) = p.arm()?;
                    Ok((subject, ExistArm { partner, label, var, cont }))
                })?;
                let subject = rows[0].0.clone();
                if rows.iter().any(|(s, _)| *s != subject) {
                    return self.error("all rows of an existential branching need the same subject");
                }
                let arms: Vec<ExistArm> = rows.into_iter().map(|(_, a)| a).collect();
                let mut seen = BTreeSet::new();
                for a in &arms {
                    if !seen.insert(&a.partner) {
                        return self.error(format!("partner `{}` appears in two rows", a.partner));
                    }
                }
                Ok(Process::Exist { subject, arms })
            }
            Tok::Ident(kw) if kw == "new" => {
                self.next();
                let session = self.ident("a session name")?;
                let protocol = if *self.peek() == Tok::Colon {
                    self.next();
                    Some(self.ident("a global type name")?)
                } else {
                    None
                };
                self.expect(Tok::Dot)?;
                let body = self.unary()?;
                Ok(Process::New { session, protocol, body: Box::new(body) })
            }
            Tok::Ident(kw) if kw == "def" => {
                self.next();
                let mut defs = vec![self.def_decl()?];
                while self.is_kw("and") {
                    self.next();
                    defs.push(self.def_decl()?);
                }
                self.expect_kw("in")?;
                let scope = self.proc()?;
                let mut seen = BTreeSet::new();
                for d in &defs {
                    if !seen.insert(&d.name) {
                        return self.error(format!("`{}` is defined twice in one group", d.name));
                    }
                }
                Ok(Process::Def { defs, scope: Box::new(scope) })
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::LParen => {
                let name = self.ident("a process name")?;
                self.next();
                let args = if *self.peek() == Tok::RParen {
                    self.next();
                    vec![]
                } else {
                    self.comma_list(Tok::RParen, |p| p.value())?
                };
                Ok(Process::Call { name, args })
            }
            Tok::Ident(_) => {
                let (subject, partner) = self.endpoint()?;
                match self.next() {
                    Tok::Plus => {
                        let label = self.ident("a label")?;
                        self.expect(Tok::LParen)?;
                        let payload = if *self.peek() == Tok::RParen { Payload::UNIT } else { self.value()? };
                        self.expect(Tok::RParen)?;
                        self.expect(Tok::Dot)?;
                        let cont = self.unary()?;
                        Ok(Process::Select { subject, partner, label, payload, cont: Box::new(cont) })
                    }
                    Tok::Amp => {
                        self.expect(Tok::LBrace)?;
                        let arms = self.comma_list(Tok::RBrace, |p| {
                            let (label, var, cont) = p.arm()?;
                            Ok(Arm { label, var, cont })
                        })?;
                        self.distinct(arms.iter().map(|a| &a.label))?;
                        Ok(Process::Branch { subject, partner, arms })
                    }
                    t => {
                        self.pos -= 1;
                        self.error(format!("expected `+` or `&`, found {t}"))
                    }
                }
            }
            t => self.error(format!("expected a process, found {t}")),
        }
    }

    fn def_decl(&mut self) -> PResult<DefDecl> {
        let name = self.ident("a process name")?;
        self.expect(Tok::LParen)?;
        let params = if *self.peek() == Tok::RParen {
            self.next();
            vec![]
        } else {
            self.comma_list(Tok::RParen, |p| {
                let name = p.ident("a parameter")?;
                let ty = if *p.peek() == Tok::Colon {
                    p.next();
                    Some(p.btype()?)
                } else {
                    None
                };
                Ok(Param { name, ty })
            })?
        };
        let mut seen = BTreeSet::new();
        for p in &params {
            if !seen.insert(&p.name) {
                return self.error(format!("parameter `{}` declared twice", p.name));
            }
        }
        self.expect(Tok::Eq)?;
        let body = self.proc()?;
        Ok(DefDecl { name, params, body })
    }

    /// `label(x).P`, with `label()` and `label(_)` binding nothing useful.
    fn arm(&mut self) -> PResult<(String, String, Process)> {
        let label = self.ident("a label")?;
        self.expect(Tok::LParen)?;
        let var = match self.peek().clone() {
            Tok::RParen => "_".to_string(),
            Tok::Ident(s) if s == "_" => {
                self.next();
                "_".to_string()
            }
            _ => self.ident("a variable")?,
        };
        self.expect(Tok::RParen)?;
        self.expect(Tok::Dot)?;
        let cont = self.unary()?;
        Ok((label, var, cont))
    }

    /// `x[q]` or `s[p][q]`: a subject channel and the partner role.
    fn endpoint(&mut self) -> PResult<(Channel, Role)> {
        let name = self.ident("a channel")?;
        self.expect(Tok::LBrack)?;
        let first = self.role()?;
        self.expect(Tok::RBrack)?;
        if *self.peek() == Tok::LBrack {
            self.next();
            let partner = self.role()?;
            self.expect(Tok::RBrack)?;
            if partner == first {
                return self.error(format!("role `{first}` cannot talk to itself"));
            }
            Ok((Channel::Session { session: name, role: first }, partner))
        } else {
            Ok((Channel::Var(name), first))
        }
    }

    fn value(&mut self) -> PResult<Payload> {
        let v = match self.next() {
            Tok::Int(n) => Payload::Lit(Literal::Int(n)),
            Tok::Real(s) => Payload::Lit(Literal::Real(s)),
            Tok::Str(s) => Payload::Lit(Literal::Str(s)),
            Tok::LParen => {
                self.expect(Tok::RParen)?;
                Payload::UNIT
            }
            Tok::Ident(s) if s == "true" => Payload::Lit(Literal::Bool(true)),
            Tok::Ident(s) if s == "false" => Payload::Lit(Literal::Bool(false)),
            Tok::Ident(s) if !is_keyword(&s) => {
                if *self.peek() == Tok::LBrack {
                    self.next();
                    let role = self.role()?;
                    self.expect(Tok::RBrack)?;
                    Payload::Chan(Channel::Session { session: s, role })
                } else {
                    Payload::Chan(Channel::Var(s))
                }
            }
            t => {
                self.pos -= 1;
                return self.error(format!("expected a value, found {t}"));
            }
        };
        Ok(v)
    }
}

fn check_global(g: &GlobalType) -> Result<(), String> {
    if let Some(v) = g.free_vars().into_iter().next() {
        return Err(format!("unbound recursion variable `{v}`"));
    }
    if !g.is_guarded() {
        return Err("unguarded recursion".into());
    }
    Ok(())
}

fn check_local(t: &LocalType) -> Result<(), String> {
    if let Some(v) = t.free_vars().into_iter().next() {
        return Err(format!("unbound recursion variable `{v}`"));
    }
    fn guarded(t: &LocalType, unguarded: &mut Vec<String>) -> bool {
        match t {
            LocalType::Rec { var, body } => {
                unguarded.push(var.clone());
                let ok = guarded(body, unguarded);
                unguarded.pop();
                ok
            }
            LocalType::Var(v) => !unguarded.contains(v),
            LocalType::End => true,
            LocalType::Select { branches, .. } | LocalType::Branch { branches, .. } => branches.iter().all(|b| guarded(&b.cont, &mut Vec::new())),
            LocalType::Exist { rows } | LocalType::DomainSelect { rows, .. } => rows.iter().all(|r| guarded(&r.cont, &mut Vec::new())),
        }
    }
    if !guarded(t, &mut Vec::new()) {
        return Err("unguarded recursion".into());
    }
    Ok(())
}

fn whole<T>(src: &str, f: impl FnOnce(&mut Parser) -> PResult<T>) -> PResult<T> {
    let mut p = Parser::new(src)?;
    let out = f(&mut p)?;
    p.finish()?;
    Ok(out)
}

pub fn parse_global(src: &str) -> Result<GlobalType, ParseError> {
    let g = whole(src, |p| p.gtype())?;
    check_global(&g).map_err(|message| ParseError { message, line: 1, col: 1 })?;
    Ok(g)
}

pub fn parse_local(src: &str) -> Result<LocalType, ParseError> {
    let t = whole(src, |p| p.ltype())?;
    check_local(&t).map_err(|message| ParseError { message, line: 1, col: 1 })?;
    Ok(t)
}

pub fn parse_process(src: &str) -> Result<Process, ParseError> {
    whole(src, |p| p.proc())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DeclKind {
    Global,
    Local,
    Process,
}

#[derive(Clone, Debug)]
pub struct Decl {
    pub kind: DeclKind,
    pub name: String,
    pub line: usize,
}

/// A parsed source file: named global types, local types and processes.
#[derive(Clone, Debug, Default)]
pub struct SourceFile {
    pub decls: Vec<Decl>,
    pub globals: BTreeMap<String, GlobalType>,
    pub locals: BTreeMap<String, LocalType>,
    pub processes: BTreeMap<String, Process>,
}

impl SourceFile {
    pub fn parse(src: &str) -> Result<SourceFile, ParseError> {
        let mut p = Parser::new(src)?;
        let mut file = SourceFile::default();
        while *p.peek() != Tok::Eof {
            let (_, line, col) = p.toks[p.pos];
            let kind = match p.next() {
                Tok::Ident(k) if k == "global" => DeclKind::Global,
                Tok::Ident(k) if k == "local" => DeclKind::Local,
                Tok::Ident(k) if k == "process" => DeclKind::Process,
                t => {
                    p.pos -= 1;
                    return p.error(format!("expected `global`, `local` or `process`, found {t}"));
                }
            };
            let name = p.ident("a declaration name")?;
            p.expect(Tok::Eq)?;
            let at = |message: String| ParseError { message, line, col };
            let fresh = match kind {
                DeclKind::Global => {
                    let g = p.gtype()?;
                    check_global(&g).map_err(|m| at(format!("in `{name}`: {m}")))?;
                    file.globals.insert(name.clone(), g).is_none()
                }
                DeclKind::Local => {
                    let t = p.ltype()?;
                    check_local(&t).map_err(|m| at(format!("in `{name}`: {m}")))?;
                    file.locals.insert(name.clone(), t).is_none()
                }
                DeclKind::Process => {
                    let q = p.proc()?;
                    file.processes.insert(name.clone(), q).is_none()
                }
            };
            if !fresh {
                return Err(at(format!("`{name}` is declared twice")));
            }
            file.decls.push(Decl { kind, name, line });
        }
        Ok(file)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalType> {
        self.globals.get(name)
    }

    pub fn process(&self, name: &str) -> Option<&Process> {
        self.processes.get(name)
    }

    /// Print every declaration back in source order.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for d in &self.decls {
            let body = match d.kind {
                DeclKind::Global => self.globals[&d.name].to_string(),
                DeclKind::Local => self.locals[&d.name].to_string(),
                DeclKind::Process => self.processes[&d.name].to_string(),
            };
            let kw = match d.kind {
                DeclKind::Global => "global",
                DeclKind::Local => "local",
                DeclKind::Process => "process",
            };
            out.push_str(&format!("{kw} {} = {body}\n", d.name));
        }
        out
    }
}
