//! Row predicates: comparisons joined by `&&` / `||` with parentheses.
//!
//! ```text
//! or      := and ('||' and)*
//! and     := atom ('&&' atom)*
//! atom    := '(' or ')' | operand (cmp operand)?     -- bare operand must be a boolean literal
//! operand := column | number | "string" | true | false
//! ```

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{timestamp, Column, DType, Value};
use crate::diag::{Code, Diagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    fn test(self, ord: core::cmp::Ordering) -> bool {
        use core::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    String(String),
    Boolean(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Column(String),
    Literal(Literal),
}

/// Parsed, not yet type-checked predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum PredicateExpr {
    Const(bool),
    Cmp(Operand, CmpOp, Operand),
    And(Box<PredicateExpr>, Box<PredicateExpr>),
    Or(Box<PredicateExpr>, Box<PredicateExpr>),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) => f.write_str(c),
            Operand::Literal(Literal::Number(n)) => write!(f, "{n}"),
            Operand::Literal(Literal::String(s)) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Operand::Literal(Literal::Boolean(b)) => write!(f, "{b}"),
        }
    }
}

impl fmt::Display for PredicateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateExpr::Const(b) => write!(f, "{b}"),
            PredicateExpr::Cmp(l, op, r) => write!(f, "{l} {} {r}", op.symbol()),
            PredicateExpr::And(l, r) => write!(f, "({l} && {r})"),
            PredicateExpr::Or(l, r) => write!(f, "({l} || {r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Bool(bool),
    Op(CmpOp),
    And,
    Or,
    LParen,
    RParen,
}

fn perr(pos: usize, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(Code::E206, format!("at {pos}: {}", msg.into()))
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, Diagnostic> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            b'&' | b'|' => {
                if b.get(i + 1) != Some(&c) {
                    return Err(perr(i, "expected `&&` or `||`"));
                }
                out.push((start, if c == b'&' { Tok::And } else { Tok::Or }));
                i += 2;
            }
            b'=' | b'!' | b'<' | b'>' => {
                let eq = b.get(i + 1) == Some(&b'=');
                let op = match (c, eq) {
                    (b'=', true) => CmpOp::Eq,
                    (b'!', true) => CmpOp::Ne,
                    (b'<', true) => CmpOp::Le,
                    (b'<', false) => CmpOp::Lt,
                    (b'>', true) => CmpOp::Ge,
                    (b'>', false) => CmpOp::Gt,
                    _ => return Err(perr(i, "expected comparison operator")),
                };
                out.push((start, Tok::Op(op)));
                i += if eq { 2 } else { 1 };
            }
            b'"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let ch = src[i..].chars().next().ok_or_else(|| perr(start, "unterminated string"))?;
                    i += ch.len_utf8();
                    match ch {
                        '"' => break,
                        '\\' => {
                            let esc = src[i..].chars().next().ok_or_else(|| perr(start, "unterminated string"))?;
                            i += esc.len_utf8();
                            s.push(esc);
                        }
                        ch => s.push(ch),
                    }
                }
                out.push((start, Tok::Str(s)));
            }
            b'0'..=b'9' | b'-' | b'.' => {
                i += 1;
                while i < b.len() {
                    let d = b[i];
                    let exp_sign = (d == b'-' || d == b'+') && matches!(b[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let n: f64 = text.parse().map_err(|_| perr(start, format!("bad number `{text}`")))?;
                out.push((start, Tok::Num(n)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                let word = &src[start..i];
                out.push((
                    start,
                    match word {
                        "true" => Tok::Bool(true),
                        "false" => Tok::Bool(false),
                        _ => Tok::Ident(word.to_string()),
                    },
                ));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(perr(i, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn or(&mut self) -> Result<PredicateExpr, Diagnostic> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            lhs = PredicateExpr::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<PredicateExpr, Diagnostic> {
        let mut lhs = self.atom()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            lhs = PredicateExpr::And(Box::new(lhs), Box::new(self.atom()?));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<PredicateExpr, Diagnostic> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let inner = self.or()?;
            if self.peek() != Some(&Tok::RParen) {
                return Err(perr(self.offset(), "expected `)`"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        let at = self.offset();
        let lhs = self.operand()?;
        if let Some(Tok::Op(op)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.operand()?;
            return Ok(PredicateExpr::Cmp(lhs, op, rhs));
        }
        match lhs {
            Operand::Literal(Literal::Boolean(b)) => Ok(PredicateExpr::Const(b)),
            _ => Err(perr(at, "expected comparison")),
        }
    }

    fn operand(&mut self) -> Result<Operand, Diagnostic> {
        let at = self.offset();
        let op = match self.peek() {
            Some(Tok::Ident(c)) => Operand::Column(c.clone()),
            Some(Tok::Num(n)) => Operand::Literal(Literal::Number(*n)),
            Some(Tok::Str(s)) => Operand::Literal(Literal::String(s.clone())),
            Some(Tok::Bool(b)) => Operand::Literal(Literal::Boolean(*b)),
            _ => return Err(perr(at, "expected column or literal")),
        };
        self.pos += 1;
        Ok(op)
    }
}

impl PredicateExpr {
    pub fn parse(src: &str) -> Result<PredicateExpr, Diagnostic> {
        let toks = lex(src)?;
        if toks.is_empty() {
            return Err(perr(0, "empty predicate"));
        }
        let mut p = Parser { toks, pos: 0, end: src.len() };
        let expr = p.or()?;
        if p.pos != p.toks.len() {
            return Err(perr(p.offset(), "unexpected trailing input"));
        }
        Ok(expr)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    Column(usize),
    Value(Value),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(bool),
    Cmp(Slot, CmpOp, Slot),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
}

/// A type-checked predicate bound to a column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    source: String,
    root: Node,
}

#[derive(Clone, Copy, PartialEq)]
enum Ty {
    Col(DType),
    Num,
    Str,
    Bool,
}

impl Predicate {
    /// Parses and type-checks `src` against `columns`.
    pub fn compile(src: &str, columns: &[Column]) -> Result<Predicate, Diagnostic> {
        let expr = PredicateExpr::parse(src)?;
        let root = check(&expr, columns)?;
        Ok(Predicate { source: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, cells: &[Value]) -> bool {
        eval(&self.root, cells)
    }
}

fn ty_name(t: Ty) -> &'static str {
    match t {
        Ty::Col(DType::Number) | Ty::Num => "number",
        Ty::Col(DType::String) | Ty::Str => "string",
        Ty::Col(DType::Boolean) | Ty::Bool => "boolean",
        Ty::Col(DType::Timestamp) => "timestamp",
    }
}

fn check(expr: &PredicateExpr, columns: &[Column]) -> Result<Node, Diagnostic> {
    Ok(match expr {
        PredicateExpr::Const(b) => Node::Const(*b),
        PredicateExpr::And(l, r) => Node::And(Box::new(check(l, columns)?), Box::new(check(r, columns)?)),
        PredicateExpr::Or(l, r) => Node::Or(Box::new(check(l, columns)?), Box::new(check(r, columns)?)),
        PredicateExpr::Cmp(l, op, r) => {
            let (lt, mut ls) = slot(l, columns)?;
            let (rt, mut rs) = slot(r, columns)?;
            let mismatch = || {
                Diagnostic::new(
                    Code::E207,
                    format!("cannot compare {} {} {} in `{expr}`", ty_name(lt), op.symbol(), ty_name(rt)),
                )
            };
            let class = |t: Ty| match t {
                Ty::Col(DType::Number) | Ty::Num => 0,
                Ty::Col(DType::String) | Ty::Str => 1,
                Ty::Col(DType::Boolean) | Ty::Bool => 2,
                Ty::Col(DType::Timestamp) => 3,
            };
            // timestamp columns compare against ISO-8601 string literals
            let ts_lit = |s: &mut Slot| -> bool {
                if let Slot::Value(Value::String(text)) = s {
                    if let Some(millis) = timestamp::parse_iso8601(text) {
                        *s = Slot::Value(Value::Timestamp { millis, text: text.clone() });
                        return true;
                    }
                }
                false
            };
            let ok = match (lt, rt) {
                (Ty::Col(DType::Timestamp), Ty::Str) => ts_lit(&mut rs),
                (Ty::Str, Ty::Col(DType::Timestamp)) => ts_lit(&mut ls),
                _ => class(lt) == class(rt),
            };
            if !ok || (class(lt) == 2 && op.is_ordering()) {
                return Err(mismatch());
            }
            Node::Cmp(ls, *op, rs)
        }
    })
}

fn slot(op: &Operand, columns: &[Column]) -> Result<(Ty, Slot), Diagnostic> {
    Ok(match op {
        Operand::Column(name) => {
            let i = columns
                .iter()
                .position(|c| &c.name == name)
                .ok_or_else(|| Diagnostic::new(Code::E204, format!("unknown column `{name}` in predicate")))?;
            (Ty::Col(columns[i].dtype), Slot::Column(i))
        }
        Operand::Literal(Literal::Number(n)) => (Ty::Num, Slot::Value(Value::Number(*n))),
        Operand::Literal(Literal::String(s)) => (Ty::Str, Slot::Value(Value::String(s.clone()))),
        Operand::Literal(Literal::Boolean(b)) => (Ty::Bool, Slot::Value(Value::Boolean(*b))),
    })
}

fn eval(node: &Node, cells: &[Value]) -> bool {
    match node {
        Node::Const(b) => *b,
        Node::And(l, r) => eval(l, cells) && eval(r, cells),
        Node::Or(l, r) => eval(l, cells) || eval(r, cells),
        Node::Cmp(l, op, r) => {
            let get = |s: &'_ Slot| -> Value {
                match s {
                    Slot::Column(i) => cells[*i].clone(),
                    Slot::Value(v) => v.clone(),
                }
            };
            let (a, b) = (get(l), get(r));
            let ord = match (&a, &b) {
                (Value::Number(x), Value::Number(y)) => x.partial_cmp(y),
                (Value::String(x), Value::String(y)) => Some(x.cmp(y)),
                (Value::Boolean(x), Value::Boolean(y)) => Some(x.cmp(y)),
                (Value::Timestamp { millis: x, .. }, Value::Timestamp { millis: y, .. }) => Some(x.cmp(y)),
                _ => None,
            };
            ord.is_some_and(|o| op.test(o))
        }
    }
}
