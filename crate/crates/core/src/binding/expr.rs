//! Numeric binding expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | '$' column | '(' expr ')' | fn '(' args ')' | '-' factor
//! fn     := scale(x, in_lo, in_hi, out_lo, out_hi) | clamp(x, lo, hi) | min(a, b) | max(a, b)
//! ```
//!
//! Parenthesis and call nesting is limited to [`MAX_NESTING`].

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::data::{RowRef, Value};
use crate::diag::{Code, Diagnostic};

pub const MAX_NESTING: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Scale,
    Clamp,
    Min,
    Max,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "scale" => Func::Scale,
            "clamp" => Func::Clamp,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Scale => "scale",
            Func::Clamp => "clamp",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Scale => 5,
            Func::Clamp => 3,
            Func::Min | Func::Max => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Column(String),
    Neg(Box<Expr>),
    Binary(Box<Expr>, BinOp, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Linear remap of `x` from `[in_lo, in_hi]` to `[out_lo, out_hi]`, exact
/// at both input endpoints.
pub fn scale(x: f64, in_lo: f64, in_hi: f64, out_lo: f64, out_hi: f64) -> Result<f64, Diagnostic> {
    if in_lo == in_hi {
        return Err(Diagnostic::new(Code::E406, format!("scale input range is empty ({in_lo} = {in_hi})")));
    }
    if x == in_lo {
        return Ok(out_lo);
    }
    if x == in_hi {
        return Ok(out_hi);
    }
    Ok(out_lo + (x - in_lo) * (out_hi - out_lo) / (in_hi - in_lo))
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, Diagnostic> {
        let mut p = Parser { src: src.as_bytes(), text: src, pos: 0, nesting: 0 };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err(Code::E401, "unexpected trailing input"));
        }
        Ok(e)
    }

    /// Columns referenced via `$name`, in first-appearance order.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Num(_) => {}
            Expr::Column(c) => {
                if !out.contains(&c.as_str()) {
                    out.push(c);
                }
            }
            Expr::Neg(e) => e.collect_columns(out),
            Expr::Binary(l, _, r) => {
                l.collect_columns(out);
                r.collect_columns(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_columns(out)),
        }
    }

    /// Evaluates against `row`. Every referenced cell must be a non-null
    /// number.
    pub fn eval(&self, row: &RowRef<'_>) -> Result<f64, Diagnostic> {
        self.eval_with(&|name| match row.get(name) {
            Some(Value::Number(n)) => Ok(*n),
            Some(Value::Null) => Err(Diagnostic::new(Code::E404, format!("cell `{name}` is null in row {}", row.index))),
            Some(_) => Err(Diagnostic::new(Code::E404, format!("cell `{name}` is not a number in row {}", row.index))),
            None => Err(Diagnostic::new(Code::E404, format!("row has no column `{name}`"))),
        })
    }

    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Result<f64, Diagnostic>) -> Result<f64, Diagnostic> {
        Ok(match self {
            Expr::Num(n) => *n,
            Expr::Column(c) => lookup(c)?,
            Expr::Neg(e) => -e.eval_with(lookup)?,
            Expr::Binary(l, op, r) => {
                let (a, b) = (l.eval_with(lookup)?, r.eval_with(lookup)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Diagnostic::new(Code::E405, "division by zero"));
                        }
                        a / b
                    }
                }
            }
            Expr::Call(f, args) => {
                let v = args.iter().map(|a| a.eval_with(lookup)).collect::<Result<Vec<f64>, _>>()?;
                match f {
                    Func::Scale => scale(v[0], v[1], v[2], v[3], v[4])?,
                    Func::Clamp => v[0].max(v[1]).min(v[2]),
                    Func::Min => v[0].min(v[1]),
                    Func::Max => v[0].max(v[1]),
                }
            }
        })
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, parent: u8, right: bool) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Column(c) => write!(f, "${c}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write(f, 3, false)
            }
            Expr::Binary(l, op, r) => {
                let p = op.precedence();
                let paren = p < parent || (p == parent && right);
                if paren {
                    f.write_str("(")?;
                }
                l.write(f, p, false)?;
                write!(f, " {} ", op.symbol())?;
                r.write(f, p, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write(f, 0, false)?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Prints with the minimum parentheses needed to re-parse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0, false)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    nesting: usize,
}

impl Parser<'_> {
    fn err(&self, code: Code, msg: &str) -> Diagnostic {
        Diagnostic::new(code, format!("at column {}: {msg}", self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<(), Diagnostic> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return Err(self.err(Code::E401, "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            self.skip_ws();
            lhs = Expr::Binary(Box::new(lhs), op, Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            self.skip_ws();
            lhs = Expr::Binary(Box::new(lhs), op, Box::new(self.factor()?));
        }
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn factor(&mut self) -> Result<Expr, Diagnostic> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.skip_ws();
                Ok(match self.factor()? {
                    Expr::Num(n) => Expr::Num(-n),
                    e => Expr::Neg(Box::new(e)),
                })
            }
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                self.enter()?;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err(Code::E401, "expected `)`"));
                }
                self.nesting -= 1;
                Ok(e)
            }
            Some(b'$') => {
                self.pos += 1;
                let name = self.ident().to_string();
                if name.is_empty() {
                    return Err(self.err(Code::E401, "expected column name after `$`"));
                }
                self.skip_ws();
                Ok(Expr::Column(name))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident().to_string();
                self.skip_ws();
                if self.peek() != Some(b'(') {
                    self.pos = start;
                    return Err(self.err(Code::E401, "expected `$column`, number or function call"));
                }
                let Some(func) = Func::from_name(&name) else {
                    self.pos = start;
                    return Err(self.err(Code::E402, &format!("unknown function `{name}`")));
                };
                self.pos += 1;
                self.skip_ws();
                self.enter()?;
                let mut args = Vec::new();
                if !self.eat(b')') {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(b',') {
                            continue;
                        }
                        if self.eat(b')') {
                            break;
                        }
                        return Err(self.err(Code::E401, "expected `,` or `)`"));
                    }
                }
                self.nesting -= 1;
                if args.len() != func.arity() {
                    self.pos = start;
                    return Err(self.err(
                        Code::E403,
                        &format!("`{name}` takes {} arguments, got {}", func.arity(), args.len()),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            Some(_) => Err(self.err(Code::E401, "unexpected character")),
            None => Err(self.err(Code::E401, "unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr, Diagnostic> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            digits(self);
        }
        let text = &self.text[start..self.pos];
        let n: f64 = text.parse().map_err(|_| {
            let mut e = self.err(Code::E401, "malformed number");
            e.message = format!("at column {}: malformed number `{text}`", start + 1);
            e
        })?;
        if !n.is_finite() {
            return Err(self.err(Code::E401, "number out of range"));
        }
        self.skip_ws();
        Ok(Expr::Num(n))
    }
}
