//! Tokenizer, recursive-descent parser and printer for the ODE DSL.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | base ('^' signed_int)?
//! base   := number | name | yterm | '(' expr ')'
//! yterm  := 'y' '\''*
//! ```
//!
//! Numbers may carry an `i` suffix (`2.5i`) to denote imaginary constants.

use std::fmt;

use crate::error::{Error, Location, Result};
use crate::scalar::C64;

/// Highest derivative order accepted by the parser.
pub const MAX_DERIVATIVE_ORDER: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub enum OdeAst {
    Const(C64),
    Param(String),
    /// The dependent variable differentiated `k` times.
    Y(u8),
    Neg(Box<OdeAst>),
    Add(Box<OdeAst>, Box<OdeAst>),
    Sub(Box<OdeAst>, Box<OdeAst>),
    Mul(Box<OdeAst>, Box<OdeAst>),
    /// Integer power, exponent never zero.
    Pow(Box<OdeAst>, i32),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Y(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v, false) => format!("number {v}"),
            Tok::Num(v, true) => format!("number {v}i"),
            Tok::Ident(s) => format!("name `{s}`"),
            Tok::Y(k) => format!("`y{}`", "'".repeat(*k)),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, Location)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let at = Location { line, column: col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lexeme: String = chars[i..j].iter().collect();
                let value: f64 = lexeme.parse().map_err(|_| Error::UnknownToken {
                    at,
                    token: lexeme.clone(),
                })?;
                let mut imag = false;
                if j < chars.len() && chars[j] == 'i' {
                    let next = chars.get(j + 1);
                    if !next.is_some_and(|n| n.is_ascii_alphanumeric() || *n == '_') {
                        imag = true;
                        j += 1;
                    }
                }
                i = j - 1;
                Tok::Num(value, imag)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let name: String = chars[i..j].iter().collect();
                if name == "y" {
                    let mut k = j;
                    while k < chars.len() && chars[k] == '\'' {
                        k += 1;
                    }
                    let order = k - j;
                    if order > MAX_DERIVATIVE_ORDER {
                        return Err(Error::DerivativeOrder { at, order });
                    }
                    i = k - 1;
                    Tok::Y(order)
                } else {
                    i = j - 1;
                    Tok::Ident(name)
                }
            }
            other => {
                return Err(Error::UnknownToken {
                    at,
                    token: other.to_string(),
                })
            }
        };
        col += i + 1 - start;
        i += 1;
        out.push((tok, at));
    }
    out.push((Tok::Eof, Location { line, column: col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Location)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> Location {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> Error {
        Error::Syntax {
            at: self.at(),
            message: format!("expected {wanted}, found {}", self.peek().describe()),
        }
    }

    fn expr(&mut self) -> Result<OdeAst> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = OdeAst::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = OdeAst::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<OdeAst> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.factor()?;
            lhs = OdeAst::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<OdeAst> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(OdeAst::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let at = self.at();
        match self.bump() {
            Tok::Num(v, false) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                if v == 0.0 {
                    return Err(Error::Syntax {
                        at,
                        message: "exponent must be a nonzero integer".into(),
                    });
                }
                let e = v as i32;
                Ok(OdeAst::Pow(Box::new(base), if negative { -e } else { e }))
            }
            other => Err(Error::Syntax {
                at,
                message: format!("expected integer exponent, found {}", other.describe()),
            }),
        }
    }

    fn base(&mut self) -> Result<OdeAst> {
        match self.peek().clone() {
            Tok::Num(v, imag) => {
                self.bump();
                Ok(OdeAst::Const(if imag {
                    C64::new(0.0, v)
                } else {
                    C64::new(v, 0.0)
                }))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(OdeAst::Param(name))
            }
            Tok::Y(k) => {
                self.bump();
                Ok(OdeAst::Y(k as u8))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.unexpected("a number, name, `y` or `(`")),
        }
    }
}

/// Parses ODE text. The text is the left-hand side `E` of `E = 0`.
pub fn parse_ode(text: &str) -> Result<OdeAst> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    let ast = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(ast)
}

fn fmt_const(c: C64) -> String {
    if c.im == 0.0 && c.re >= 0.0 && !c.re.is_sign_negative() {
        format!("{}", c.re)
    } else if c.re == 0.0 && !c.re.is_sign_negative() && c.im >= 0.0 {
        format!("{}i", c.im)
    } else {
        let re = if c.re < 0.0 {
            format!("-{}", -c.re)
        } else {
            format!("{}", c.re)
        };
        let im = if c.im < 0.0 {
            format!(" - {}i", -c.im)
        } else {
            format!(" + {}i", c.im)
        };
        format!("({re}{im})")
    }
}

impl OdeAst {
    /// Prints the tree so that [`parse_ode`] reads it back. Trees produced
    /// by the parser reparse to an equal tree.
    pub fn unparse(&self) -> String {
        match self {
            OdeAst::Const(c) => fmt_const(*c),
            OdeAst::Param(n) => n.clone(),
            OdeAst::Y(k) => format!("y{}", "'".repeat(*k as usize)),
            OdeAst::Neg(x) => match **x {
                OdeAst::Add(..) | OdeAst::Sub(..) | OdeAst::Mul(..) => {
                    format!("-({})", x.unparse())
                }
                _ => format!("-{}", x.unparse()),
            },
            OdeAst::Add(a, b) | OdeAst::Sub(a, b) => {
                let op = if matches!(self, OdeAst::Add(..)) { "+" } else { "-" };
                let rhs = match **b {
                    OdeAst::Add(..) | OdeAst::Sub(..) => format!("({})", b.unparse()),
                    _ => b.unparse(),
                };
                format!("{} {op} {rhs}", a.unparse())
            }
            OdeAst::Mul(a, b) => {
                let lhs = match **a {
                    OdeAst::Add(..) | OdeAst::Sub(..) => format!("({})", a.unparse()),
                    _ => a.unparse(),
                };
                let rhs = match **b {
                    OdeAst::Add(..) | OdeAst::Sub(..) | OdeAst::Mul(..) => {
                        format!("({})", b.unparse())
                    }
                    _ => b.unparse(),
                };
                format!("{lhs}*{rhs}")
            }
            OdeAst::Pow(b, e) => {
                let base = match **b {
                    OdeAst::Param(_) | OdeAst::Y(_) => b.unparse(),
                    OdeAst::Const(c) if fmt_const(c).starts_with(|ch: char| ch.is_ascii_digit()) => {
                        b.unparse()
                    }
                    _ => format!("({})", b.unparse()),
                };
                format!("{base}^{e}")
            }
        }
    }

    /// Highest derivative order mentioned in the tree.
    pub fn max_order(&self) -> u8 {
        match self {
            OdeAst::Const(_) | OdeAst::Param(_) => 0,
            OdeAst::Y(k) => *k,
            OdeAst::Neg(x) | OdeAst::Pow(x, _) => x.max_order(),
            OdeAst::Add(a, b) | OdeAst::Sub(a, b) | OdeAst::Mul(a, b) => {
                a.max_order().max(b.max_order())
            }
        }
    }

    /// Parameter names in first-appearance order, without duplicates.
    pub fn parameters(&self) -> Vec<String> {
        fn walk(node: &OdeAst, out: &mut Vec<String>) {
            match node {
                OdeAst::Param(n) => {
                    if !out.contains(n) {
                        out.push(n.clone());
                    }
                }
                OdeAst::Const(_) | OdeAst::Y(_) => {}
                OdeAst::Neg(x) | OdeAst::Pow(x, _) => walk(x, out),
                OdeAst::Add(a, b) | OdeAst::Sub(a, b) | OdeAst::Mul(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Numeric value of the expression given `derivs[k] = y^(k)(t)`.
    pub fn eval(&self, env: &super::ParamEnv, derivs: &[C64]) -> Result<C64> {
        Ok(match self {
            OdeAst::Const(c) => *c,
            OdeAst::Param(n) => env.get(n).ok_or_else(|| Error::UnboundParameter(n.clone()))?,
            OdeAst::Y(k) => derivs.get(*k as usize).copied().ok_or_else(|| {
                Error::Precondition(format!("missing value for derivative order {k}"))
            })?,
            OdeAst::Neg(x) => -x.eval(env, derivs)?,
            OdeAst::Add(a, b) => a.eval(env, derivs)? + b.eval(env, derivs)?,
            OdeAst::Sub(a, b) => a.eval(env, derivs)? - b.eval(env, derivs)?,
            OdeAst::Mul(a, b) => a.eval(env, derivs)? * b.eval(env, derivs)?,
            OdeAst::Pow(b, e) => b.eval(env, derivs)?.powi(*e),
        })
    }
}

impl fmt::Display for OdeAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.unparse())
    }
}
