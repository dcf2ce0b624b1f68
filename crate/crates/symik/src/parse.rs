//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := power (('*' | '/') power)*
//! power  := factor ('^' integer)*
//! factor := number | ident | 'pi' | '-' power | '(' expr ')'
//!         | func '(' expr (',' expr)? ')'
//! func   := sin | cos | tan | asin | acos | atan2 | sqrt
//! ```
//!
//! `atan2` takes `(y, x)`; all other functions take one argument. Decimal
//! literals become exact rationals (`1.5` is 3/2). The result is canonical,
//! and printing a canonical expression and re-parsing it is the identity.
//!
//! The parser is total: arbitrary byte strings produce either an expression
//! or a `ParseError`, never a panic (recursion depth and literal length are
//! bounded).

use crate::expr::{canon, Expr, Sym};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseError {
    /// Malformed input; `offset` is the byte position where parsing failed.
    SyntaxError { offset: usize, msg: String },
    /// An identifier that the symbol table does not know.
    UnknownIdentifier { name: String, offset: usize },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::SyntaxError { offset, msg } => {
                write!(f, "syntax error at byte {offset}: {msg}")
            }
            ParseError::UnknownIdentifier { name, offset } => {
                write!(f, "unknown identifier `{name}` at byte {offset}")
            }
        }
    }
}

impl std::error::Error for ParseError {}

const MAX_DEPTH: usize = 200;
const MAX_DIGITS: usize = 18;

const FUNCS: [&str; 7] = ["sin", "cos", "tan", "asin", "acos", "atan2", "sqrt"];

struct Parser<'a, F> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
    lookup: &'a F,
}

/// Parse `src` against a symbol table. `lookup` resolves identifiers (other
/// than `pi` and function names) to symbols; `None` means unknown.
pub fn parse_expr<F>(src: &str, lookup: &F) -> Result<Expr, ParseError>
where
    F: Fn(&str) -> Option<Sym>,
{
    let mut p = Parser { src: src.as_bytes(), pos: 0, depth: 0, lookup };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(canon(e))
}

impl<'a, F> Parser<'a, F>
where
    F: Fn(&str) -> Option<Sym>,
{
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::SyntaxError { offset: self.pos, msg: msg.to_string() }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax("expression too deeply nested"));
        }
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = Expr::Add(vec![acc, t]);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = Expr::Add(vec![acc, Expr::Mul(vec![Expr::Int(-1), t])]);
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax("expression too deeply nested"));
        }
        let mut acc = self.power()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let f = self.power()?;
                    acc = Expr::Mul(vec![acc, f]);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let f = self.power()?;
                    acc = Expr::Mul(vec![acc, Expr::Pow(Box::new(f), -1)]);
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax("expression too deeply nested"));
        }
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            if !self.eat(b'^') {
                break;
            }
            self.skip_ws();
            let neg = self.eat(b'-');
            let start = self.pos;
            let mut exp: i64 = 0;
            let mut digits = 0usize;
            while let Some(c) = self.peek() {
                if !c.is_ascii_digit() {
                    break;
                }
                digits += 1;
                if digits > 9 {
                    self.pos = start;
                    return Err(self.syntax("exponent too long"));
                }
                exp = exp * 10 + i64::from(c - b'0');
                self.pos += 1;
            }
            if digits == 0 {
                return Err(self.syntax("expected integer exponent"));
            }
            if neg {
                exp = -exp;
            }
            let exp =
                i32::try_from(exp).map_err(|_| self.syntax("exponent out of range"))?;
            acc = Expr::Pow(Box::new(acc), exp);
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax("expression too deeply nested"));
        }
        self.skip_ws();
        let e = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                let f = self.power()?;
                Expr::Mul(vec![Expr::Int(-1), f])
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                self.expect(b')')?;
                e
            }
            Some(c) if c.is_ascii_digit() => self.number()?,
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident()?,
            Some(_) => return Err(self.syntax("expected a factor")),
            None => return Err(self.syntax("unexpected end of input")),
        };
        self.depth -= 1;
        Ok(e)
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut int_part: i128 = 0;
        let mut int_digits = 0usize;
        while let Some(c) = self.peek() {
            if !c.is_ascii_digit() {
                break;
            }
            int_digits += 1;
            if int_digits > MAX_DIGITS {
                self.pos = start;
                return Err(self.syntax("numeric literal too long"));
            }
            int_part = int_part * 10 + i128::from(c - b'0');
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let mut frac: i128 = 0;
            let mut den: i128 = 1;
            let mut frac_digits = 0usize;
            while let Some(c) = self.peek() {
                if !c.is_ascii_digit() {
                    break;
                }
                frac_digits += 1;
                if frac_digits > MAX_DIGITS {
                    self.pos = start;
                    return Err(self.syntax("numeric literal too long"));
                }
                frac = frac * 10 + i128::from(c - b'0');
                den *= 10;
                self.pos += 1;
            }
            if frac_digits == 0 {
                return Err(self.syntax("expected digits after decimal point"));
            }
            let num = int_part
                .checked_mul(den)
                .and_then(|v| v.checked_add(frac))
                .ok_or_else(|| self.syntax("numeric literal out of range"))?;
            let (n, d) = reduce(num, den);
            let n64 = i64::try_from(n).map_err(|_| self.syntax("numeric literal out of range"))?;
            let d64 = i64::try_from(d).map_err(|_| self.syntax("numeric literal out of range"))?;
            Ok(if d64 == 1 { Expr::Int(n64) } else { Expr::Rat(n64, d64) })
        } else {
            let n = i64::try_from(int_part).map_err(|_| self.syntax("numeric literal out of range"))?;
            Ok(Expr::Int(n))
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .map_err(|_| self.syntax("invalid identifier"))?
            .to_string();
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        if FUNCS.contains(&name.as_str()) {
            self.skip_ws();
            self.expect(b'(')?;
            let first = self.expr()?;
            self.skip_ws();
            let e = if name == "atan2" {
                self.expect(b',')?;
                let second = self.expr()?;
                self.skip_ws();
                Expr::Atan2(Box::new(first), Box::new(second))
            } else {
                if self.peek() == Some(b',') {
                    return Err(self.syntax(&format!("`{name}` takes one argument")));
                }
                match name.as_str() {
                    "sin" => Expr::Sin(Box::new(first)),
                    "cos" => Expr::Cos(Box::new(first)),
                    "tan" => Expr::Tan(Box::new(first)),
                    "asin" => Expr::Asin(Box::new(first)),
                    "acos" => Expr::Acos(Box::new(first)),
                    "sqrt" => Expr::Sqrt(Box::new(first)),
                    _ => unreachable!(),
                }
            };
            self.expect(b')')?;
            return Ok(e);
        }
        match (self.lookup)(&name) {
            Some(s) => Ok(Expr::Sym(s)),
            None => Err(ParseError::UnknownIdentifier { name, offset: start }),
        }
    }
}

fn reduce(mut n: i128, mut d: i128) -> (i128, i128) {
    fn gcd(mut a: i128, mut b: i128) -> i128 {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    let g = gcd(n.abs(), d.abs()).max(1);
    n /= g;
    d /= g;
    (n, d)
}
