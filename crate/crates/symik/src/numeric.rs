//! Total numeric evaluation of canonical expressions. Every domain hazard
//! (asin/acos out of range, sqrt of a negative, atan2(0,0), division by ~0,
//! non-finite intermediates, unbound symbols) is reported as a `DomainError`;
//! no NaN or infinity ever escapes.

use crate::expr::{Expr, Sym};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

/// Tolerance for clamping asin/acos arguments and sqrt of tiny negatives:
/// |v| may exceed the domain edge by at most this much before it is an error.
pub const CLAMP_EPS: f64 = 1e-9;
/// Divisors smaller than this in magnitude are a division by zero.
pub const DIV_EPS: f64 = 1e-12;
/// Both atan2 arguments below this magnitude is a degenerate atan2.
pub const ATAN2_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainErrorKind {
    AsinOutOfRange,
    AcosOutOfRange,
    SqrtNegative,
    Atan2BothZero,
    DivisionByZero,
    UnboundSymbol,
    NonFinite,
}

impl fmt::Display for DomainErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainErrorKind::AsinOutOfRange => "asin argument out of range",
            DomainErrorKind::AcosOutOfRange => "acos argument out of range",
            DomainErrorKind::SqrtNegative => "sqrt of a negative value",
            DomainErrorKind::Atan2BothZero => "atan2 with both arguments zero",
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::UnboundSymbol => "unbound symbol",
            DomainErrorKind::NonFinite => "non-finite intermediate value",
        };
        f.write_str(s)
    }
}

/// A numeric evaluation failure, carrying the offending subexpression and the
/// numeric value that triggered it.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainError {
    pub kind: DomainErrorKind,
    pub expr: Expr,
    pub value: f64,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (value {:e}) in `{}`", self.kind, self.value, self.expr)
    }
}

impl std::error::Error for DomainError {}

fn err(kind: DomainErrorKind, expr: &Expr, value: f64) -> DomainError {
    DomainError { kind, expr: expr.clone(), value }
}

/// Symbol-to-value environment.
#[derive(Clone, Debug, Default)]
pub struct Bindings(BTreeMap<Sym, f64>);

impl Bindings {
    pub fn new() -> Self {
        Bindings(BTreeMap::new())
    }
    pub fn set(&mut self, s: Sym, v: f64) -> &mut Self {
        self.0.insert(s, v);
        self
    }
    pub fn get(&self, s: &Sym) -> Option<f64> {
        self.0.get(s).copied()
    }
    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &f64)> {
        self.0.iter()
    }
}

impl FromIterator<(Sym, f64)> for Bindings {
    fn from_iter<T: IntoIterator<Item = (Sym, f64)>>(iter: T) -> Self {
        Bindings(iter.into_iter().collect())
    }
}

/// Evaluate `e` under `env`. Total: every failure mode is a `DomainError`.
pub fn eval(e: &Expr, env: &Bindings) -> Result<f64, DomainError> {
    let v = match e {
        Expr::Int(n) => *n as f64,
        Expr::Rat(n, d) => *n as f64 / *d as f64,
        Expr::Pi => PI,
        Expr::Sym(s) => env
            .get(s)
            .ok_or_else(|| err(DomainErrorKind::UnboundSymbol, e, f64::NAN))?,
        Expr::Add(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += eval(t, env)?;
            }
            acc
        }
        Expr::Mul(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= eval(f, env)?;
            }
            acc
        }
        Expr::Pow(b, n) => {
            let v = eval(b, env)?;
            if *n < 0 {
                let p = v.powi(-n);
                if p.abs() < DIV_EPS {
                    return Err(err(DomainErrorKind::DivisionByZero, e, p));
                }
                1.0 / p
            } else {
                v.powi(*n)
            }
        }
        Expr::Sin(a) => eval(a, env)?.sin(),
        Expr::Cos(a) => eval(a, env)?.cos(),
        Expr::Tan(a) => eval(a, env)?.tan(),
        Expr::Asin(a) => {
            let v = eval(a, env)?;
            if v.abs() > 1.0 + CLAMP_EPS {
                return Err(err(DomainErrorKind::AsinOutOfRange, e, v));
            }
            v.clamp(-1.0, 1.0).asin()
        }
        Expr::Acos(a) => {
            let v = eval(a, env)?;
            if v.abs() > 1.0 + CLAMP_EPS {
                return Err(err(DomainErrorKind::AcosOutOfRange, e, v));
            }
            v.clamp(-1.0, 1.0).acos()
        }
        Expr::Atan2(y, x) => {
            let vy = eval(y, env)?;
            let vx = eval(x, env)?;
            if vy.abs() < ATAN2_EPS && vx.abs() < ATAN2_EPS {
                return Err(err(DomainErrorKind::Atan2BothZero, e, vy.abs().max(vx.abs())));
            }
            vy.atan2(vx)
        }
        Expr::Sqrt(a) => {
            let v = eval(a, env)?;
            if v < -CLAMP_EPS {
                return Err(err(DomainErrorKind::SqrtNegative, e, v));
            }
            v.max(0.0).sqrt()
        }
    };
    if !v.is_finite() {
        return Err(err(DomainErrorKind::NonFinite, e, v));
    }
    Ok(v)
}
