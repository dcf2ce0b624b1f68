//! Symbolic expression core: the `Expr` tree, canonicalization, substitution,
//! and the linear/trig-linear matchers the solvers are built on.
//!
//! Every public constructor returns a *canonical* expression, and every
//! function in the crate assumes its `Expr` inputs are canonical. Canonical
//! form is what makes structural equality meaningful: two expressions that
//! print the same compare equal, and `canon` is idempotent.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// What a symbol stands for. The variant order fixes symbol precedence in
/// canonical term ordering (joints first, pose entries last).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    JointRevolute,
    JointPrismatic,
    /// Combined angle standing for a signed sum of revolute joints,
    /// in chain order (e.g. th_23 = th_2 + th_3). The constituents listed
    /// here are unsigned; signs live in the registry relation.
    SumOfAngle(Vec<Sym>),
    DhConstant,
    PoseElement,
}

impl SymbolKind {
    fn rank(&self) -> u8 {
        match self {
            SymbolKind::JointRevolute => 0,
            SymbolKind::JointPrismatic => 1,
            SymbolKind::SumOfAngle(_) => 2,
            SymbolKind::DhConstant => 3,
            SymbolKind::PoseElement => 4,
        }
    }
}

impl PartialOrd for SymbolKind {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SymbolKind {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.rank().cmp(&other.rank()) {
            Ordering::Equal => match (self, other) {
                (SymbolKind::SumOfAngle(a), SymbolKind::SumOfAngle(b)) => a.cmp(b),
                _ => Ordering::Equal,
            },
            ord => ord,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

/// Shared, cheaply clonable symbol handle. Identity is by value
/// (kind + name), not by allocation.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Sym(Arc<Symbol>);

impl Sym {
    pub fn new(name: impl Into<String>, kind: SymbolKind) -> Self {
        Sym(Arc::new(Symbol { name: name.into(), kind }))
    }
    pub fn revolute(name: impl Into<String>) -> Self {
        Sym::new(name, SymbolKind::JointRevolute)
    }
    pub fn prismatic(name: impl Into<String>) -> Self {
        Sym::new(name, SymbolKind::JointPrismatic)
    }
    pub fn constant(name: impl Into<String>) -> Self {
        Sym::new(name, SymbolKind::DhConstant)
    }
    pub fn pose(name: impl Into<String>) -> Self {
        Sym::new(name, SymbolKind::PoseElement)
    }
    pub fn sum_of_angle(name: impl Into<String>, constituents: Vec<Sym>) -> Self {
        Sym::new(name, SymbolKind::SumOfAngle(constituents))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }
    pub fn kind(&self) -> &SymbolKind {
        &self.0.kind
    }
    pub fn is_revolute(&self) -> bool {
        matches!(self.0.kind, SymbolKind::JointRevolute)
    }
    pub fn is_prismatic(&self) -> bool {
        matches!(self.0.kind, SymbolKind::JointPrismatic)
    }
    pub fn is_sum_of_angle(&self) -> bool {
        matches!(self.0.kind, SymbolKind::SumOfAngle(_))
    }
    /// Constituent joints if this is a sum-of-angle symbol.
    pub fn constituents(&self) -> Option<&[Sym]> {
        match &self.0.kind {
            SymbolKind::SumOfAngle(c) => Some(c),
            _ => None,
        }
    }
    pub fn expr(&self) -> Expr {
        Expr::Sym(self.clone())
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Sym {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.kind.rank(), &self.0.name, &self.0.kind)
            .cmp(&(other.0.kind.rank(), &other.0.name, &other.0.kind))
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.name)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.name)
    }
}

/// Symbolic expression. The variant order is load-bearing: the derived `Ord`
/// is the canonical ordering used to sort terms and factors.
///
/// Canonical-form invariants (established by `canon`, assumed everywhere):
/// - `Rat(n, d)`: d > 1, gcd(|n|, d) = 1; integers are always `Int`.
/// - `Add`/`Mul` are flat (no nested same-variant children), sorted, and have
///   at least two operands; negation is a `-1` coefficient inside `Mul`.
/// - `Pow` never has exponent 0 or 1 and never a `Pow`/`Mul` base. A literal
///   base occurs only when the exact value would overflow an `i64`, and is
///   then an integer >= 2 with any sign extracted into the product.
/// - Like terms are collected; `k*sin(u)^2 + k*cos(u)^2` pairs are folded.
/// - `sin`/`tan`/`asin` carry sign-normalized arguments (odd), `cos` even.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Int(i64),
    Rat(i64, i64),
    Pi,
    Sym(Sym),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Tan(Box<Expr>),
    Asin(Box<Expr>),
    Acos(Box<Expr>),
    Atan2(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
}

// ---------------------------------------------------------------------------
// Exact rational arithmetic (i128 working width, checked).

/// Normalized rational: d > 0, gcd(|n|, d) = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Q {
    pub n: i128,
    pub d: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Q {
    pub const ZERO: Q = Q { n: 0, d: 1 };
    pub const ONE: Q = Q { n: 1, d: 1 };

    pub fn int(n: i128) -> Q {
        Q { n, d: 1 }
    }

    pub fn new(n: i128, d: i128) -> Option<Q> {
        if d == 0 {
            return None;
        }
        let sign = if d < 0 { -1 } else { 1 };
        let (n, d) = (n.checked_mul(sign)?, d.checked_mul(sign)?);
        let g = gcd(n, d);
        if g == 0 {
            return Some(Q::ZERO);
        }
        Some(Q { n: n / g, d: d / g })
    }

    pub fn add(self, o: Q) -> Option<Q> {
        let n = self.n.checked_mul(o.d)?.checked_add(o.n.checked_mul(self.d)?)?;
        Q::new(n, self.d.checked_mul(o.d)?)
    }

    pub fn mul(self, o: Q) -> Option<Q> {
        Q::new(self.n.checked_mul(o.n)?, self.d.checked_mul(o.d)?)
    }

    pub fn neg(self) -> Q {
        Q { n: -self.n, d: self.d }
    }

    pub fn recip(self) -> Option<Q> {
        if self.n == 0 {
            None
        } else {
            Q::new(self.d, self.n)
        }
    }

    pub fn is_zero(self) -> bool {
        self.n == 0
    }

    pub fn pow(self, exp: i32) -> Option<Q> {
        if exp == 0 {
            return Some(Q::ONE);
        }
        let base = if exp < 0 { self.recip()? } else { self };
        let mut acc = Q::ONE;
        for _ in 0..exp.unsigned_abs() {
            acc = acc.mul(base)?;
        }
        Some(acc)
    }

    /// Render as an `Int`/`Rat` expression if it fits in i64.
    pub fn to_expr(self) -> Option<Expr> {
        let n = i64::try_from(self.n).ok()?;
        let d = i64::try_from(self.d).ok()?;
        Some(if d == 1 { Expr::Int(n) } else { Expr::Rat(n, d) })
    }

    pub fn from_expr(e: &Expr) -> Option<Q> {
        match e {
            Expr::Int(n) => Some(Q::int(*n as i128)),
            Expr::Rat(n, d) => Q::new(*n as i128, *d as i128),
            _ => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.n as f64 / self.d as f64
    }
}

// ---------------------------------------------------------------------------
// Smart constructors. All of these canonicalize.

#[allow(clippy::should_implement_trait)] // associated constructors, not operator impls
impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Int(n)
    }

    pub fn rat(n: i64, d: i64) -> Expr {
        Q::new(n as i128, d as i128)
            .and_then(Q::to_expr)
            .unwrap_or(Expr::Rat(n, d))
    }

    pub fn sym(s: &Sym) -> Expr {
        Expr::Sym(s.clone())
    }

    pub fn add(ops: Vec<Expr>) -> Expr {
        canon_add(ops)
    }

    pub fn mul(ops: Vec<Expr>) -> Expr {
        canon_mul(ops)
    }

    pub fn pow(base: Expr, exp: i32) -> Expr {
        canon_pow(base, exp)
    }

    pub fn sin(arg: Expr) -> Expr {
        canon_sin(arg)
    }

    pub fn cos(arg: Expr) -> Expr {
        canon_cos(arg)
    }

    pub fn tan(arg: Expr) -> Expr {
        canon_tan(arg)
    }

    pub fn asin(arg: Expr) -> Expr {
        canon_asin(arg)
    }

    pub fn acos(arg: Expr) -> Expr {
        canon_acos(arg)
    }

    pub fn atan2(y: Expr, x: Expr) -> Expr {
        canon_atan2(y, x)
    }

    pub fn sqrt(arg: Expr) -> Expr {
        canon_sqrt(arg)
    }

    pub fn neg(e: Expr) -> Expr {
        canon_mul(vec![Expr::Int(-1), e])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        canon_add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        canon_mul(vec![a, canon_pow(b, -1)])
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Int(0))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Int(1))
    }

    /// Node count; the ranker's expression-size tie-breaker.
    pub fn size(&self) -> usize {
        match self {
            Expr::Int(_) | Expr::Rat(_, _) | Expr::Pi | Expr::Sym(_) => 1,
            Expr::Add(v) | Expr::Mul(v) => 1 + v.iter().map(Expr::size).sum::<usize>(),
            Expr::Pow(b, _) => 1 + b.size(),
            Expr::Sin(a) | Expr::Cos(a) | Expr::Tan(a) | Expr::Asin(a) | Expr::Acos(a)
            | Expr::Sqrt(a) => 1 + a.size(),
            Expr::Atan2(y, x) => 1 + y.size() + x.size(),
        }
    }

    /// All symbols occurring anywhere in the tree.
    pub fn free_syms(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_syms(&mut out);
        out
    }

    fn collect_syms(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Expr::Int(_) | Expr::Rat(_, _) | Expr::Pi => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Add(v) | Expr::Mul(v) => v.iter().for_each(|e| e.collect_syms(out)),
            Expr::Pow(b, _) => b.collect_syms(out),
            Expr::Sin(a) | Expr::Cos(a) | Expr::Tan(a) | Expr::Asin(a) | Expr::Acos(a)
            | Expr::Sqrt(a) => a.collect_syms(out),
            Expr::Atan2(y, x) => {
                y.collect_syms(out);
                x.collect_syms(out);
            }
        }
    }

    pub fn contains_sym(&self, s: &Sym) -> bool {
        match self {
            Expr::Int(_) | Expr::Rat(_, _) | Expr::Pi => false,
            Expr::Sym(t) => t == s,
            Expr::Add(v) | Expr::Mul(v) => v.iter().any(|e| e.contains_sym(s)),
            Expr::Pow(b, _) => b.contains_sym(s),
            Expr::Sin(a) | Expr::Cos(a) | Expr::Tan(a) | Expr::Asin(a) | Expr::Acos(a)
            | Expr::Sqrt(a) => a.contains_sym(s),
            Expr::Atan2(y, x) => y.contains_sym(s) || x.contains_sym(s),
        }
    }

    /// Symbols from `unknowns` that occur in this expression. A sum-of-angle
    /// symbol counts as itself, never as its constituents.
    pub fn free_unknowns(&self, unknowns: &BTreeSet<Sym>) -> BTreeSet<Sym> {
        self.free_syms().intersection(unknowns).cloned().collect()
    }

    /// The expression as a list of additive terms.
    pub fn terms(&self) -> Vec<Expr> {
        match self {
            Expr::Add(v) => v.clone(),
            Expr::Int(0) => vec![],
            other => vec![other.clone()],
        }
    }

    /// The expression as a list of multiplicative factors.
    pub fn factors(&self) -> Vec<Expr> {
        match self {
            Expr::Mul(v) => v.clone(),
            other => vec![other.clone()],
        }
    }
}

/// Re-canonicalize an arbitrary (possibly non-canonical) tree, bottom-up.
pub fn canon(e: Expr) -> Expr {
    match e {
        Expr::Int(_) | Expr::Pi | Expr::Sym(_) => e,
        Expr::Rat(n, d) => Expr::rat(n, d),
        Expr::Add(v) => canon_add(v.into_iter().map(canon).collect()),
        Expr::Mul(v) => canon_mul(v.into_iter().map(canon).collect()),
        Expr::Pow(b, e2) => canon_pow(canon(*b), e2),
        Expr::Sin(a) => canon_sin(canon(*a)),
        Expr::Cos(a) => canon_cos(canon(*a)),
        Expr::Tan(a) => canon_tan(canon(*a)),
        Expr::Asin(a) => canon_asin(canon(*a)),
        Expr::Acos(a) => canon_acos(canon(*a)),
        Expr::Atan2(y, x) => canon_atan2(canon(*y), canon(*x)),
        Expr::Sqrt(a) => canon_sqrt(canon(*a)),
    }
}

/// Replace symbols per `map` (whole-symbol substitution), then re-canon.
pub fn substitute_syms(e: &Expr, map: &BTreeMap<Sym, Expr>) -> Expr {
    fn walk(e: &Expr, map: &BTreeMap<Sym, Expr>) -> Expr {
        match e {
            Expr::Sym(s) => map.get(s).cloned().unwrap_or_else(|| e.clone()),
            Expr::Int(_) | Expr::Rat(_, _) | Expr::Pi => e.clone(),
            Expr::Add(v) => Expr::Add(v.iter().map(|x| walk(x, map)).collect()),
            Expr::Mul(v) => Expr::Mul(v.iter().map(|x| walk(x, map)).collect()),
            Expr::Pow(b, n) => Expr::Pow(Box::new(walk(b, map)), *n),
            Expr::Sin(a) => Expr::Sin(Box::new(walk(a, map))),
            Expr::Cos(a) => Expr::Cos(Box::new(walk(a, map))),
            Expr::Tan(a) => Expr::Tan(Box::new(walk(a, map))),
            Expr::Asin(a) => Expr::Asin(Box::new(walk(a, map))),
            Expr::Acos(a) => Expr::Acos(Box::new(walk(a, map))),
            Expr::Atan2(y, x) => Expr::Atan2(Box::new(walk(y, map)), Box::new(walk(x, map))),
            Expr::Sqrt(a) => Expr::Sqrt(Box::new(walk(a, map))),
        }
    }
    canon(walk(e, map))
}

// ---------------------------------------------------------------------------
// Canonicalization internals.

/// Max term count produced when distributing a product over sums.
const DISTRIBUTE_BOUND: usize = 256;
/// Fixpoint cap for the collect/Pythagorean loop inside one Add node.
const PYTHAG_CAP: usize = 64;

/// Split a canonical term into (rational coefficient, core). The core of a
/// pure constant is Int(1).
pub(crate) fn split_coeff(term: &Expr) -> (Q, Expr) {
    match term {
        Expr::Int(_) | Expr::Rat(_, _) => {
            (Q::from_expr(term).unwrap_or(Q::ONE), Expr::Int(1))
        }
        Expr::Mul(fs) => match Q::from_expr(&fs[0]) {
            Some(q) => {
                let rest: Vec<Expr> = fs[1..].to_vec();
                let core = if rest.len() == 1 { rest.into_iter().next().unwrap() } else { Expr::Mul(rest) };
                (q, core)
            }
            None => (Q::ONE, term.clone()),
        },
        other => (Q::ONE, other.clone()),
    }
}

/// Rebuild a term from (coefficient, core); both canonical.
pub(crate) fn join_coeff(q: Q, core: Expr) -> Option<Expr> {
    if q.is_zero() {
        return Some(Expr::Int(0));
    }
    let qe = q.to_expr()?;
    Some(match core {
        Expr::Int(1) => qe,
        Expr::Mul(fs) => {
            if q == Q::ONE {
                Expr::Mul(fs)
            } else {
                let mut v = Vec::with_capacity(fs.len() + 1);
                v.push(qe);
                v.extend(fs);
                Expr::Mul(v)
            }
        }
        other => {
            if q == Q::ONE {
                other
            } else {
                Expr::Mul(vec![qe, other])
            }
        }
    })
}

fn canon_add(ops: Vec<Expr>) -> Expr {
    // Flatten.
    let mut terms: Vec<Expr> = Vec::with_capacity(ops.len());
    for op in ops {
        match op {
            Expr::Add(v) => terms.extend(v),
            Expr::Int(0) => {}
            other => terms.push(other),
        }
    }

    for _ in 0..PYTHAG_CAP {
        // Collect like terms by core.
        let mut map: BTreeMap<Expr, Q> = BTreeMap::new();
        let mut leftovers: Vec<Expr> = Vec::new();
        for t in &terms {
            let (q, core) = split_coeff(t);
            match map.get(&core) {
                Some(prev) => match prev.add(q) {
                    Some(s) if s.to_expr().is_some() => {
                        map.insert(core, s);
                    }
                    _ => leftovers.push(t.clone()),
                },
                None => {
                    if q.to_expr().is_some() {
                        map.insert(core, q);
                    } else {
                        leftovers.push(t.clone());
                    }
                }
            }
        }
        terms = Vec::with_capacity(map.len() + leftovers.len());
        for (core, q) in map {
            if q.is_zero() {
                continue;
            }
            if let Some(t) = join_coeff(q, core) {
                if !t.is_zero() {
                    terms.push(t);
                }
            }
        }
        terms.extend(leftovers);

        if !pythag_collapse(&mut terms) {
            break;
        }
    }

    match terms.len() {
        0 => Expr::Int(0),
        1 => terms.pop().unwrap(),
        _ => Expr::Add(terms),
    }
}

/// One pass of `k*M*sin(u)^2 + k*M*cos(u)^2 -> k*M`. Returns true if a pair
/// was folded (caller loops to fixpoint).
fn pythag_collapse(terms: &mut Vec<Expr>) -> bool {
    for i in 0..terms.len() {
        let fs = terms[i].factors();
        for (fi, f) in fs.iter().enumerate() {
            let u = match f {
                Expr::Pow(b, 2) => match &**b {
                    Expr::Sin(u) => Some((*u.clone(), true)),
                    Expr::Cos(u) => Some((*u.clone(), false)),
                    _ => None,
                },
                _ => None,
            };
            let Some((u, is_sin)) = u else { continue };
            let partner_f = if is_sin {
                Expr::Pow(Box::new(Expr::Cos(Box::new(u.clone()))), 2)
            } else {
                Expr::Pow(Box::new(Expr::Sin(Box::new(u))), 2)
            };
            let mut partner_fs = fs.clone();
            partner_fs[fi] = partner_f;
            let partner = canon_mul(partner_fs);
            let found = terms
                .iter()
                .enumerate()
                .find(|(j, t)| *j != i && **t == partner)
                .map(|(j, _)| j);
            if let Some(j) = found {
                let mut rest = fs.clone();
                rest.remove(fi);
                let folded = canon_mul(rest);
                let (lo, hi) = (i.min(j), i.max(j));
                terms.remove(hi);
                terms.remove(lo);
                terms.push(folded);
                return true;
            }
        }
    }
    false
}

fn canon_mul(ops: Vec<Expr>) -> Expr {
    // Flatten.
    let mut factors: Vec<Expr> = Vec::with_capacity(ops.len());
    for op in ops {
        match op {
            Expr::Mul(v) => factors.extend(v),
            Expr::Int(1) => {}
            other => factors.push(other),
        }
    }

    // Fold the rational coefficient.
    let mut coeff = Q::ONE;
    let mut rest: Vec<Expr> = Vec::with_capacity(factors.len());
    for f in factors {
        match Q::from_expr(&f) {
            Some(q) => {
                if q.is_zero() {
                    return Expr::Int(0);
                }
                match coeff.mul(q) {
                    Some(c) if c.to_expr().is_some() => coeff = c,
                    _ => rest.push(f),
                }
            }
            None => rest.push(f),
        }
    }

    // Collect exponents per base.
    let mut pows: BTreeMap<Expr, i32> = BTreeMap::new();
    let mut uncollected: Vec<Expr> = Vec::new();
    for f in rest {
        let (base, exp) = match f {
            Expr::Pow(b, e) => (*b, e),
            other => (other, 1),
        };
        match pows.get(&base) {
            Some(prev) => match prev.checked_add(exp) {
                Some(s) => {
                    pows.insert(base, s);
                }
                None => uncollected.push(if exp == 1 { base } else { Expr::Pow(Box::new(base), exp) }),
            },
            None => {
                pows.insert(base, exp);
            }
        }
    }

    // Rebuild factors; exponent merges can create reducible shapes
    // (sqrt(x)*sqrt(x) -> x), so re-canon through canon_pow.
    let mut out: Vec<Expr> = Vec::with_capacity(pows.len() + uncollected.len());
    let mut needs_reflatten = false;
    for (base, exp) in pows {
        if exp == 0 {
            continue;
        }
        let f = if exp == 1 { base } else { canon_pow(base, exp) };
        match &f {
            Expr::Int(_) | Expr::Rat(_, _) | Expr::Mul(_) => needs_reflatten = true,
            _ => {}
        }
        if !f.is_one() {
            out.push(f);
        }
    }
    out.extend(uncollected);

    if needs_reflatten {
        if let Some(ce) = coeff.to_expr() {
            out.push(ce);
            return canon_mul(out);
        }
    }

    // Distribute over exp-1 Add factors when the result stays small.
    let add_positions: Vec<usize> = out
        .iter()
        .enumerate()
        .filter(|(_, f)| matches!(f, Expr::Add(_)))
        .map(|(i, _)| i)
        .collect();
    if !add_positions.is_empty() {
        let mut n_terms: usize = 1;
        for &i in &add_positions {
            if let Expr::Add(ts) = &out[i] {
                n_terms = n_terms.saturating_mul(ts.len());
            }
        }
        if n_terms <= DISTRIBUTE_BOUND {
            let adds: Vec<Vec<Expr>> = add_positions
                .iter()
                .map(|&i| match &out[i] {
                    Expr::Add(ts) => ts.clone(),
                    _ => unreachable!(),
                })
                .collect();
            let others: Vec<Expr> = out
                .iter()
                .enumerate()
                .filter(|(i, _)| !add_positions.contains(i))
                .map(|(_, f)| f.clone())
                .collect();
            let coeff_expr = coeff.to_expr();
            let mut terms: Vec<Expr> = Vec::with_capacity(n_terms);
            let mut idx = vec![0usize; adds.len()];
            loop {
                let mut parts: Vec<Expr> = Vec::with_capacity(others.len() + adds.len() + 1);
                if let Some(ce) = &coeff_expr {
                    parts.push(ce.clone());
                }
                parts.extend(others.iter().cloned());
                for (k, sel) in idx.iter().enumerate() {
                    parts.push(adds[k][*sel].clone());
                }
                terms.push(canon_mul(parts));
                // Advance the mixed-radix counter.
                let mut k = 0;
                loop {
                    if k == adds.len() {
                        return canon_add(terms);
                    }
                    idx[k] += 1;
                    if idx[k] < adds[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
    }

    out.sort();
    match (coeff == Q::ONE, out.len()) {
        (true, 0) => Expr::Int(1),
        (true, 1) => out.pop().unwrap(),
        (true, _) => Expr::Mul(out),
        (false, 0) => coeff.to_expr().unwrap_or(Expr::Int(1)),
        (false, _) => {
            let ce = match coeff.to_expr() {
                Some(e) => e,
                None => return Expr::Mul(out), // unrepresentable coeff: drop into factors? keep product sane
            };
            if coeff == Q::int(-1) && out.len() == 1 {
                // canonical form for a negated atom is still Mul[-1, x]
            }
            let mut v = Vec::with_capacity(out.len() + 1);
            v.push(ce);
            v.extend(out);
            Expr::Mul(v)
        }
    }
}

fn canon_pow(base: Expr, exp: i32) -> Expr {
    if exp == 0 {
        return Expr::Int(1);
    }
    if exp == 1 {
        return base;
    }
    match base {
        Expr::Int(0) => {
            if exp > 0 {
                Expr::Int(0)
            } else {
                // every negative power of zero is the same division-by-zero
                // poison; one exponent keeps the form unique
                Expr::Pow(Box::new(Expr::Int(0)), -1)
            }
        }
        Expr::Int(_) | Expr::Rat(_, _) => {
            if base == Expr::Int(1) {
                return Expr::Int(1);
            }
            if base == Expr::Int(-1) {
                return Expr::Int(if exp % 2 == 0 { 1 } else { -1 });
            }
            let q = Q::from_expr(&base).unwrap();
            // |base| >= 2 overflows an i64 past exponent 64, so larger
            // exponents cannot fold; the bound also caps Q::pow's loop
            if exp.unsigned_abs() <= 64 {
                if let Some(e) = q.pow(exp).and_then(Q::to_expr) {
                    return e;
                }
            }
            // the exact value does not fit: keep a power form, normalized
            // to integer bases >= 2 with the sign extracted so equal values
            // share one representation
            match (base, exp.checked_neg()) {
                (Expr::Rat(n, d), Some(neg)) => {
                    canon_mul(vec![canon_pow(Expr::Int(n), exp), canon_pow(Expr::Int(d), neg)])
                }
                (Expr::Int(n), _) if n < 0 && n != i64::MIN => {
                    let mag = canon_pow(Expr::Int(-n), exp);
                    if exp % 2 == 0 {
                        mag
                    } else {
                        canon_mul(vec![Expr::Int(-1), mag])
                    }
                }
                (base, _) => Expr::Pow(Box::new(base), exp),
            }
        }
        Expr::Pow(b, m) => match m.checked_mul(exp) {
            Some(me) => canon_pow(*b, me),
            None => Expr::Pow(Box::new(Expr::Pow(b, m)), exp),
        },
        Expr::Mul(fs) => canon_mul(fs.into_iter().map(|f| canon_pow(f, exp)).collect()),
        Expr::Sqrt(x) => {
            let k = exp.div_euclid(2);
            let r = exp.rem_euclid(2);
            let mut parts = vec![canon_pow((*x).clone(), k)];
            if r == 1 {
                parts.push(Expr::Sqrt(x));
            }
            canon_mul(parts)
        }
        other => Expr::Pow(Box::new(other), exp),
    }
}

/// `Some(q)` if the expression is exactly `q * pi` with rational literal q
/// (including 0).
fn pi_multiple(e: &Expr) -> Option<Q> {
    match e {
        Expr::Int(0) => Some(Q::ZERO),
        Expr::Pi => Some(Q::ONE),
        Expr::Mul(fs) if fs.len() == 2 && fs[1] == Expr::Pi => Q::from_expr(&fs[0]),
        _ => None,
    }
}

/// Sign convention for odd/even argument normalization: the sign of the
/// leading rational coefficient of the first term.
fn neg_core(e: &Expr) -> bool {
    match e {
        Expr::Int(n) => *n < 0,
        Expr::Rat(n, _) => *n < 0,
        Expr::Mul(fs) => matches!(&fs[0], Expr::Int(n) if *n < 0)
            || matches!(&fs[0], Expr::Rat(n, _) if *n < 0),
        Expr::Add(ts) => neg_core(&ts[0]),
        _ => false,
    }
}

fn canon_sin(arg: Expr) -> Expr {
    if let Some(q) = pi_multiple(&arg) {
        // sin(q*pi) for q with denominator 1 or 2.
        if q.d == 1 {
            return Expr::Int(0);
        }
        if q.d == 2 {
            // q*pi with q = k/2; sin = +1 for k ≡ 1 (mod 4), -1 for k ≡ 3.
            let k = q.n.rem_euclid(4);
            return Expr::Int(if k == 1 { 1 } else { -1 });
        }
    }
    if neg_core(&arg) {
        return canon_mul(vec![Expr::Int(-1), canon_sin(Expr::neg(arg))]);
    }
    Expr::Sin(Box::new(arg))
}

fn canon_cos(arg: Expr) -> Expr {
    if let Some(q) = pi_multiple(&arg) {
        if q.d == 1 {
            return Expr::Int(if q.n.rem_euclid(2) == 0 { 1 } else { -1 });
        }
        if q.d == 2 {
            return Expr::Int(0);
        }
    }
    if neg_core(&arg) {
        return canon_cos(Expr::neg(arg));
    }
    Expr::Cos(Box::new(arg))
}

fn canon_tan(arg: Expr) -> Expr {
    if let Some(q) = pi_multiple(&arg) {
        if q.d == 1 {
            return Expr::Int(0);
        }
    }
    if neg_core(&arg) {
        return canon_mul(vec![Expr::Int(-1), canon_tan(Expr::neg(arg))]);
    }
    Expr::Tan(Box::new(arg))
}

fn half_pi(sign: i64) -> Expr {
    canon_mul(vec![Expr::rat(sign, 2), Expr::Pi])
}

fn canon_asin(arg: Expr) -> Expr {
    match &arg {
        Expr::Int(0) => return Expr::Int(0),
        Expr::Int(1) => return half_pi(1),
        Expr::Int(-1) => return half_pi(-1),
        _ => {}
    }
    if neg_core(&arg) {
        return canon_mul(vec![Expr::Int(-1), canon_asin(Expr::neg(arg))]);
    }
    Expr::Asin(Box::new(arg))
}

fn canon_acos(arg: Expr) -> Expr {
    match &arg {
        Expr::Int(0) => return half_pi(1),
        Expr::Int(1) => return Expr::Int(0),
        Expr::Int(-1) => return Expr::Pi,
        _ => {}
    }
    Expr::Acos(Box::new(arg))
}

fn canon_atan2(y: Expr, x: Expr) -> Expr {
    let (qy, qx) = (Q::from_expr(&y), Q::from_expr(&x));
    if let (Some(qy), Some(qx)) = (qy, qx) {
        if qy.is_zero() && qx.n > 0 {
            return Expr::Int(0);
        }
        if qy.is_zero() && qx.n < 0 {
            return Expr::Pi;
        }
        if qx.is_zero() && qy.n > 0 {
            return half_pi(1);
        }
        if qx.is_zero() && qy.n < 0 {
            return half_pi(-1);
        }
    }
    Expr::Atan2(Box::new(y), Box::new(x))
}

fn isqrt_exact(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    let r = (n as f64).sqrt() as i128;
    for c in [r - 1, r, r + 1] {
        if c >= 0 && c * c == n {
            return Some(c);
        }
    }
    None
}

fn canon_sqrt(arg: Expr) -> Expr {
    if let Some(q) = Q::from_expr(&arg) {
        if q.n >= 0 {
            if let (Some(rn), Some(rd)) = (isqrt_exact(q.n), isqrt_exact(q.d)) {
                if let Some(e) = Q::new(rn, rd).and_then(Q::to_expr) {
                    return e;
                }
            }
        }
    }
    Expr::Sqrt(Box::new(arg))
}

// ---------------------------------------------------------------------------
// Matchers.

/// Decompose `e ≡ a + b*x` (x a bare symbol, occurring only linearly and
/// outside any function argument or power). Returns `None` if x occurs any
/// other way; if x does not occur at all, returns `(e, 0)`.
pub fn match_linear(e: &Expr, x: &Sym) -> Option<(Expr, Expr)> {
    let mut a_terms: Vec<Expr> = Vec::new();
    let mut b_terms: Vec<Expr> = Vec::new();
    for t in e.terms() {
        if !t.contains_sym(x) {
            a_terms.push(t);
            continue;
        }
        let fs = t.factors();
        let mut hits = 0usize;
        let mut rest: Vec<Expr> = Vec::new();
        for f in fs {
            if f == Expr::Sym(x.clone()) {
                hits += 1;
            } else if f.contains_sym(x) {
                return None; // x inside a function, power, or sum factor
            } else {
                rest.push(f);
            }
        }
        if hits != 1 {
            return None; // x^2 and worse
        }
        b_terms.push(canon_mul(rest));
    }
    Some((canon_add(a_terms), canon_add(b_terms)))
}

/// Decompose `e ≡ a*sin(x) + b*cos(x) + c` where x occurs *only* as the
/// direct argument of sin/cos at power 1. a, b, c may contain any symbols
/// other than x (callers decide whether they must be known). Returns `None`
/// if x occurs any other way, or not at all.
pub fn match_trig_linear(e: &Expr, x: &Sym) -> Option<(Expr, Expr, Expr)> {
    let sin_x = Expr::Sin(Box::new(Expr::Sym(x.clone())));
    let cos_x = Expr::Cos(Box::new(Expr::Sym(x.clone())));
    let mut a_terms: Vec<Expr> = Vec::new();
    let mut b_terms: Vec<Expr> = Vec::new();
    let mut c_terms: Vec<Expr> = Vec::new();
    let mut seen = false;
    for t in e.terms() {
        if !t.contains_sym(x) {
            c_terms.push(t);
            continue;
        }
        seen = true;
        let fs = t.factors();
        let mut kind: Option<bool> = None; // true = sin, false = cos
        let mut rest: Vec<Expr> = Vec::new();
        for f in fs {
            if f == sin_x {
                if kind.is_some() {
                    return None; // sin*cos or sin*sin products
                }
                kind = Some(true);
            } else if f == cos_x {
                if kind.is_some() {
                    return None;
                }
                kind = Some(false);
            } else if f.contains_sym(x) {
                return None; // x under any other shape
            } else {
                rest.push(f);
            }
        }
        match kind {
            Some(true) => a_terms.push(canon_mul(rest)),
            Some(false) => b_terms.push(canon_mul(rest)),
            None => return None,
        }
    }
    if !seen {
        return None;
    }
    Some((canon_add(a_terms), canon_add(b_terms), canon_add(c_terms)))
}

// ---------------------------------------------------------------------------
// Printing (the expression grammar; parse ∘ print = identity on canonical
// expressions).

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_expr(self))
    }
}

/// Render in the expression grammar.
pub fn print_expr(e: &Expr) -> String {
    print_add(e)
}

fn print_add(e: &Expr) -> String {
    match e {
        Expr::Add(ts) => {
            let mut out = String::new();
            for (i, t) in ts.iter().enumerate() {
                let (q, _) = split_coeff(t);
                if i == 0 {
                    out.push_str(&print_term(t));
                } else if q.n < 0 {
                    out.push_str(" - ");
                    out.push_str(&print_term(&Expr::neg(t.clone())));
                } else {
                    out.push_str(" + ");
                    out.push_str(&print_term(t));
                }
            }
            out
        }
        other => print_term(other),
    }
}

fn print_term(e: &Expr) -> String {
    match e {
        Expr::Mul(fs) => {
            let mut num: Vec<String> = Vec::new();
            let mut den: Vec<String> = Vec::new();
            let mut neg = false;
            for f in fs {
                match f {
                    Expr::Int(-1) => neg = true,
                    Expr::Int(n) if *n < 0 => {
                        neg = true;
                        num.push(n.abs().to_string());
                    }
                    Expr::Rat(n, d) if *n < 0 => {
                        neg = true;
                        num.push(format!("{}/{}", n.abs(), d));
                    }
                    Expr::Pow(b, -1) => den.push(print_base(b)),
                    Expr::Pow(b, n) if *n < 0 => {
                        den.push(format!("{}^{}", print_base(b), n.unsigned_abs()));
                    }
                    Expr::Pow(b, n) => num.push(format!("{}^{}", print_base(b), n)),
                    other => num.push(print_factor(other)),
                }
            }
            let mut out = String::new();
            if neg {
                out.push('-');
            }
            if num.is_empty() {
                out.push('1');
            } else {
                out.push_str(&num.join("*"));
            }
            for d in den {
                out.push('/');
                out.push_str(&d);
            }
            out
        }
        Expr::Pow(b, -1) => format!("1/{}", print_base(b)),
        Expr::Pow(b, n) if *n < 0 => format!("1/{}^{}", print_base(b), n.unsigned_abs()),
        Expr::Pow(b, n) => format!("{}^{}", print_base(b), n),
        other => print_factor(other),
    }
}

/// A power base or denominator factor: like `print_factor`, but rational
/// literals also get parentheses — bare `1/2` would re-associate as a
/// division chain in those positions.
fn print_base(e: &Expr) -> String {
    match e {
        Expr::Rat(n, d) if *n > 0 => format!("({n}/{d})"),
        other => print_factor(other),
    }
}

fn print_factor(e: &Expr) -> String {
    match e {
        Expr::Int(n) => {
            if *n < 0 {
                format!("(-{})", n.abs())
            } else {
                n.to_string()
            }
        }
        Expr::Rat(n, d) => {
            if *n < 0 {
                format!("(-{}/{})", n.abs(), d)
            } else {
                format!("{}/{}", n, d)
            }
        }
        Expr::Pi => "pi".to_string(),
        Expr::Sym(s) => s.name().to_string(),
        Expr::Add(_) => format!("({})", print_add(e)),
        Expr::Mul(_) | Expr::Pow(_, _) => format!("({})", print_term(e)),
        Expr::Sin(a) => format!("sin({})", print_add(a)),
        Expr::Cos(a) => format!("cos({})", print_add(a)),
        Expr::Tan(a) => format!("tan({})", print_add(a)),
        Expr::Asin(a) => format!("asin({})", print_add(a)),
        Expr::Acos(a) => format!("acos({})", print_add(a)),
        Expr::Atan2(y, x) => format!("atan2({}, {})", print_add(y), print_add(x)),
        Expr::Sqrt(a) => format!("sqrt({})", print_add(a)),
    }
}
