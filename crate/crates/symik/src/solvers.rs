//! The rule-based equation solvers. Each inspects the current equation set
//! for one unsolved variable and proposes closed-form candidate solutions;
//! the ranker picks the best-ranked candidate for commitment.

use crate::expr::{match_linear, match_trig_linear, Expr, Sym, SymbolKind};
use crate::kinematics::ScalarEquation;
use crate::rewrite::{contract_trig_pure, expand_soa_in_trig, SoaRegistry};
use std::collections::BTreeSet;

// Rank scores grade the *form* of the closed-form answer, not the solver
// that produced it: an exact single atan2 beats sign-ambiguous atan2 pairs,
// which beat raw inverse-trig pairs; plain linear isolation sits between.
pub const RANK_ATAN2_SINGLE: u32 = 100;
pub const RANK_LINEAR: u32 = 90;
pub const RANK_ATAN2_PAIR: u32 = 80;
pub const RANK_INVERSE_TRIG_PAIR: u32 = 60;

/// Read-only view of the solve state handed to each solver.
pub struct SolveContext<'a> {
    pub equations: &'a [ScalarEquation],
    /// Unsolved unknowns, combined angles included.
    pub unsolved: &'a BTreeSet<Sym>,
    /// Already-solved unknowns.
    pub solved: &'a BTreeSet<Sym>,
    pub registry: &'a SoaRegistry,
}

impl SolveContext<'_> {
    /// Known: free of unsolved unknowns (constants, pose elements and solved
    /// joints are all fair game in a closed-form answer).
    pub fn is_known(&self, e: &Expr) -> bool {
        e.free_unknowns(self.unsolved).is_empty()
    }
}

/// A proposed closed form for one variable. `branches` are the alternative
/// expressions (multiple roots); `dependencies` the solved unknowns the
/// branches reference, unioned.
#[derive(Clone, Debug)]
pub struct CandidateSolution {
    pub var: Sym,
    pub solver: &'static str,
    pub rank: u32,
    pub branches: Vec<Expr>,
    pub dependencies: BTreeSet<Sym>,
    /// Indices into the equation list this candidate was derived from.
    pub eq_ids: Vec<usize>,
}

fn candidate(
    ctx: &SolveContext,
    var: &Sym,
    solver: &'static str,
    rank: u32,
    branches: Vec<Expr>,
    eq_ids: Vec<usize>,
) -> CandidateSolution {
    let mut dependencies = BTreeSet::new();
    for b in &branches {
        for s in b.free_syms() {
            if ctx.solved.contains(&s) {
                dependencies.insert(s);
            }
        }
    }
    CandidateSolution { var: var.clone(), solver, rank, branches, dependencies, eq_ids }
}

fn single_unknown<'e>(
    ctx: &'e SolveContext,
    x: &Sym,
) -> impl Iterator<Item = (usize, &'e ScalarEquation)> {
    let x = x.clone();
    ctx.equations
        .iter()
        .enumerate()
        .filter(move |(_, eq)| eq.unknowns.len() == 1 && eq.unknowns.contains(&x))
}

fn parameter_only(e: &Expr) -> bool {
    e.free_syms().iter().all(|s| matches!(s.kind(), SymbolKind::DhConstant))
}

fn pose_free(e: &Expr) -> bool {
    e.free_syms().iter().all(|s| !matches!(s.kind(), SymbolKind::PoseElement))
}

/// Linear isolation `a + b*x = 0  =>  x = -a/b`, plus solving a combined
/// angle relation when every other symbol in it is already solved.
pub fn solve_algebra(ctx: &SolveContext, x: &Sym) -> Vec<CandidateSolution> {
    let mut out = Vec::new();
    for (i, eq) in single_unknown(ctx, x) {
        let Some((a, b)) = match_linear(&eq.resid, x) else { continue };
        if b.is_zero() || !ctx.is_known(&b) || !ctx.is_known(&a) {
            continue;
        }
        let branch = Expr::div(Expr::neg(a), b);
        out.push(candidate(ctx, x, "algebra", RANK_LINEAR, vec![branch], vec![i]));
    }
    for rec in ctx.registry.records() {
        let mut syms = vec![rec.combined.clone()];
        syms.extend(rec.parts.iter().map(|(_, p)| p.clone()));
        if !syms.contains(x) || syms.iter().any(|s| s != x && !ctx.solved.contains(s)) {
            continue;
        }
        let branch = if rec.combined == *x {
            rec.sum()
        } else {
            let sign = rec.parts.iter().find(|(_, p)| p == x).map(|(s, _)| *s).unwrap();
            let mut terms = vec![rec.combined.expr()];
            for (s, p) in &rec.parts {
                if p != x {
                    terms.push(Expr::mul(vec![Expr::Int(-i64::from(*s)), p.expr()]));
                }
            }
            let inner = Expr::add(terms);
            if sign >= 0 { inner } else { Expr::neg(inner) }
        };
        out.push(candidate(ctx, x, "algebra", RANK_LINEAR, vec![branch], vec![]));
    }
    out
}

/// Pure `a*sin(x) + c = 0` or `b*cos(x) + c = 0`, two inverse-trig branches.
pub fn solve_sine_or_cosine(ctx: &SolveContext, x: &Sym) -> Vec<CandidateSolution> {
    let mut out = Vec::new();
    for (i, eq) in single_unknown(ctx, x) {
        let Some((a, b, c)) = match_trig_linear(&eq.resid, x) else { continue };
        if !ctx.is_known(&a) || !ctx.is_known(&b) || !ctx.is_known(&c) {
            continue;
        }
        let branches = if b.is_zero() && !a.is_zero() {
            let q = Expr::div(Expr::neg(c), a);
            vec![Expr::asin(q.clone()), Expr::sub(Expr::Pi, Expr::asin(q))]
        } else if a.is_zero() && !b.is_zero() {
            let q = Expr::div(Expr::neg(c), b);
            vec![Expr::acos(q.clone()), Expr::neg(Expr::acos(q))]
        } else {
            continue;
        };
        out.push(candidate(ctx, x, "sine_or_cosine", RANK_INVERSE_TRIG_PAIR, branches, vec![i]));
    }
    out
}

/// Pair a `F1*sin(x) + K1 = 0` equation with a `F2*cos(x) + K2 = 0` one
/// (rotation columns only). Both `F` known gives one exact atan2 branch;
/// otherwise a known ratio `F1/F2` still fixes the tangent up to sign.
pub fn solve_tangent(ctx: &SolveContext, x: &Sym) -> Vec<CandidateSolution> {
    struct Half {
        id: usize,
        f: Expr,
        k: Expr,
    }
    let mut sins: Vec<Half> = Vec::new();
    let mut coss: Vec<Half> = Vec::new();
    for (i, eq) in ctx.equations.iter().enumerate() {
        if eq.col > 2 || !eq.unknowns.contains(x) {
            continue;
        }
        let Some((a, b, c)) = match_trig_linear(&eq.resid, x) else { continue };
        if !ctx.is_known(&c) {
            continue;
        }
        if b.is_zero() && !a.is_zero() {
            sins.push(Half { id: i, f: a, k: c });
        } else if a.is_zero() && !b.is_zero() {
            coss.push(Half { id: i, f: b, k: c });
        }
    }
    let mut out = Vec::new();
    for s in &sins {
        for c in &coss {
            if ctx.is_known(&s.f) && ctx.is_known(&c.f) {
                let y = Expr::div(Expr::neg(s.k.clone()), s.f.clone());
                let xc = Expr::div(Expr::neg(c.k.clone()), c.f.clone());
                out.push(candidate(
                    ctx,
                    x,
                    "tangent",
                    RANK_ATAN2_SINGLE,
                    vec![Expr::atan2(y, xc)],
                    vec![s.id, c.id],
                ));
            } else {
                let rho = Expr::div(s.f.clone(), c.f.clone());
                if rho.is_zero() || !ctx.is_known(&rho) {
                    continue;
                }
                let b1 = Expr::atan2(
                    Expr::div(Expr::neg(s.k.clone()), rho.clone()),
                    Expr::neg(c.k.clone()),
                );
                let b2 = Expr::atan2(Expr::div(s.k.clone(), rho.clone()), c.k.clone());
                out.push(candidate(
                    ctx,
                    x,
                    "tangent",
                    RANK_ATAN2_PAIR,
                    vec![b1, b2],
                    vec![s.id, c.id],
                ));
            }
        }
    }
    out
}

/// One equation `a*sin(x) + b*cos(x) + c = 0` with both trig coefficients
/// present.
pub fn solve_sin_and_cos(ctx: &SolveContext, x: &Sym) -> Vec<CandidateSolution> {
    let mut out = Vec::new();
    for (i, eq) in single_unknown(ctx, x) {
        let Some((a, b, c)) = match_trig_linear(&eq.resid, x) else { continue };
        if a.is_zero() || b.is_zero() || !ctx.is_known(&a) || !ctx.is_known(&b) || !ctx.is_known(&c)
        {
            continue;
        }
        // in the homogeneous case symbolic coefficients can vanish together
        // on exactly the poses being solved (atan2(0,0)); only fixed robot
        // parameters guarantee a well-defined direction
        if c.is_zero() && !(parameter_only(&a) && parameter_only(&b)) {
            continue;
        }
        let branches = phase_shift_branches(&a, &b, &c);
        out.push(candidate(ctx, x, "sinANDcos", RANK_ATAN2_PAIR, branches, vec![i]));
    }
    out
}

/// Closed form for `a*sin(x) + b*cos(x) + c = 0` (not both a, b zero):
/// homogeneous case gives the two tangent roots, otherwise the phase-shift
/// form with a +/- square root.
fn phase_shift_branches(a: &Expr, b: &Expr, c: &Expr) -> Vec<Expr> {
    if c.is_zero() {
        let first = Expr::atan2(Expr::neg(b.clone()), a.clone());
        vec![first.clone(), Expr::add(vec![first, Expr::Pi])]
    } else {
        let radicand = Expr::add(vec![
            Expr::pow(a.clone(), 2),
            Expr::pow(b.clone(), 2),
            Expr::neg(Expr::pow(c.clone(), 2)),
        ]);
        let r = Expr::sqrt(radicand);
        let base = Expr::atan2(a.clone(), b.clone());
        vec![
            Expr::add(vec![base.clone(), Expr::atan2(r.clone(), Expr::neg(c.clone()))]),
            Expr::add(vec![base, Expr::atan2(Expr::neg(r), Expr::neg(c.clone()))]),
        ]
    }
}

/// Two independent equations linear in `sin(x)`, `cos(x)` whose coefficient
/// rows are orthogonal rotations of each other; Cramer gives both sine and
/// cosine, hence a single atan2 branch.
pub fn solve_simultaneous(ctx: &SolveContext, x: &Sym) -> Vec<CandidateSolution> {
    struct Full {
        id: usize,
        a: Expr,
        b: Expr,
        c: Expr,
    }
    let mut fulls: Vec<Full> = Vec::new();
    for (i, eq) in single_unknown(ctx, x) {
        // orthogonal-pair structure only arises in the translation column;
        // rotation rows pair up too but belong to the tangent rule
        if eq.col != 3 {
            continue;
        }
        let Some((a, b, c)) = match_trig_linear(&eq.resid, x) else { continue };
        if a.is_zero() || b.is_zero() || !ctx.is_known(&a) || !ctx.is_known(&b) || !ctx.is_known(&c)
        {
            continue;
        }
        fulls.push(Full { id: i, a, b, c });
    }
    let mut out = Vec::new();
    for i in 0..fulls.len() {
        for j in i + 1..fulls.len() {
            for (p, q) in [(i, j), (j, i)] {
                let e1 = &fulls[p];
                let e2 = &fulls[q];
                // accept (a2,b2) = (-b1,a1), or the flipped (b1,-a1) after
                // negating the second equation
                let (a2, b2, c2) = if e2.a == Expr::neg(e1.b.clone()) && e2.b == e1.a {
                    (e2.a.clone(), e2.b.clone(), e2.c.clone())
                } else if e2.a == e1.b && e2.b == Expr::neg(e1.a.clone()) {
                    (Expr::neg(e2.a.clone()), Expr::neg(e2.b.clone()), Expr::neg(e2.c.clone()))
                } else {
                    continue;
                };
                let s_num = Expr::sub(
                    Expr::mul(vec![e1.b.clone(), c2.clone()]),
                    Expr::mul(vec![b2, e1.c.clone()]),
                );
                let c_num = Expr::sub(
                    Expr::mul(vec![a2, e1.c.clone()]),
                    Expr::mul(vec![e1.a.clone(), c2]),
                );
                if s_num.is_zero() && c_num.is_zero() {
                    continue;
                }
                out.push(candidate(
                    ctx,
                    x,
                    "simultaneous",
                    RANK_ATAN2_SINGLE,
                    vec![Expr::atan2(s_num, c_num)],
                    vec![e1.id, e2.id],
                ));
                break;
            }
        }
    }
    out
}

/// Square-and-add two translation equations: the unknown-bearing sides
/// collapse under sin^2+cos^2 and angle-difference contraction, often
/// leaving a single joint angle. Any pair of valid equations may be
/// combined; the single-unknown gate below rejects unproductive pairs.
pub fn solve_x2y2(ctx: &SolveContext, x: &Sym) -> Vec<CandidateSolution> {
    let ids: Vec<usize> = ctx
        .equations
        .iter()
        .enumerate()
        .filter(|(_, eq)| eq.col == 3 && !eq.unknowns.is_empty())
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for (pi, &i) in ids.iter().enumerate() {
        for &j in &ids[pi + 1..] {
            let (e1, e2) = (&ctx.equations[i], &ctx.equations[j]);
            // an elimination rule: pointless unless some source still has a
            // variable to cancel beyond x itself
            if e1.unknowns.len() < 2 && e2.unknowns.len() < 2 {
                continue;
            }
            // x must emerge from the squaring (via a sum-of-angle identity),
            // not sit in a source row already; direct occurrences are the
            // business of the linear-form rules
            if e1.unknowns.contains(x) || e2.unknowns.contains(x) {
                continue;
            }
            let Some((u1, k1)) = split_sides(ctx, e1) else { continue };
            let Some((u2, k2)) = split_sides(ctx, e2) else { continue };
            // square the pure-geometry side only; measurement symbols mixed
            // into the unknown side mean the pair is a premultiplied variant
            // of rows already covered at lower depth
            if !pose_free(&u1) || !pose_free(&u2) {
                continue;
            }
            let u1 = expand_soa_in_trig(&u1, ctx.registry);
            let u2 = expand_soa_in_trig(&u2, ctx.registry);
            let usq = Expr::add(vec![expand_square(&u1), expand_square(&u2)]);
            let usq = contract_trig_pure(usq);
            let q = Expr::add(vec![
                usq,
                Expr::neg(Expr::pow(k1, 2)),
                Expr::neg(Expr::pow(k2, 2)),
            ]);
            let unknowns = q.free_unknowns(ctx.unsolved);
            if unknowns.len() != 1 || !unknowns.contains(x) {
                continue;
            }
            let Some((a, b, c)) = match_trig_linear(&q, x) else { continue };
            if (a.is_zero() && b.is_zero())
                || !ctx.is_known(&a)
                || !ctx.is_known(&b)
                || !ctx.is_known(&c)
            {
                continue;
            }
            let (branches, rank) = if a.is_zero() {
                let qq = Expr::div(Expr::neg(c), b);
                (vec![Expr::acos(qq.clone()), Expr::neg(Expr::acos(qq))], RANK_INVERSE_TRIG_PAIR)
            } else if b.is_zero() {
                let qq = Expr::div(Expr::neg(c), a);
                (
                    vec![Expr::asin(qq.clone()), Expr::sub(Expr::Pi, Expr::asin(qq))],
                    RANK_INVERSE_TRIG_PAIR,
                )
            } else {
                (phase_shift_branches(&a, &b, &c), RANK_ATAN2_PAIR)
            };
            out.push(candidate(ctx, x, "x2y2", rank, branches, vec![i, j]));
        }
    }
    out
}

/// Split an equation into (unknown-bearing side, known side), if exactly one
/// side carries unsolved unknowns.
fn split_sides(ctx: &SolveContext, eq: &ScalarEquation) -> Option<(Expr, Expr)> {
    match (ctx.is_known(&eq.lhs), ctx.is_known(&eq.rhs)) {
        (false, true) => Some((eq.lhs.clone(), eq.rhs.clone())),
        (true, false) => Some((eq.rhs.clone(), eq.lhs.clone())),
        _ => None,
    }
}

/// Multiply a sum by itself term-by-term; unlike `Expr::pow` this exposes
/// the cross terms to Pythagorean collapse.
fn expand_square(u: &Expr) -> Expr {
    let ts = u.terms();
    let mut prods = Vec::with_capacity(ts.len() * ts.len());
    for a in &ts {
        for b in &ts {
            prods.push(Expr::mul(vec![a.clone(), b.clone()]));
        }
    }
    Expr::add(prods)
}

/// Run every solver against one variable.
pub fn all_candidates(ctx: &SolveContext, x: &Sym) -> Vec<CandidateSolution> {
    let mut out = Vec::new();
    out.extend(solve_algebra(ctx, x));
    out.extend(solve_sine_or_cosine(ctx, x));
    out.extend(solve_tangent(ctx, x));
    out.extend(solve_sin_and_cos(ctx, x));
    out.extend(solve_simultaneous(ctx, x));
    out.extend(solve_x2y2(ctx, x));
    out
}

/// Pick the winning candidate: highest rank, then fewest branches, fewest
/// dependencies, smallest total expression size, solver name as final tie
/// break.
pub fn rank_candidates(mut cands: Vec<CandidateSolution>) -> Option<CandidateSolution> {
    fn total_size(c: &CandidateSolution) -> usize {
        c.branches.iter().map(Expr::size).sum()
    }
    cands.sort_by(|l, r| {
        r.rank
            .cmp(&l.rank)
            .then(l.branches.len().cmp(&r.branches.len()))
            .then(l.dependencies.len().cmp(&r.dependencies.len()))
            .then(total_size(l).cmp(&total_size(r)))
            .then(l.solver.cmp(r.solver))
    });
    cands.into_iter().next()
}
