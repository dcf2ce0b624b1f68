//! Expression-level rewrites that sit between raw symbolic algebra and the
//! solvers: product-to-sum trig contraction, the sum-of-angle registry
//! (introduction, constituent elimination, expansion), and the substitution
//! pattern transform used to push known pose entries into other equations.

use crate::expr::{canon, split_coeff, substitute_syms, Expr, Sym, Q};
use std::collections::{BTreeMap, BTreeSet};

/// One combined-angle definition: `combined = Σ sign_i * part_i`, parts in
/// chain order, first sign always `+1`.
#[derive(Clone, Debug)]
pub struct SoaRecord {
    pub combined: Sym,
    pub parts: Vec<(i8, Sym)>,
}

impl SoaRecord {
    /// `combined - Σ sign_i*part_i`, the defining relation (== 0).
    pub fn relation(&self) -> Expr {
        let mut terms = vec![self.combined.expr()];
        for (s, p) in &self.parts {
            terms.push(Expr::mul(vec![Expr::Int(-i64::from(*s)), p.expr()]));
        }
        Expr::add(terms)
    }

    /// The sum the combined symbol stands for.
    pub fn sum(&self) -> Expr {
        Expr::add(
            self.parts
                .iter()
                .map(|(s, p)| Expr::mul(vec![Expr::Int(i64::from(*s)), p.expr()]))
                .collect(),
        )
    }
}

/// Registry of combined angles discovered during FK construction and later
/// rewriting. Owns the joint chain order used for naming and part sorting.
#[derive(Clone, Debug, Default)]
pub struct SoaRegistry {
    records: Vec<SoaRecord>,
    chain_pos: BTreeMap<Sym, usize>,
}

impl SoaRegistry {
    pub fn new(chain: &[Sym]) -> Self {
        SoaRegistry {
            records: Vec::new(),
            chain_pos: chain.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect(),
        }
    }

    pub fn records(&self) -> &[SoaRecord] {
        &self.records
    }

    pub fn find(&self, combined: &Sym) -> Option<&SoaRecord> {
        self.records.iter().find(|r| &r.combined == combined)
    }

    pub fn combined_syms(&self) -> Vec<Sym> {
        self.records.iter().map(|r| r.combined.clone()).collect()
    }

    fn chain_pos(&self, s: &Sym) -> Option<usize> {
        self.chain_pos.get(s).copied()
    }

    /// Position after which the combined variable is inserted in the solve
    /// order: the chain position of its last constituent.
    pub fn last_part_pos(&self, rec: &SoaRecord) -> usize {
        rec.parts
            .iter()
            .filter_map(|(_, p)| self.chain_pos(p))
            .max()
            .unwrap_or(0)
    }

    fn name_for(parts: &[(i8, Sym)]) -> String {
        let mut out = String::from("th_");
        for (sign, p) in parts {
            if *sign < 0 {
                out.push('m');
            }
            let suffix = p.name().strip_prefix("th_").unwrap_or(p.name());
            out.push_str(suffix);
        }
        out
    }

    /// Get or create the combined symbol for a signed part list (already in
    /// chain order with a positive first sign).
    fn get_or_create(&mut self, parts: Vec<(i8, Sym)>) -> Sym {
        if let Some(r) = self.records.iter().find(|r| r.parts == parts) {
            return r.combined.clone();
        }
        let name = Self::name_for(&parts);
        let constituents: Vec<Sym> = parts.iter().map(|(_, p)| p.clone()).collect();
        let combined = Sym::sum_of_angle(name, constituents);
        self.records.push(SoaRecord { combined: combined.clone(), parts });
        self.records.last().unwrap().combined.clone()
    }
}

// ---------------------------------------------------------------------------
// Trig contraction + sum-of-angle introduction.

const CONTRACT_CAP: usize = 64;

/// Contract `sin(a)cos(b) ± cos(a)sin(b)` / `cos(a)cos(b) ∓ sin(a)sin(b)`
/// pairs (with arbitrary matching cofactors) into single-angle terms, then
/// replace trig arguments that are ±1-signed sums of revolute joints with
/// combined-angle symbols. Canonical in, canonical out.
pub fn contract_trig(e: Expr, reg: &mut SoaRegistry) -> Expr {
    let contracted = contract_node(e);
    introduce_soa(contracted, reg)
}

/// Contraction alone, without combined-angle registration. Used where a
/// temporary expression is simplified but must not grow the registry.
pub fn contract_trig_pure(e: Expr) -> Expr {
    contract_node(e)
}

fn contract_node(e: Expr) -> Expr {
    // Recurse first so nested Adds (inside Pow/functions) are contracted too.
    let e = match e {
        Expr::Add(ts) => Expr::Add(ts.into_iter().map(contract_node).collect()),
        Expr::Mul(fs) => Expr::Mul(fs.into_iter().map(contract_node).collect()),
        Expr::Pow(b, n) => Expr::Pow(Box::new(contract_node(*b)), n),
        Expr::Sin(a) => Expr::Sin(Box::new(contract_node(*a))),
        Expr::Cos(a) => Expr::Cos(Box::new(contract_node(*a))),
        Expr::Tan(a) => Expr::Tan(Box::new(contract_node(*a))),
        Expr::Asin(a) => Expr::Asin(Box::new(contract_node(*a))),
        Expr::Acos(a) => Expr::Acos(Box::new(contract_node(*a))),
        Expr::Atan2(y, x) => {
            Expr::Atan2(Box::new(contract_node(*y)), Box::new(contract_node(*x)))
        }
        Expr::Sqrt(a) => Expr::Sqrt(Box::new(contract_node(*a))),
        other => other,
    };
    let e = canon(e);
    let Expr::Add(_) = e else { return e };
    let mut terms = e.terms();
    for _ in 0..CONTRACT_CAP {
        if !contract_pass(&mut terms) {
            break;
        }
    }
    canon(Expr::Add(terms))
}

/// One product-to-sum rewrite over the term list. Returns true if it fired.
fn contract_pass(terms: &mut Vec<Expr>) -> bool {
    for i in 0..terms.len() {
        let fs = terms[i].factors();
        // Positions of plain sin/cos factors (exponent 1).
        let mut sins: Vec<(usize, Expr)> = Vec::new();
        let mut coss: Vec<(usize, Expr)> = Vec::new();
        for (k, f) in fs.iter().enumerate() {
            match f {
                Expr::Sin(a) => sins.push((k, (**a).clone())),
                Expr::Cos(a) => coss.push((k, (**a).clone())),
                _ => {}
            }
        }
        // Pattern A: k*sin(a)*cos(b) + k*cos(a)*sin(b) -> k*sin(a+b)
        //            k*sin(a)*cos(b) - k*cos(a)*sin(b) -> k*sin(a-b)
        for &(ps, ref a) in &sins {
            for &(pc, ref b) in &coss {
                if a == b {
                    continue;
                }
                for minus in [false, true] {
                    let mut partner_fs = fs.clone();
                    partner_fs[ps] = Expr::Cos(Box::new(a.clone()));
                    partner_fs[pc] = Expr::Sin(Box::new(b.clone()));
                    if minus {
                        partner_fs.push(Expr::Int(-1));
                    }
                    let partner = canon(Expr::Mul(partner_fs));
                    let Some(j) = find_term(terms, i, &partner) else { continue };
                    let arg = if minus {
                        Expr::sub(a.clone(), b.clone())
                    } else {
                        Expr::add(vec![a.clone(), b.clone()])
                    };
                    let mut rest = fs.clone();
                    let (hi, lo) = (ps.max(pc), ps.min(pc));
                    rest.remove(hi);
                    rest.remove(lo);
                    rest.push(Expr::sin(arg));
                    replace_pair(terms, i, j, canon(Expr::Mul(rest)));
                    return true;
                }
            }
        }
        // Pattern B: k*cos(a)*cos(b) - k*sin(a)*sin(b) -> k*cos(a+b)
        //            k*cos(a)*cos(b) + k*sin(a)*sin(b) -> k*cos(a-b)
        for x in 0..coss.len() {
            for y in (x + 1)..coss.len() {
                let (pa, a) = (coss[x].0, coss[x].1.clone());
                let (pb, b) = (coss[y].0, coss[y].1.clone());
                if a == b {
                    continue;
                }
                for minus in [true, false] {
                    let mut partner_fs = fs.clone();
                    partner_fs[pa] = Expr::Sin(Box::new(a.clone()));
                    partner_fs[pb] = Expr::Sin(Box::new(b.clone()));
                    if minus {
                        partner_fs.push(Expr::Int(-1));
                    }
                    let partner = canon(Expr::Mul(partner_fs));
                    let Some(j) = find_term(terms, i, &partner) else { continue };
                    let arg = if minus {
                        Expr::add(vec![a.clone(), b.clone()])
                    } else {
                        Expr::sub(a.clone(), b.clone())
                    };
                    let mut rest = fs.clone();
                    let (hi, lo) = (pa.max(pb), pa.min(pb));
                    rest.remove(hi);
                    rest.remove(lo);
                    rest.push(Expr::cos(arg));
                    replace_pair(terms, i, j, canon(Expr::Mul(rest)));
                    return true;
                }
            }
        }
    }
    false
}

fn find_term(terms: &[Expr], skip: usize, want: &Expr) -> Option<usize> {
    terms
        .iter()
        .enumerate()
        .find(|(j, t)| *j != skip && *t == want)
        .map(|(j, _)| j)
}

fn replace_pair(terms: &mut Vec<Expr>, i: usize, j: usize, new_term: Expr) {
    let (hi, lo) = (i.max(j), i.min(j));
    terms.remove(hi);
    terms.remove(lo);
    terms.push(new_term);
}

/// Replace trig arguments that are signed unit sums of ≥2 revolute joints
/// (or of already-combined angles, which are flattened) with combined-angle
/// symbols, creating registry records as needed.
pub fn introduce_soa(e: Expr, reg: &mut SoaRegistry) -> Expr {
    let out = match e {
        Expr::Sin(a) => Expr::sin(soa_arg(*a, reg)),
        Expr::Cos(a) => Expr::cos(soa_arg(*a, reg)),
        Expr::Tan(a) => Expr::tan(soa_arg(*a, reg)),
        Expr::Add(ts) => canon(Expr::Add(ts.into_iter().map(|t| introduce_soa(t, reg)).collect())),
        Expr::Mul(fs) => canon(Expr::Mul(fs.into_iter().map(|f| introduce_soa(f, reg)).collect())),
        Expr::Pow(b, n) => Expr::pow(introduce_soa(*b, reg), n),
        Expr::Asin(a) => Expr::asin(introduce_soa(*a, reg)),
        Expr::Acos(a) => Expr::acos(introduce_soa(*a, reg)),
        Expr::Atan2(y, x) => Expr::atan2(introduce_soa(*y, reg), introduce_soa(*x, reg)),
        Expr::Sqrt(a) => Expr::sqrt(introduce_soa(*a, reg)),
        other => other,
    };
    out
}

/// Normalize one trig argument: if it is a ±1 unit sum of revolute joints
/// (flattening combined angles), return the combined symbol; else return it
/// unchanged (recursively introduced).
fn soa_arg(arg: Expr, reg: &mut SoaRegistry) -> Expr {
    let arg = introduce_soa(arg, reg);
    let Expr::Add(_) = arg else { return arg };
    let mut parts: Vec<(i8, Sym)> = Vec::new();
    for t in arg.terms() {
        let (q, core) = split_coeff(&t);
        let sign: i8 = if q == Q::ONE {
            1
        } else if q == Q::int(-1) {
            -1
        } else {
            return arg;
        };
        match &core {
            Expr::Sym(s) if s.is_revolute() => parts.push((sign, s.clone())),
            Expr::Sym(s) if s.is_sum_of_angle() => match reg.find(s) {
                Some(rec) => {
                    for (ps, pp) in rec.parts.clone() {
                        parts.push((sign * ps, pp));
                    }
                }
                None => return arg,
            },
            _ => return arg,
        }
    }
    if parts.len() < 2 {
        return arg;
    }
    // Chain order; duplicate constituents (e.g. th_2 appearing twice) are not
    // a unit sum we name.
    parts.sort_by_key(|(_, p)| (reg.chain_pos(p), p.clone()));
    let names: BTreeSet<&str> = parts.iter().map(|(_, p)| p.name()).collect();
    if names.len() != parts.len() {
        return arg;
    }
    if parts[0].0 < 0 {
        return arg; // canonical args keep a positive leading joint
    }
    reg.get_or_create(parts).expr()
}

// ---------------------------------------------------------------------------
// Sum-of-angle expansion and constituent elimination.

/// Expand combined-angle symbols *inside trig arguments* back into their
/// constituent sums (then re-canon, so e.g. sin(th_23 - th_2) collapses to
/// sin(th_3)).
pub fn expand_soa_in_trig(e: &Expr, reg: &SoaRegistry) -> Expr {
    let map: BTreeMap<Sym, Expr> = reg
        .records()
        .iter()
        .map(|r| (r.combined.clone(), r.sum()))
        .collect();
    fn walk(e: &Expr, map: &BTreeMap<Sym, Expr>) -> Expr {
        match e {
            Expr::Sin(a) => Expr::sin(substitute_syms(&walk(a, map), map)),
            Expr::Cos(a) => Expr::cos(substitute_syms(&walk(a, map), map)),
            Expr::Tan(a) => Expr::tan(substitute_syms(&walk(a, map), map)),
            Expr::Add(ts) => canon(Expr::Add(ts.iter().map(|t| walk(t, map)).collect())),
            Expr::Mul(fs) => canon(Expr::Mul(fs.iter().map(|f| walk(f, map)).collect())),
            Expr::Pow(b, n) => Expr::pow(walk(b, map), *n),
            Expr::Asin(a) => Expr::asin(walk(a, map)),
            Expr::Acos(a) => Expr::acos(walk(a, map)),
            Expr::Atan2(y, x) => Expr::atan2(walk(y, map), walk(x, map)),
            Expr::Sqrt(a) => Expr::sqrt(walk(a, map)),
            other => other.clone(),
        }
    }
    walk(e, &map)
}

/// Angle-addition expansion of `trig(arg)` where `arg` may be a sum:
/// sin(A+B) = sin A cos B + cos A sin B, cos(A+B) = cos A cos B - sin A sin B.
pub fn expand_trig_of_sum(is_sin: bool, arg: &Expr) -> Expr {
    let terms = arg.terms();
    if terms.len() <= 1 {
        return if is_sin { Expr::sin(arg.clone()) } else { Expr::cos(arg.clone()) };
    }
    let a = terms[0].clone();
    let b = Expr::add(terms[1..].to_vec());
    let (sa, ca) = (expand_trig_of_sum(true, &a), expand_trig_of_sum(false, &a));
    let (sb, cb) = (expand_trig_of_sum(true, &b), expand_trig_of_sum(false, &b));
    if is_sin {
        Expr::add(vec![Expr::mul(vec![sa, cb]), Expr::mul(vec![ca, sb])])
    } else {
        Expr::add(vec![
            Expr::mul(vec![ca, cb]),
            Expr::mul(vec![Expr::Int(-1), sa, sb]),
        ])
    }
}

/// Constituent elimination: given a combined angle `w = Σ s_i p_i` whose only
/// unsolved constituent is `target`, rewrite every `sin(target)`/`cos(target)`
/// in `e` as the angle-addition expansion of `±(w - Σ_{i≠target} s_i p_i)`,
/// leaving the equation in terms of `w` and solved joints.
pub fn eliminate_constituent(e: &Expr, rec: &SoaRecord, target: &Sym) -> Expr {
    let target_sign = match rec.parts.iter().find(|(_, p)| p == target) {
        Some((s, _)) => i64::from(*s),
        None => return e.clone(),
    };
    // target = target_sign * (w - Σ other parts)
    let mut terms = vec![rec.combined.expr()];
    for (s, p) in &rec.parts {
        if p == target {
            continue;
        }
        terms.push(Expr::mul(vec![Expr::Int(-i64::from(*s)), p.expr()]));
    }
    let repl_arg = Expr::mul(vec![Expr::Int(target_sign), Expr::add(terms)]);
    fn walk(e: &Expr, target: &Sym, repl_arg: &Expr) -> Expr {
        match e {
            Expr::Sin(a) if **a == Expr::Sym(target.clone()) => {
                expand_trig_of_sum(true, repl_arg)
            }
            Expr::Cos(a) if **a == Expr::Sym(target.clone()) => {
                expand_trig_of_sum(false, repl_arg)
            }
            Expr::Add(ts) => canon(Expr::Add(ts.iter().map(|t| walk(t, target, repl_arg)).collect())),
            Expr::Mul(fs) => canon(Expr::Mul(fs.iter().map(|f| walk(f, target, repl_arg)).collect())),
            Expr::Pow(b, n) => Expr::pow(walk(b, target, repl_arg), *n),
            Expr::Sin(a) => Expr::sin(walk(a, target, repl_arg)),
            Expr::Cos(a) => Expr::cos(walk(a, target, repl_arg)),
            Expr::Tan(a) => Expr::tan(walk(a, target, repl_arg)),
            Expr::Asin(a) => Expr::asin(walk(a, target, repl_arg)),
            Expr::Acos(a) => Expr::acos(walk(a, target, repl_arg)),
            Expr::Atan2(y, x) => {
                Expr::atan2(walk(y, target, repl_arg), walk(x, target, repl_arg))
            }
            Expr::Sqrt(a) => Expr::sqrt(walk(a, target, repl_arg)),
            other => other.clone(),
        }
    }
    canon(walk(e, target, &repl_arg))
}

// ---------------------------------------------------------------------------
// Substitution patterns.

/// A rewrite derived from one equation: the equation's unknown terms form the
/// pattern, its known terms (negated, coefficient-normalized) the replacement.
#[derive(Clone, Debug)]
pub struct SubstPattern {
    /// Canonical terms of the pattern (length 1 = monomial pattern).
    pub terms: Vec<Expr>,
    pub replacement: Expr,
}

/// Derive a substitution pattern from an equation residual, splitting terms
/// into unknown-bearing (pattern) and known (replacement) parts. `None` when
/// either part is empty or the residual is not an applicable shape.
pub fn derive_pattern(resid: &Expr, unsolved: &BTreeSet<Sym>) -> Option<SubstPattern> {
    let mut u_terms: Vec<Expr> = Vec::new();
    let mut k_terms: Vec<Expr> = Vec::new();
    for t in resid.terms() {
        if t.free_unknowns(unsolved).is_empty() {
            k_terms.push(t);
        } else {
            u_terms.push(t);
        }
    }
    if u_terms.is_empty() || k_terms.is_empty() {
        return None;
    }
    let known = Expr::add(k_terms);
    if u_terms.len() == 1 {
        let (q, core) = split_coeff(&u_terms[0]);
        let scale = q.recip()?.neg().to_expr()?;
        Some(SubstPattern {
            terms: vec![core],
            replacement: Expr::mul(vec![scale, known]),
        })
    } else {
        Some(SubstPattern {
            terms: u_terms,
            replacement: Expr::neg(known),
        })
    }
}

/// Apply a pattern to `e` (all matching occurrences, one rewrite per node).
/// Returns `None` if nothing matched.
pub fn apply_pattern(e: &Expr, pat: &SubstPattern) -> Option<Expr> {
    let mut hit = false;
    let out = walk_apply(e, pat, &mut hit);
    if hit {
        Some(canon(out))
    } else {
        None
    }
}

fn walk_apply(e: &Expr, pat: &SubstPattern, hit: &mut bool) -> Expr {
    // Children first.
    let rebuilt = match e {
        Expr::Add(ts) => canon(Expr::Add(ts.iter().map(|t| walk_apply(t, pat, hit)).collect())),
        Expr::Mul(fs) => canon(Expr::Mul(fs.iter().map(|f| walk_apply(f, pat, hit)).collect())),
        Expr::Pow(b, n) => Expr::pow(walk_apply(b, pat, hit), *n),
        Expr::Sin(a) => Expr::sin(walk_apply(a, pat, hit)),
        Expr::Cos(a) => Expr::cos(walk_apply(a, pat, hit)),
        Expr::Tan(a) => Expr::tan(walk_apply(a, pat, hit)),
        Expr::Asin(a) => Expr::asin(walk_apply(a, pat, hit)),
        Expr::Acos(a) => Expr::acos(walk_apply(a, pat, hit)),
        Expr::Atan2(y, x) => {
            Expr::atan2(walk_apply(y, pat, hit), walk_apply(x, pat, hit))
        }
        Expr::Sqrt(a) => Expr::sqrt(walk_apply(a, pat, hit)),
        other => other.clone(),
    };
    match match_node(&rebuilt, pat) {
        Some(replaced) => {
            *hit = true;
            replaced
        }
        None => rebuilt,
    }
}

/// Try the pattern against this exact node.
fn match_node(e: &Expr, pat: &SubstPattern) -> Option<Expr> {
    if pat.terms.len() == 1 {
        // Monomial pattern: factor-multiset inclusion.
        let pfs = pat.terms[0].factors();
        let efs = e.factors();
        if matches!(e, Expr::Add(_)) || matches!(e, Expr::Int(_) | Expr::Rat(_, _) | Expr::Pi) {
            return None;
        }
        let mut remaining = efs;
        for pf in &pfs {
            let idx = remaining.iter().position(|f| f == pf)?;
            remaining.remove(idx);
        }
        remaining.push(pat.replacement.clone());
        Some(canon(Expr::Mul(remaining)))
    } else {
        // Sum pattern: term-subset match scaled by a common monomial factor.
        let Expr::Add(ts) = e else { return None };
        let p1 = &pat.terms[0];
        for t in ts {
            let Some(f) = div_term(t, p1) else { continue };
            let mut chosen: Vec<Expr> = vec![t.clone()];
            let mut ok = true;
            for pi in &pat.terms[1..] {
                let scaled = canon(Expr::Mul(vec![f.clone(), pi.clone()]));
                match ts.iter().find(|u| **u == scaled && !chosen.contains(u)) {
                    Some(u) => chosen.push(u.clone()),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let mut rest: Vec<Expr> = Vec::new();
            let mut to_remove = chosen.clone();
            for u in ts {
                if let Some(k) = to_remove.iter().position(|c| c == u) {
                    to_remove.remove(k);
                } else {
                    rest.push(u.clone());
                }
            }
            rest.push(canon(Expr::Mul(vec![f, pat.replacement.clone()])));
            return Some(canon(Expr::Add(rest)));
        }
        None
    }
}

/// `t / p` when the quotient is a monomial (p's factors all occur in t);
/// rational coefficients divide exactly.
fn div_term(t: &Expr, p: &Expr) -> Option<Expr> {
    let (qt, ct) = split_coeff(t);
    let (qp, cp) = split_coeff(p);
    let mut remaining = ct.factors();
    if ct.is_one() {
        remaining.clear();
    }
    for pf in cp.factors() {
        if cp.is_one() {
            break;
        }
        let idx = remaining.iter().position(|f| *f == pf)?;
        remaining.remove(idx);
    }
    let q = qt.mul(qp.recip()?)?;
    let qe = q.to_expr()?;
    remaining.push(qe);
    Some(canon(Expr::Mul(remaining)))
}
