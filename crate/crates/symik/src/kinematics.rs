//! Robot model: modified-DH rows, symbolic link transforms, forward
//! kinematics, and the depth-indexed matrix-equation family
//! `(T_1···T_k)^-1 · T_d = T_{k+1}···T_n` flattened into scalar equations.

use crate::expr::{Expr, Sym};
use crate::numeric::{eval, Bindings, DomainError};
use crate::rewrite::{contract_trig, SoaRegistry};
use std::collections::BTreeSet;
use std::fmt;

/// One modified-DH row. `alpha`/`a` are the twist and offset of the previous
/// axis pair, `d`/`theta` of this one; for a revolute joint the unknown is in
/// `theta`, for a prismatic joint in `d`.
#[derive(Clone, Debug)]
pub struct DhRow {
    pub alpha: Expr,
    pub a: Expr,
    pub d: Expr,
    pub theta: Expr,
}

#[derive(Clone, Debug)]
pub struct Robot {
    pub name: String,
    pub rows: Vec<DhRow>,
    /// Joint unknowns in chain order.
    pub unknowns: Vec<Sym>,
    /// DH constants; `None` values stay symbolic throughout.
    pub constants: Vec<(Sym, Option<f64>)>,
}

impl Robot {
    pub fn unknown_set(&self) -> BTreeSet<Sym> {
        self.unknowns.iter().cloned().collect()
    }

    /// Bindings for all numerically-known constants.
    pub fn constant_bindings(&self) -> Bindings {
        self.constants
            .iter()
            .filter_map(|(s, v)| v.map(|v| (s.clone(), v)))
            .collect()
    }
}

/// 3x4-relevant homogeneous matrix of symbolic entries (the bottom row is
/// carried for exactness).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat4(pub [[Expr; 4]; 4]);

impl fmt::Display for Mat4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..4 {
            writeln!(
                f,
                "[{}, {}, {}, {}]",
                self.0[i][0], self.0[i][1], self.0[i][2], self.0[i][3]
            )?;
        }
        Ok(())
    }
}

impl Mat4 {
    pub fn identity() -> Self {
        Mat4(std::array::from_fn(|i| {
            std::array::from_fn(|j| Expr::Int(i64::from(i == j)))
        }))
    }

    /// Matrix product with per-entry canonicalization, trig contraction and
    /// combined-angle introduction.
    pub fn mul(&self, rhs: &Mat4, reg: &mut SoaRegistry) -> Mat4 {
        Mat4(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let sum = Expr::add(
                    (0..4)
                        .map(|k| Expr::mul(vec![self.0[i][k].clone(), rhs.0[k][j].clone()]))
                        .collect(),
                );
                contract_trig(sum, reg)
            })
        }))
    }

    /// Inverse of a rigid transform: `[R^T, -R^T p; 0 0 0 1]`.
    pub fn inverse_homogeneous(&self) -> Mat4 {
        let mut out = Mat4::identity();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[j][i].clone();
            }
            out.0[i][3] = Expr::neg(Expr::add(
                (0..3)
                    .map(|k| Expr::mul(vec![self.0[k][i].clone(), self.0[k][3].clone()]))
                    .collect(),
            ));
        }
        out
    }

    /// Numeric evaluation of every entry.
    pub fn eval(&self, env: &Bindings) -> Result<[[f64; 4]; 4], DomainError> {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = eval(&self.0[i][j], env)?;
            }
        }
        Ok(out)
    }
}

/// The symbolic link transform for a modified-DH row.
pub fn link_transform(row: &DhRow) -> Mat4 {
    let (ca, sa) = (Expr::cos(row.alpha.clone()), Expr::sin(row.alpha.clone()));
    let (ct, st) = (Expr::cos(row.theta.clone()), Expr::sin(row.theta.clone()));
    let m = |parts: Vec<Expr>| Expr::mul(parts);
    Mat4([
        [ct.clone(), Expr::neg(st.clone()), Expr::Int(0), row.a.clone()],
        [
            m(vec![st.clone(), ca.clone()]),
            m(vec![ct.clone(), ca.clone()]),
            Expr::neg(sa.clone()),
            m(vec![Expr::Int(-1), sa.clone(), row.d.clone()]),
        ],
        [
            m(vec![st, sa.clone()]),
            m(vec![ct, sa]),
            ca.clone(),
            m(vec![ca, row.d.clone()]),
        ],
        [Expr::Int(0), Expr::Int(0), Expr::Int(0), Expr::Int(1)],
    ])
}

/// Names of the 12 pose symbols, row-major rotation then translation column.
pub fn pose_symbols() -> Vec<Sym> {
    let mut out = Vec::with_capacity(12);
    for i in 1..=3 {
        for j in 1..=3 {
            out.push(Sym::pose(format!("r_{i}{j}")));
        }
    }
    out.push(Sym::pose("Px"));
    out.push(Sym::pose("Py"));
    out.push(Sym::pose("Pz"));
    out
}

/// The desired-pose matrix `T_d` of pose-element symbols.
pub fn pose_matrix() -> Mat4 {
    let mut m = Mat4::identity();
    for i in 0..3 {
        for j in 0..3 {
            m.0[i][j] = Sym::pose(format!("r_{}{}", i + 1, j + 1)).expr();
        }
    }
    m.0[0][3] = Sym::pose("Px").expr();
    m.0[1][3] = Sym::pose("Py").expr();
    m.0[2][3] = Sym::pose("Pz").expr();
    m
}

/// One scalar equation `lhs = rhs` drawn from entry (row, col) of the
/// depth-`depth` matrix equation. `resid` caches `canon(lhs - rhs)`;
/// `unknowns` the unsolved-relevant symbols occurring in it.
#[derive(Clone, Debug)]
pub struct ScalarEquation {
    pub lhs: Expr,
    pub rhs: Expr,
    pub resid: Expr,
    pub unknowns: BTreeSet<Sym>,
    pub depth: usize,
    pub row: usize,
    pub col: usize,
}

impl ScalarEquation {
    /// Recompute the cached residual and unknown set after a rewrite.
    pub fn refresh(&mut self, unknown_set: &BTreeSet<Sym>) {
        self.resid = Expr::sub(self.lhs.clone(), self.rhs.clone());
        self.unknowns = self.resid.free_unknowns(unknown_set);
    }

    pub fn is_tautology(&self) -> bool {
        self.resid.is_zero()
    }
}

impl fmt::Display for ScalarEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

/// The symbolic model extracted from a robot: forward kinematics, the full
/// deduplicated scalar-equation list, and the combined-angle registry.
#[derive(Clone, Debug)]
pub struct KinematicModel {
    pub robot: Robot,
    pub fk: Mat4,
    pub equations: Vec<ScalarEquation>,
    pub registry: SoaRegistry,
    /// Unknowns in solve (chain) order, combined angles inserted after their
    /// last constituent.
    pub solve_order: Vec<Sym>,
}

/// Build the model: link transforms, suffix products (rhs side, depth 0 =
/// full FK), inverse-prefix chain (lhs side), all 12·n scalar candidates,
/// deduplicated modulo sign with tautologies dropped.
pub fn build_model(robot: Robot) -> KinematicModel {
    let mut reg = SoaRegistry::new(&robot.unknowns);
    let n = robot.rows.len();
    let links: Vec<Mat4> = robot.rows.iter().map(link_transform).collect();

    // rhs at depth k: T_{k+1}···T_n  (0-indexed: links[k..n))
    let mut suffix: Vec<Mat4> = vec![Mat4::identity(); n];
    suffix[n - 1] = links[n - 1].clone();
    for k in (0..n - 1).rev() {
        suffix[k] = links[k].mul(&suffix[k + 1], &mut reg);
    }

    // lhs at depth k: (T_1···T_k)^-1 · T_d, built incrementally.
    let mut lhs_chain: Vec<Mat4> = Vec::with_capacity(n);
    lhs_chain.push(pose_matrix());
    for k in 1..n {
        let inv = links[k - 1].inverse_homogeneous();
        let prev = lhs_chain[k - 1].clone();
        lhs_chain.push(inv.mul(&prev, &mut reg));
    }

    // All unknowns incl. combined angles (the registry is complete now).
    let mut unknown_set = robot.unknown_set();
    for s in reg.combined_syms() {
        unknown_set.insert(s);
    }

    let mut equations: Vec<ScalarEquation> = Vec::new();
    let mut seen: BTreeSet<Expr> = BTreeSet::new();
    for depth in 0..n {
        for row in 0..3 {
            for col in 0..4 {
                let lhs = lhs_chain[depth].0[row][col].clone();
                let rhs = suffix[depth].0[row][col].clone();
                let resid = Expr::sub(lhs.clone(), rhs.clone());
                if resid.is_zero() {
                    continue;
                }
                let unknowns = resid.free_unknowns(&unknown_set);
                if unknowns.is_empty() {
                    continue;
                }
                let key = std::cmp::min(resid.clone(), Expr::neg(resid.clone()));
                if !seen.insert(key) {
                    continue;
                }
                equations.push(ScalarEquation { lhs, rhs, resid, unknowns, depth, row, col });
            }
        }
    }

    let solve_order = solve_order(&robot, &reg);
    KinematicModel { robot, fk: suffix[0].clone(), equations, registry: reg, solve_order }
}

/// Chain order with combined angles inserted directly after their last
/// constituent (registry creation order breaks ties).
fn solve_order(robot: &Robot, reg: &SoaRegistry) -> Vec<Sym> {
    let mut order: Vec<Sym> = robot.unknowns.clone();
    for rec in reg.records() {
        let pos = reg.last_part_pos(rec);
        // insert after the joint at chain position `pos`, after any combined
        // angles already inserted there
        let anchor = robot.unknowns.get(pos).cloned();
        let mut insert_at = order.len();
        if let Some(anchor) = anchor {
            if let Some(i) = order.iter().position(|s| *s == anchor) {
                let mut j = i + 1;
                while j < order.len() && order[j].is_sum_of_angle() {
                    j += 1;
                }
                insert_at = j;
            }
        }
        order.insert(insert_at, rec.combined.clone());
    }
    order
}

/// Numeric forward kinematics: evaluate each DH entry under `env` and
/// multiply in f64.
pub fn fk_numeric(rows: &[DhRow], env: &Bindings) -> Result<[[f64; 4]; 4], DomainError> {
    let mut t = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    for row in rows {
        let alpha = eval(&row.alpha, env)?;
        let a = eval(&row.a, env)?;
        let d = eval(&row.d, env)?;
        let theta = eval(&row.theta, env)?;
        let (sa, ca) = alpha.sin_cos();
        let (st, ct) = theta.sin_cos();
        let link = [
            [ct, -st, 0.0, a],
            [st * ca, ct * ca, -sa, -sa * d],
            [st * sa, ct * sa, ca, ca * d],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let mut out = [[0.0; 4]; 4];
        for (i, out_row) in out.iter_mut().enumerate() {
            for (j, cell) in out_row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| t[i][k] * link[k][j]).sum();
            }
        }
        t = out;
    }
    Ok(t)
}

/// Bind the 12 pose symbols to the entries of a numeric pose.
pub fn bind_pose(env: &mut Bindings, t: &[[f64; 4]; 4]) {
    for i in 0..3 {
        for j in 0..3 {
            env.set(Sym::pose(format!("r_{}{}", i + 1, j + 1)), t[i][j]);
        }
    }
    env.set(Sym::pose("Px"), t[0][3]);
    env.set(Sym::pose("Py"), t[1][3]);
    env.set(Sym::pose("Pz"), t[2][3]);
}
