//! Language-neutral solution IR: one guarded assignment per concrete
//! solution-graph node, with parent references rewritten to node labels, plus
//! the pose sets as ordered node lists. The Python and C++ artifacts are thin
//! renderings of this structure, and an internal interpreter provides the
//! semantics oracle the code targets are tested against.

use std::collections::BTreeMap;

use crate::expr::{canon, Expr, Sym};
use crate::kinematics::{bind_pose, pose_symbols};
use crate::numeric::{eval, Bindings};

use super::{sanitize_ident, SolvedRobot};

/// One assignment: `label = expr`, where `expr` references only pose
/// symbols, constants, and labels of earlier steps.
#[derive(Clone, Debug)]
pub struct IrNode {
    pub label: String,
    pub label_sym: Sym,
    pub var: Sym,
    /// 1-based index into the variable's branch list.
    pub branch: usize,
    pub expr: Expr,
    /// Labels of the direct parent nodes.
    pub parents: Vec<String>,
}

/// One pose set: which nodes to evaluate (in order) and which of them carry
/// the real joints.
#[derive(Clone, Debug)]
pub struct IrPose {
    /// Indices into `SolutionIr::nodes`, ascending = dependency order.
    pub node_ids: Vec<usize>,
    /// Node label per joint, in chain order.
    pub joint_labels: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SolutionIr {
    /// Identifier-safe robot name.
    pub name: String,
    /// The 12 pose input names, row-major rotation then translation.
    pub pose_params: Vec<String>,
    /// Constant parameters in declaration order with their default values;
    /// `None` means the constant stays a required symbolic input.
    pub constants: Vec<(String, Option<f64>)>,
    /// Real joints in chain order.
    pub joint_names: Vec<String>,
    pub nodes: Vec<IrNode>,
    pub poses: Vec<IrPose>,
}

/// Rewrite plain and branch-labeled parent references into node labels.
fn rename_syms(e: &Expr, map: &BTreeMap<String, Sym>) -> Expr {
    match e {
        Expr::Int(_) | Expr::Rat(_, _) | Expr::Pi => e.clone(),
        Expr::Sym(s) => match map.get(s.name()) {
            Some(t) => Expr::Sym(t.clone()),
            None => e.clone(),
        },
        Expr::Add(ts) => Expr::Add(ts.iter().map(|t| rename_syms(t, map)).collect()),
        Expr::Mul(fs) => Expr::Mul(fs.iter().map(|f| rename_syms(f, map)).collect()),
        Expr::Pow(b, n) => Expr::Pow(Box::new(rename_syms(b, map)), *n),
        Expr::Sin(x) => Expr::Sin(Box::new(rename_syms(x, map))),
        Expr::Cos(x) => Expr::Cos(Box::new(rename_syms(x, map))),
        Expr::Tan(x) => Expr::Tan(Box::new(rename_syms(x, map))),
        Expr::Asin(x) => Expr::Asin(Box::new(rename_syms(x, map))),
        Expr::Acos(x) => Expr::Acos(Box::new(rename_syms(x, map))),
        Expr::Atan2(y, x) => Expr::Atan2(
            Box::new(rename_syms(y, map)),
            Box::new(rename_syms(x, map)),
        ),
        Expr::Sqrt(x) => Expr::Sqrt(Box::new(rename_syms(x, map))),
    }
}

pub fn build_ir(solved: &SolvedRobot<'_>) -> SolutionIr {
    let robot = &solved.model.robot;
    let graph = solved.graph;

    let mut nodes = Vec::with_capacity(graph.nodes.len());
    for node in &graph.nodes {
        let label = node.label();
        let label_sym = Sym::constant(label.clone());
        // rewrite every reference -- including ones whose display edge was
        // pruned as redundant -- to the label of its concrete value source
        let map: BTreeMap<String, Sym> = node
            .refs
            .iter()
            .map(|(key, id)| (key.clone(), Sym::constant(graph.nodes[*id].label())))
            .collect();
        let parents: Vec<String> =
            node.parents.iter().map(|&p| graph.nodes[p].label()).collect();
        nodes.push(IrNode {
            label,
            label_sym,
            var: node.var.clone(),
            branch: node.own_branch + 1,
            expr: canon(rename_syms(&node.expression, &map)),
            parents,
        });
    }

    let poses = solved
        .poses
        .iter()
        .map(|pose| {
            let mut node_ids = pose.nodes.clone();
            node_ids.sort_unstable();
            let joint_labels = robot
                .unknowns
                .iter()
                .map(|u| {
                    let id = pose
                        .nodes
                        .iter()
                        .copied()
                        .find(|&id| &graph.nodes[id].var == u)
                        .expect("every pose set carries every joint");
                    nodes[id].label.clone()
                })
                .collect();
            IrPose { node_ids, joint_labels }
        })
        .collect();

    SolutionIr {
        name: sanitize_ident(&robot.name),
        pose_params: pose_symbols().iter().map(|s| s.name().to_string()).collect(),
        constants: robot
            .constants
            .iter()
            .map(|(s, v)| (s.name().to_string(), *v))
            .collect(),
        joint_names: robot.unknowns.iter().map(|u| u.name().to_string()).collect(),
        nodes,
        poses,
    }
}

/// Numeric outcome of one pose set under the interpreter.
#[derive(Clone, Debug)]
pub struct PoseOutcome {
    /// Joint values in chain order; `None` when a guard fired.
    pub joints: Option<Vec<f64>>,
    pub reachable: bool,
}

/// Evaluate the IR exactly as the generated code does: each pose set runs
/// its assignments in order and aborts on the first domain violation.
pub fn interpret(ir: &SolutionIr, t: &[[f64; 4]; 4], constants: &Bindings) -> Vec<PoseOutcome> {
    let mut base = constants.clone();
    bind_pose(&mut base, t);
    let mut outcomes = Vec::with_capacity(ir.poses.len());
    for pose in &ir.poses {
        let mut env = base.clone();
        let mut values: BTreeMap<&str, f64> = BTreeMap::new();
        let mut ok = true;
        for &id in &pose.node_ids {
            let node = &ir.nodes[id];
            match eval(&node.expr, &env) {
                Ok(v) => {
                    env.set(node.label_sym.clone(), v);
                    values.insert(&node.label, v);
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        let joints = ok.then(|| {
            pose.joint_labels
                .iter()
                .map(|l| values[l.as_str()])
                .collect()
        });
        outcomes.push(PoseOutcome { joints, reachable: ok });
    }
    outcomes
}

/// Number of guarded call sites the renderers will emit for `e`: one per
/// inverse-trig, square-root, and division site. Mirrors the renderer: a
/// product folds all its reciprocal factors into a single guarded division,
/// and a literal rational is emitted as a guarded division of integers.
pub fn count_sites(e: &Expr) -> usize {
    match e {
        Expr::Int(_) | Expr::Pi | Expr::Sym(_) => 0,
        Expr::Rat(_, _) => 1,
        Expr::Add(ts) => ts.iter().map(count_sites).sum(),
        Expr::Mul(fs) => {
            let mut total = 0;
            let mut has_den = false;
            for f in fs {
                if let Expr::Pow(b, n) = f {
                    if *n < 0 {
                        has_den = true;
                        total += count_sites(b);
                        continue;
                    }
                }
                total += count_sites(f);
            }
            total + usize::from(has_den)
        }
        Expr::Pow(b, n) => count_sites(b) + usize::from(*n < 0),
        Expr::Sin(x) | Expr::Cos(x) | Expr::Tan(x) => count_sites(x),
        Expr::Asin(x) | Expr::Acos(x) | Expr::Sqrt(x) => 1 + count_sites(x),
        Expr::Atan2(y, x) => 1 + count_sites(y) + count_sites(x),
    }
}

/// Total guarded sites across the whole emitted body (every pose set
/// re-renders its nodes).
pub fn site_count(ir: &SolutionIr) -> usize {
    ir.poses
        .iter()
        .map(|p| p.node_ids.iter().map(|&id| count_sites(&ir.nodes[id].expr)).sum::<usize>())
        .sum()
}
