//! Machine-readable JSON artifact: solved variables, concrete solution
//! nodes with label-resolved expressions, and the enumerated pose sets.
//! Expression strings use the same grammar the parser accepts.

use serde_json::{json, Value};

use crate::expr::print_expr;

use super::ir::build_ir;
use super::SolvedRobot;

pub fn emit_json(solved: &SolvedRobot<'_>) -> String {
    let robot = &solved.model.robot;
    let ir = build_ir(solved);

    let constants: Vec<Value> = robot
        .constants
        .iter()
        .map(|(s, v)| json!({ "name": s.name(), "value": v }))
        .collect();

    let variables: Vec<Value> = solved
        .graph
        .variables
        .iter()
        .map(|v| {
            json!({
                "name": v.var.name(),
                "solver": v.solver,
                "branches": v.branches.iter().map(print_expr).collect::<Vec<_>>(),
                "direct_parents": v.direct_parents.iter().map(|p| p.name()).collect::<Vec<_>>(),
            })
        })
        .collect();

    let nodes: Vec<Value> = ir
        .nodes
        .iter()
        .map(|n| {
            json!({
                "label": n.label,
                "variable": n.var.name(),
                "branch": n.branch,
                "expression": print_expr(&n.expr),
                "parents": n.parents,
            })
        })
        .collect();

    let pose_sets: Vec<Value> = ir
        .poses
        .iter()
        .map(|p| {
            json!(p.node_ids
                .iter()
                .map(|&id| ir.nodes[id].label.clone())
                .collect::<Vec<_>>())
        })
        .collect();

    let doc = json!({
        "robot": robot.name,
        "joint_order": ir.joint_names,
        "constants": constants,
        "variables": variables,
        "nodes": nodes,
        "pose_sets": pose_sets,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable document");
    text.push('\n');
    text
}
