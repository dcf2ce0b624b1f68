//! Artifact emission: LaTeX report, guarded Python/C++ solution code, DOT
//! dependency graph, and machine-readable JSON, all rendered from one
//! language-neutral solution IR.

pub mod code;
pub mod dot;
pub mod ir;
pub mod json;
pub mod latex;

use crate::graph::{PoseSet, SolutionGraph};
use crate::kinematics::KinematicModel;
use crate::solvers::CandidateSolution;

/// The five artifact kinds. Each produces a deterministic byte stream for a
/// given solved robot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EmitTarget {
    LatexReport,
    SolutionCodePython,
    SolutionCodeCpp,
    GraphDot,
    JsonSolutions,
}

impl EmitTarget {
    pub const ALL: [EmitTarget; 5] = [
        EmitTarget::LatexReport,
        EmitTarget::SolutionCodePython,
        EmitTarget::SolutionCodeCpp,
        EmitTarget::GraphDot,
        EmitTarget::JsonSolutions,
    ];

    /// Command-line keyword for the target.
    pub fn keyword(self) -> &'static str {
        match self {
            EmitTarget::LatexReport => "latex",
            EmitTarget::SolutionCodePython => "python",
            EmitTarget::SolutionCodeCpp => "cpp",
            EmitTarget::GraphDot => "dot",
            EmitTarget::JsonSolutions => "json",
        }
    }

    pub fn from_keyword(s: &str) -> Option<EmitTarget> {
        Self::ALL.into_iter().find(|t| t.keyword() == s)
    }

    /// Output file name for a robot of the given name.
    pub fn file_name(self, robot: &str) -> String {
        let stem = sanitize_ident(robot);
        match self {
            EmitTarget::LatexReport => format!("{stem}_report.tex"),
            EmitTarget::SolutionCodePython => format!("{stem}_ik.py"),
            EmitTarget::SolutionCodeCpp => format!("{stem}_ik.cpp"),
            EmitTarget::GraphDot => format!("{stem}_graph.dot"),
            EmitTarget::JsonSolutions => format!("{stem}_solutions.json"),
        }
    }
}

/// Everything emission needs about a fully solved robot.
#[derive(Clone, Copy)]
pub struct SolvedRobot<'a> {
    pub model: &'a KinematicModel,
    pub commits: &'a [CandidateSolution],
    pub graph: &'a SolutionGraph,
    pub poses: &'a [PoseSet],
}

impl SolvedRobot<'_> {
    pub fn emit(&self, target: EmitTarget) -> String {
        match target {
            EmitTarget::LatexReport => latex::emit_latex(self),
            EmitTarget::SolutionCodePython => {
                code::render(&ir::build_ir(self), code::Lang::Python)
            }
            EmitTarget::SolutionCodeCpp => code::render(&ir::build_ir(self), code::Lang::Cpp),
            EmitTarget::GraphDot => dot::emit_graph_dot(&self.model.robot.name, self.graph),
            EmitTarget::JsonSolutions => json::emit_json(self),
        }
    }
}

/// Map a robot name onto a safe identifier stem: alphanumerics kept,
/// everything else folded to `_`, leading digits prefixed.
pub fn sanitize_ident(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        out.push(if c.is_ascii_alphanumeric() { c } else { '_' });
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "ik_");
    }
    out
}
