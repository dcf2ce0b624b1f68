//! DOT rendering of the solution graph: one labeled node per concrete
//! solution, one directed edge from each node to each retained direct
//! parent.

use std::fmt::Write;

use crate::graph::SolutionGraph;

pub fn emit_graph_dot(name: &str, graph: &SolutionGraph) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "digraph \"{}\" {{", name.replace('"', ""));
    o.push_str("    rankdir=BT;\n");
    for node in &graph.nodes {
        let _ = writeln!(o, "    \"{0}\" [label=\"{0}\"];", node.label());
    }
    for node in &graph.nodes {
        let mut parents = node.parents.clone();
        parents.sort_unstable();
        for p in parents {
            let _ = writeln!(o, "    \"{}\" -> \"{}\";", node.label(), graph.nodes[p].label());
        }
    }
    o.push_str("}\n");
    o
}
