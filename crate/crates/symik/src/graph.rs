//! Dependency graph over solved branches and enumeration of consistent
//! joint pose sets.
//!
//! Each solved variable contributes one node per (own branch, choice of
//! ancestor branches); an edge points from a node to the parent node it was
//! instantiated against. Redundant variable-level edges — a parent already
//! reachable through another parent — are pruned before nodes are laid out,
//! so the node structure mirrors what actually has to be evaluated.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::expr::{Expr, Sym};
use crate::solvers::CandidateSolution;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("solution for `{child}` references unsolved variable `{referenced}`")]
    UnsolvedVariable { child: String, referenced: String },
    #[error("cyclic dependency through `{0}`")]
    CyclicDependency(String),
    #[error("no consistent pose set exists")]
    EmptyPoseSet,
}

/// Reference to a parent choice: a specific branch when the expression names
/// one (`th_1s2`), otherwise any branch of that variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParentRef {
    pub var: Sym,
    pub branch: Option<usize>,
}

/// Per-variable solve outcome with branch-level parent references.
#[derive(Clone, Debug)]
pub struct SolvedVariable {
    pub var: Sym,
    pub solver: &'static str,
    pub branches: Vec<Expr>,
    /// Parent references per branch, aligned with `branches`.
    pub parents: Vec<BTreeSet<ParentRef>>,
}

/// One concrete solution node: a branch expression instantiated for a fixed
/// choice of every ancestor's branch.
#[derive(Clone, Debug)]
pub struct SolutionNode {
    pub var: Sym,
    /// Index into the variable's branch list.
    pub own_branch: usize,
    /// 1-based label index among this variable's nodes, as in `th_1s2`.
    pub label_index: usize,
    pub expression: Expr,
    /// Direct parent nodes (indices into `SolutionGraph::nodes`) after
    /// redundant-edge pruning; these are the graph edges.
    pub parents: Vec<usize>,
    /// Value source for every variable reference in the expression, keyed
    /// by the literal symbol text (plain name or branch label). Pruning
    /// removes display edges, not references, so this is a superset of
    /// `parents`.
    pub refs: Vec<(String, usize)>,
    /// Own-branch choice for this variable and every ancestor variable.
    pub ancestry: BTreeMap<Sym, usize>,
}

impl SolutionNode {
    pub fn label(&self) -> String {
        format!("{}s{}", self.var.name(), self.label_index)
    }
}

/// Variable-level summary kept alongside the concrete nodes.
#[derive(Clone, Debug)]
pub struct VariableInfo {
    pub var: Sym,
    pub solver: &'static str,
    pub branches: Vec<Expr>,
    pub parents: Vec<BTreeSet<ParentRef>>,
    /// Post-prune direct parent variables.
    pub direct_parents: BTreeSet<Sym>,
    /// All variables reachable through parent edges (pre-prune closure).
    pub ancestors: BTreeSet<Sym>,
}

#[derive(Clone, Debug)]
pub struct SolutionGraph {
    /// Solve order.
    pub variables: Vec<VariableInfo>,
    pub nodes: Vec<SolutionNode>,
}

impl SolutionGraph {
    pub fn variable(&self, var: &Sym) -> Option<&VariableInfo> {
        self.variables.iter().find(|v| &v.var == var)
    }

    pub fn nodes_of(&self, var: &Sym) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| &self.nodes[i].var == var).collect()
    }

    /// Direct parents with combined-angle variables replaced by their own
    /// parents, recursively; the view used for reported joints.
    pub fn effective_parents(&self, var: &Sym) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        let Some(info) = self.variable(var) else { return out };
        let mut stack: Vec<Sym> = info.direct_parents.iter().cloned().collect();
        while let Some(p) = stack.pop() {
            if p.is_sum_of_angle() {
                if let Some(pi) = self.variable(&p) {
                    stack.extend(pi.direct_parents.iter().cloned());
                }
            } else {
                out.insert(p);
            }
        }
        out
    }

    /// True when some variable keeps two or more direct parents, i.e. the
    /// graph is not a tree.
    pub fn has_multi_parent_variable(&self) -> bool {
        self.variables.iter().any(|v| v.direct_parents.len() > 1)
    }
}

/// One consistent assignment of a branch to every solved variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoseSet {
    /// Own-branch choice per variable.
    pub choices: BTreeMap<Sym, usize>,
    /// Concrete node per variable, in solve order.
    pub nodes: Vec<usize>,
}

impl PoseSet {
    pub fn branch_of(&self, var: &Sym) -> Option<usize> {
        self.choices.get(var).copied()
    }
}

/// Split `name` into a variable base and a 1-based branch label, as in
/// `th_1s2` -> ("th_1", 2). The split point is the last `s` followed by
/// digits only.
fn split_branch_label(name: &str) -> Option<(&str, usize)> {
    let pos = name.rfind('s')?;
    if pos == 0 {
        return None;
    }
    let digits = &name[pos + 1..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    if idx == 0 {
        return None;
    }
    Some((&name[..pos], idx))
}

/// Read the parent references off every committed branch expression.
///
/// A symbol naming an earlier-solved variable is an unkeyed reference; a
/// branch-labeled symbol (`th_1s1`) pins the specific parent branch. Joint
/// or combined-angle symbols that were never solved are an error.
pub fn collect_dependencies(commits: &[CandidateSolution]) -> Result<Vec<SolvedVariable>, GraphError> {
    let mut solved: BTreeMap<String, Sym> = BTreeMap::new();
    let mut out = Vec::with_capacity(commits.len());
    for commit in commits {
        let mut parents = Vec::with_capacity(commit.branches.len());
        for branch in &commit.branches {
            let mut refs = BTreeSet::new();
            for s in branch.free_syms() {
                if s.is_revolute() || s.is_prismatic() || s.is_sum_of_angle() {
                    let name = s.name();
                    if let Some(v) = solved.get(name) {
                        refs.insert(ParentRef { var: v.clone(), branch: None });
                    } else if let Some((base, idx)) = split_branch_label(name) {
                        let Some(v) = solved.get(base) else {
                            return Err(GraphError::UnsolvedVariable {
                                child: commit.var.name().to_string(),
                                referenced: name.to_string(),
                            });
                        };
                        refs.insert(ParentRef { var: v.clone(), branch: Some(idx - 1) });
                    } else {
                        return Err(GraphError::UnsolvedVariable {
                            child: commit.var.name().to_string(),
                            referenced: name.to_string(),
                        });
                    }
                }
            }
            parents.push(refs);
        }
        solved.insert(commit.var.name().to_string(), commit.var.clone());
        out.push(SolvedVariable {
            var: commit.var.clone(),
            solver: commit.solver,
            branches: commit.branches.clone(),
            parents,
        });
    }
    Ok(out)
}

/// Drop parent edges already implied through another parent, then lay out
/// the concrete nodes.
///
/// An edge child -> A is redundant when some other parent P of the child has
/// A among its ancestors; branch-keyed references are never dropped since
/// they carry selection information. The result is acyclic by construction
/// of the solve order; a cycle therefore signals a solver bug and errors.
pub fn prune_redundant_edges(solved: Vec<SolvedVariable>) -> Result<SolutionGraph, GraphError> {
    // variable-level parent sets
    let order: Vec<Sym> = solved.iter().map(|s| s.var.clone()).collect();
    let mut var_parents: BTreeMap<Sym, BTreeSet<Sym>> = BTreeMap::new();
    for sv in &solved {
        let mut ps = BTreeSet::new();
        for refs in &sv.parents {
            for r in refs {
                ps.insert(r.var.clone());
            }
        }
        var_parents.insert(sv.var.clone(), ps);
    }

    // ancestor closure in solve order; a parent not yet closed over means a
    // forward (cyclic) reference
    let mut ancestors: BTreeMap<Sym, BTreeSet<Sym>> = BTreeMap::new();
    for v in &order {
        let mut acc = BTreeSet::new();
        for p in &var_parents[v] {
            if p == v {
                return Err(GraphError::CyclicDependency(v.name().to_string()));
            }
            let Some(pa) = ancestors.get(p) else {
                return Err(GraphError::CyclicDependency(p.name().to_string()));
            };
            acc.insert(p.clone());
            acc.extend(pa.iter().cloned());
        }
        if acc.contains(v) {
            return Err(GraphError::CyclicDependency(v.name().to_string()));
        }
        ancestors.insert(v.clone(), acc);
    }

    // prune rule at the variable level
    let mut direct: BTreeMap<Sym, BTreeSet<Sym>> = BTreeMap::new();
    for v in &order {
        let ps = &var_parents[v];
        // a keyed reference pins a branch; its edge must survive
        let keyed: BTreeSet<Sym> = solved
            .iter()
            .find(|s| &s.var == v)
            .map(|s| {
                s.parents
                    .iter()
                    .flatten()
                    .filter(|r| r.branch.is_some())
                    .map(|r| r.var.clone())
                    .collect()
            })
            .unwrap_or_default();
        let kept: BTreeSet<Sym> = ps
            .iter()
            .filter(|a| {
                keyed.contains(a)
                    || !ps.iter().any(|p| p != *a && ancestors[p].contains(*a))
            })
            .cloned()
            .collect();
        direct.insert(v.clone(), kept);
    }

    let variables: Vec<VariableInfo> = solved
        .into_iter()
        .map(|sv| {
            let direct_parents = direct[&sv.var].clone();
            let ancestors = ancestors[&sv.var].clone();
            VariableInfo {
                var: sv.var,
                solver: sv.solver,
                branches: sv.branches,
                parents: sv.parents,
                direct_parents,
                ancestors,
            }
        })
        .collect();

    // concrete nodes: one per (own branch, assignment over the ancestor
    // closure) that respects every branch key along the way
    let mut nodes: Vec<SolutionNode> = Vec::new();
    let mut by_var_anc: BTreeMap<(Sym, Vec<(Sym, usize)>), usize> = BTreeMap::new();
    for info in &variables {
        let mut closure: Vec<Sym> =
            variables.iter().map(|v| v.var.clone()).filter(|v| info.ancestors.contains(v)).collect();
        closure.push(info.var.clone());
        let mut label = 0usize;
        for assignment in assignments_over(&variables, &closure) {
            let own = assignment[&info.var];
            if !branch_keys_ok(&variables, &assignment) {
                continue;
            }
            let resolve = |target: &Sym| {
                let t_anc = &variables.iter().find(|i| &i.var == target).unwrap().ancestors;
                let ta: Vec<(Sym, usize)> = assignment
                    .iter()
                    .filter(|(v, _)| *v == target || t_anc.contains(*v))
                    .map(|(v, b)| (v.clone(), *b))
                    .collect();
                by_var_anc[&(target.clone(), ta)]
            };
            let parents: Vec<usize> = info.direct_parents.iter().map(&resolve).collect();
            let refs: Vec<(String, usize)> = info.parents[own]
                .iter()
                .map(|r| {
                    let key = match r.branch {
                        Some(b) => format!("{}s{}", r.var.name(), b + 1),
                        None => r.var.name().to_string(),
                    };
                    (key, resolve(&r.var))
                })
                .collect();
            label += 1;
            let key: Vec<(Sym, usize)> =
                assignment.iter().map(|(v, b)| (v.clone(), *b)).collect();
            by_var_anc.insert((info.var.clone(), key), nodes.len());
            nodes.push(SolutionNode {
                var: info.var.clone(),
                own_branch: own,
                label_index: label,
                expression: info.branches[own].clone(),
                parents,
                refs,
                ancestry: assignment,
            });
        }
    }

    Ok(SolutionGraph { variables, nodes })
}

/// All branch assignments over `closure` (a set of variables closed under
/// ancestors), in lexicographic branch order.
fn assignments_over(
    variables: &[VariableInfo],
    closure: &[Sym],
) -> Vec<BTreeMap<Sym, usize>> {
    let mut out: Vec<BTreeMap<Sym, usize>> = vec![BTreeMap::new()];
    for v in closure {
        let count = variables.iter().find(|i| &i.var == v).map_or(1, |i| i.branches.len());
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..count).map(move |b| {
                    let mut a = a.clone();
                    a.insert(v.clone(), b);
                    a
                })
            })
            .collect();
    }
    out
}

/// Check every keyed parent reference of every assigned variable against the
/// assignment.
fn branch_keys_ok(variables: &[VariableInfo], assignment: &BTreeMap<Sym, usize>) -> bool {
    for (v, &b) in assignment {
        let Some(info) = variables.iter().find(|i| &i.var == v) else { continue };
        for r in &info.parents[b] {
            if let Some(k) = r.branch {
                match assignment.get(&r.var) {
                    Some(&chosen) if chosen == k => {}
                    Some(_) => return false,
                    // parent outside this closure slice: checked when the
                    // full pose set is assembled
                    None => {}
                }
            }
        }
    }
    true
}

/// Enumerate every maximal consistent assignment: one branch per variable
/// such that all branch-keyed parent references agree with the choices.
pub fn enumerate_pose_sets(graph: &SolutionGraph) -> Result<Vec<PoseSet>, GraphError> {
    let vars = &graph.variables;
    let mut out = Vec::new();
    let mut assignment: BTreeMap<Sym, usize> = BTreeMap::new();
    fn rec(
        vars: &[VariableInfo],
        graph: &SolutionGraph,
        idx: usize,
        assignment: &mut BTreeMap<Sym, usize>,
        out: &mut Vec<PoseSet>,
    ) {
        if idx == vars.len() {
            let nodes: Vec<usize> = vars
                .iter()
                .map(|info| {
                    graph
                        .nodes
                        .iter()
                        .position(|n| {
                            n.var == info.var
                                && n.ancestry.iter().all(|(v, b)| assignment.get(v) == Some(b))
                        })
                        .expect("consistent assignment has a node per variable")
                })
                .collect();
            out.push(PoseSet { choices: assignment.clone(), nodes });
            return;
        }
        let info = &vars[idx];
        for b in 0..info.branches.len() {
            let ok = info.parents[b].iter().all(|r| match r.branch {
                Some(k) => assignment.get(&r.var) == Some(&k),
                None => true,
            });
            if !ok {
                continue;
            }
            assignment.insert(info.var.clone(), b);
            rec(vars, graph, idx + 1, assignment, out);
            assignment.remove(&info.var);
        }
    }
    rec(vars, graph, 0, &mut assignment, &mut out);
    if out.is_empty() {
        return Err(GraphError::EmptyPoseSet);
    }
    Ok(out)
}

/// Convenience: dependency collection, pruning, and enumeration in one step.
pub fn build_solution_graph(
    commits: &[CandidateSolution],
) -> Result<(SolutionGraph, Vec<PoseSet>), GraphError> {
    let solved = collect_dependencies(commits)?;
    let graph = prune_redundant_edges(solved)?;
    let poses = enumerate_pose_sets(&graph)?;
    Ok((graph, poses))
}
