//! Behavior-tree orchestration of the solve loop.
//!
//! The tree is data (`BTNode`), ticked against a shared `Blackboard` that
//! owns the mutable solve state. Composite nodes never touch the blackboard
//! themselves; only `Action` leaves do. One pass runs the two transform
//! leaves in parallel, then loops an assign/solve/commit sequence until no
//! assignable variable remains; passes repeat until everything is solved,
//! a pass makes no progress, or the iteration cap is hit.

use std::collections::BTreeSet;
use std::mem;

use crate::expr::{canon, Expr, Sym};
use crate::kinematics::{KinematicModel, ScalarEquation};
use crate::rewrite::{
    apply_pattern, contract_trig, derive_pattern, eliminate_constituent, SoaRecord, SoaRegistry,
};
use crate::solvers::{self, rank_candidates, CandidateSolution, SolveContext};

/// Maximum substitution sweeps per pass; each accepted rewrite strictly
/// reduces unsolved-symbol occurrences, so this is a safety net, not a tuning
/// knob.
const SUBSTITUTION_SWEEP_CAP: usize = 10;

/// Default pass budget for `run_solver_loop`.
pub const DEFAULT_MAX_ITERATIONS: usize = 10;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    Success,
    Failure,
}

/// The six per-variable solver leaves.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolverKind {
    Algebra,
    SineOrCosine,
    Tangent,
    SinAndCos,
    Simultaneous,
    X2Y2,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Algebra,
        SolverKind::SineOrCosine,
        SolverKind::Tangent,
        SolverKind::SinAndCos,
        SolverKind::Simultaneous,
        SolverKind::X2Y2,
    ];
}

/// Leaf behaviors. Everything that mutates the blackboard lives here.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ActionKind {
    /// Introduce combined angles and eliminate lone unsolved constituents.
    SumOfAngle,
    /// Cross-equation pattern substitution, run to a fixpoint.
    Substitution,
    /// Pick the next unsolved, unattempted variable in chain order.
    Assigner,
    /// Run one solver against the assigned variable.
    Solver(SolverKind),
    /// Rank collected candidates and commit the winner.
    RankerCommit,
}

#[derive(Clone, Debug)]
pub enum BTNode {
    /// Succeeds iff every child succeeds; stops at the first failure.
    Sequence(Vec<BTNode>),
    /// Succeeds at the first child that succeeds.
    Selector(Vec<BTNode>),
    /// Ticks every child regardless of outcome; succeeds if any did.
    Parallel(Vec<BTNode>),
    /// Ticks its child and succeeds unconditionally.
    Succeeder(Box<BTNode>),
    Action(ActionKind),
}

/// Tick a node against the blackboard.
pub fn tick(node: &BTNode, bb: &mut Blackboard) -> Status {
    match node {
        BTNode::Sequence(children) => {
            for c in children {
                if tick(c, bb) == Status::Failure {
                    return Status::Failure;
                }
            }
            Status::Success
        }
        BTNode::Selector(children) => {
            for c in children {
                if tick(c, bb) == Status::Success {
                    return Status::Success;
                }
            }
            Status::Failure
        }
        BTNode::Parallel(children) => {
            let mut any = Status::Failure;
            for c in children {
                if tick(c, bb) == Status::Success {
                    any = Status::Success;
                }
            }
            any
        }
        BTNode::Succeeder(child) => {
            tick(child, bb);
            Status::Success
        }
        BTNode::Action(kind) => bb.run_action(*kind),
    }
}

/// The transform stage: both rewrite leaves always run, and the stage never
/// blocks the pass.
pub fn transform_tree() -> BTNode {
    BTNode::Succeeder(Box::new(BTNode::Parallel(vec![
        BTNode::Action(ActionKind::SumOfAngle),
        BTNode::Action(ActionKind::Substitution),
    ])))
}

/// One assign/solve/commit step. Fails only when the assigner finds nothing
/// left to try, which ends the pass.
pub fn variable_tree() -> BTNode {
    let solvers = SolverKind::ALL
        .iter()
        .map(|k| BTNode::Action(ActionKind::Solver(*k)))
        .collect();
    BTNode::Sequence(vec![
        BTNode::Action(ActionKind::Assigner),
        BTNode::Succeeder(Box::new(BTNode::Sequence(vec![
            BTNode::Parallel(solvers),
            BTNode::Action(ActionKind::RankerCommit),
        ]))),
    ])
}

/// Mutable solve state shared by all tree leaves.
#[derive(Clone, Debug)]
pub struct Blackboard {
    pub equations: Vec<ScalarEquation>,
    pub registry: SoaRegistry,
    /// Chain-order variable list, combined angles included.
    pub solve_order: Vec<Sym>,
    pub unsolved: BTreeSet<Sym>,
    pub solved: BTreeSet<Sym>,
    /// Winning candidates in commit order.
    pub commits: Vec<CandidateSolution>,
    /// Variables tried since the last commit (or pass start); a commit
    /// clears it so the assigner restarts from the front of the chain.
    attempted: BTreeSet<Sym>,
    /// Variable the solvers currently target.
    pub assigned: Option<Sym>,
    /// Candidates collected for `assigned` this step.
    candidates: Vec<CandidateSolution>,
    /// Whether this pass changed anything (equation rewrite or commit).
    progress: bool,
}

impl Blackboard {
    pub fn from_model(model: &KinematicModel) -> Self {
        Blackboard::from_parts(
            model.equations.clone(),
            model.registry.clone(),
            model.solve_order.clone(),
            BTreeSet::new(),
        )
    }

    /// Assemble a blackboard from explicit parts; `solved` names variables
    /// treated as already known.
    pub fn from_parts(
        mut equations: Vec<ScalarEquation>,
        registry: SoaRegistry,
        solve_order: Vec<Sym>,
        solved: BTreeSet<Sym>,
    ) -> Self {
        let unsolved: BTreeSet<Sym> =
            solve_order.iter().filter(|s| !solved.contains(*s)).cloned().collect();
        for eq in &mut equations {
            eq.refresh(&unsolved);
        }
        Blackboard {
            equations,
            registry,
            solve_order,
            unsolved,
            solved,
            commits: Vec::new(),
            attempted: BTreeSet::new(),
            assigned: None,
            candidates: Vec::new(),
            progress: false,
        }
    }

    fn begin_pass(&mut self) {
        self.attempted.clear();
        self.candidates.clear();
        self.assigned = None;
        self.progress = false;
    }

    fn refresh_all(&mut self) {
        let unsolved = self.unsolved.clone();
        for eq in &mut self.equations {
            eq.refresh(&unsolved);
        }
    }

    fn run_action(&mut self, kind: ActionKind) -> Status {
        let ok = match kind {
            ActionKind::SumOfAngle => self.sum_of_angle(),
            ActionKind::Substitution => self.substitution(),
            ActionKind::Assigner => self.assign_next(),
            ActionKind::Solver(k) => self.run_solver(k),
            ActionKind::RankerCommit => self.commit_best(),
        };
        if ok {
            Status::Success
        } else {
            Status::Failure
        }
    }

    // -- transform leaves ---------------------------------------------------

    /// Fold fresh sin/cos products into combined angles, then rewrite any
    /// combined angle whose constituents are solved except one, expressing
    /// that lone straggler through the combined symbol.
    fn sum_of_angle(&mut self) -> bool {
        let mut changed = false;
        for i in 0..self.equations.len() {
            let lhs = contract_trig(self.equations[i].lhs.clone(), &mut self.registry);
            let rhs = contract_trig(self.equations[i].rhs.clone(), &mut self.registry);
            let eq = &mut self.equations[i];
            if lhs != eq.lhs || rhs != eq.rhs {
                eq.lhs = lhs;
                eq.rhs = rhs;
                changed = true;
            }
        }
        self.sync_combined_symbols();
        if changed {
            self.refresh_all();
        }

        let records: Vec<SoaRecord> = self.registry.records().to_vec();
        for rec in &records {
            if !self.unsolved.contains(&rec.combined) {
                continue;
            }
            let pending: Vec<Sym> = rec
                .parts
                .iter()
                .map(|(_, p)| p.clone())
                .filter(|p| self.unsolved.contains(p))
                .collect();
            if pending.len() != 1 {
                continue;
            }
            let target = &pending[0];
            let mut hit = false;
            for eq in &mut self.equations {
                let lhs = eliminate_constituent(&eq.lhs, rec, target);
                let rhs = eliminate_constituent(&eq.rhs, rec, target);
                if lhs != eq.lhs || rhs != eq.rhs {
                    eq.lhs = lhs;
                    eq.rhs = rhs;
                    hit = true;
                }
            }
            if hit {
                self.refresh_all();
                changed = true;
            }
        }
        if changed {
            self.progress = true;
        }
        changed
    }

    /// Register any combined angle the contraction sweep introduced after
    /// model build: it becomes a solvable variable, slotted in chain order
    /// after its last constituent.
    fn sync_combined_symbols(&mut self) {
        for rec in self.registry.records().to_vec() {
            let c = rec.combined.clone();
            if !self.solve_order.contains(&c) {
                let mut pos = self.solve_order.len();
                for (_, p) in &rec.parts {
                    if let Some(i) = self.solve_order.iter().position(|s| s == p) {
                        let mut j = i + 1;
                        while j < self.solve_order.len() && self.solve_order[j].is_sum_of_angle() {
                            j += 1;
                        }
                        pos = pos.min(self.solve_order.len()).max(j);
                    }
                }
                self.solve_order.insert(pos.min(self.solve_order.len()), c.clone());
            }
            if !self.solved.contains(&c) && !self.unsolved.contains(&c) {
                self.unsolved.insert(c);
            }
        }
    }

    /// Sweep substitution patterns across equations until nothing improves.
    /// A rewrite is kept only if it strictly drops the count of unsolved
    /// symbol occurrences in the residual, which both guarantees termination
    /// and keeps the rule from shuffling terms around endlessly.
    fn substitution(&mut self) -> bool {
        let unsolved = self.unsolved.clone();
        let mut changed_any = false;
        for _ in 0..SUBSTITUTION_SWEEP_CAP {
            let mut changed = false;
            for src in 0..self.equations.len() {
                let Some(pat) = derive_pattern(&self.equations[src].resid, &unsolved) else {
                    continue;
                };
                for dst in 0..self.equations.len() {
                    if dst == src {
                        continue;
                    }
                    let eq = &self.equations[dst];
                    let new_lhs = apply_pattern(&eq.lhs, &pat);
                    let new_rhs = apply_pattern(&eq.rhs, &pat);
                    if new_lhs.is_none() && new_rhs.is_none() {
                        continue;
                    }
                    let lhs = new_lhs.unwrap_or_else(|| eq.lhs.clone());
                    let rhs = new_rhs.unwrap_or_else(|| eq.rhs.clone());
                    let resid = canon(Expr::sub(lhs.clone(), rhs.clone()));
                    if unsolved_occurrences(&resid, &unsolved)
                        >= unsolved_occurrences(&eq.resid, &unsolved)
                    {
                        continue;
                    }
                    let eq = &mut self.equations[dst];
                    eq.lhs = lhs;
                    eq.rhs = rhs;
                    eq.refresh(&unsolved);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            changed_any = true;
        }
        if changed_any {
            self.progress = true;
        }
        changed_any
    }

    // -- solve leaves -------------------------------------------------------

    fn assign_next(&mut self) -> bool {
        for s in &self.solve_order {
            if self.unsolved.contains(s) && !self.attempted.contains(s) {
                self.attempted.insert(s.clone());
                self.assigned = Some(s.clone());
                return true;
            }
        }
        self.assigned = None;
        false
    }

    /// True when `x` is the last unsolved constituent of a combined angle
    /// that itself is still open. The elimination rewrite is about to fold
    /// every `x` occurrence into the combined symbol, so the combined must
    /// resolve first; `x` then follows from the registry relation.
    fn pending_elimination(&self, x: &Sym) -> bool {
        self.registry.records().iter().any(|rec| {
            self.unsolved.contains(&rec.combined)
                && rec
                    .parts
                    .iter()
                    .filter_map(|(_, p)| self.unsolved.contains(p).then_some(p))
                    .eq([x])
        })
    }

    fn run_solver(&mut self, kind: SolverKind) -> bool {
        let Some(x) = self.assigned.clone() else {
            return false;
        };
        if self.pending_elimination(&x) {
            return false;
        }
        let found = {
            let ctx = SolveContext {
                equations: &self.equations,
                unsolved: &self.unsolved,
                solved: &self.solved,
                registry: &self.registry,
            };
            match kind {
                SolverKind::Algebra => solvers::solve_algebra(&ctx, &x),
                SolverKind::SineOrCosine => solvers::solve_sine_or_cosine(&ctx, &x),
                SolverKind::Tangent => solvers::solve_tangent(&ctx, &x),
                SolverKind::SinAndCos => solvers::solve_sin_and_cos(&ctx, &x),
                SolverKind::Simultaneous => solvers::solve_simultaneous(&ctx, &x),
                SolverKind::X2Y2 => solvers::solve_x2y2(&ctx, &x),
            }
        };
        let any = !found.is_empty();
        self.candidates.extend(found);
        any
    }

    /// Commit the best-ranked candidate: the variable moves to the solved
    /// set, every equation refreshes its unknown bookkeeping, and the
    /// attempted set clears so the assigner restarts from the chain front.
    fn commit_best(&mut self) -> bool {
        let Some(best) = rank_candidates(mem::take(&mut self.candidates)) else {
            return false;
        };
        let var = best.var.clone();
        self.unsolved.remove(&var);
        self.solved.insert(var);
        self.commits.push(best);
        self.attempted.clear();
        self.refresh_all();
        self.progress = true;
        true
    }
}

/// Count unsolved-symbol leaf occurrences; the substitution acceptance
/// metric.
fn unsolved_occurrences(e: &Expr, unsolved: &BTreeSet<Sym>) -> usize {
    match e {
        Expr::Sym(s) => usize::from(unsolved.contains(s)),
        Expr::Int(_) | Expr::Rat(_, _) | Expr::Pi => 0,
        Expr::Add(ts) | Expr::Mul(ts) => {
            ts.iter().map(|t| unsolved_occurrences(t, unsolved)).sum()
        }
        Expr::Pow(b, _) => unsolved_occurrences(b, unsolved),
        Expr::Sin(a) | Expr::Cos(a) | Expr::Tan(a) | Expr::Asin(a) | Expr::Acos(a)
        | Expr::Sqrt(a) => unsolved_occurrences(a, unsolved),
        Expr::Atan2(y, x) => unsolved_occurrences(y, unsolved) + unsolved_occurrences(x, unsolved),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolveOutcome {
    /// Every unknown has a committed closed form.
    FullySolved,
    /// A full pass changed nothing; the remainder is out of reach.
    PartiallySolved,
    /// The pass budget ran out with work still pending.
    IterationLimit,
}

/// Final solve state handed to downstream stages.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub outcome: SolveOutcome,
    /// Winning candidates in the order they were committed.
    pub commits: Vec<CandidateSolution>,
    pub unsolved: BTreeSet<Sym>,
    pub equations: Vec<ScalarEquation>,
    pub registry: SoaRegistry,
    pub solve_order: Vec<Sym>,
    /// Passes executed.
    pub passes: usize,
}

impl SolveResult {
    /// Commit for one variable, if any.
    pub fn commit_for(&self, name: &str) -> Option<&CandidateSolution> {
        self.commits.iter().find(|c| c.var.name() == name)
    }
}

/// Run the full solve loop against a kinematic model.
pub fn run_solver_loop(model: &KinematicModel, max_iterations: usize) -> SolveResult {
    let mut bb = Blackboard::from_model(model);
    let transforms = transform_tree();
    let step = variable_tree();
    let mut outcome = SolveOutcome::IterationLimit;
    let mut passes = 0;
    if bb.unsolved.is_empty() {
        outcome = SolveOutcome::FullySolved;
    } else {
        for _ in 0..max_iterations {
            passes += 1;
            bb.begin_pass();
            // every commit changes the solved set, which can arm a combined-
            // angle elimination or a new substitution; rerun the transform
            // stage before giving the assigner the next variable
            'pass: loop {
                tick(&transforms, &mut bb);
                let committed = bb.commits.len();
                while tick(&step, &mut bb) == Status::Success {
                    if bb.commits.len() > committed {
                        continue 'pass;
                    }
                }
                break;
            }
            if bb.unsolved.is_empty() {
                outcome = SolveOutcome::FullySolved;
                break;
            }
            if !bb.progress {
                outcome = SolveOutcome::PartiallySolved;
                break;
            }
        }
    }
    SolveResult {
        outcome,
        commits: bb.commits,
        unsolved: bb.unsolved,
        equations: bb.equations,
        registry: bb.registry,
        solve_order: bb.solve_order,
        passes,
    }
}
