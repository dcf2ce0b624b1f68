//! End-to-end pipeline: forward kinematics, matrix equations, behavior-tree
//! solve, solution graph, pose-set enumeration, and sampled round-trip
//! verification, bundled for the command-line front end.

use std::fmt::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bt::{run_solver_loop, SolveOutcome, SolveResult};
use crate::emit::SolvedRobot;
use crate::graph::{build_solution_graph, GraphError, PoseSet, SolutionGraph};
use crate::kinematics::{build_model, KinematicModel, Robot};
use crate::numeric::DomainError;
use crate::verify::{sample_seed, verify_round_trip};

pub struct PipelineOutput {
    pub model: KinematicModel,
    pub result: SolveResult,
    /// Present exactly when the solve fully succeeded.
    pub solution: Option<(SolutionGraph, Vec<PoseSet>)>,
}

/// Run everything up to pose-set enumeration.
pub fn run_pipeline(robot: Robot, max_iterations: usize) -> Result<PipelineOutput, GraphError> {
    let model = build_model(robot);
    let result = run_solver_loop(&model, max_iterations);
    let solution = if result.outcome == SolveOutcome::FullySolved {
        Some(build_solution_graph(&result.commits)?)
    } else {
        None
    };
    Ok(PipelineOutput { model, result, solution })
}

/// Outcome of verifying `samples` random seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifySummary {
    pub samples: usize,
    pub passed: usize,
    /// Largest forward-kinematics residual seen on any evaluated pose set.
    pub worst_residual: f64,
}

impl VerifySummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.samples
    }
}

impl PipelineOutput {
    pub fn fully_solved(&self) -> bool {
        self.solution.is_some()
    }

    /// Borrow the pieces emission needs. Panics when not fully solved.
    pub fn solved_view(&self) -> SolvedRobot<'_> {
        let (graph, poses) = self.solution.as_ref().expect("fully solved");
        SolvedRobot { model: &self.model, commits: &self.result.commits, graph, poses }
    }

    /// Round-trip `samples` random joint seeds through the pose sets.
    pub fn verify_samples(
        &self,
        samples: usize,
        rng_seed: u64,
        tol: f64,
    ) -> Result<VerifySummary, DomainError> {
        let (_, poses) = self.solution.as_ref().expect("fully solved");
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut passed = 0;
        let mut worst = 0f64;
        for _ in 0..samples {
            let seed = sample_seed(&self.model.robot, &mut rng);
            let report =
                verify_round_trip(&self.model.robot, &self.result.commits, poses, &seed, tol)?;
            if report.pass {
                passed += 1;
            }
            for pose in &report.poses {
                if let Some(r) = pose.fk_residual {
                    worst = worst.max(r);
                }
            }
        }
        Ok(VerifySummary { samples, passed, worst_residual: worst })
    }

    /// Human-readable result summary: outcome, per-variable solver table,
    /// pose-set count, and the shape of the dependency graph.
    pub fn summary(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "robot: {}", self.model.robot.name);
        let outcome = match self.result.outcome {
            SolveOutcome::FullySolved => "fully solved",
            SolveOutcome::PartiallySolved => "partially solved",
            SolveOutcome::IterationLimit => "iteration limit reached",
        };
        let _ = writeln!(
            o,
            "outcome: {outcome} in {} pass{}",
            self.result.passes,
            if self.result.passes == 1 { "" } else { "es" }
        );
        let name_w = self
            .result
            .commits
            .iter()
            .map(|c| c.var.name().len())
            .max()
            .unwrap_or(0);
        let solver_w = self
            .result
            .commits
            .iter()
            .map(|c| c.solver.len())
            .max()
            .unwrap_or(0);
        for c in &self.result.commits {
            let _ = writeln!(
                o,
                "  {:name_w$}  {:solver_w$}  {} branch{}",
                c.var.name(),
                c.solver,
                c.branches.len(),
                if c.branches.len() == 1 { "" } else { "es" }
            );
        }
        if !self.result.unsolved.is_empty() {
            let names: Vec<&str> = self.result.unsolved.iter().map(|u| u.name()).collect();
            let _ = writeln!(o, "unsolved: {}", names.join(", "));
        }
        match &self.solution {
            Some((graph, poses)) => {
                let _ = writeln!(o, "{} pose sets", poses.len());
                let multi: Vec<&crate::graph::VariableInfo> = graph
                    .variables
                    .iter()
                    .filter(|v| graph.effective_parents(&v.var).len() >= 2)
                    .collect();
                if multi.is_empty() {
                    let _ = writeln!(o, "graph: tree");
                } else {
                    for v in multi {
                        let _ = writeln!(
                            o,
                            "graph (not tree): {} has {} independent parents",
                            v.var.name(),
                            graph.effective_parents(&v.var).len()
                        );
                    }
                }
            }
            None => {
                let _ = writeln!(o, "no pose sets (robot not fully solved)");
            }
        }
        o
    }
}
