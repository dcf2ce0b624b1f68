//! Numeric round-trip verification: evaluate every enumerated pose set at a
//! concrete target pose and push the recovered joints back through forward
//! kinematics.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::expr::Sym;
use crate::graph::PoseSet;
use crate::kinematics::{bind_pose, fk_numeric, Robot};
use crate::numeric::{eval, Bindings, DomainError};
use crate::solvers::CandidateSolution;

/// Two joint values count as the same input pose below this distance
/// (radians for revolute joints, after wrapping).
pub const ANGLE_MATCH_TOL: f64 = 1e-4;

/// A branch evaluation failure attributed to its variable.
#[derive(Clone, Debug)]
pub struct BranchError {
    pub var: Sym,
    pub error: DomainError,
}

/// Numeric outcome for a single pose set.
#[derive(Clone, Debug)]
pub struct PoseEvaluation {
    /// Value of every variable that could be evaluated, combined angles
    /// included.
    pub values: BTreeMap<Sym, f64>,
    pub domain_errors: Vec<BranchError>,
    /// Max absolute entry difference between the recovered FK matrix and the
    /// target; `None` when the pose set is unreachable.
    pub fk_residual: Option<f64>,
    /// True when every real joint equals the seed modulo a full turn.
    pub matched_input: bool,
}

impl PoseEvaluation {
    pub fn reachable(&self) -> bool {
        self.domain_errors.is_empty()
    }

    /// Recovered values of the real joints, in the given chain order.
    pub fn joints<'a>(&'a self, unknowns: &'a [Sym]) -> impl Iterator<Item = (&'a Sym, f64)> {
        unknowns.iter().filter_map(|u| self.values.get(u).map(|v| (u, *v)))
    }
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    /// The target pose matrix the seed produced.
    pub t_d: [[f64; 4]; 4],
    pub tol: f64,
    pub poses: Vec<PoseEvaluation>,
    /// Every pose set reproduces the target within `tol` and at least one
    /// matches the seed joints.
    pub pass: bool,
}

/// Smallest distance between two angles modulo a full turn.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Evaluate one pose set's branches in solve order under `base` (constants
/// and pose elements). A variable whose branch references a failed ancestor
/// is skipped silently; only root causes are flagged.
pub fn evaluate_pose(
    commits: &[CandidateSolution],
    pose: &PoseSet,
    base: &Bindings,
) -> (BTreeMap<Sym, f64>, Vec<BranchError>) {
    let mut env = base.clone();
    let mut values = BTreeMap::new();
    let mut errors: Vec<BranchError> = Vec::new();
    let mut failed: Vec<Sym> = Vec::new();
    for c in commits {
        let Some(branch) = pose.branch_of(&c.var) else {
            continue;
        };
        let expr = &c.branches[branch];
        if expr.free_syms().iter().any(|s| failed.contains(s)) {
            failed.push(c.var.clone());
            continue;
        }
        match eval(expr, &env) {
            Ok(v) => {
                env.set(c.var.clone(), v);
                values.insert(c.var.clone(), v);
            }
            Err(error) => {
                errors.push(BranchError { var: c.var.clone(), error });
                failed.push(c.var.clone());
            }
        }
    }
    (values, errors)
}

/// Compute the target pose by FK at `seed`, evaluate every pose set against
/// it, and run FK on each recovered pose.
pub fn verify_round_trip(
    robot: &Robot,
    commits: &[CandidateSolution],
    poses: &[PoseSet],
    seed: &Bindings,
    tol: f64,
) -> Result<VerificationReport, DomainError> {
    let t_d = fk_numeric(&robot.rows, seed)?;
    let mut base = robot.constant_bindings();
    bind_pose(&mut base, &t_d);

    let mut evaluations = Vec::with_capacity(poses.len());
    for pose in poses {
        let (values, domain_errors) = evaluate_pose(commits, pose, &base);
        let mut fk_residual = None;
        let mut matched_input = false;
        if domain_errors.is_empty() {
            let mut env = robot.constant_bindings();
            for u in &robot.unknowns {
                if let Some(v) = values.get(u) {
                    env.set(u.clone(), *v);
                }
            }
            let t = fk_numeric(&robot.rows, &env)?;
            let mut worst = 0f64;
            for r in 0..4 {
                for c in 0..4 {
                    worst = worst.max((t[r][c] - t_d[r][c]).abs());
                }
            }
            fk_residual = Some(worst);
            matched_input = robot.unknowns.iter().all(|u| {
                let (Some(got), Some(want)) = (values.get(u).copied(), seed.get(u)) else {
                    return false;
                };
                let dist = if u.is_revolute() {
                    angle_distance(got, want)
                } else {
                    (got - want).abs()
                };
                dist <= ANGLE_MATCH_TOL
            });
        }
        evaluations.push(PoseEvaluation { values, domain_errors, fk_residual, matched_input });
    }

    let pass = evaluations.iter().all(|e| e.fk_residual.is_some_and(|r| r <= tol))
        && evaluations.iter().any(|e| e.matched_input);
    Ok(VerificationReport { t_d, tol, poses: evaluations, pass })
}

/// Reachability status of one pose set at a target with no known seed.
#[derive(Clone, Debug)]
pub struct ReachFlag {
    pub reachable: bool,
    pub errors: Vec<BranchError>,
}

/// Flag each pose set unreachable iff some branch evaluation raises a domain
/// error under `pose_bindings` (constants plus pose elements).
pub fn check_reachability(
    commits: &[CandidateSolution],
    poses: &[PoseSet],
    pose_bindings: &Bindings,
) -> Vec<ReachFlag> {
    poses
        .iter()
        .map(|pose| {
            let (_, errors) = evaluate_pose(commits, pose, pose_bindings);
            ReachFlag { reachable: errors.is_empty(), errors }
        })
        .collect()
}

/// Random joint seed: revolute uniform in (-pi, pi], prismatic uniform in
/// [0.1, 2.0]; constants from the robot description.
pub fn sample_seed<R: Rng>(robot: &Robot, rng: &mut R) -> Bindings {
    let mut seed = robot.constant_bindings();
    for u in &robot.unknowns {
        let v = if u.is_revolute() {
            -rng.gen_range(-PI..PI)
        } else {
            rng.gen_range(0.1..=2.0)
        };
        seed.set(u.clone(), v);
    }
    seed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::{run_solver_loop, DEFAULT_MAX_ITERATIONS};
    use crate::expr::Expr;
    use crate::fixtures;
    use crate::graph::build_solution_graph;
    use crate::kinematics::{build_model, DhRow, KinematicModel};
    use crate::numeric::DomainErrorKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solve(model: &KinematicModel) -> (Vec<CandidateSolution>, Vec<PoseSet>) {
        let result = run_solver_loop(model, DEFAULT_MAX_ITERATIONS);
        assert!(result.unsolved.is_empty());
        let (_, poses) = build_solution_graph(&result.commits).unwrap();
        (result.commits, poses)
    }

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn single_revolute_recovers_seed_exactly_at_zero() {
        let th = Sym::revolute("th_1");
        let robot = Robot {
            name: "one".into(),
            rows: vec![DhRow {
                alpha: Expr::Int(0),
                a: Expr::Int(0),
                d: Expr::Int(0),
                theta: th.expr(),
            }],
            unknowns: vec![th.clone()],
            constants: vec![],
        };
        let model = build_model(robot.clone());
        let (commits, poses) = solve(&model);
        let mut seed = Bindings::new();
        seed.set(th.clone(), 0.0);
        let report = verify_round_trip(&robot, &commits, &poses, &seed, 1e-12).unwrap();
        assert!(report.pass);
        let matched = report.poses.iter().find(|p| p.matched_input).unwrap();
        assert_eq!(matched.values[&th], 0.0);
    }

    #[test]
    fn puma_paper_seed_round_trips() {
        let model = build_model(fixtures::puma());
        let (commits, poses) = solve(&model);
        let mut seed = model.robot.constant_bindings();
        for (u, d) in model.robot.unknowns.iter().zip([30.0, 50.0, 40.0, 45.0, 120.0, 60.0]) {
            seed.set(u.clone(), deg(d));
        }
        let report = verify_round_trip(&model.robot, &commits, &poses, &seed, 1e-6).unwrap();
        assert_eq!(report.poses.len(), 8);
        assert!(report.pass, "residuals: {:?}", report.poses.iter().map(|p| p.fk_residual).collect::<Vec<_>>());
        assert_eq!(report.poses.iter().filter(|p| p.matched_input).count(), 1);
    }

    #[test]
    fn puma_random_seeds_round_trip() {
        let model = build_model(fixtures::puma());
        let (commits, poses) = solve(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let seed = sample_seed(&model.robot, &mut rng);
            let report = verify_round_trip(&model.robot, &commits, &poses, &seed, 1e-6).unwrap();
            assert!(report.pass);
            // the pass flag never hides a bad residual
            for p in &report.poses {
                assert!(p.fk_residual.is_some_and(|r| r <= 1e-6));
            }
        }
    }

    #[test]
    fn olson_random_seeds_round_trip() {
        let model = build_model(fixtures::olson13());
        let (commits, poses) = solve(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let seed = sample_seed(&model.robot, &mut rng);
            let report = verify_round_trip(&model.robot, &commits, &poses, &seed, 1e-6).unwrap();
            assert!(report.pass);
        }
    }

    #[test]
    fn chair_recovers_seed_but_carries_spurious_mirror_poses() {
        let model = build_model(fixtures::chair());
        let (commits, poses) = solve(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seed = sample_seed(&model.robot, &mut rng);
        let report = verify_round_trip(&model.robot, &commits, &poses, &seed, 1e-6).unwrap();
        assert_eq!(report.poses.len(), 4);
        // the seed comes back on one branch combination with a clean FK
        // round trip
        let matched: Vec<_> = report.poses.iter().filter(|p| p.matched_input).collect();
        assert_eq!(matched.len(), 1);
        assert!(matched[0].fk_residual.unwrap() <= 1e-9);
        // every branch evaluates to a finite number even on the mirror
        // combinations that do not reproduce the pose
        for p in &report.poses {
            assert!(p.reachable());
            assert!(p.values.values().all(|v| v.is_finite()));
        }
        assert!(!report.pass, "the mirror poses must not round-trip");
    }

    #[test]
    fn planar_target_beyond_reach_flags_every_pose_set() {
        let model = build_model(fixtures::planar2r());
        let (commits, poses) = solve(&model);
        // identity orientation, point at l_1 + l_2 + 1 on the x axis
        let mut bindings = model.robot.constant_bindings();
        let t = [
            [1.0, 0.0, 0.0, 4.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        bind_pose(&mut bindings, &t);
        let flags = check_reachability(&commits, &poses, &bindings);
        assert_eq!(flags.len(), 2);
        for f in &flags {
            assert!(!f.reachable);
            assert!(!f.errors.is_empty());
            assert!(f
                .errors
                .iter()
                .all(|e| e.error.kind == DomainErrorKind::AcosOutOfRange));
        }
    }

    #[test]
    fn wrist_singularity_flags_a_degenerate_atan2() {
        let model = build_model(fixtures::puma());
        let (commits, poses) = solve(&model);
        let mut seed = model.robot.constant_bindings();
        for (u, v) in model.robot.unknowns.iter().zip([0.4, 0.8, -0.5, 0.9, 0.0, 0.7]) {
            seed.set(u.clone(), v);
        }
        let t_d = fk_numeric(&model.robot.rows, &seed).unwrap();
        let mut bindings = model.robot.constant_bindings();
        bind_pose(&mut bindings, &t_d);
        let flags = check_reachability(&commits, &poses, &bindings);
        assert!(flags.iter().any(|f| !f.reachable));
        assert!(flags.iter().flat_map(|f| &f.errors).any(|e| matches!(
            e.error.kind,
            DomainErrorKind::Atan2BothZero | DomainErrorKind::DivisionByZero
        )));
    }

    #[test]
    fn sampled_seeds_respect_the_documented_ranges() {
        let model = build_model(fixtures::chair());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let seed = sample_seed(&model.robot, &mut rng);
            for u in &model.robot.unknowns {
                let v = seed.get(u).unwrap();
                if u.is_revolute() {
                    assert!(v > -PI && v <= PI);
                } else {
                    assert!((0.1..=2.0).contains(&v));
                }
            }
        }
    }
}
