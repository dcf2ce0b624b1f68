//! Shared support for the integration suites: robot-file loading, reference
//! data for the PUMA 560 benchmark pose, a random expression generator, and
//! the brute-force root-scan oracle used to audit each solver rule.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;
use symik::expr::{Expr, Sym};
use symik::kinematics::{Robot, ScalarEquation};
use symik::numeric::{eval, Bindings};
use symik::rewrite::{contract_trig, SoaRegistry};
use symik::robotfile::parse_robot_file;
use symik::solvers::{CandidateSolution, SolveContext};
use symik::verify::angle_distance;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Robot descriptions under test (the checked-in JSON files).

pub fn robot_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../robots").join(format!("{name}.json"))
}

pub fn load_robot(name: &str) -> Robot {
    let text = std::fs::read_to_string(robot_path(name))
        .unwrap_or_else(|e| panic!("cannot read robot file for {name}: {e}"));
    parse_robot_file(&text).unwrap_or_else(|e| panic!("cannot parse robot file for {name}: {e}"))
}

// ---------------------------------------------------------------------------
// Known-good reference data for the PUMA 560 benchmark pose
// theta = (30, 50, 40, 45, 120, 60) degrees with a_2=5, a_3=1, d_3=2, d_4=4.

pub const REFERENCE_SEED_DEG: [f64; 6] = [30.0, 50.0, 40.0, 45.0, 120.0, 60.0];

/// Target transform produced by that joint vector (row-major homogeneous).
pub const REFERENCE_T: [[f64; 4]; 4] = [
    [-0.15720, 0.97938, 0.12682, -1.68074],
    [-0.59374, -0.19635, 0.78032, 1.33902],
    [0.78914, 0.04737, 0.61237, -4.83022],
    [0.0, 0.0, 0.0, 1.0],
];

/// The eight closed-form joint solutions reaching that transform, in degrees.
/// Angles are recorded as printed by the source computation, some outside
/// (-180, 180]; comparisons must reduce modulo 360.
pub const REFERENCE_POSES_DEG: [[f64; 6]; 8] = [
    [-287.08771, 130.00008, -191.92745, -6.78054, -66.24462, 4.13687],
    [29.99995, 49.99992, 39.99994, -135.00007, -119.99981, -120.00010],
    [29.99995, 148.48625, -191.92745, 142.01103, 95.78709, -151.06756],
    [-287.08771, 31.51375, 39.99994, 18.00641, 159.53838, 18.33206],
    [-287.08771, 130.00008, -191.92745, 173.21946, 66.24462, -175.86313],
    [29.99995, 148.48625, -191.92745, -37.98897, -95.78709, 28.93244],
    [29.99995, 49.99992, 39.99994, 44.99993, 119.99981, 59.99990],
    [-287.08771, 31.51375, 39.99994, -161.99359, -159.53838, -161.66794],
];

/// Angle distance in degrees reduced modulo 360.
pub fn angle_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

// ---------------------------------------------------------------------------
// Random expression generator for the expression-kernel property suite.

/// A symbol pool covering every symbol kind the kernel distinguishes.
pub fn symbol_pool() -> Vec<Sym> {
    let th_1 = Sym::revolute("th_1");
    let th_2 = Sym::revolute("th_2");
    let th_12 = Sym::sum_of_angle("th_12", vec![th_1.clone(), th_2.clone()]);
    vec![
        th_1,
        th_2,
        th_12,
        Sym::prismatic("d_1"),
        Sym::constant("a_2"),
        Sym::pose("Px"),
    ]
}

pub fn random_expr(rng: &mut ChaCha8Rng, pool: &[Sym], depth: usize) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        return match rng.gen_range(0..4u8) {
            0 => Expr::int(rng.gen_range(-9..=9)),
            1 => Expr::rat(rng.gen_range(-9..=9), rng.gen_range(1..=9)),
            2 => Expr::Pi,
            _ => pool[rng.gen_range(0..pool.len())].expr(),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_expr(rng, pool, depth - 1);
    match rng.gen_range(0..10u8) {
        0 | 1 => {
            let n = rng.gen_range(2..=3);
            Expr::add((0..n).map(|_| sub(rng)).collect())
        }
        2 | 3 => {
            let n = rng.gen_range(2..=3);
            Expr::mul((0..n).map(|_| sub(rng)).collect())
        }
        4 => Expr::pow(sub(rng), *[-2, -1, 2, 3].get(rng.gen_range(0..4)).unwrap()),
        5 => Expr::sin(sub(rng)),
        6 => Expr::cos(sub(rng)),
        7 => Expr::tan(sub(rng)),
        8 => match rng.gen_range(0..3u8) {
            0 => Expr::asin(sub(rng)),
            1 => Expr::acos(sub(rng)),
            _ => Expr::sqrt(sub(rng)),
        },
        _ => Expr::atan2(sub(rng), sub(rng)),
    }
}

/// Random bindings for every pool symbol.
pub fn random_bindings(rng: &mut ChaCha8Rng, pool: &[Sym]) -> Bindings {
    let mut env = Bindings::new();
    for s in pool {
        let v = if s.is_prismatic() { rng.gen_range(0.1..2.0) } else { rng.gen_range(-1.5..1.5) };
        env.set(s.clone(), v);
    }
    env
}

// ---------------------------------------------------------------------------
// Brute-force oracle for the six solver rules. Each instance carries
// synthetic equations with a known ground truth, numeric bindings for every
// non-target symbol, and the scalar residual functions whose common roots
// over [-pi, pi) define the exact answer set.

pub const SCAN_STEP: f64 = 1e-4;
pub const ORACLE_MATCH_TOL: f64 = 1e-3;
pub const ORACLE_RESID_TOL: f64 = 1e-8;
/// A scanned point counts as a common root of a system when every other
/// residual vanishes to this tolerance there.
const SYSTEM_TOL: f64 = 1e-6;

pub struct RuleInstance {
    pub equations: Vec<ScalarEquation>,
    pub unsolved: BTreeSet<Sym>,
    pub registry: SoaRegistry,
    pub x: Sym,
    pub env: Bindings,
    /// Residual functions of the target variable alone; the oracle answer is
    /// the set of their common roots.
    pub scan_fns: Vec<Box<dyn Fn(f64) -> f64>>,
    pub expect_branches: usize,
}

/// Roots of `f` over [-pi, pi) by sign-change bracketing at `SCAN_STEP`
/// resolution, refined by bisection.
pub fn scan_roots(f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let steps = (2.0 * PI / SCAN_STEP).ceil() as usize;
    let mut roots = Vec::new();
    let mut t0 = -PI;
    let mut f0 = f(t0);
    for i in 1..=steps {
        let t1 = (-PI + 2.0 * PI * i as f64 / steps as f64).min(PI);
        let f1 = f(t1);
        if f0 == 0.0 {
            roots.push(t0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (t0, t1, f0);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        t0 = t1;
        f0 = f1;
    }
    roots
}

/// Common roots of every residual in the instance, deduplicated.
pub fn oracle_roots(inst: &RuleInstance) -> Vec<f64> {
    let mut roots: Vec<f64> = Vec::new();
    for (i, f) in inst.scan_fns.iter().enumerate() {
        for r in scan_roots(f.as_ref()) {
            let common = inst
                .scan_fns
                .iter()
                .enumerate()
                .all(|(j, g)| j == i || g(r).abs() <= SYSTEM_TOL);
            if common && !roots.iter().any(|&e| angle_distance(e, r) < 1e-5) {
                roots.push(r);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// Run one rule against one instance and audit the returned branch set:
/// every scanned root must be matched by a branch (completeness) and every
/// branch must satisfy all residuals (soundness).
pub fn check_rule_instance(
    rule: fn(&SolveContext, &Sym) -> Vec<CandidateSolution>,
    name: &str,
    inst: &RuleInstance,
) {
    let solved = BTreeSet::new();
    let ctx = SolveContext {
        equations: &inst.equations,
        unsolved: &inst.unsolved,
        solved: &solved,
        registry: &inst.registry,
    };
    let cands = rule(&ctx, &inst.x);
    assert!(!cands.is_empty(), "{name}: rule produced no candidate");
    assert!(cands.iter().all(|c| c.solver == name), "{name}: wrong solver tag");
    let best = symik::solvers::rank_candidates(cands).unwrap();
    assert_eq!(
        best.branches.len(),
        inst.expect_branches,
        "{name}: unexpected branch count"
    );
    let values: Vec<f64> = best
        .branches
        .iter()
        .map(|b| {
            let v = eval(b, &inst.env).unwrap_or_else(|e| panic!("{name}: branch failed: {e}"));
            assert!(v.is_finite(), "{name}: non-finite branch value");
            v
        })
        .collect();
    let roots = oracle_roots(inst);
    assert!(!roots.is_empty(), "{name}: oracle found no roots");
    for r in &roots {
        let hit = values.iter().any(|v| angle_distance(*r, *v) <= ORACLE_MATCH_TOL);
        assert!(hit, "{name}: scanned root {r} missed by branches {values:?}");
    }
    for v in &values {
        for (i, f) in inst.scan_fns.iter().enumerate() {
            let resid = f(*v).abs();
            assert!(
                resid <= ORACLE_RESID_TOL,
                "{name}: branch value {v} leaves residual {resid:.3e} in equation {i}"
            );
        }
    }
}

fn equation(lhs: Expr, rhs: Expr, col: usize, unknown_set: &BTreeSet<Sym>) -> ScalarEquation {
    let mut eq = ScalarEquation {
        lhs,
        rhs,
        resid: Expr::Int(0),
        unknowns: BTreeSet::new(),
        depth: 0,
        row: 0,
        col,
    };
    eq.refresh(unknown_set);
    eq
}

fn unknowns_of(syms: &[&Sym]) -> BTreeSet<Sym> {
    syms.iter().map(|s| (*s).clone()).collect()
}

/// Nonzero coefficient away from zero: |c| in [0.5, 2], random sign.
fn coeff(rng: &mut ChaCha8Rng) -> f64 {
    let mag = rng.gen_range(0.5..2.0);
    if rng.gen_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// `k*x + p = 0` with numeric k, p chosen so the root lies inside (-pi, pi).
pub fn algebra_instance(rng: &mut ChaCha8Rng) -> RuleInstance {
    let x = Sym::revolute("th_x");
    let k = Sym::constant("k_1");
    let p = Sym::pose("Px");
    let x_true = rng.gen_range(-3.0..3.0);
    let k_val = coeff(rng);
    let p_val = -k_val * x_true;
    let unknown_set = unknowns_of(&[&x]);
    let lhs = Expr::add(vec![Expr::mul(vec![k.expr(), x.expr()]), p.expr()]);
    let eq = equation(lhs, Expr::Int(0), 3, &unknown_set);
    let mut env = Bindings::new();
    env.set(k.clone(), k_val).set(p.clone(), p_val);
    RuleInstance {
        equations: vec![eq],
        unsolved: unknown_set,
        registry: SoaRegistry::default(),
        x,
        env,
        scan_fns: vec![Box::new(move |t| k_val * t + p_val)],
        expect_branches: 1,
    }
}

/// `k*sin(x) + p = 0` or `k*cos(x) + p = 0`; the ratio stays at most 0.95 in
/// magnitude so both roots are simple and well separated.
pub fn sine_or_cosine_instance(rng: &mut ChaCha8Rng, use_sin: bool) -> RuleInstance {
    let x = Sym::revolute("th_x");
    let k = Sym::constant("k_1");
    let p = Sym::pose("Px");
    let k_val = coeff(rng);
    let x_true = loop {
        let t: f64 = rng.gen_range(-PI..PI);
        let ratio = if use_sin { t.sin() } else { t.cos() };
        if ratio.abs() <= 0.95 {
            break t;
        }
    };
    let p_val = if use_sin { -k_val * x_true.sin() } else { -k_val * x_true.cos() };
    let unknown_set = unknowns_of(&[&x]);
    let trig = if use_sin { Expr::sin(x.expr()) } else { Expr::cos(x.expr()) };
    let lhs = Expr::add(vec![Expr::mul(vec![k.expr(), trig]), p.expr()]);
    let eq = equation(lhs, Expr::Int(0), 3, &unknown_set);
    let mut env = Bindings::new();
    env.set(k.clone(), k_val).set(p.clone(), p_val);
    let f: Box<dyn Fn(f64) -> f64> = if use_sin {
        Box::new(move |t: f64| k_val * t.sin() + p_val)
    } else {
        Box::new(move |t: f64| k_val * t.cos() + p_val)
    };
    RuleInstance {
        equations: vec![eq],
        unsolved: unknown_set,
        registry: SoaRegistry::default(),
        x,
        env,
        scan_fns: vec![f],
        expect_branches: 2,
    }
}

/// Draw an angle whose sine and cosine both stay at least 0.2 in magnitude,
/// keeping the paired-equation instances away from tangential roots.
fn angle_off_axes(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let t: f64 = rng.gen_range(-PI..PI);
        if t.sin().abs() >= 0.2 && t.cos().abs() >= 0.2 {
            return t;
        }
    }
}

/// Full-rank tangent pair: `k1*sin(x) + p1 = 0` (rotation column) with
/// `k2*cos(x) + p2 = 0`; one exact atan2 branch.
pub fn tangent_full_instance(rng: &mut ChaCha8Rng) -> RuleInstance {
    let x = Sym::revolute("th_x");
    let (k1, k2) = (Sym::constant("k_1"), Sym::constant("k_2"));
    let (p1, p2) = (Sym::pose("r_11"), Sym::pose("r_21"));
    let x_true = angle_off_axes(rng);
    let (k1v, k2v) = (coeff(rng), coeff(rng));
    let (p1v, p2v) = (-k1v * x_true.sin(), -k2v * x_true.cos());
    let unknown_set = unknowns_of(&[&x]);
    let e1 = equation(
        Expr::add(vec![Expr::mul(vec![k1.expr(), Expr::sin(x.expr())]), p1.expr()]),
        Expr::Int(0),
        0,
        &unknown_set,
    );
    let e2 = equation(
        Expr::add(vec![Expr::mul(vec![k2.expr(), Expr::cos(x.expr())]), p2.expr()]),
        Expr::Int(0),
        1,
        &unknown_set,
    );
    let mut env = Bindings::new();
    env.set(k1, k1v).set(k2, k2v).set(p1, p1v).set(p2, p2v);
    RuleInstance {
        equations: vec![e1, e2],
        unsolved: unknown_set,
        registry: SoaRegistry::default(),
        x,
        env,
        scan_fns: vec![
            Box::new(move |t: f64| k1v * t.sin() + p1v),
            Box::new(move |t: f64| k2v * t.cos() + p2v),
        ],
        expect_branches: 1,
    }
}

/// Ratio tangent pair: both trig coefficients carry the same unsolved factor
/// `sin(v)`, which cancels in the ratio; the sign ambiguity of that factor
/// yields two branches. The scanned residual is the implied tangent relation
/// `(k1/k2)*p2*sin(x) - p1*cos(x)` the pair pins down.
pub fn tangent_ratio_instance(rng: &mut ChaCha8Rng) -> RuleInstance {
    let x = Sym::revolute("th_x");
    let v = Sym::revolute("th_v");
    let (k1, k2) = (Sym::constant("k_1"), Sym::constant("k_2"));
    let (p1, p2) = (Sym::pose("r_11"), Sym::pose("r_21"));
    let x_true = angle_off_axes(rng);
    let v_true = loop {
        let t: f64 = rng.gen_range(-PI..PI);
        if t.sin().abs() >= 0.3 {
            break t;
        }
    };
    let (k1v, k2v) = (coeff(rng), coeff(rng));
    let sv = v_true.sin();
    let (p1v, p2v) = (-sv * k1v * x_true.sin(), -sv * k2v * x_true.cos());
    let unknown_set = unknowns_of(&[&x, &v]);
    let e1 = equation(
        Expr::add(vec![
            Expr::mul(vec![Expr::sin(v.expr()), k1.expr(), Expr::sin(x.expr())]),
            p1.expr(),
        ]),
        Expr::Int(0),
        0,
        &unknown_set,
    );
    let e2 = equation(
        Expr::add(vec![
            Expr::mul(vec![Expr::sin(v.expr()), k2.expr(), Expr::cos(x.expr())]),
            p2.expr(),
        ]),
        Expr::Int(0),
        1,
        &unknown_set,
    );
    let mut env = Bindings::new();
    env.set(k1, k1v).set(k2, k2v).set(p1, p1v).set(p2, p2v);
    let rho = k1v / k2v;
    RuleInstance {
        equations: vec![e1, e2],
        unsolved: unknown_set,
        registry: SoaRegistry::default(),
        x,
        env,
        scan_fns: vec![Box::new(move |t: f64| rho * p2v * t.sin() - p1v * t.cos())],
        expect_branches: 2,
    }
}

/// `ka*sin(x) + kb*cos(x) + c = 0`. Inhomogeneous instances keep |c| at most
/// 0.95 of the amplitude; homogeneous ones drop c entirely, which the rule
/// only accepts because both coefficients are fixed robot parameters.
pub fn sin_and_cos_instance(rng: &mut ChaCha8Rng, homogeneous: bool) -> RuleInstance {
    let x = Sym::revolute("th_x");
    let (ka, kb) = (Sym::constant("k_a"), Sym::constant("k_b"));
    let p = Sym::pose("Px");
    let (kav, kbv) = (coeff(rng), coeff(rng));
    let amp = kav.hypot(kbv);
    let unknown_set = unknowns_of(&[&x]);
    let mut terms = vec![
        Expr::mul(vec![ka.expr(), Expr::sin(x.expr())]),
        Expr::mul(vec![kb.expr(), Expr::cos(x.expr())]),
    ];
    let mut env = Bindings::new();
    env.set(ka, kav).set(kb, kbv);
    let pv = if homogeneous {
        0.0
    } else {
        let x_true = loop {
            let t: f64 = rng.gen_range(-PI..PI);
            if (kav * t.sin() + kbv * t.cos()).abs() <= 0.95 * amp {
                break t;
            }
        };
        let pv = -(kav * x_true.sin() + kbv * x_true.cos());
        terms.push(p.expr());
        env.set(p, pv);
        pv
    };
    let eq = equation(Expr::add(terms), Expr::Int(0), 3, &unknown_set);
    RuleInstance {
        equations: vec![eq],
        unsolved: unknown_set,
        registry: SoaRegistry::default(),
        x,
        env,
        scan_fns: vec![Box::new(move |t: f64| kav * t.sin() + kbv * t.cos() + pv)],
        expect_branches: 2,
    }
}

/// Orthogonal simultaneous pair in the translation column:
/// `ka*sin(x) + kb*cos(x) + p1 = 0`, `-kb*sin(x) + ka*cos(x) + p2 = 0`.
pub fn simultaneous_instance(rng: &mut ChaCha8Rng) -> RuleInstance {
    let x = Sym::revolute("th_x");
    let (ka, kb) = (Sym::constant("k_a"), Sym::constant("k_b"));
    let (p1, p2) = (Sym::pose("Px"), Sym::pose("Py"));
    let (kav, kbv) = (coeff(rng), coeff(rng));
    let amp = kav.hypot(kbv);
    // keep both projections away from 0 and from the amplitude so each
    // equation has two well-separated roots and the spurious one is
    // rejected decisively by its partner
    let x_true = loop {
        let t: f64 = rng.gen_range(-PI..PI);
        let u = (kav * t.sin() + kbv * t.cos()).abs() / amp;
        if (0.2..=0.95).contains(&u) && (1.0 - u * u).sqrt() >= 0.2 {
            break t;
        }
    };
    let p1v = -(kav * x_true.sin() + kbv * x_true.cos());
    let p2v = -(-kbv * x_true.sin() + kav * x_true.cos());
    let unknown_set = unknowns_of(&[&x]);
    let e1 = equation(
        Expr::add(vec![
            Expr::mul(vec![ka.expr(), Expr::sin(x.expr())]),
            Expr::mul(vec![kb.expr(), Expr::cos(x.expr())]),
            p1.expr(),
        ]),
        Expr::Int(0),
        3,
        &unknown_set,
    );
    let e2 = equation(
        Expr::add(vec![
            Expr::mul(vec![Expr::Int(-1), kb.expr(), Expr::sin(x.expr())]),
            Expr::mul(vec![ka.expr(), Expr::cos(x.expr())]),
            p2.expr(),
        ]),
        Expr::Int(0),
        3,
        &unknown_set,
    );
    let mut env = Bindings::new();
    env.set(ka, kav).set(kb, kbv).set(p1, p1v).set(p2, p2v);
    RuleInstance {
        equations: vec![e1, e2],
        unsolved: unknown_set,
        registry: SoaRegistry::default(),
        x,
        env,
        scan_fns: vec![
            Box::new(move |t: f64| kav * t.sin() + kbv * t.cos() + p1v),
            Box::new(move |t: f64| -kbv * t.sin() + kav * t.cos() + p2v),
        ],
        expect_branches: 1,
    }
}

/// Square-and-add pair: `k1*cos(y) + k2*cos(w) = p1`, `k1*sin(y) + k2*sin(w)
/// = p2` with `w = y + x` registered as a combined angle. Squaring cancels y
/// and leaves `k1^2 + k2^2 + 2*k1*k2*cos(x) = p1^2 + p2^2`, the scanned
/// residual; the unknown-bearing sides are pose-free as the rule requires.
pub fn x2y2_instance(rng: &mut ChaCha8Rng) -> RuleInstance {
    let y = Sym::revolute("th_1");
    let x = Sym::revolute("th_2");
    let (k1, k2) = (Sym::constant("k_1"), Sym::constant("k_2"));
    let (p1, p2) = (Sym::pose("Px"), Sym::pose("Py"));
    let mut registry = SoaRegistry::new(&[y.clone(), x.clone()]);
    let contracted = contract_trig(
        Expr::add(vec![
            Expr::mul(vec![Expr::sin(y.expr()), Expr::cos(x.expr())]),
            Expr::mul(vec![Expr::cos(y.expr()), Expr::sin(x.expr())]),
        ]),
        &mut registry,
    );
    assert_eq!(registry.records().len(), 1, "combined angle not registered: {contracted}");
    let w = registry.combined_syms()[0].clone();

    let x_true = loop {
        let t: f64 = rng.gen_range(-PI..PI);
        if (0.2..=PI - 0.2).contains(&t.abs()) {
            break t;
        }
    };
    let y_true = rng.gen_range(-PI..PI);
    let w_true = y_true + x_true;
    let (k1v, k2v) = (coeff(rng), coeff(rng));
    let p1v = k1v * y_true.cos() + k2v * w_true.cos();
    let p2v = k1v * y_true.sin() + k2v * w_true.sin();
    let unknown_set = unknowns_of(&[&x, &y, &w]);
    let e1 = equation(
        Expr::add(vec![
            Expr::mul(vec![k1.expr(), Expr::cos(y.expr())]),
            Expr::mul(vec![k2.expr(), Expr::cos(w.expr())]),
        ]),
        p1.expr(),
        3,
        &unknown_set,
    );
    let e2 = equation(
        Expr::add(vec![
            Expr::mul(vec![k1.expr(), Expr::sin(y.expr())]),
            Expr::mul(vec![k2.expr(), Expr::sin(w.expr())]),
        ]),
        p2.expr(),
        3,
        &unknown_set,
    );
    let mut env = Bindings::new();
    env.set(k1, k1v).set(k2, k2v).set(p1, p1v).set(p2, p2v);
    RuleInstance {
        equations: vec![e1, e2],
        unsolved: unknown_set,
        registry,
        x,
        env,
        scan_fns: vec![Box::new(move |t: f64| {
            k1v * k1v + k2v * k2v + 2.0 * k1v * k2v * t.cos() - p1v * p1v - p2v * p2v
        })],
        expect_branches: 2,
    }
}

// ---------------------------------------------------------------------------
// Property-suite runners shared between the property tests and the
// acceptance suite.

/// `canon` must be a projection: applying it twice changes nothing.
pub fn run_canon_idempotence(cases: usize, seed: u64) {
    let mut r = rng(seed);
    let pool = symbol_pool();
    for i in 0..cases {
        let e = random_expr(&mut r, &pool, 4);
        let once = symik::canon(e.clone());
        let twice = symik::canon(once.clone());
        assert_eq!(once, twice, "case {i}: canon not idempotent on {e}");
    }
}

/// Canonicalization must preserve numeric value wherever both forms
/// evaluate; inputs on which either form hits a domain error are skipped.
pub fn run_eval_commutes_with_canon(cases: usize, seed: u64) {
    let mut r = rng(seed);
    let pool = symbol_pool();
    let mut valid = 0usize;
    let mut attempts = 0usize;
    while valid < cases {
        attempts += 1;
        assert!(attempts < 100 * cases, "too many domain-error samples");
        let e = random_expr(&mut r, &pool, 4);
        let env = random_bindings(&mut r, &pool);
        let (Ok(a), Ok(b)) = (eval(&e, &env), eval(&symik::canon(e.clone()), &env)) else {
            continue;
        };
        let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
        assert!((a - b).abs() <= tol, "value changed by canon: {a} vs {b} on {e}");
        valid += 1;
    }
}

/// Printing a canonical expression and parsing it back must reproduce the
/// expression exactly.
pub fn run_print_parse_round_trip(cases: usize, seed: u64) {
    let mut r = rng(seed);
    let pool = symbol_pool();
    let lookup = |name: &str| pool.iter().find(|s| s.name() == name).cloned();
    for i in 0..cases {
        let e = symik::canon(random_expr(&mut r, &pool, 4));
        let text = symik::print_expr(&e);
        let back = symik::parse::parse_expr(&text, &lookup)
            .unwrap_or_else(|err| panic!("case {i}: {text:?} failed to parse: {err}"));
        assert_eq!(back, e, "case {i}: round trip changed {text:?}");
    }
}
