//! Python and C++ renderings of the solution IR. Both targets share one
//! expression renderer; all inverse-trig arguments, square roots, and
//! divisors route through guard helpers so unreachable poses surface as
//! flags, never as NaNs.

use std::fmt::Write;

use crate::expr::Expr;
use crate::numeric::{ATAN2_EPS, CLAMP_EPS, DIV_EPS};

use super::ir::SolutionIr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lang {
    Python,
    Cpp,
}

/// Marker separating the guard prelude from the generated solution body;
/// the static guard scan only inspects text after this line.
pub const BODY_MARKER: &str = "=== solution body ===";

const GUARD_CALLS: [&str; 5] = [
    "guard_asin(",
    "guard_acos(",
    "guard_sqrt(",
    "guard_atan2(",
    "guard_div(",
];

// ---------------------------------------------------------------------------
// Expression rendering

fn num(n: i64, lang: Lang) -> String {
    match lang {
        Lang::Python => n.to_string(),
        Lang::Cpp => format!("{n}.0"),
    }
}

fn one(lang: Lang) -> &'static str {
    match lang {
        Lang::Python => "1.0",
        Lang::Cpp => "1.0",
    }
}

fn guarded(call: &str, args: &[String], lang: Lang) -> String {
    let mut out = String::from(call);
    out.push('(');
    out.push_str(&args.join(", "));
    if lang == Lang::Cpp {
        out.push_str(", ok");
    }
    out.push(')');
    out
}

/// Render `e` as a full expression (safe in argument position).
fn rx(e: &Expr, lang: Lang) -> String {
    match e {
        Expr::Int(n) => num(*n, lang),
        Expr::Rat(p, q) => guarded("guard_div", &[num(*p, lang), num(*q, lang)], lang),
        Expr::Pi => "PI".to_string(),
        Expr::Sym(s) => s.name().to_string(),
        Expr::Add(ts) => {
            let mut out = String::new();
            for (i, t) in ts.iter().enumerate() {
                let s = rx(t, lang);
                if i == 0 {
                    out.push_str(&s);
                } else if let Some(rest) = s.strip_prefix('-') {
                    out.push_str(" - ");
                    out.push_str(rest);
                } else {
                    out.push_str(" + ");
                    out.push_str(&s);
                }
            }
            out
        }
        Expr::Mul(fs) => render_mul(fs, lang),
        Expr::Pow(b, n) => render_pow(b, *n, lang),
        Expr::Sin(x) => unary("sin", x, lang),
        Expr::Cos(x) => unary("cos", x, lang),
        Expr::Tan(x) => unary("tan", x, lang),
        Expr::Asin(x) => guarded("guard_asin", &[rx(x, lang)], lang),
        Expr::Acos(x) => guarded("guard_acos", &[rx(x, lang)], lang),
        Expr::Sqrt(x) => guarded("guard_sqrt", &[rx(x, lang)], lang),
        Expr::Atan2(y, x) => guarded("guard_atan2", &[rx(y, lang), rx(x, lang)], lang),
    }
}

fn unary(f: &str, x: &Expr, lang: Lang) -> String {
    match lang {
        Lang::Python => format!("math.{f}({})", rx(x, lang)),
        Lang::Cpp => format!("std::{f}({})", rx(x, lang)),
    }
}

/// Render for use as a product factor: sums and sign-leading strings get
/// parenthesized.
fn factor(e: &Expr, lang: Lang) -> String {
    let s = rx(e, lang);
    if matches!(e, Expr::Add(_)) || s.starts_with('-') {
        format!("({s})")
    } else {
        s
    }
}

fn render_mul(fs: &[Expr], lang: Lang) -> String {
    let mut negate = false;
    let mut nums: Vec<String> = Vec::new();
    let mut dens: Vec<String> = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        // canonical products put the numeric coefficient first; pull its
        // sign out so sums can join terms with a minus
        if i == 0 {
            if let Expr::Int(n) = f {
                if *n < 0 {
                    negate = true;
                    if *n != -1 {
                        nums.push(num(-n, lang));
                    }
                    continue;
                }
            }
        }
        if let Expr::Pow(b, n) = f {
            if *n < 0 {
                dens.push(factor(&Expr::Pow(b.clone(), -n), lang));
                continue;
            }
        }
        nums.push(factor(f, lang));
    }
    let num_str = if nums.is_empty() { one(lang).to_string() } else { nums.join(" * ") };
    let body = if dens.is_empty() {
        num_str
    } else {
        guarded("guard_div", &[num_str, dens.join(" * ")], lang)
    };
    if negate {
        format!("-{body}")
    } else {
        body
    }
}

fn render_pow(b: &Expr, n: i32, lang: Lang) -> String {
    if n == 0 {
        return one(lang).to_string();
    }
    if n == 1 {
        return rx(b, lang);
    }
    if n < 0 {
        let inv = render_pow(b, -n, lang);
        return guarded("guard_div", &[one(lang).to_string(), inv], lang);
    }
    match lang {
        Lang::Python => {
            let base = rx(b, lang);
            let simple = matches!(b, Expr::Sym(_) | Expr::Pi)
                || matches!(b, Expr::Int(v) if *v >= 0);
            if simple {
                format!("{base} ** {n}")
            } else {
                format!("({base}) ** {n}")
            }
        }
        Lang::Cpp => format!("std::pow({}, {n}.0)", rx(b, lang)),
    }
}

// ---------------------------------------------------------------------------
// File rendering

pub fn render(ir: &SolutionIr, lang: Lang) -> String {
    match lang {
        Lang::Python => render_python(ir),
        Lang::Cpp => render_cpp(ir),
    }
}

/// Constant parameters reordered so defaulted ones come last, as both target
/// languages require.
fn param_order(ir: &SolutionIr) -> (Vec<&str>, Vec<(&str, f64)>) {
    let required = ir
        .constants
        .iter()
        .filter(|(_, v)| v.is_none())
        .map(|(n, _)| n.as_str())
        .collect();
    let defaulted = ir
        .constants
        .iter()
        .filter_map(|(n, v)| v.map(|v| (n.as_str(), v)))
        .collect();
    (required, defaulted)
}

fn render_python(ir: &SolutionIr) -> String {
    let clamp = format!("{CLAMP_EPS:e}");
    let div = format!("{DIV_EPS:e}");
    let at2 = format!("{ATAN2_EPS:e}");
    let mut o = String::new();
    let _ = writeln!(o, "\"\"\"Closed-form inverse kinematics for {}.", ir.name);
    o.push_str(
        "\nGenerated file. Every inverse-trig argument, square root, and divisor is\n\
         range-checked; pose sets that leave the workspace come back flagged\n\
         unreachable instead of raising math errors or producing NaNs.\n\"\"\"\n\n\
         import math\n\nPI = math.pi\n\n\n\
         class Unreachable(Exception):\n    \
         \"\"\"A branch of the solution left the reachable workspace.\"\"\"\n\n\n",
    );
    let _ = writeln!(
        o,
        "def guard_asin(x):\n    if x < -1.0 - {clamp} or x > 1.0 + {clamp}:\n        \
         raise Unreachable(\"asin\", x)\n    return math.asin(min(1.0, max(-1.0, x)))\n\n"
    );
    let _ = writeln!(
        o,
        "def guard_acos(x):\n    if x < -1.0 - {clamp} or x > 1.0 + {clamp}:\n        \
         raise Unreachable(\"acos\", x)\n    return math.acos(min(1.0, max(-1.0, x)))\n\n"
    );
    let _ = writeln!(
        o,
        "def guard_sqrt(x):\n    if x < -{clamp}:\n        \
         raise Unreachable(\"sqrt\", x)\n    return math.sqrt(max(0.0, x))\n\n"
    );
    let _ = writeln!(
        o,
        "def guard_div(num, den):\n    if abs(den) < {div}:\n        \
         raise Unreachable(\"div\", den)\n    return num / den\n\n"
    );
    let _ = writeln!(
        o,
        "def guard_atan2(y, x):\n    if abs(y) < {at2} and abs(x) < {at2}:\n        \
         raise Unreachable(\"atan2\", (y, x))\n    return math.atan2(y, x)\n\n"
    );
    let _ = writeln!(o, "# {BODY_MARKER}");

    let (required, defaulted) = param_order(ir);
    let mut params: Vec<String> = ir.pose_params.clone();
    params.extend(required.iter().map(|n| n.to_string()));
    params.extend(defaulted.iter().map(|(n, v)| format!("{n}={v:?}")));
    let _ = writeln!(o, "def {}_ik({}):", ir.name, params.join(", "));
    let _ = writeln!(
        o,
        "    \"\"\"Return a list of (joints, reachable), one entry per pose set.\n\n    \
         Joint order: {}. Unreachable pose sets carry joints=None.\n    \"\"\"\n    poses = []",
        ir.joint_names.join(", ")
    );
    for (i, pose) in ir.poses.iter().enumerate() {
        let labels: Vec<&str> = pose.node_ids.iter().map(|&id| ir.nodes[id].label.as_str()).collect();
        let _ = writeln!(o, "    # pose set {}: {}", i + 1, labels.join(" "));
        o.push_str("    try:\n");
        for &id in &pose.node_ids {
            let node = &ir.nodes[id];
            let _ = writeln!(o, "        {} = {}", node.label, rx(&node.expr, Lang::Python));
        }
        let _ = writeln!(
            o,
            "        poses.append(([{}], True))\n    except Unreachable:\n        \
             poses.append((None, False))",
            pose.joint_labels.join(", ")
        );
    }
    o.push_str("    return poses\n");
    o
}

fn render_cpp(ir: &SolutionIr) -> String {
    let clamp = format!("{CLAMP_EPS:e}");
    let div = format!("{DIV_EPS:e}");
    let at2 = format!("{ATAN2_EPS:e}");
    let mut o = String::new();
    let _ = writeln!(o, "// Closed-form inverse kinematics for {}.", ir.name);
    o.push_str(
        "//\n// Generated file. Every inverse-trig argument, square root, and divisor is\n\
         // range-checked; pose sets that leave the workspace come back flagged\n\
         // unreachable instead of producing NaNs.\n\n\
         #include <array>\n#include <cmath>\n#include <vector>\n\n",
    );
    let _ = writeln!(o, "namespace {}_ik {{\n", ir.name);
    o.push_str("constexpr double PI = 3.14159265358979323846;\n\n");
    let _ = writeln!(
        o,
        "inline double guard_asin(double x, bool& ok) {{\n    \
         if (x < -1.0 - {clamp} || x > 1.0 + {clamp}) {{\n        ok = false;\n        \
         return 0.0;\n    }}\n    \
         return std::asin(x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x));\n}}\n"
    );
    let _ = writeln!(
        o,
        "inline double guard_acos(double x, bool& ok) {{\n    \
         if (x < -1.0 - {clamp} || x > 1.0 + {clamp}) {{\n        ok = false;\n        \
         return 0.0;\n    }}\n    \
         return std::acos(x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x));\n}}\n"
    );
    let _ = writeln!(
        o,
        "inline double guard_sqrt(double x, bool& ok) {{\n    \
         if (x < -{clamp}) {{\n        ok = false;\n        return 0.0;\n    }}\n    \
         return std::sqrt(x < 0.0 ? 0.0 : x);\n}}\n"
    );
    let _ = writeln!(
        o,
        "inline double guard_div(double num, double den, bool& ok) {{\n    \
         if (std::fabs(den) < {div}) {{\n        ok = false;\n        return 0.0;\n    }}\n    \
         return num / den;\n}}\n"
    );
    let _ = writeln!(
        o,
        "inline double guard_atan2(double y, double x, bool& ok) {{\n    \
         if (std::fabs(y) < {at2} && std::fabs(x) < {at2}) {{\n        ok = false;\n        \
         return 0.0;\n    }}\n    \
         return std::atan2(y, x);\n}}\n"
    );
    let _ = writeln!(
        o,
        "struct PoseSet {{\n    std::array<double, {}> joints;\n    bool reachable;\n}};\n",
        ir.joint_names.len()
    );
    let _ = writeln!(o, "// Joint order: {}.", ir.joint_names.join(", "));
    let _ = writeln!(o, "// {BODY_MARKER}");

    let (required, defaulted) = param_order(ir);
    let mut params: Vec<String> =
        ir.pose_params.iter().map(|n| format!("double {n}")).collect();
    params.extend(required.iter().map(|n| format!("double {n}")));
    params.extend(defaulted.iter().map(|(n, v)| format!("double {n} = {v:?}")));
    let _ = writeln!(o, "inline std::vector<PoseSet> solve({}) {{", params.join(", "));
    o.push_str("    std::vector<PoseSet> poses;\n");
    for pose in &ir.poses {
        o.push_str("    {\n        bool ok = true;\n");
        for &id in &pose.node_ids {
            let node = &ir.nodes[id];
            let _ = writeln!(
                o,
                "        const double {} = {};",
                node.label,
                rx(&node.expr, Lang::Cpp)
            );
        }
        let _ = writeln!(
            o,
            "        poses.push_back(PoseSet{{{{{}}}, ok}});\n    }}",
            pose.joint_labels.join(", ")
        );
    }
    o.push_str("    return poses;\n}\n\n}\n");
    o
}

// ---------------------------------------------------------------------------
// Static guard scan

/// Counts from scanning the solution body of an emitted file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuardScan {
    /// Calls to guard helpers.
    pub guards: usize,
    /// Inverse-trig or sqrt calls that bypass the guards (must be zero).
    pub raw_intrinsics: usize,
    /// Bare `/` characters, i.e. unguarded divisions (must be zero).
    pub raw_divisions: usize,
}

impl GuardScan {
    /// Every risky site flows through a guard.
    pub fn complete(&self) -> bool {
        self.raw_intrinsics == 0 && self.raw_divisions == 0
    }
}

/// Scan emitted code for unguarded inverse-trig/sqrt/division sites. Only
/// the body after [`BODY_MARKER`] is inspected; the prelude holds the guard
/// implementations themselves.
pub fn guard_scan(text: &str) -> GuardScan {
    let body = match text.split_once(BODY_MARKER) {
        Some((_, b)) => b,
        None => text,
    };
    let guards = GUARD_CALLS.iter().map(|p| body.matches(p).count()).sum();
    let mut raw_intrinsics = 0;
    for pat in ["asin(", "acos(", "sqrt(", "atan2("] {
        let mut from = 0;
        while let Some(at) = body[from..].find(pat) {
            let at = from + at;
            let guarded = at >= 6 && &body[at - 6..at] == "guard_";
            if !guarded {
                raw_intrinsics += 1;
            }
            from = at + pat.len();
        }
    }
    GuardScan {
        guards,
        raw_intrinsics,
        raw_divisions: body.matches('/').count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::{run_solver_loop, DEFAULT_MAX_ITERATIONS};
    use crate::emit::ir::{build_ir, site_count};
    use crate::emit::SolvedRobot;
    use crate::expr::Sym;
    use crate::fixtures;
    use crate::graph::build_solution_graph;
    use crate::kinematics::{build_model, KinematicModel};
    use crate::parse::parse_expr;

    fn solved(model: &KinematicModel) -> SolvedRobot<'_> {
        let result = run_solver_loop(model, DEFAULT_MAX_ITERATIONS);
        assert!(result.unsolved.is_empty());
        let commits = Box::leak(Box::new(result.commits));
        let (graph, poses) = build_solution_graph(commits).unwrap();
        SolvedRobot {
            model,
            commits,
            graph: Box::leak(Box::new(graph)),
            poses: Box::leak(Box::new(poses)),
        }
    }

    fn parse(src: &str) -> crate::expr::Expr {
        let lookup = |name: &str| {
            Some(match name {
                "Px" | "Py" | "Pz" => Sym::pose(name),
                n if n.starts_with("th") => Sym::revolute(n),
                _ => Sym::constant(name),
            })
        };
        parse_expr(src, &lookup).unwrap()
    }

    #[test]
    fn atoms_render_per_language() {
        assert_eq!(rx(&parse("5"), Lang::Python), "5");
        assert_eq!(rx(&parse("5"), Lang::Cpp), "5.0");
        assert_eq!(rx(&parse("1/2"), Lang::Python), "guard_div(1, 2)");
        assert_eq!(rx(&parse("1/2"), Lang::Cpp), "guard_div(1.0, 2.0, ok)");
        assert_eq!(rx(&parse("pi"), Lang::Python), "PI");
        assert_eq!(rx(&parse("asin(Px)"), Lang::Python), "guard_asin(Px)");
        assert_eq!(rx(&parse("asin(Px)"), Lang::Cpp), "guard_asin(Px, ok)");
        assert_eq!(rx(&parse("sqrt(Px)"), Lang::Cpp), "guard_sqrt(Px, ok)");
    }

    #[test]
    fn division_folds_into_one_guard() {
        let py = rx(&parse("Px / (a_2 * d_3)"), Lang::Python);
        assert_eq!(py.matches("guard_div(").count(), 1);
        assert!(py.contains("Px"));
        let cpp = rx(&parse("-Px / d_3"), Lang::Cpp);
        assert!(cpp.starts_with('-'));
        assert_eq!(cpp.matches("guard_div(").count(), 1);
    }

    #[test]
    fn sums_join_with_minus_on_negative_terms() {
        let s = rx(&parse("Px - 2 * Py"), Lang::Python);
        assert!(s == "Px - 2 * Py" || s == "-2 * Py + Px", "{s}");
        assert!(!s.contains("+ -"), "{s}");
    }

    #[test]
    fn emitted_python_passes_the_guard_scan() {
        for model in [
            build_model(fixtures::puma()),
            build_model(fixtures::chair()),
            build_model(fixtures::olson13()),
            build_model(fixtures::planar2r()),
        ] {
            let s = solved(&model);
            let ir = build_ir(&s);
            for lang in [Lang::Python, Lang::Cpp] {
                let text = render(&ir, lang);
                let scan = guard_scan(&text);
                assert!(scan.complete(), "{lang:?} {}: {scan:?}", model.robot.name);
                assert_eq!(scan.guards, site_count(&ir), "{lang:?} {}", model.robot.name);
            }
        }
    }

    #[test]
    fn python_and_cpp_have_the_documented_shape() {
        let model = build_model(fixtures::puma());
        let s = solved(&model);
        let ir = build_ir(&s);
        let py = render(&ir, Lang::Python);
        assert!(py.contains(
            "def puma560_ik(r_11, r_12, r_13, r_21, r_22, r_23, r_31, r_32, r_33, \
             Px, Py, Pz, a_2=5.0, a_3=1.0, d_3=2.0, d_4=4.0):"
        ));
        assert!(py.contains("except Unreachable:"));
        assert_eq!(py.matches("poses.append(").count(), 16);
        let cpp = render(&ir, Lang::Cpp);
        assert!(cpp.contains("namespace puma560_ik {"));
        assert!(cpp.contains("inline std::vector<PoseSet> solve(double r_11"));
        assert!(cpp.contains("double d_4 = 4.0)"));
        assert_eq!(cpp.matches("poses.push_back(").count(), 8);
    }

    #[test]
    fn renders_are_deterministic() {
        let model = build_model(fixtures::olson13());
        let s1 = solved(&model);
        let s2 = solved(&model);
        for lang in [Lang::Python, Lang::Cpp] {
            assert_eq!(render(&build_ir(&s1), lang), render(&build_ir(&s2), lang));
        }
    }

    #[test]
    #[ignore = "executes python3; run explicitly with --ignored"]
    fn emitted_python_executes_and_matches_the_interpreter() {
        use crate::emit::ir::interpret;
        use crate::kinematics::fk_numeric;
        use crate::verify::sample_seed;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        use std::process::Command;

        let model = build_model(fixtures::puma());
        let s = solved(&model);
        let ir = build_ir(&s);
        let py = render(&ir, Lang::Python);
        let dir = std::env::temp_dir().join(format!("symik-pytest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let module = dir.join("puma560_ik.py");
        std::fs::write(&module, &py).unwrap();
        let driver = dir.join("driver.py");
        std::fs::write(
            &driver,
            "import importlib.util, json, sys\n\
             spec = importlib.util.spec_from_file_location('ik', sys.argv[1])\n\
             m = importlib.util.module_from_spec(spec)\n\
             spec.loader.exec_module(m)\n\
             args = json.loads(sys.stdin.read())\n\
             print(json.dumps(m.puma560_ik(*args)))\n",
        )
        .unwrap();

        let constants = model.robot.constant_bindings();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let seed = sample_seed(&model.robot, &mut rng);
            let t = fk_numeric(&model.robot.rows, &seed).unwrap();
            let expected = interpret(&ir, &t, &constants);
            let mut args: Vec<f64> = Vec::new();
            for i in 0..3 {
                for j in 0..3 {
                    args.push(t[i][j]);
                }
            }
            args.extend([t[0][3], t[1][3], t[2][3]]);
            let input = serde_json::to_string(&args).unwrap();
            let out = {
                use std::io::Write as _;
                let mut child = Command::new("python3")
                    .arg(&driver)
                    .arg(&module)
                    .stdin(std::process::Stdio::piped())
                    .stdout(std::process::Stdio::piped())
                    .spawn()
                    .expect("python3 available");
                child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
                let out = child.wait_with_output().unwrap();
                assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
                String::from_utf8(out.stdout).unwrap()
            };
            let got: Vec<(Option<Vec<f64>>, bool)> = serde_json::from_str(&out).unwrap();
            assert_eq!(got.len(), expected.len());
            for (g, e) in got.iter().zip(&expected) {
                assert_eq!(g.1, e.reachable);
                match (&g.0, &e.joints) {
                    (Some(a), Some(b)) => {
                        for (x, y) in a.iter().zip(b) {
                            assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
                        }
                    }
                    (None, None) => {}
                    other => panic!("mismatched joint payloads: {other:?}"),
                }
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    #[ignore = "invokes g++; run explicitly with --ignored"]
    fn emitted_cpp_is_well_formed() {
        use std::process::Command;
        let dir = std::env::temp_dir().join(format!("symik-cpptest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for (robot, stem) in [
            (fixtures::puma(), "puma560"),
            (fixtures::chair(), "chair_helper"),
            (fixtures::olson13(), "olson13"),
        ] {
            let model = build_model(robot);
            let s = solved(&model);
            let cpp = render(&build_ir(&s), Lang::Cpp);
            let path = dir.join(format!("{stem}_ik.cpp"));
            std::fs::write(&path, &cpp).unwrap();
            let out = Command::new("g++")
                .args(["-std=c++17", "-fsyntax-only", "-Wall", "-Werror"])
                .arg(&path)
                .output()
                .expect("g++ available");
            assert!(out.status.success(), "{stem}: {}", String::from_utf8_lossy(&out.stderr));
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn guard_scan_flags_raw_sites() {
        let text = format!(
            "prelude asin( / \n# {BODY_MARKER}\nx = math.asin(y) + guard_asin(z)\nw = a / b\n"
        );
        let scan = guard_scan(&text);
        assert_eq!(scan.guards, 1);
        assert_eq!(scan.raw_intrinsics, 1);
        assert_eq!(scan.raw_divisions, 1);
        assert!(!scan.complete());
    }
}
