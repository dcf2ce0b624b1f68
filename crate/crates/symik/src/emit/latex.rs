//! LaTeX report: DH table, symbolic forward kinematics, per-variable
//! solutions with the chosen solver, pose sets, and a description of the
//! dependency graph.

use std::fmt::Write;

use crate::expr::{Expr, Sym};
use crate::kinematics::pose_symbols;

use super::SolvedRobot;

/// Escape a name for use inside `\texttt{..}` or running text.
fn text_escape(s: &str) -> String {
    s.replace('_', "\\_")
}

/// Math-mode rendering of a symbol name: `th_23` becomes `\theta_{23}`,
/// `d_4` stays `d_{4}`, the pose entries map to `r_{11}`/`P_{x}`.
fn latex_sym(s: &Sym) -> String {
    let name = s.name();
    match name {
        "Px" => return "P_{x}".into(),
        "Py" => return "P_{y}".into(),
        "Pz" => return "P_{z}".into(),
        _ => {}
    }
    match name.split_once('_') {
        Some(("th", tail)) => format!("\\theta_{{{tail}}}"),
        Some((head, tail)) => format!("{head}_{{{tail}}}"),
        None => name.to_string(),
    }
}

fn wrap(s: &str) -> String {
    format!("\\left({s}\\right)")
}

/// Render a factor: sums and sign-leading strings get parenthesized.
fn latex_factor(e: &Expr) -> String {
    let s = latex_expr(e);
    if matches!(e, Expr::Add(_)) || s.starts_with('-') {
        wrap(&s)
    } else {
        s
    }
}

pub fn latex_expr(e: &Expr) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Rat(p, q) => {
            if *p < 0 {
                format!("-\\frac{{{}}}{{{q}}}", -p)
            } else {
                format!("\\frac{{{p}}}{{{q}}}")
            }
        }
        Expr::Pi => "\\pi".to_string(),
        Expr::Sym(s) => latex_sym(s),
        Expr::Add(ts) => {
            let mut out = String::new();
            for (i, t) in ts.iter().enumerate() {
                let s = latex_expr(t);
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
        Expr::Mul(fs) => {
            let mut negate = false;
            let mut nums: Vec<String> = Vec::new();
            let mut dens: Vec<String> = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                if i == 0 {
                    if let Expr::Int(n) = f {
                        if *n < 0 {
                            negate = true;
                            if *n != -1 {
                                nums.push((-n).to_string());
                            }
                            continue;
                        }
                    }
                }
                if let Expr::Pow(b, n) = f {
                    if *n < 0 {
                        dens.push(latex_factor(&Expr::Pow(b.clone(), -n)));
                        continue;
                    }
                }
                nums.push(latex_factor(f));
            }
            let num_str = if nums.is_empty() { "1".to_string() } else { nums.join(" \\, ") };
            let body = if dens.is_empty() {
                num_str
            } else {
                format!("\\frac{{{num_str}}}{{{}}}", dens.join(" \\, "))
            };
            if negate {
                format!("-{body}")
            } else {
                body
            }
        }
        Expr::Pow(b, n) => {
            if *n == 0 {
                return "1".into();
            }
            if *n == 1 {
                return latex_expr(b);
            }
            if *n < 0 {
                return format!("\\frac{{1}}{{{}}}", latex_expr(&Expr::Pow(b.clone(), -n)));
            }
            let base = match b.as_ref() {
                Expr::Sym(_) | Expr::Pi => latex_expr(b),
                Expr::Int(v) if *v >= 0 => latex_expr(b),
                Expr::Sin(_) | Expr::Cos(_) | Expr::Tan(_) | Expr::Sqrt(_) => latex_expr(b),
                _ => wrap(&latex_expr(b)),
            };
            format!("{base}^{{{n}}}")
        }
        Expr::Sin(x) => format!("\\sin{}", wrap(&latex_expr(x))),
        Expr::Cos(x) => format!("\\cos{}", wrap(&latex_expr(x))),
        Expr::Tan(x) => format!("\\tan{}", wrap(&latex_expr(x))),
        Expr::Asin(x) => format!("\\arcsin{}", wrap(&latex_expr(x))),
        Expr::Acos(x) => format!("\\arccos{}", wrap(&latex_expr(x))),
        Expr::Atan2(y, x) => format!(
            "\\operatorname{{atan2}}\\left({},\\, {}\\right)",
            latex_expr(y),
            latex_expr(x)
        ),
        Expr::Sqrt(x) => format!("\\sqrt{{{}}}", latex_expr(x)),
    }
}

pub fn emit_latex(solved: &SolvedRobot<'_>) -> String {
    let model = solved.model;
    let robot = &model.robot;
    let graph = solved.graph;
    let mut o = String::new();

    o.push_str("\\documentclass{article}\n\\usepackage{amsmath}\n\\usepackage{geometry}\n\n");
    let _ = writeln!(
        o,
        "\\title{{Closed-form inverse kinematics: {}}}\n\\author{{symik}}\n\\date{{}}\n",
        text_escape(&robot.name)
    );
    o.push_str("\\begin{document}\n\\maketitle\n\n");

    // --- robot description ------------------------------------------------
    o.push_str("\\section{Robot description}\n\n");
    let _ = writeln!(
        o,
        "Serial chain with {} joints: {}.\n",
        robot.unknowns.len(),
        robot
            .unknowns
            .iter()
            .map(|u| format!("${}$", latex_sym(u)))
            .collect::<Vec<_>>()
            .join(", ")
    );
    o.push_str("\\begin{center}\n\\begin{tabular}{c|cccc}\n");
    o.push_str("$i$ & $\\alpha_{i-1}$ & $a_{i-1}$ & $d_i$ & $\\theta_i$ \\\\\n\\hline\n");
    for (i, row) in robot.rows.iter().enumerate() {
        let _ = writeln!(
            o,
            "{} & ${}$ & ${}$ & ${}$ & ${}$ \\\\",
            i + 1,
            latex_expr(&row.alpha),
            latex_expr(&row.a),
            latex_expr(&row.d),
            latex_expr(&row.theta)
        );
    }
    o.push_str("\\end{tabular}\n\\end{center}\n\n");
    if !robot.constants.is_empty() {
        o.push_str("Constants: ");
        let parts: Vec<String> = robot
            .constants
            .iter()
            .map(|(s, v)| match v {
                Some(v) => format!("${} = {v}$", latex_sym(s)),
                None => format!("${}$ (symbolic)", latex_sym(s)),
            })
            .collect();
        o.push_str(&parts.join(", "));
        o.push_str(".\n\n");
    }

    // --- forward kinematics -------------------------------------------------
    o.push_str("\\section{Forward kinematics}\n\n");
    o.push_str(
        "Entries of the tool pose $T$ as functions of the joints; the inverse
problem binds these to the numeric target.\n\n",
    );
    let syms = pose_symbols();
    o.push_str("\\begin{align*}\n");
    for (k, sym) in syms.iter().enumerate() {
        let (i, j) = if k < 9 { (k / 3, k % 3) } else { (k - 9, 3) };
        let _ = writeln!(
            o,
            "{} &= {} \\\\",
            latex_sym(sym),
            latex_expr(&model.fk.0[i][j])
        );
    }
    o.push_str("\\end{align*}\n\n");

    // --- solved variables ---------------------------------------------------
    o.push_str("\\section{Solved variables}\n\n");
    for commit in solved.commits {
        let _ = writeln!(o, "\\subsection*{{${}$}}\n", latex_sym(&commit.var));
        let _ = writeln!(o, "chosen solver: \\texttt{{{}}}\n", commit.solver);
        o.push_str("\\begin{align*}\n");
        for (b, expr) in commit.branches.iter().enumerate() {
            let _ = writeln!(
                o,
                "{}^{{({})}} &= {} \\\\",
                latex_sym(&commit.var),
                b + 1,
                latex_expr(expr)
            );
        }
        o.push_str("\\end{align*}\n\n");
    }

    // --- pose sets ------------------------------------------------------------
    o.push_str("\\section{Pose sets}\n\n");
    let _ = writeln!(
        o,
        "The solution graph admits {} complete pose sets.\n",
        solved.poses.len()
    );
    o.push_str("\\begin{itemize}\n");
    for (i, pose) in solved.poses.iter().enumerate() {
        let labels: Vec<String> = pose
            .nodes
            .iter()
            .map(|&id| format!("\\texttt{{{}}}", text_escape(&graph.nodes[id].label())))
            .collect();
        let _ = writeln!(o, "\\item pose set {}: {}", i + 1, labels.join(", "));
    }
    o.push_str("\\end{itemize}\n\n");

    // --- graph ------------------------------------------------------------------
    o.push_str("\\section{Solution graph}\n\n");
    o.push_str("\\begin{itemize}\n");
    for v in &graph.variables {
        if v.direct_parents.is_empty() {
            let _ = writeln!(o, "\\item ${}$: no parents", latex_sym(&v.var));
        } else {
            let parents: Vec<String> = v
                .direct_parents
                .iter()
                .map(|p| format!("${}$", latex_sym(p)))
                .collect();
            let _ = writeln!(o, "\\item ${}$: parents {}", latex_sym(&v.var), parents.join(", "));
        }
    }
    o.push_str("\\end{itemize}\n\n");
    let multi: Vec<&crate::graph::VariableInfo> = graph
        .variables
        .iter()
        .filter(|v| v.direct_parents.len() >= 2)
        .collect();
    if multi.is_empty() {
        o.push_str("The dependency structure is a tree.\n");
    } else {
        let names: Vec<String> = multi.iter().map(|v| format!("${}$", latex_sym(&v.var))).collect();
        let _ = writeln!(
            o,
            "The dependency structure is a graph, not a tree: {} have two or more independent parents.",
            names.join(", ")
        );
    }
    let _ = writeln!(
        o,
        "It contains {} concrete solution nodes.\n",
        graph.nodes.len()
    );

    o.push_str("\\end{document}\n");
    o
}
