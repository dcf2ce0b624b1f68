//! Programmatic robot models used across unit tests.

use crate::expr::Sym;
use crate::kinematics::{DhRow, Robot};
use crate::parse::parse_expr;

fn lut<'a>(names: &'a [(&'a str, &'a str)]) -> impl Fn(&str) -> Option<Sym> + 'a {
    move |name: &str| {
        names.iter().find(|(n, _)| *n == name).map(|(n, k)| match *k {
            "rev" => Sym::revolute(*n),
            "pri" => Sym::prismatic(*n),
            _ => Sym::constant(*n),
        })
    }
}

fn rows(names: &[(&str, &str)], specs: &[[&str; 4]]) -> Vec<DhRow> {
    let lookup = lut(names);
    specs
        .iter()
        .map(|[al, a, d, th]| DhRow {
            alpha: parse_expr(al, &lookup).unwrap(),
            a: parse_expr(a, &lookup).unwrap(),
            d: parse_expr(d, &lookup).unwrap(),
            theta: parse_expr(th, &lookup).unwrap(),
        })
        .collect()
}

pub(crate) fn puma() -> Robot {
    let names = [
        ("th_1", "rev"), ("th_2", "rev"), ("th_3", "rev"),
        ("th_4", "rev"), ("th_5", "rev"), ("th_6", "rev"),
        ("a_2", "c"), ("a_3", "c"), ("d_3", "c"), ("d_4", "c"),
    ];
    Robot {
        name: "puma560".into(),
        rows: rows(&names, &[
            ["0", "0", "0", "th_1"],
            ["-pi/2", "0", "0", "th_2"],
            ["0", "a_2", "d_3", "th_3"],
            ["-pi/2", "a_3", "d_4", "th_4"],
            ["pi/2", "0", "0", "th_5"],
            ["-pi/2", "0", "0", "th_6"],
        ]),
        unknowns: (1..=6).map(|i| Sym::revolute(format!("th_{i}"))).collect(),
        constants: vec![
            (Sym::constant("a_2"), Some(5.0)),
            (Sym::constant("a_3"), Some(1.0)),
            (Sym::constant("d_3"), Some(2.0)),
            (Sym::constant("d_4"), Some(4.0)),
        ],
    }
}

pub(crate) fn planar2r() -> Robot {
    let names = [("th_1", "rev"), ("th_2", "rev"), ("l_1", "c"), ("l_2", "c")];
    Robot {
        name: "planar2r".into(),
        rows: rows(&names, &[
            ["0", "0", "0", "th_1"],
            ["0", "l_1", "0", "th_2"],
            ["0", "l_2", "0", "0"],
        ]),
        unknowns: vec![Sym::revolute("th_1"), Sym::revolute("th_2")],
        constants: vec![
            (Sym::constant("l_1"), Some(2.0)),
            (Sym::constant("l_2"), Some(1.0)),
        ],
    }
}

pub(crate) fn chair() -> Robot {
    let names = [
        ("d_1", "pri"), ("th_2", "rev"), ("th_3", "rev"),
        ("th_4", "rev"), ("th_5", "rev"),
        ("l_1", "c"), ("l_2", "c"), ("l_4", "c"),
    ];
    Robot {
        name: "chair_helper".into(),
        rows: rows(&names, &[
            ["0", "0", "d_1", "0"],
            ["0", "l_1", "0", "th_2"],
            ["pi/2", "0", "l_2", "th_3"],
            ["pi/2", "0", "0", "th_4"],
            ["-pi/2", "0", "l_4", "th_5"],
        ]),
        unknowns: vec![
            Sym::prismatic("d_1"),
            Sym::revolute("th_2"),
            Sym::revolute("th_3"),
            Sym::revolute("th_4"),
            Sym::revolute("th_5"),
        ],
        constants: vec![
            (Sym::constant("l_1"), Some(0.5)),
            (Sym::constant("l_2"), Some(1.0)),
            (Sym::constant("l_4"), Some(0.75)),
        ],
    }
}

pub(crate) fn olson13() -> Robot {
    let names = [
        ("d_1", "pri"), ("d_2", "pri"), ("th_3", "rev"),
        ("th_4", "rev"), ("th_5", "rev"), ("th_6", "rev"),
        ("l_3", "c"), ("l_4", "c"), ("l_5", "c"),
    ];
    Robot {
        name: "olson13".into(),
        rows: rows(&names, &[
            ["-pi/2", "0", "d_1", "pi/2"],
            ["pi/2", "0", "d_2", "-pi/2"],
            ["pi/2", "0", "l_3", "th_3"],
            ["pi/2", "0", "0", "th_4"],
            ["0", "l_4", "0", "th_5"],
            ["pi/2", "0", "l_5", "th_6"],
        ]),
        unknowns: vec![
            Sym::prismatic("d_1"),
            Sym::prismatic("d_2"),
            Sym::revolute("th_3"),
            Sym::revolute("th_4"),
            Sym::revolute("th_5"),
            Sym::revolute("th_6"),
        ],
        constants: vec![
            (Sym::constant("l_3"), Some(0.8)),
            (Sym::constant("l_4"), Some(1.1)),
            (Sym::constant("l_5"), Some(0.6)),
        ],
    }
}
