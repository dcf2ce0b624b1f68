//! Robot description files: a small JSON schema carrying the DH table as
//! expression strings, the unknown list, and the constant table. Validation
//! rejects malformed chains before the pipeline runs.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::expr::Sym;
use crate::kinematics::{DhRow, Robot};
use crate::parse::{parse_expr, ParseError};

/// Raw file schema. Expression strings use the published grammar.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotFile {
    pub name: String,
    pub dh: Vec<DhRowFile>,
    pub unknowns: Vec<String>,
    #[serde(default)]
    pub constants: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRowFile {
    pub alpha: String,
    pub a: String,
    pub d: String,
    pub theta: String,
}

#[derive(Debug, Error)]
pub enum RobotFileError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dh table must have 1 to 6 rows, found {0}")]
    DhLength(usize),
    #[error("unknown {0} is listed twice")]
    DuplicateUnknown(String),
    #[error("{0} is declared both as an unknown and as a constant")]
    UnknownShadowsConstant(String),
    #[error("row {row}, field {field}: {source}")]
    Expr {
        row: usize,
        field: &'static str,
        source: ParseError,
    },
    #[error("unknown {name} appears in {count} rows' d/theta entries; it must appear in exactly one")]
    Placement { name: String, count: usize },
    #[error("unknown {name} appears in the {field} entry of row {row}; unknowns may only drive d or theta")]
    GeometryUnknown {
        name: String,
        row: usize,
        field: &'static str,
    },
    #[error("unknown {name} drives both d and theta of row {row}")]
    AmbiguousKind { name: String, row: usize },
}

/// The four expression fields of a row, with stable names for diagnostics.
const FIELDS: [&str; 4] = ["alpha", "a", "d", "theta"];

fn field_of<'a>(row: &'a DhRowFile, field: &str) -> &'a str {
    match field {
        "alpha" => &row.alpha,
        "a" => &row.a,
        "d" => &row.d,
        _ => &row.theta,
    }
}

/// Parse and validate a robot file, producing the kinematic description.
///
/// Unknown kinds derive from placement: an unknown driving a `d` entry is
/// prismatic, one driving a `theta` entry is revolute. The chain order of
/// `Robot::unknowns` follows row order (then d before theta within a row).
pub fn parse_robot_file(text: &str) -> Result<Robot, RobotFileError> {
    let file: RobotFile = serde_json::from_str(text)?;

    if file.dh.is_empty() || file.dh.len() > 6 {
        return Err(RobotFileError::DhLength(file.dh.len()));
    }
    for (i, u) in file.unknowns.iter().enumerate() {
        if file.unknowns[..i].contains(u) {
            return Err(RobotFileError::DuplicateUnknown(u.clone()));
        }
        if file.constants.contains_key(u) {
            return Err(RobotFileError::UnknownShadowsConstant(u.clone()));
        }
    }

    // first pass: provisional kinds, just to discover placements; the
    // parser only needs to know each identifier exists
    let provisional = |name: &str| -> Option<Sym> {
        if file.unknowns.iter().any(|u| u == name) {
            Some(Sym::revolute(name))
        } else if file.constants.contains_key(name) {
            Some(Sym::constant(name))
        } else {
            None
        }
    };
    let mut placements: BTreeMap<&str, Vec<(usize, &'static str)>> = BTreeMap::new();
    for (r, row) in file.dh.iter().enumerate() {
        for field in FIELDS {
            let expr = parse_expr(field_of(row, field), &provisional)
                .map_err(|source| RobotFileError::Expr { row: r + 1, field, source })?;
            for sym in expr.free_syms() {
                if let Some(u) = file.unknowns.iter().find(|u| *u == sym.name()) {
                    if field == "alpha" || field == "a" {
                        return Err(RobotFileError::GeometryUnknown {
                            name: u.clone(),
                            row: r + 1,
                            field,
                        });
                    }
                    placements.entry(u.as_str()).or_default().push((r, field));
                }
            }
        }
    }

    // placement rules give each unknown its kind and chain position
    let mut kinds: BTreeMap<&str, Sym> = BTreeMap::new();
    let mut order: Vec<(usize, usize, Sym)> = Vec::new();
    for u in &file.unknowns {
        let sites = placements.get(u.as_str()).map_or(&[][..], |v| v);
        let rows: Vec<usize> = {
            let mut r: Vec<usize> = sites.iter().map(|(r, _)| *r).collect();
            r.dedup();
            r
        };
        if rows.len() != 1 {
            return Err(RobotFileError::Placement { name: u.clone(), count: rows.len() });
        }
        let in_d = sites.iter().any(|(_, f)| *f == "d");
        let in_theta = sites.iter().any(|(_, f)| *f == "theta");
        if in_d && in_theta {
            return Err(RobotFileError::AmbiguousKind { name: u.clone(), row: rows[0] + 1 });
        }
        let sym = if in_d { Sym::prismatic(u) } else { Sym::revolute(u) };
        kinds.insert(u.as_str(), sym.clone());
        order.push((rows[0], usize::from(in_theta), sym));
    }
    order.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    // second pass with the real kinds
    let lookup = |name: &str| -> Option<Sym> {
        kinds.get(name).cloned().or_else(|| {
            file.constants.contains_key(name).then(|| Sym::constant(name))
        })
    };
    let mut dh_rows = Vec::with_capacity(file.dh.len());
    for (r, row) in file.dh.iter().enumerate() {
        let mut parsed = Vec::with_capacity(4);
        for field in FIELDS {
            parsed.push(
                parse_expr(field_of(row, field), &lookup)
                    .map_err(|source| RobotFileError::Expr { row: r + 1, field, source })?,
            );
        }
        let theta = parsed.pop().unwrap();
        let d = parsed.pop().unwrap();
        let a = parsed.pop().unwrap();
        let alpha = parsed.pop().unwrap();
        dh_rows.push(DhRow { alpha, a, d, theta });
    }

    Ok(Robot {
        name: file.name,
        rows: dh_rows,
        unknowns: order.into_iter().map(|(_, _, s)| s).collect(),
        constants: file
            .constants
            .iter()
            .map(|(n, v)| (Sym::constant(n), *v))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(dh: &str, unknowns: &str, constants: &str) -> String {
        format!(
            "{{\"name\": \"t\", \"dh\": [{dh}], \"unknowns\": [{unknowns}], \
             \"constants\": {{{constants}}}}}"
        )
    }

    const ROW_REV: &str = "{\"alpha\": \"0\", \"a\": \"0\", \"d\": \"0\", \"theta\": \"th_1\"}";

    #[test]
    fn parses_a_minimal_revolute_robot() {
        let robot = parse_robot_file(&minimal(ROW_REV, "\"th_1\"", "")).unwrap();
        assert_eq!(robot.name, "t");
        assert_eq!(robot.rows.len(), 1);
        assert_eq!(robot.unknowns.len(), 1);
        assert!(robot.unknowns[0].is_revolute());
    }

    #[test]
    fn prismatic_kind_comes_from_the_d_column() {
        let dh = "{\"alpha\": \"0\", \"a\": \"0\", \"d\": \"d_1 + l_1\", \"theta\": \"0\"}";
        let robot = parse_robot_file(&minimal(dh, "\"d_1\"", "\"l_1\": 2.0")).unwrap();
        assert!(robot.unknowns[0].is_prismatic());
        assert_eq!(robot.constants.len(), 1);
        assert_eq!(robot.constants[0].1, Some(2.0));
    }

    #[test]
    fn null_constants_stay_symbolic() {
        let dh = "{\"alpha\": \"0\", \"a\": \"l_1\", \"d\": \"0\", \"theta\": \"th_1\"}";
        let robot = parse_robot_file(&minimal(dh, "\"th_1\"", "\"l_1\": null")).unwrap();
        assert_eq!(robot.constants[0].1, None);
        assert!(robot.constant_bindings().get(&Sym::constant("l_1")).is_none());
    }

    #[test]
    fn seven_rows_are_rejected() {
        let rows = vec![ROW_REV; 7].join(", ");
        let err = parse_robot_file(&minimal(&rows, "\"th_1\"", "")).unwrap_err();
        assert!(matches!(err, RobotFileError::DhLength(7)));
    }

    #[test]
    fn unknown_must_appear_exactly_once() {
        let rows = vec![ROW_REV; 2].join(", ");
        let err = parse_robot_file(&minimal(&rows, "\"th_1\"", "")).unwrap_err();
        assert!(matches!(err, RobotFileError::Placement { count: 2, .. }));

        let absent = "{\"alpha\": \"0\", \"a\": \"0\", \"d\": \"0\", \"theta\": \"0\"}";
        let err = parse_robot_file(&minimal(absent, "\"th_1\"", "")).unwrap_err();
        assert!(matches!(err, RobotFileError::Placement { count: 0, .. }));
    }

    #[test]
    fn unknown_in_a_geometry_column_is_rejected() {
        let dh = "{\"alpha\": \"0\", \"a\": \"th_1\", \"d\": \"0\", \"theta\": \"0\"}";
        let err = parse_robot_file(&minimal(dh, "\"th_1\"", "")).unwrap_err();
        assert!(matches!(err, RobotFileError::GeometryUnknown { field: "a", .. }));
    }

    #[test]
    fn undeclared_identifier_reports_row_and_field() {
        let dh = "{\"alpha\": \"0\", \"a\": \"l_9\", \"d\": \"0\", \"theta\": \"th_1\"}";
        let err = parse_robot_file(&minimal(dh, "\"th_1\"", "")).unwrap_err();
        match err {
            RobotFileError::Expr { row: 1, field: "a", .. } => {}
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_and_shadowed_unknowns_are_rejected() {
        let err =
            parse_robot_file(&minimal(ROW_REV, "\"th_1\", \"th_1\"", "")).unwrap_err();
        assert!(matches!(err, RobotFileError::DuplicateUnknown(_)));
        let err =
            parse_robot_file(&minimal(ROW_REV, "\"th_1\"", "\"th_1\": 1.0")).unwrap_err();
        assert!(matches!(err, RobotFileError::UnknownShadowsConstant(_)));
    }

    #[test]
    fn chain_order_follows_rows_not_the_unknown_list() {
        let dh = "{\"alpha\": \"0\", \"a\": \"0\", \"d\": \"0\", \"theta\": \"th_1\"}, \
                  {\"alpha\": \"0\", \"a\": \"0\", \"d\": \"d_2\", \"theta\": \"0\"}";
        let robot = parse_robot_file(&minimal(dh, "\"d_2\", \"th_1\"", "")).unwrap();
        let names: Vec<&str> = robot.unknowns.iter().map(|u| u.name()).collect();
        assert_eq!(names, ["th_1", "d_2"]);
    }

    #[test]
    fn checked_in_robot_files_match_the_reference_models() {
        for (path, fixture) in [
            ("puma560", crate::fixtures::puma()),
            ("planar2r", crate::fixtures::planar2r()),
            ("chair_helper", crate::fixtures::chair()),
            ("olson13", crate::fixtures::olson13()),
        ] {
            let file = format!("{}/../../robots/{path}.json", env!("CARGO_MANIFEST_DIR"));
            let text = std::fs::read_to_string(&file).unwrap_or_else(|e| panic!("{file}: {e}"));
            let robot = parse_robot_file(&text).unwrap();
            assert_eq!(robot.name, fixture.name);
            assert_eq!(robot.unknowns, fixture.unknowns);
            assert_eq!(robot.constants, fixture.constants);
            assert_eq!(robot.rows.len(), fixture.rows.len());
            for (got, want) in robot.rows.iter().zip(&fixture.rows) {
                assert_eq!(got.alpha, want.alpha);
                assert_eq!(got.a, want.a);
                assert_eq!(got.d, want.d);
                assert_eq!(got.theta, want.theta);
            }
        }
    }
}
