//! Randomized property suite for the expression kernel: canonicalization is
//! idempotent, numeric evaluation commutes with canonicalization, and
//! printing followed by parsing is the identity on canonical forms.

mod common;

#[test]
fn canonicalization_is_idempotent() {
    common::run_canon_idempotence(500, 0xC0_FFEE);
}

#[test]
fn evaluation_commutes_with_canonicalization() {
    common::run_eval_commutes_with_canon(500, 0xBEEF);
}

#[test]
fn print_then_parse_round_trips_canonical_forms() {
    common::run_print_parse_round_trip(500, 0xDECAF);
}
