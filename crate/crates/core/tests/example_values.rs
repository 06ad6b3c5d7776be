//! Frozen results for the two-state example.

use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use clqr::atlas::Atlas;
use clqr::enumerate::EnumerationOptions;
use clqr::Setup;

fn strings(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn riccati_solution() {
    let s = Setup::example1();
    let p = &s.unc.p;
    assert_abs_diff_eq!(p[(0, 0)], 1.024094918015807, epsilon = 1e-12);
    assert_abs_diff_eq!(p[(0, 1)], 0.005458316332287138, epsilon = 1e-12);
    assert_abs_diff_eq!(p[(1, 1)], 1.6271691618540833, epsilon = 1e-12);
    assert_abs_diff_eq!(s.unc.k[(0, 0)], 0.48189836031614236, epsilon = 1e-12);
    assert_abs_diff_eq!(s.unc.k[(0, 1)], 0.10916632664575374, epsilon = 1e-12);
    assert_eq!(s.terminal.determined_at, 1);
}

#[test]
fn horizon_one_and_two_tuples() {
    let s = Setup::example1();
    let o = EnumerationOptions::default();
    let a1 = Atlas::solve(&s, 1, &o).unwrap();
    assert_eq!(
        a1.tuple_strings(),
        strings(&["000000.0000", "000000.0001", "000000.0010", "010000.0000", "100000.0000"])
    );
    assert_eq!(a1.boundary_sets.len(), 14);
    assert!(a1.boundary_sets.iter().any(|t| t.to_string() == "010000.0001"));

    let a2 = Atlas::solve(&s, 2, &o).unwrap();
    assert_eq!(
        a2.tuple_strings(),
        strings(&[
            "000000.000000.0000",
            "100000.000000.0000",
            "010000.000000.0000",
            "000000.100000.0000",
            "100000.100000.0000",
            "010000.100000.0000",
            "000000.010000.0000",
            "100000.010000.0000",
            "010000.010000.0000",
            "100000.000000.0001",
            "010000.000000.0010",
            "000000.010000.0010",
            "000000.100000.0001",
        ])
    );
    assert!(!a2.has_tuple(&a2.parse_tuple("000000.010000.0001").unwrap()));
}

#[test]
fn region_counts_level_off() {
    let s = Setup::example1();
    let o = EnumerationOptions::default();
    let counts: Vec<usize> = (3..=5).map(|n| Atlas::solve_by_extension(&s, n, &o).unwrap().regions.len()).collect();
    assert_eq!(counts, [21, 25, 25]);
}

#[test]
fn extension_and_tree_agree_at_horizon_three() {
    let s = Setup::example1();
    let o = EnumerationOptions::default();
    let tree = Atlas::solve(&s, 3, &o).unwrap();
    let ext = Atlas::solve_by_extension(&s, 3, &o).unwrap();
    assert_eq!(tree.tuple_strings(), ext.tuple_strings());
    let (t, e) = (tree.report.unwrap(), ext.report.unwrap());
    assert!(e.candidates_tested < t.candidates_tested);
}
