use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use clqr::atlas::Atlas;
use clqr::enumerate::EnumerationOptions;
use clqr::kkt::licq_check;
use clqr::oracle::solve_qp_at;
use clqr::sim::open_loop;
use clqr::{ActiveSetTuple, Polytope, ProblemSpec, Setup};

fn atlases() -> &'static [Atlas] {
    static CELL: OnceLock<Vec<Atlas>> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = Setup::example1();
        (1..=3).map(|n| Atlas::solve(&s, n, &EnumerationOptions::default()).unwrap()).collect()
    })
}

fn svd_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1.0)).count()
}

fn point() -> impl Strategy<Value = DVector<f64>> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| DVector::from_row_slice(&[a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn licq_matches_singular_values(mask in 0u64..(1 << 16)) {
        let atlas = &atlases()[1];
        let q = atlas.qp.q();
        let a = ActiveSetTuple::from_indices((0..q).filter(|i| mask >> i & 1 == 1).map(|i| i + 1), atlas.qp.layout).unwrap();
        let rows = a.active_rows();
        let ga = DMatrix::from_fn(rows.len(), atlas.qp.h.nrows(), |i, j| atlas.qp.g[(rows[i], j)]);
        let zero_row = ga.row_iter().any(|r| r.norm() == 0.0);
        let want = rows.is_empty() || (!zero_row && svd_rank(&ga) == rows.len());
        prop_assert_eq!(licq_check(&atlas.qp, &a), want);
    }

    #[test]
    fn atlas_agrees_with_oracle(x in point(), n in 1usize..=3) {
        let atlas = &atlases()[n - 1];
        prop_assume!(atlas.in_domain(&x));
        let o = solve_qp_at(&atlas.qp, &x).unwrap();
        let (u, _) = atlas.evaluate(&x).unwrap();
        prop_assert!((u - &o.minimizer).amax() <= 1e-6);
        prop_assert!((atlas.qp.objective(&x, &o.minimizer) - o.objective).abs() <= 1e-9 * (1.0 + o.objective.abs()));
    }

    #[test]
    fn tail_of_optimal_sequence_is_optimal(x in point(), n in 2usize..=3) {
        let long = &atlases()[n - 1];
        let short = &atlases()[n - 2];
        prop_assume!(long.in_domain(&x));
        let (u, first) = long.evaluate(&x).unwrap();
        let s = &long.setup.spec;
        let x1 = &s.a * &x + &s.b * &first;
        let (tail, _) = short.evaluate(&x1).unwrap();
        let m = long.qp.m;
        prop_assert!((u.rows(m, m * (n - 1)) - tail).amax() <= 1e-6);
    }

    #[test]
    fn located_points_lie_in_their_region(x in point()) {
        let atlas = &atlases()[1];
        match atlas.locate(&x) {
            Some(r) => prop_assert!(atlas.in_domain(&x) && r.contains(&x, 1e-8)),
            None => prop_assert!(!atlas.qp.is_feasible(&x) || atlas.regions.iter().all(|r| !r.contains(&x, 1e-8))),
        }
    }

    #[test]
    fn state_row_order_does_not_change_the_minimizer(x in point(), perm in Just(vec![2usize, 0, 3, 1]).prop_shuffle()) {
        let base = Setup::example1();
        let spec = &base.spec;
        let xs = spec.x_set.select_rows(&perm);
        let permuted = ProblemSpec::new(spec.a.clone(), spec.b.clone(), spec.q.clone(), spec.r.clone(), xs, spec.u_set.clone())
            .unwrap()
            .with_stage_order(spec.stage_order);
        let other = Setup::new(permuted).unwrap();
        let qa = base.condense(2).unwrap();
        let qb = other.condense(2).unwrap();
        prop_assume!(qa.is_feasible(&x));
        let ua = solve_qp_at(&qa, &x).unwrap().minimizer;
        let ub = solve_qp_at(&qb, &x).unwrap().minimizer;
        prop_assert!((ua - ub).amax() <= 1e-8);
    }

    #[test]
    fn open_loop_follows_the_dynamics(x in point()) {
        let atlas = &atlases()[1];
        prop_assume!(atlas.in_domain(&x));
        let t = open_loop(atlas, &x, 6).unwrap();
        let s = &atlas.setup.spec;
        for k in 0..6 {
            let next = &s.a * &t.states[k] + &s.b * &t.inputs[k];
            prop_assert!((next - &t.states[k + 1]).amax() <= 1e-10);
        }
    }
}

#[test]
fn terminal_set_is_strictly_inside_the_state_box() {
    let setup = Setup::example1();
    let t = &setup.terminal.t;
    let bigger = Polytope::from_box(&[-10.0, -10.0], &[10.0, 10.0]);
    assert!(bigger.contains(t));
    assert!(!t.contains(&bigger));
}
