//! Acceptance run on the worked example. Prints one line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use clqr::atlas::Atlas;
use clqr::enumerate::{enumerate_extension, enumerate_tree, extension_seeds, EnumerationOptions};
use clqr::kkt::licq_check;
use clqr::oracle::{exhaustive_active_sets, sample_feasible, solve_qp_at};
use clqr::riccati::dare_residual;
use clqr::tol::{self, Tolerances};
use clqr::verify::mpc_equivalence;
use clqr::{ActiveSetTuple, Setup};

const SEED: u64 = 20_240_601;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

type Criterion = (&'static str, fn(&Ctx) -> Outcome);

struct Ctx {
    setup: Setup,
    atlases: Vec<Atlas>,
}

impl Ctx {
    fn atlas(&self, n: usize) -> &Atlas {
        &self.atlases[n - 1]
    }

    fn tuple(&self, n: usize, text: &str) -> ActiveSetTuple {
        self.atlas(n).parse_tuple(text).expect("well-formed tuple")
    }
}

fn tuples_extending(next: &Atlas, a: &ActiveSetTuple) -> Vec<String> {
    next.tuples()
        .into_iter()
        .filter(|t| t.drop_stages(1).map(|d| &d == a).unwrap_or(false))
        .map(|t| t.to_string())
        .collect()
}

fn c1(cx: &Ctx) -> Outcome {
    let spec = &cx.setup.spec;
    let t = &cx.setup.terminal.t;
    let ok = spec.qx() + spec.qu() == 6 && cx.setup.terminal.q_t() == 4 && t.is_irredundant();
    outcome(ok, format!("qX+qU = {}, qT = {}", spec.qx() + spec.qu(), cx.setup.terminal.q_t()))
}

fn c2(cx: &Ctx) -> Outcome {
    let mut total = 0;
    let mut checked = 0;
    for n in 1..=3 {
        let v = cx.atlas(n + 1).prefix_violations(cx.atlas(n)).expect("consecutive atlases");
        checked += cx.atlas(n + 1).all_tuples().len();
        total += v.len();
    }
    outcome(total == 0, format!("{checked} tuples at N = 2..4, {total} violations"))
}

fn c3(cx: &Ctx) -> Outcome {
    let cases = [(1, "100000.0000", 3), (1, "000000.0001", 1), (2, "100000.000000.0001", 0)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, text, want) in cases {
        let got = tuples_extending(cx.atlas(n + 1), &cx.tuple(n, text));
        ok &= got.len() == want && cx.atlas(n).has_tuple(&cx.tuple(n, text));
        parts.push(format!("{text} -> {}", got.len()));
    }
    let ext = tuples_extending(cx.atlas(2), &cx.tuple(1, "000000.0001"));
    ok &= ext == ["100000.000000.0001"];
    outcome(ok, parts.join(", "))
}

fn c4(cx: &Ctx) -> Outcome {
    let rep = cx.atlas(1).check_persistence(cx.atlas(2), 20, SEED).expect("persistence check");
    let ok = rep.violations.is_empty() && rep.max_law_deviation <= 1e-7 && !rep.persistent.is_empty();
    outcome(
        ok,
        format!(
            "{} persistent, {} converse checked, max law deviation {:.1e}, {} violations",
            rep.persistent.len(),
            rep.converse_checked,
            rep.max_law_deviation,
            rep.violations.len()
        ),
    )
}

fn c5(cx: &Ctx) -> Outcome {
    let red: Vec<_> = cx.atlas(1).regions.iter().filter(|r| r.active_set.terminal().iter().any(|&b| b)).collect();
    let mut matched = 0;
    for r in &red {
        matched += cx.atlas(2).regions.iter().filter(|o| o.region.poly_equal(&r.region)).count();
    }
    let names: Vec<String> = red.iter().map(|r| r.active_set.to_string()).collect();
    outcome(red.len() == 2 && matched == 0, format!("terminal-active {names:?}, {matched} counterparts"))
}

fn c6(cx: &Ctx) -> Outcome {
    let q1 = &cx.atlas(1).qp;
    let q2 = &cx.atlas(2).qp;
    let a = licq_check(q1, &cx.tuple(1, "010000.0001"));
    let b = licq_check(q2, &cx.tuple(2, "000000.010000.0001"));
    outcome(!a && b, format!("010000.0001: {a}, 000000.010000.0001: {b}"))
}

fn c7(cx: &Ctx) -> Outcome {
    let start = Instant::now();
    let opts = EnumerationOptions::default();
    let q1 = cx.setup.condense(1).expect("condense");
    let q2 = cx.setup.condense(2).expect("condense");
    let tree1 = enumerate_tree(&q1, &opts).expect("tree");
    let tree2 = enumerate_tree(&q2, &opts).expect("tree");
    let ext2 = enumerate_extension(&q2, &extension_seeds(&tree1), &opts).expect("extension");
    let set = |e: &clqr::enumerate::Enumeration| -> BTreeSet<ActiveSetTuple> {
        e.regions.iter().map(|r| r.active_set.clone()).collect()
    };
    let exhaustive = exhaustive_active_sets(&q1, &Tolerances::default()).expect("exhaustive");
    let secs = start.elapsed().as_secs_f64();
    let ok = set(&ext2) == set(&tree2) && exhaustive == set(&tree1) && secs < 10.0;
    outcome(
        ok,
        format!(
            "N=2 extension {} = tree {}; N=1 exhaustive {} = tree {} (q = {}); {secs:.2} s",
            ext2.regions.len(),
            tree2.regions.len(),
            exhaustive.len(),
            tree1.regions.len(),
            q1.q()
        ),
    )
}

fn c8(cx: &Ctx) -> Outcome {
    let atlas = cx.atlas(2);
    let xs = sample_feasible(&atlas.qp, 200, SEED).expect("sampling");
    let mut worst: f64 = 0.0;
    let mut interior = 0;
    let mut tuple_ok = 0;
    let mut located = 0;
    for x in &xs {
        let o = solve_qp_at(&atlas.qp, x).expect("oracle");
        let Some(r) = atlas.locate(x) else { continue };
        located += 1;
        worst = worst.max((r.law.input(x) - &o.minimizer).amax());
        if r.region.max_violation(x) < -tol::INTERIOR_GUARD {
            interior += 1;
            tuple_ok += usize::from(o.active == r.active_set);
        }
    }
    let ok = located == xs.len() && worst <= 1e-6 && tuple_ok == interior && interior > 0;
    outcome(ok, format!("{} samples, max deviation {worst:.1e}, tuples {tuple_ok}/{interior} interior", xs.len()))
}

fn c9(cx: &Ctx) -> Outcome {
    let atlas = cx.atlas(2);
    let pn = atlas.build_pn().expect("P_N");
    let inv = atlas.check_pn_invariance(&pn, 50, 100, SEED).expect("invariance");
    let mpc = mpc_equivalence(atlas, &pn.members, 50, SEED).expect("mpc");
    let ok = inv.passed() && mpc.passed && inv.hull_points == 100 && inv.trajectories == 50 * pn.members.len();
    outcome(
        ok,
        format!(
            "{} trajectories / {} states, {} invariance violations; MPC {} checked, {} failures; hull {}/{} in F_2",
            inv.trajectories,
            inv.states_checked,
            inv.violations.len(),
            mpc.checked,
            mpc.failures,
            inv.hull_points - inv.hull_violations.len(),
            inv.hull_points
        ),
    )
}

fn c10(cx: &Ctx) -> Outcome {
    let atlas = cx.atlas(2);
    let pn = atlas.build_pn().expect("P_N");
    let off = cx.tuple(2, "010000.100000.0000").persistent_offspring().expect("offspring");
    let example = off.iter().map(|t| t.to_string()).collect::<Vec<_>>() == ["100000.000000.0000"];
    let ok = pn.missing_offspring.is_empty() && pn.is_closed() && example;
    outcome(ok, format!("{} persistent tuples, {} missing offspring", pn.members.len(), pn.missing_offspring.len()))
}

fn c11(cx: &Ctx) -> Outcome {
    let res = dare_residual(&cx.setup.spec, &cx.setup.unc.p).expect("residual");
    let pd = (1..=4).all(|n| cx.atlas(n).qp.h.clone().cholesky().is_some());
    let facets = cx.atlas(2).facet_continuity(50, SEED).expect("facets");
    let worst = facets.iter().map(|f| f.deviation).fold(0.0, f64::max);
    let lambdas = [0.25, 0.5, 0.9];
    let scaled = lambdas.iter().all(|&l| cx.setup.terminal.scaled_invariance_check(l, 100, SEED));
    let ok = res <= 1e-9 && pd && facets.len() == 50 && worst <= 1e-6 && scaled;
    outcome(
        ok,
        format!(
            "DARE residual {res:.1e}, H PD {pd}, {} facet points max jump {worst:.1e}, scaling {scaled}",
            facets.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let setup = Setup::example1();
    let opts = EnumerationOptions::default();
    let atlases = (1..=4).map(|n| Atlas::solve(&setup, n, &opts).expect("atlas")).collect();
    let cx = Ctx { setup, atlases };
    let criteria: [Criterion; 11] = [
        ("example setup sizes", c1),
        ("prefix property", c2),
        ("extension multiplicities", c3),
        ("persistence", c4),
        ("terminal-active regions do not persist", c5),
        ("LICQ case", c6),
        ("enumeration equivalence", c7),
        ("oracle agreement", c8),
        ("P_N corollaries", c9),
        ("offspring closure", c10),
        ("numerical bedrock", c11),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f(&cx);
        let verdict = if o.ok { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {}: {name}: {}", k + 1, o.detail);
        failed += usize::from(!o.ok);
    }
    println!("acceptance: {} passed, {failed} failed, {:.2} s", criteria.len() - failed, start.elapsed().as_secs_f64());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
