//! The invariant suite run over a pair of consecutive-horizon atlases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::atlas::Atlas;
use crate::error::Result;
use crate::linalg::vec_inf_norm;
use crate::oracle::{sample_feasible, solve_qp_at};
use crate::sim::{compare_trajectories, mpc_closed_loop, open_loop};
use crate::tol;

pub const LAW_TOL: f64 = 1e-7;
pub const ORACLE_TOL: f64 = 1e-6;
pub const CONTINUITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    /// First few failure descriptions.
    pub details: Vec<String>,
}

impl PropertyResult {
    fn new(name: &str, checked: usize, failures: Vec<String>) -> Self {
        PropertyResult {
            name: name.into(),
            passed: failures.is_empty(),
            checked,
            failures: failures.len(),
            details: failures.into_iter().take(5).collect(),
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {:<20} checked={} failures={}", self.name, self.checked, self.failures)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub horizons: [usize; 2],
    pub samples: usize,
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// Runs every property for `prev` (horizon N) and `next` (horizon N+1).
///
/// `samples` is the number of oracle points and the number of interior
/// points drawn per persistent region.
pub fn verify_pair(prev: &Atlas, next: &Atlas, samples: usize, seed: u64) -> Result<VerifyReport> {
    let mut props = Vec::new();

    let prefix = next.prefix_violations(prev)?;
    props.push(PropertyResult::new("prefix", next.regions.len() + next.boundary_sets.len(), prefix));

    let pers = prev.check_persistence(next, samples.clamp(1, 20), seed)?;
    let fails = pers.violations.iter().map(|v| format!("{}: {}", v.tuple, v.reason)).collect();
    props.push(PropertyResult::new("persistence", prev.regions.len() + pers.converse_checked, fails));

    let pn = next.build_pn()?;
    let closure = pn.missing_offspring.iter().map(|t| format!("offspring {t} missing")).collect();
    props.push(PropertyResult::new("offspring_closure", pn.members.len(), closure));

    let inv = next.check_pn_invariance(&pn, samples, 2 * samples, seed)?;
    let mut fails = inv.violations.clone();
    fails.extend(inv.hull_violations.iter().map(|h| format!("hull point outside domain: {h}")));
    props.push(PropertyResult::new("pn_invariance", inv.states_checked + inv.hull_points, fails));

    props.push(mpc_equivalence(next, &pn.members, samples, seed)?);
    props.push(oracle_agreement(next, samples, seed)?);

    let facets = next.facet_continuity(50, seed)?;
    let fails = facets
        .iter()
        .filter(|f| f.deviation > CONTINUITY_TOL)
        .map(|f| format!("{} | {}: {:e}", f.left, f.right, f.deviation))
        .collect();
    props.push(PropertyResult::new("continuity", facets.len(), fails));

    Ok(VerifyReport { horizons: [prev.horizon, next.horizon], samples, seed, properties: props })
}

/// Receding-horizon and open-loop trajectories agree over `3N` steps from
/// interior points of persistent regions.
pub fn mpc_equivalence(
    atlas: &Atlas,
    members: &[crate::bitset::ActiveSetTuple],
    per_region: usize,
    seed: u64,
) -> Result<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d70_6321);
    let steps = 3 * atlas.horizon;
    let mut checked = 0;
    let mut fails = Vec::new();
    for t in members {
        let Some(r) = atlas.region(t) else {
            fails.push(format!("{t}: not in atlas"));
            continue;
        };
        for x in r.region.sample_interior(per_region, tol::INTERIOR_GUARD, &mut rng, 1_000_000)? {
            checked += 1;
            let ol = open_loop(atlas, &x, steps)?;
            match mpc_closed_loop(atlas, &x, steps) {
                Ok(cl) => {
                    let d = compare_trajectories(&ol, &cl, steps);
                    if d > LAW_TOL {
                        fails.push(format!("{t}: deviation {d:e} from {:?}", x.as_slice()));
                    }
                }
                Err(e) => fails.push(format!("{t}: {e}")),
            }
        }
    }
    Ok(PropertyResult::new("mpc_equivalence", checked, fails))
}

/// Atlas laws against the pointwise QP solver at seeded feasible samples.
/// Tuples are compared only at points at least `INTERIOR_GUARD` inside their region.
pub fn oracle_agreement(atlas: &Atlas, samples: usize, seed: u64) -> Result<PropertyResult> {
    let xs = sample_feasible(&atlas.qp, samples, seed)?;
    let mut fails = Vec::new();
    let mut interior = 0;
    for x in &xs {
        let o = solve_qp_at(&atlas.qp, x)?;
        let Some(r) = atlas.locate(x) else {
            fails.push(format!("{:?} not located", x.as_slice()));
            continue;
        };
        let d = vec_inf_norm(&(r.law.input(x) - &o.minimizer));
        if d > ORACLE_TOL {
            fails.push(format!("{:?}: law deviation {d:e}", x.as_slice()));
        }
        if r.region.max_violation(x) < -tol::INTERIOR_GUARD {
            interior += 1;
            if o.active != r.active_set {
                fails.push(format!("{:?}: oracle {} vs atlas {}", x.as_slice(), o.active, r.active_set));
            }
        }
    }
    let mut res = PropertyResult::new("oracle_agreement", xs.len(), fails);
    res.details.push(format!("{interior} interior samples"));
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::EnumerationOptions;
    use crate::setup::Setup;

    fn pair() -> (Atlas, Atlas) {
        let s = Setup::example1();
        let o = EnumerationOptions::default();
        (Atlas::solve(&s, 1, &o).unwrap(), Atlas::solve(&s, 2, &o).unwrap())
    }

    #[test]
    fn example_pair_passes() {
        let (a, b) = pair();
        let r = verify_pair(&a, &b, 30, 5).unwrap();
        for p in &r.properties {
            assert!(p.passed, "{}: {:?}", p.name, p.details);
            assert!(p.checked > 0, "{}", p.name);
        }
    }

    #[test]
    fn verdicts_do_not_depend_on_seed() {
        let (a, b) = pair();
        let v = |seed| {
            verify_pair(&a, &b, 10, seed).unwrap().properties.iter().map(|p| p.passed).collect::<Vec<_>>()
        };
        assert_eq!(v(1), v(99));
    }
}
