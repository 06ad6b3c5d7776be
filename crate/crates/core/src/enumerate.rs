//! Optimal active-set enumeration: a pruned subset tree for a base horizon and
//! stage-prefix extension from one horizon to the next.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::bitset::ActiveSetTuple;
use crate::condense::CondensedQP;
use crate::error::{Error, Result};
use crate::geom::LpStatus;
use crate::kkt::{feasibility_lp, optimality_lp, solve_kkt_with, weak_optimality_lp, CriticalRegion};
use crate::tol::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Tree,
    Extension,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnumerationReport {
    pub horizon: usize,
    pub candidates_tested: usize,
    pub pruned: usize,
    pub regions_found: usize,
    pub boundary_sets: usize,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnumerationOptions {
    pub tol: Tolerances,
    /// Also emit lower-dimensional regions as regions.
    pub include_degenerate: bool,
}

/// Full-dimensional regions, tuples optimal only on lower-dimensional sets,
/// and the bookkeeping of the run.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub regions: Vec<CriticalRegion>,
    pub boundary_sets: Vec<ActiveSetTuple>,
    pub report: EnumerationReport,
}

/// Outcome of the certificate LPs for one candidate.
#[derive(Clone, Debug)]
pub enum Verdict {
    /// No parameter makes the active rows tight while the others hold.
    Infeasible,
    /// Feasible, but never the exact set of tight rows at an optimizer.
    NotOptimal,
    /// The exact set of tight rows at optimizers filling a lower-dimensional set.
    Boundary(Box<CriticalRegion>),
    /// Optimal on a full-dimensional region.
    Region(Box<CriticalRegion>),
}

/// Runs the feasibility, strict and weak optimality certificates for `a`.
///
/// A candidate that passes only the weak certificate but still owns a
/// full-dimensional region is kept as a region flagged weakly active; this
/// happens when some row is tight on the whole region with a vanishing
/// multiplier, so no strictly complementary set describes it.
pub fn classify(qp: &CondensedQP, a: &ActiveSetTuple, tol: &Tolerances) -> Result<Verdict> {
    let feas = feasibility_lp(qp, a);
    if feas.status == LpStatus::Infeasible {
        return Ok(Verdict::Infeasible);
    }
    if feas.optimum <= tol.margin {
        return Ok(Verdict::NotOptimal);
    }
    let strict = optimality_lp(qp, a);
    let weakly_active = if strict.is_optimal() && strict.optimum > tol.margin {
        false
    } else {
        let weak = weak_optimality_lp(qp, a);
        if !(weak.is_optimal() && weak.optimum > tol.margin) {
            return Ok(Verdict::NotOptimal);
        }
        true
    };
    let mut cr = solve_kkt_with(qp, a, tol.tightness)?;
    cr.flags.weakly_active = weakly_active;
    Ok(if cr.flags.full_dim { Verdict::Region(Box::new(cr)) } else { Verdict::Boundary(Box::new(cr)) })
}

#[derive(Default)]
struct Collector {
    regions: BTreeMap<ActiveSetTuple, CriticalRegion>,
    boundary: BTreeMap<ActiveSetTuple, CriticalRegion>,
    tested: usize,
    pruned: usize,
}

impl Collector {
    /// Returns false when the candidate is infeasible (its supersets can be skipped).
    fn visit(&mut self, qp: &CondensedQP, a: &ActiveSetTuple, tol: &Tolerances) -> Result<bool> {
        self.tested += 1;
        match classify(qp, a, tol)? {
            Verdict::Infeasible => {
                self.pruned += 1;
                return Ok(false);
            }
            Verdict::NotOptimal => {}
            Verdict::Boundary(cr) => {
                self.boundary.insert(a.clone(), *cr);
            }
            Verdict::Region(cr) => {
                self.regions.insert(a.clone(), *cr);
            }
        }
        Ok(true)
    }

    fn finish(self, horizon: usize, method: Method, opts: &EnumerationOptions) -> Enumeration {
        let mut regions: Vec<CriticalRegion> = self.regions.into_values().collect();
        let boundary_sets: Vec<ActiveSetTuple> = self.boundary.keys().cloned().collect();
        if opts.include_degenerate {
            regions.extend(self.boundary.into_values());
            regions.sort_by(|a, b| a.active_set.cmp(&b.active_set));
        }
        let report = EnumerationReport {
            horizon,
            candidates_tested: self.tested,
            pruned: self.pruned,
            regions_found: regions.len(),
            boundary_sets: boundary_sets.len(),
            method,
        };
        Enumeration { regions, boundary_sets, report }
    }
}

/// Breadth-first search over subsets of the constraint rows, by cardinality.
///
/// A subset is generated from its parent (itself minus its largest index) and
/// only when every one-smaller subset survived, so any superset of an
/// infeasible set is never tested.
pub fn enumerate_tree(qp: &CondensedQP, opts: &EnumerationOptions) -> Result<Enumeration> {
    let q = qp.q();
    let layout = qp.layout;
    let mut col = Collector::default();
    let mut level: Vec<Vec<usize>> = vec![Vec::new()];
    let root = ActiveSetTuple::empty(layout);
    if !col.visit(qp, &root, &opts.tol)? {
        return Ok(col.finish(qp.horizon, Method::Tree, opts));
    }
    while !level.is_empty() {
        let alive: HashSet<Vec<usize>> = level.iter().cloned().collect();
        let mut next = Vec::new();
        for parent in &level {
            let start = parent.last().map_or(0, |&j| j + 1);
            for j in start..q {
                let mut child = parent.clone();
                child.push(j);
                let subsets_alive = (0..parent.len()).all(|skip| {
                    let sub: Vec<usize> =
                        child.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                    alive.contains(&sub)
                });
                if !subsets_alive {
                    col.pruned += 1;
                    continue;
                }
                let a = ActiveSetTuple::from_indices(child.iter().map(|i| i + 1), layout)?;
                if col.visit(qp, &a, &opts.tol)? {
                    next.push(child);
                }
            }
        }
        level = next;
    }
    Ok(col.finish(qp.horizon, Method::Tree, opts))
}

/// Every horizon-(N+1) active set is a stage prefix followed by a horizon-N
/// active set. Candidates are all prefixes of the given seeds; a candidate is
/// skipped when it contains a candidate already found infeasible.
pub fn enumerate_extension(
    qp_next: &CondensedQP,
    seeds: &[ActiveSetTuple],
    opts: &EnumerationOptions,
) -> Result<Enumeration> {
    let w = qp_next.layout.stage_width();
    let mut col = Collector::default();
    // Smaller seeds first so their infeasible candidates prune the larger ones.
    let mut unique: Vec<&ActiveSetTuple> = seeds.iter().collect::<BTreeSet<_>>().into_iter().collect();
    unique.sort_by_key(|s| s.count());
    let mut dead: Vec<Vec<u64>> = Vec::new();
    for seed in unique {
        if seed.horizon() + 1 != qp_next.horizon || seed.layout().with_horizon(qp_next.horizon) != qp_next.layout {
            return Err(Error::HorizonMismatch { expected: qp_next.horizon - 1, got: seed.horizon() });
        }
        for mask in 0u64..(1u64 << w) {
            let prefix: Vec<bool> = (0..w).map(|i| mask >> (w - 1 - i) & 1 == 1).collect();
            let a = ActiveSetTuple::concat(&prefix, seed)?;
            let words = pack(&a);
            if dead.iter().any(|d| is_subset(d, &words)) {
                col.pruned += 1;
                continue;
            }
            if !col.visit(qp_next, &a, &opts.tol)? {
                dead.push(words);
            }
        }
    }
    Ok(col.finish(qp_next.horizon, Method::Extension, opts))
}

fn pack(a: &ActiveSetTuple) -> Vec<u64> {
    let mut words = vec![0u64; a.bits().len().div_ceil(64)];
    for i in a.active_rows() {
        words[i / 64] |= 1 << (i % 64);
    }
    words
}

fn is_subset(small: &[u64], big: &[u64]) -> bool {
    small.iter().zip(big).all(|(s, b)| s & b == *s)
}

/// Seeds for extending an enumeration: its regions and its boundary sets.
pub fn extension_seeds(e: &Enumeration) -> Vec<ActiveSetTuple> {
    let mut s: BTreeSet<ActiveSetTuple> = e.regions.iter().map(|r| r.active_set.clone()).collect();
    s.extend(e.boundary_sets.iter().cloned());
    s.into_iter().collect()
}

/// Adds the persistent offspring of every persistent-form region. Returns the
/// merged, canonically ordered list and the tuples that had to be added.
pub fn inject_persistent_offspring(
    qp: &CondensedQP,
    regions: &[CriticalRegion],
    tol: &Tolerances,
) -> Result<(Vec<CriticalRegion>, Vec<ActiveSetTuple>)> {
    let mut merged: BTreeMap<ActiveSetTuple, CriticalRegion> =
        regions.iter().map(|r| (r.active_set.clone(), r.clone())).collect();
    let mut missing = Vec::new();
    for r in regions.iter().filter(|r| r.active_set.is_persistent_form()) {
        for child in r.active_set.persistent_offspring()? {
            if merged.contains_key(&child) {
                continue;
            }
            let cr = solve_kkt_with(qp, &child, tol.tightness)?;
            if cr.flags.full_dim {
                missing.push(child.clone());
                merged.insert(child, cr);
            }
        }
    }
    missing.sort();
    missing.dedup();
    Ok((merged.into_values().collect(), missing))
}
