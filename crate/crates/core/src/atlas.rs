//! The explicit solution for one horizon and the checks that relate atlases
//! of consecutive horizons.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::ActiveSetTuple;
use crate::condense::CondensedQP;
use crate::enumerate::{enumerate_extension, enumerate_tree, Enumeration, EnumerationOptions, EnumerationReport};
use crate::error::{Error, Result};
use crate::geom::{LinearProgram, LpStatus, Polytope, PolytopeJson};
use crate::kkt::{CriticalRegion, KktSolution, RegionFlags};
use crate::linalg::{matrix_from_rows, matrix_rows, vec_inf_norm};
use crate::problem::{ProblemJson, ProblemSpec};
use crate::setup::Setup;
use crate::sim::open_loop;
use crate::tol;

#[derive(Clone, Debug)]
pub struct Atlas {
    pub horizon: usize,
    pub setup: Setup,
    pub qp: CondensedQP,
    /// Canonically ordered by tuple.
    pub regions: Vec<CriticalRegion>,
    /// Tuples that are optimal only on lower-dimensional sets.
    pub boundary_sets: Vec<ActiveSetTuple>,
    pub fingerprint: String,
    pub report: Option<EnumerationReport>,
}

impl Atlas {
    /// Tree enumeration at `horizon`.
    pub fn solve(setup: &Setup, horizon: usize, opts: &EnumerationOptions) -> Result<Self> {
        let qp = setup.condense(horizon)?;
        let e = enumerate_tree(&qp, opts)?;
        Ok(Self::from_enumeration(setup.clone(), qp, e))
    }

    /// Extension of this atlas to `horizon + 1`.
    pub fn extend(&self, opts: &EnumerationOptions) -> Result<Self> {
        let qp = self.setup.condense(self.horizon + 1)?;
        let e = enumerate_extension(&qp, &self.all_tuples(), opts)?;
        Ok(Self::from_enumeration(self.setup.clone(), qp, e))
    }

    /// Tree enumeration at horizon one followed by extensions up to `horizon`.
    pub fn solve_by_extension(setup: &Setup, horizon: usize, opts: &EnumerationOptions) -> Result<Self> {
        let mut a = Self::solve(setup, 1, opts)?;
        while a.horizon < horizon {
            a = a.extend(opts)?;
        }
        Ok(a)
    }

    fn from_enumeration(setup: Setup, qp: CondensedQP, e: Enumeration) -> Self {
        let fingerprint = setup.fingerprint();
        Self {
            horizon: qp.horizon,
            setup,
            qp,
            regions: e.regions,
            boundary_sets: e.boundary_sets,
            fingerprint,
            report: Some(e.report),
        }
    }

    pub fn tuples(&self) -> Vec<&ActiveSetTuple> {
        self.regions.iter().map(|r| &r.active_set).collect()
    }

    pub fn tuple_strings(&self) -> BTreeSet<String> {
        self.regions.iter().map(|r| r.active_set.to_string()).collect()
    }

    /// Region tuples and boundary tuples together, in canonical order.
    pub fn all_tuples(&self) -> Vec<ActiveSetTuple> {
        let mut s: BTreeSet<ActiveSetTuple> = self.regions.iter().map(|r| r.active_set.clone()).collect();
        s.extend(self.boundary_sets.iter().cloned());
        s.into_iter().collect()
    }

    pub fn has_tuple(&self, a: &ActiveSetTuple) -> bool {
        self.region(a).is_some() || self.boundary_sets.binary_search(a).is_ok()
    }

    pub fn region(&self, a: &ActiveSetTuple) -> Option<&CriticalRegion> {
        self.regions
            .binary_search_by(|r| r.active_set.cmp(a))
            .ok()
            .map(|i| &self.regions[i])
    }

    pub fn parse_tuple(&self, text: &str) -> Result<ActiveSetTuple> {
        let t = ActiveSetTuple::parse(text, self.qp.layout)?;
        if t.horizon() != self.horizon {
            return Err(Error::HorizonMismatch { expected: self.horizon, got: t.horizon() });
        }
        Ok(t)
    }

    /// First region in canonical order containing `x`; full-dimensional regions take precedence.
    pub fn locate(&self, x: &DVector<f64>) -> Option<&CriticalRegion> {
        let hit = |r: &&CriticalRegion| r.region.contains_point(x, tol::FEASIBILITY);
        self.regions
            .iter()
            .filter(|r| r.flags.full_dim)
            .find(hit)
            .or_else(|| self.regions.iter().filter(|r| !r.flags.full_dim).find(hit))
    }

    /// Whether the condensed constraints admit an input at `x`.
    pub fn in_domain(&self, x: &DVector<f64>) -> bool {
        self.qp.is_feasible(x)
    }

    /// Stacked optimal input and its first move.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let r = self.locate(x).ok_or_else(|| Error::OutsideDomain(x.iter().copied().collect()))?;
        let u = r.law.input(x);
        let first = u.rows(0, self.qp.m).into_owned();
        Ok((u, first))
    }

    fn check_pair(&self, next: &Atlas) -> Result<()> {
        if self.fingerprint != next.fingerprint {
            return Err(Error::FingerprintMismatch);
        }
        if next.horizon != self.horizon + 1 {
            return Err(Error::HorizonMismatch { expected: self.horizon + 1, got: next.horizon });
        }
        Ok(())
    }

    /// Compares every persistent-form region with its zero-padded counterpart
    /// in `next`, and every zero-padded tuple of `next` with its truncation here.
    pub fn check_persistence(&self, next: &Atlas, samples: usize, seed: u64) -> Result<PersistenceReport> {
        self.check_pair(next)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = PersistenceReport { horizon: self.horizon, ..Default::default() };
        let mn = self.qp.h.nrows();
        for r in self.regions.iter().filter(|r| r.flags.full_dim) {
            let t = &r.active_set;
            if !t.is_persistent_form() {
                if let Some(other) = self.matching_region(r, next) {
                    report.persistent_without_form.push(format!("{t} -> {other}"));
                }
                continue;
            }
            let padded = t.pad_with_zero_stages(1)?;
            let Some(nr) = next.region(&padded) else {
                report.violation(t, format!("padded tuple {padded} missing at the next horizon"));
                continue;
            };
            if !(r.region.contains(&nr.region) && nr.region.contains(&r.region)) {
                report.violation(t, format!("region differs from {padded}"));
                continue;
            }
            let pts = r.region.sample_interior(samples, tol::INTERIOR_GUARD, &mut rng, 1_000_000)?;
            let mut dev: f64 = 0.0;
            for x in &pts {
                let a = r.law.input(x);
                let b = nr.law.input(x);
                dev = dev.max(vec_inf_norm(&(a - b.rows(0, mn))));
            }
            report.max_law_deviation = report.max_law_deviation.max(dev);
            report.samples += pts.len();
            if dev > 1e-7 {
                report.violation(t, format!("laws differ by {dev:e}"));
                continue;
            }
            report.persistent.push(t.to_string());
        }
        for nr in &next.regions {
            if let Some(stripped) = nr.active_set.strip_zero_stage() {
                report.converse_checked += 1;
                if self.region(&stripped).is_none() {
                    report.violation(&nr.active_set, format!("truncation {stripped} missing at the shorter horizon"));
                }
            }
        }
        Ok(report)
    }

    /// A region of `next` with the same polytope and, at the Chebyshev center, the same law.
    fn matching_region(&self, r: &CriticalRegion, next: &Atlas) -> Option<String> {
        let (c, _) = r.region.chebyshev_center().ok()?;
        let mn = self.qp.h.nrows();
        next.regions.iter().filter(|nr| nr.region.contains_point(&c, tol::FEASIBILITY)).find_map(|nr| {
            let same_law = vec_inf_norm(&(r.law.input(&c) - nr.law.input(&c).rows(0, mn))) <= 1e-7;
            (same_law && nr.region.poly_equal(&r.region)).then(|| nr.active_set.to_string())
        })
    }

    /// Runs [`Atlas::check_persistence`] and marks the confirmed regions.
    pub fn mark_persistence(&mut self, next: &Atlas, samples: usize, seed: u64) -> Result<PersistenceReport> {
        let report = self.check_persistence(next, samples, seed)?;
        if let Some(v) = report.violations.first() {
            return Err(Error::StructureViolation { tuple: v.tuple.clone(), reason: v.reason.clone() });
        }
        for r in &mut self.regions {
            r.flags.persistent = report.persistent.contains(&r.active_set.to_string());
        }
        Ok(report)
    }

    /// Tuples of this atlas whose leading stage, once dropped, is not a tuple of `prev`.
    pub fn prefix_violations(&self, prev: &Atlas) -> Result<Vec<String>> {
        prev.check_pair(self)?;
        let mut out = Vec::new();
        for t in self.all_tuples() {
            let tail = t.drop_stages(1)?;
            if !prev.has_tuple(&tail) {
                out.push(format!("{t}: tail {tail} missing"));
            }
        }
        Ok(out)
    }

    /// Persistent-form regions, with generators and the offspring-closure check.
    pub fn build_pn(&self) -> Result<PersistentRegionSet> {
        let members: Vec<ActiveSetTuple> = self
            .regions
            .iter()
            .filter(|r| r.flags.full_dim && r.active_set.is_persistent_form())
            .map(|r| r.active_set.clone())
            .collect();
        let set: BTreeSet<&ActiveSetTuple> = members.iter().collect();
        let mut offspring: BTreeSet<ActiveSetTuple> = BTreeSet::new();
        let mut missing = BTreeSet::new();
        for m in &members {
            for child in m.persistent_offspring()? {
                if !set.contains(&child) {
                    missing.insert(child.clone());
                }
                offspring.insert(child);
            }
        }
        let generators = members.iter().filter(|m| !offspring.contains(m)).cloned().collect();
        let outmost = members.iter().filter(|m| m.is_outmost()).cloned().collect();
        Ok(PersistentRegionSet {
            horizon: self.horizon,
            members,
            generators,
            outmost,
            missing_offspring: missing.into_iter().collect(),
        })
    }

    /// Simulates the open-loop optimal trajectory from interior samples of every
    /// member region and checks that it stays in `P_N ∪ T`; then checks that
    /// convex combinations of the samples lie in the feasible set.
    pub fn check_pn_invariance(
        &self,
        pn: &PersistentRegionSet,
        samples: usize,
        hull_pairs: usize,
        seed: u64,
    ) -> Result<PnInvarianceReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = PnInvarianceReport::default();
        let mut pool = Vec::new();
        for t in &pn.members {
            let r = self.region(t).expect("members come from this atlas");
            let pts = r.region.sample_interior(samples, tol::INTERIOR_GUARD, &mut rng, 1_000_000)?;
            for x in pts {
                let traj = open_loop(self, &x, 3 * self.horizon)?;
                report.trajectories += 1;
                for (k, s) in traj.states.iter().enumerate() {
                    report.states_checked += 1;
                    if !pn.contains(self, s, tol::FEASIBILITY) {
                        report.violations.push(format!("{t}: step {k} leaves P_N at {:?}", s.as_slice()));
                    }
                }
                pool.push(x);
            }
        }
        if pool.len() >= 2 {
            for _ in 0..hull_pairs {
                let i = rng.random_range(0..pool.len());
                let j = rng.random_range(0..pool.len());
                let th: f64 = rng.random_range(0.0..=1.0);
                let x = &pool[i] * th + &pool[j] * (1.0 - th);
                report.hull_points += 1;
                if self.locate(&x).is_none() {
                    report.hull_violations.push(format!("{:?}", x.as_slice()));
                }
            }
        }
        Ok(report)
    }

    /// True when the next horizon adds nothing: every tuple of `next` is an
    /// inactive stage followed by a tuple of this atlas, and every region here
    /// has persistent form with a zero-padded counterpart.
    pub fn converged(&self, next: &Atlas) -> Result<bool> {
        self.check_pair(next)?;
        for t in next.tuples() {
            if t.stage(0).iter().any(|&b| b) || self.region(&t.drop_stages(1)?).is_none() {
                return Ok(false);
            }
        }
        for r in &self.regions {
            if !r.active_set.is_persistent_form() || next.region(&r.active_set.pad_with_zero_stages(1)?).is_none() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Points on facets shared by two regions, with the law mismatch there.
    ///
    /// Planar atlases are sampled along facet segments; otherwise the
    /// Chebyshev center of each facet is used.
    pub fn facet_continuity(&self, count: usize, seed: u64) -> Result<Vec<FacetSample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shared = Vec::new();
        for (i, r) in self.regions.iter().enumerate().filter(|(_, r)| r.flags.full_dim) {
            let p = r.region.normalized();
            for f in 0..p.nrows() {
                let Some(point) = facet_center(&p, f) else { continue };
                let normal = p.a().row(f).transpose();
                let probe = &point + &normal * 1e-6;
                let neighbour = self
                    .regions
                    .iter()
                    .enumerate()
                    .find(|(j, o)| *j != i && o.flags.full_dim && o.region.contains_point(&probe, tol::FEASIBILITY));
                if let Some((j, _)) = neighbour {
                    if i < j {
                        shared.push((i, j, p.clone(), f, point));
                    }
                }
            }
        }
        if shared.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(count);
        for s in 0..count {
            let (i, j, p, f, center) = &shared[s % shared.len()];
            let x = if s < shared.len() || p.dim() != 2 {
                center.clone()
            } else {
                point_on_segment(p, *f, &mut rng).unwrap_or_else(|| center.clone())
            };
            let (a, b) = (&self.regions[*i], &self.regions[*j]);
            let dev = vec_inf_norm(&(a.law.input(&x) - b.law.input(&x)));
            out.push(FacetSample { left: a.active_set.to_string(), right: b.active_set.to_string(), point: x, deviation: dev });
        }
        Ok(out)
    }

    pub fn to_json(&self) -> AtlasJson {
        AtlasJson {
            horizon: self.horizon,
            fingerprint: self.fingerprint.clone(),
            problem: self.setup.spec.to_json(),
            terminal: TerminalJson {
                set: self.setup.terminal.t.to_json(),
                determined_at: self.setup.terminal.determined_at,
            },
            regions: self.regions.iter().map(region_to_json).collect(),
            boundary_sets: self.boundary_sets.iter().map(|t| t.to_string()).collect(),
            report: self.report.clone(),
        }
    }

    pub fn from_json(j: &AtlasJson) -> Result<Self> {
        let setup = Setup::new(ProblemSpec::from_json(&j.problem)?)?;
        if setup.fingerprint() != j.fingerprint {
            return Err(Error::FingerprintMismatch);
        }
        let qp = setup.condense(j.horizon)?;
        let layout = qp.layout;
        let parse = |s: &str| -> Result<ActiveSetTuple> {
            let t = ActiveSetTuple::parse(s, layout)?;
            if t.horizon() != j.horizon {
                return Err(Error::HorizonMismatch { expected: j.horizon, got: t.horizon() });
            }
            Ok(t)
        };
        let n = qp.n;
        let mut regions = Vec::with_capacity(j.regions.len());
        for r in &j.regions {
            let t = parse(&r.tuple)?;
            let law = KktSolution {
                ku: matrix_from_rows(&r.law.k_mat, n)?,
                k: DVector::from_vec(r.law.k_vec.clone()),
                lambda: matrix_from_rows(&r.multipliers.k_mat, n)?,
                lambda0: DVector::from_vec(r.multipliers.k_vec.clone()),
                active_set: t.clone(),
            };
            if law.ku.shape() != (qp.h.nrows(), n) || law.k.len() != qp.h.nrows() {
                return Err(Error::DimensionMismatch(format!("law of {} has the wrong shape", r.tuple)));
            }
            regions.push(CriticalRegion {
                active_set: t,
                law,
                region: Polytope::from_json(&r.region, n)?,
                radius: r.radius.unwrap_or(f64::NEG_INFINITY),
                flags: r.flags,
            });
        }
        regions.sort_by(|a, b| a.active_set.cmp(&b.active_set));
        let mut boundary_sets = j.boundary_sets.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        boundary_sets.sort();
        Ok(Self {
            horizon: j.horizon,
            fingerprint: j.fingerprint.clone(),
            setup,
            qp,
            regions,
            boundary_sets,
            report: j.report.clone(),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("atlas serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let j: AtlasJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(&j)
    }
}

fn region_to_json(r: &CriticalRegion) -> RegionJson {
    RegionJson {
        tuple: r.active_set.to_string(),
        law: AffineJson { k_mat: matrix_rows(&r.law.ku), k_vec: r.law.k.iter().copied().collect() },
        multipliers: AffineJson {
            k_mat: matrix_rows(&r.law.lambda),
            k_vec: r.law.lambda0.iter().copied().collect(),
        },
        region: r.region.to_json(),
        radius: r.radius.is_finite().then_some(r.radius),
        flags: r.flags,
    }
}

/// Chebyshev center of facet `f` of a normalized polytope, if the facet has a relative interior.
fn facet_center(p: &Polytope, f: usize) -> Option<DVector<f64>> {
    let n = p.dim();
    let rows: Vec<usize> = (0..p.nrows()).filter(|&i| i != f).collect();
    let mut a_in = DMatrix::zeros(rows.len(), n + 1);
    let mut b_in = DVector::zeros(rows.len());
    for (k, &i) in rows.iter().enumerate() {
        for c in 0..n {
            a_in[(k, c)] = p.a()[(i, c)];
        }
        a_in[(k, n)] = 1.0;
        b_in[k] = p.b()[i];
    }
    let mut a_eq = DMatrix::zeros(1, n + 1);
    for c in 0..n {
        a_eq[(0, c)] = p.a()[(f, c)];
    }
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let res = LinearProgram::new(c, a_eq, DVector::from_element(1, p.b()[f]), a_in, b_in).solve();
    (res.status == LpStatus::Optimal && res.optimum > tol::TIGHTNESS).then(|| res.point.rows(0, n).into_owned())
}

/// Uniform point on the middle 90% of edge `f` of a planar polygon.
fn point_on_segment<R: Rng>(p: &Polytope, f: usize, rng: &mut R) -> Option<DVector<f64>> {
    let a = p.a().row(f);
    let dir = DVector::from_row_slice(&[-a[1], a[0]]);
    let on = facet_center(p, f)?;
    // Extent of the edge along its direction.
    let edge = Polytope::new(p.a().clone(), p.b().clone());
    let mut a_eq = DMatrix::zeros(1, 2);
    a_eq.set_row(0, &a);
    let reach = |d: &DVector<f64>| {
        let res = LinearProgram::new(d.clone(), a_eq.clone(), DVector::from_element(1, p.b()[f]), edge.a().clone(), edge.b().clone())
            .solve();
        (res.status == LpStatus::Optimal).then_some(res.optimum)
    };
    let hi = reach(&dir)?;
    let lo = -reach(&(-&dir))?;
    let s0 = dir.dot(&on);
    let s: f64 = rng.random_range(lo + 0.05 * (hi - lo)..=hi - 0.05 * (hi - lo));
    Some(on + dir * (s - s0))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub tuple: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PersistenceReport {
    pub horizon: usize,
    /// Persistent-form tuples confirmed at the next horizon.
    pub persistent: Vec<String>,
    pub samples: usize,
    pub max_law_deviation: f64,
    pub converse_checked: usize,
    /// Regions without persistent form that nevertheless reappear unchanged.
    pub persistent_without_form: Vec<String>,
    pub violations: Vec<Violation>,
}

impl PersistenceReport {
    fn violation(&mut self, t: &ActiveSetTuple, reason: String) {
        self.violations.push(Violation { tuple: t.to_string(), reason });
    }
}

/// Union of the persistent-form regions of an atlas, plus the terminal set.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PersistentRegionSet {
    pub horizon: usize,
    pub members: Vec<ActiveSetTuple>,
    /// Members that are not offspring of another member.
    pub generators: Vec<ActiveSetTuple>,
    /// Members whose last stage has an active row.
    pub outmost: Vec<ActiveSetTuple>,
    /// Offspring of members that are not members themselves.
    pub missing_offspring: Vec<ActiveSetTuple>,
}

impl PersistentRegionSet {
    pub fn is_closed(&self) -> bool {
        self.missing_offspring.is_empty()
    }

    pub fn contains(&self, atlas: &Atlas, x: &DVector<f64>, tol: f64) -> bool {
        atlas.setup.in_terminal_set(x, tol)
            || self.members.iter().any(|t| atlas.region(t).is_some_and(|r| r.region.contains_point(x, tol)))
    }

    /// Members regenerated from the generators by repeated offspring expansion.
    pub fn reconstruct(&self) -> Result<BTreeSet<ActiveSetTuple>> {
        let mut out: BTreeSet<ActiveSetTuple> = self.generators.iter().cloned().collect();
        let mut work: Vec<ActiveSetTuple> = self.generators.clone();
        while let Some(t) = work.pop() {
            for child in t.persistent_offspring()? {
                if out.insert(child.clone()) {
                    work.push(child);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PnInvarianceReport {
    pub trajectories: usize,
    pub states_checked: usize,
    pub violations: Vec<String>,
    pub hull_points: usize,
    pub hull_violations: Vec<String>,
}

impl PnInvarianceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.hull_violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FacetSample {
    pub left: String,
    pub right: String,
    pub point: DVector<f64>,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineJson {
    #[serde(rename = "K")]
    pub k_mat: Vec<Vec<f64>>,
    #[serde(rename = "k")]
    pub k_vec: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionJson {
    pub tuple: String,
    pub law: AffineJson,
    pub multipliers: AffineJson,
    pub region: PolytopeJson,
    pub radius: Option<f64>,
    pub flags: RegionFlags,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TerminalJson {
    #[serde(flatten)]
    pub set: PolytopeJson,
    pub determined_at: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AtlasJson {
    pub horizon: usize,
    pub fingerprint: String,
    pub problem: ProblemJson,
    pub terminal: TerminalJson,
    pub regions: Vec<RegionJson>,
    #[serde(default)]
    pub boundary_sets: Vec<String>,
    #[serde(default)]
    pub report: Option<EnumerationReport>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atlases(max_n: usize) -> Vec<Atlas> {
        let setup = Setup::example1();
        let opts = EnumerationOptions::default();
        let mut v = vec![Atlas::solve(&setup, 1, &opts).unwrap()];
        while v.len() < max_n {
            let next = v.last().unwrap().extend(&opts).unwrap();
            v.push(next);
        }
        v
    }

    #[test]
    fn origin_is_in_the_unconstrained_region() {
        let a = &atlases(2)[1];
        let r = a.locate(&DVector::zeros(2)).unwrap();
        assert_eq!(r.active_set.count(), 0);
        let (u, first) = a.evaluate(&DVector::zeros(2)).unwrap();
        assert!(u.iter().all(|v| *v == 0.0) && first.len() == 1);
    }

    #[test]
    fn far_points_are_not_located() {
        let a = &atlases(1)[0];
        let x = DVector::from_row_slice(&[50.0, 0.0]);
        assert!(a.locate(&x).is_none());
        assert!(!a.in_domain(&x));
        assert!(matches!(a.evaluate(&x), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn persistence_between_first_two_horizons() {
        let mut v = atlases(2);
        let next = v[1].clone();
        let rep = v[0].mark_persistence(&next, 20, 1).unwrap();
        assert!(rep.violations.is_empty());
        let want: BTreeSet<String> = ["000000.0000", "010000.0000", "100000.0000"].iter().map(|s| s.to_string()).collect();
        assert_eq!(rep.persistent.iter().cloned().collect::<BTreeSet<_>>(), want);
        assert!(rep.max_law_deviation <= 1e-7);
        assert!(rep.persistent_without_form.is_empty());
        let red = v[0].parse_tuple("000000.0001").unwrap();
        assert!(!v[0].region(&red).unwrap().flags.persistent);
    }

    #[test]
    fn pn_at_horizon_two() {
        let v = atlases(2);
        let pn = v[1].build_pn().unwrap();
        assert_eq!(pn.members.len(), 9);
        assert!(pn.is_closed());
        assert_eq!(pn.reconstruct().unwrap(), pn.members.iter().cloned().collect());
        let rep = v[1].check_pn_invariance(&pn, 10, 50, 3).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(pn.contains(&v[1], &DVector::zeros(2), 0.0));
    }

    #[test]
    fn example_has_not_converged() {
        let v = atlases(2);
        assert!(!v[0].converged(&v[1]).unwrap());
    }

    #[test]
    fn prefix_property_and_fingerprints() {
        let v = atlases(3);
        assert!(v[1].prefix_violations(&v[0]).unwrap().is_empty());
        assert!(v[2].prefix_violations(&v[1]).unwrap().is_empty());
        assert!(matches!(v[2].prefix_violations(&v[0]), Err(Error::HorizonMismatch { .. })));
        let mut other = v[1].clone();
        other.fingerprint = "0".repeat(64);
        assert!(matches!(v[0].converged(&other), Err(Error::FingerprintMismatch)));
    }

    #[test]
    fn json_round_trip() {
        let a = &atlases(2)[1];
        let back = Atlas::from_json(&serde_json::from_str(&a.to_json_string()).unwrap()).unwrap();
        assert_eq!(back.tuple_strings(), a.tuple_strings());
        assert_eq!(back.boundary_sets, a.boundary_sets);
        assert_eq!(back.to_json_string(), a.to_json_string());
    }

    #[test]
    fn tampered_problem_is_rejected() {
        let a = &atlases(1)[0];
        let mut j = a.to_json();
        j.problem.r[0][0] = 0.5;
        assert!(matches!(Atlas::from_json(&j), Err(Error::FingerprintMismatch)));
    }

    #[test]
    fn laws_agree_on_shared_facets() {
        let a = &atlases(2)[1];
        let s = a.facet_continuity(50, 9).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.iter().all(|f| f.deviation <= 1e-6), "{s:?}");
    }
}
