//! Certificates and affine laws for a fixed active set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bitset::ActiveSetTuple;
use crate::condense::CondensedQP;
use crate::error::{Error, Result};
use crate::geom::{LinearProgram, LpResult, LpStatus, Polytope};
use crate::linalg::{rank, vcat, vstack};
use crate::tol;

/// Affine optimizer `u(x) = ku x + k` and multipliers `σ_A(x) = lambda x + lambda0`.
#[derive(Clone, Debug, PartialEq)]
pub struct KktSolution {
    pub ku: DMatrix<f64>,
    pub k: DVector<f64>,
    pub lambda: DMatrix<f64>,
    pub lambda0: DVector<f64>,
    pub active_set: ActiveSetTuple,
}

impl KktSolution {
    pub fn input(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.ku * x + &self.k
    }

    pub fn multipliers(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.lambda * x + &self.lambda0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegionFlags {
    pub full_dim: bool,
    pub licq: bool,
    pub weakly_active: bool,
    pub persistent_form: bool,
    /// Set once the region has been matched at the next horizon.
    #[serde(default)]
    pub persistent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalRegion {
    pub active_set: ActiveSetTuple,
    pub law: KktSolution,
    pub region: Polytope,
    pub radius: f64,
    pub flags: RegionFlags,
}

impl CriticalRegion {
    pub fn tuple(&self) -> &ActiveSetTuple {
        &self.active_set
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.region.contains_point(x, tol)
    }
}

/// Which certificate LP to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    /// Active rows tight, inactive rows with slack at least `t`.
    Feasibility,
    /// Adds stationarity with multipliers `λ_A >= t`.
    Optimality,
    /// Adds stationarity with multipliers `λ_A >= 0`.
    WeakOptimality,
}

/// Joint rows `[G_i, -E_i]` over `(z, x)`, normalized, with the matching bound `w_i`.
fn joint_rows(qp: &CondensedQP, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let mn = qp.h.nrows();
    let n = qp.n;
    let mut a = DMatrix::zeros(rows.len(), mn + n);
    let mut b = DVector::zeros(rows.len());
    for (r, &i) in rows.iter().enumerate() {
        for j in 0..mn {
            a[(r, j)] = qp.g[(i, j)];
        }
        for j in 0..n {
            a[(r, mn + j)] = -qp.e[(i, j)];
        }
        let nrm = a.row(r).norm();
        b[r] = qp.w[i];
        if nrm > 0.0 {
            a.row_mut(r).scale_mut(1.0 / nrm);
            b[r] /= nrm;
        }
    }
    (a, b)
}

/// Maximizes the margin `t` (capped at one) over `(z, x, [λ_A], t)`.
pub fn certificate_lp(qp: &CondensedQP, a: &ActiveSetTuple, kind: Certificate) -> LpResult {
    let mn = qp.h.nrows();
    let n = qp.n;
    let act = a.active_rows();
    let ina = a.inactive_rows();
    let with_lambda = kind != Certificate::Feasibility;
    let nl = if with_lambda { act.len() } else { 0 };
    let nv = mn + n + nl + 1;
    let t_col = nv - 1;

    let (aa, ba) = joint_rows(qp, &act);
    let (ai, bi) = joint_rows(qp, &ina);

    let neq = act.len() + if with_lambda { mn } else { 0 };
    let mut a_eq = DMatrix::zeros(neq, nv);
    let mut b_eq = DVector::zeros(neq);
    a_eq.view_mut((0, 0), (act.len(), mn + n)).copy_from(&aa);
    b_eq.rows_mut(0, act.len()).copy_from(&ba);
    if with_lambda {
        // H z + F' x + G_A' λ = 0
        let r0 = act.len();
        a_eq.view_mut((r0, 0), (mn, mn)).copy_from(&qp.h);
        a_eq.view_mut((r0, mn), (mn, n)).copy_from(&qp.f.transpose());
        for (c, &i) in act.iter().enumerate() {
            for j in 0..mn {
                a_eq[(r0 + j, mn + n + c)] = qp.g[(i, j)];
            }
        }
    }

    let strict_lambda = kind == Certificate::Optimality;
    let nin = ina.len() + if strict_lambda { nl } else { 0 } + 1;
    let mut a_in = DMatrix::zeros(nin, nv);
    let mut b_in = DVector::zeros(nin);
    a_in.view_mut((0, 0), (ina.len(), mn + n)).copy_from(&ai);
    b_in.rows_mut(0, ina.len()).copy_from(&bi);
    for r in 0..ina.len() {
        a_in[(r, t_col)] = 1.0;
    }
    let mut r = ina.len();
    if strict_lambda {
        for c in 0..nl {
            a_in[(r, mn + n + c)] = -1.0;
            a_in[(r, t_col)] = 1.0;
            r += 1;
        }
    }
    a_in[(r, t_col)] = 1.0;
    b_in[r] = 1.0;

    let mut nonneg = vec![false; nv];
    for flag in nonneg.iter_mut().skip(mn + n) {
        *flag = true;
    }
    let mut c = DVector::zeros(nv);
    c[t_col] = 1.0;
    LinearProgram::new(c, a_eq, b_eq, a_in, b_in).with_nonneg(nonneg).solve()
}

pub fn feasibility_lp(qp: &CondensedQP, a: &ActiveSetTuple) -> LpResult {
    certificate_lp(qp, a, Certificate::Feasibility)
}

pub fn optimality_lp(qp: &CondensedQP, a: &ActiveSetTuple) -> LpResult {
    certificate_lp(qp, a, Certificate::Optimality)
}

pub fn weak_optimality_lp(qp: &CondensedQP, a: &ActiveSetTuple) -> LpResult {
    certificate_lp(qp, a, Certificate::WeakOptimality)
}

fn select(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

fn select_vec(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| v[rows[i]])
}

/// Full row rank of `G_A`.
pub fn licq_check(qp: &CondensedQP, a: &ActiveSetTuple) -> bool {
    let act = a.active_rows();
    if act.is_empty() {
        return true;
    }
    if act.len() > qp.h.nrows() {
        return false;
    }
    let ga = select(&qp.g, &act);
    rank(&ga, tol::RANK_REL) == act.len() && ga.row_iter().all(|r| r.norm() > 0.0)
}

/// Affine law, multipliers and region of `a`, with full-dimensionality decided
/// by the Chebyshev radius exceeding `tol::TIGHTNESS`.
pub fn solve_kkt(qp: &CondensedQP, a: &ActiveSetTuple) -> Result<CriticalRegion> {
    solve_kkt_with(qp, a, tol::TIGHTNESS)
}

pub fn solve_kkt_with(qp: &CondensedQP, a: &ActiveSetTuple, radius_tol: f64) -> Result<CriticalRegion> {
    if a.layout() != qp.layout {
        return Err(Error::HorizonMismatch { expected: qp.horizon, got: a.horizon() });
    }
    let n = qp.n;
    let mn = qp.h.nrows();
    let act = a.active_rows();
    let ina = a.inactive_rows();
    let chol = qp.h.clone().cholesky().ok_or_else(|| Error::DegenerateKkt(a.clone()))?;
    let hinv_ft = chol.solve(&qp.f.transpose());

    let ga = select(&qp.g, &act);
    let ea = select(&qp.e, &act);
    let wa = select_vec(&qp.w, &act);
    let licq = licq_check(qp, a);

    // S σ = -(w_A + M x) with S = G_A H⁻¹ G_A' and M = E_A + G_A H⁻¹ F'.
    let hinv_gat = chol.solve(&ga.transpose());
    let s = &ga * &hinv_gat;
    let mmat = &ea + &ga * &hinv_ft;
    let na = act.len();
    let (lambda, lambda0, consistency) = if na == 0 {
        (DMatrix::zeros(0, n), DVector::zeros(0), None)
    } else if licq {
        let sc = s.clone().cholesky().ok_or_else(|| Error::DegenerateKkt(a.clone()))?;
        (-sc.solve(&mmat), -sc.solve(&wa), None)
    } else {
        let svd = s.clone().svd(true, true);
        let top = svd.singular_values.max();
        let cut = (tol::RANK_REL * top).max(f64::MIN_POSITIVE);
        let pinv = svd.pseudo_inverse(cut).map_err(|_| Error::DegenerateKkt(a.clone()))?;
        let proj = DMatrix::identity(na, na) - &s * &pinv;
        (-&pinv * &mmat, -&pinv * &wa, Some((&proj * &mmat, &proj * &wa)))
    };

    let ku = -(&hinv_ft + &hinv_gat * &lambda);
    let k = -(&hinv_gat * &lambda0);

    // Primal feasibility of inactive rows: (G_I Ku - E_I) x <= w_I - G_I k.
    let gi = select(&qp.g, &ina);
    let ei = select(&qp.e, &ina);
    let wi = select_vec(&qp.w, &ina);
    let prim_a = &gi * &ku - &ei;
    let prim_b = &wi - &gi * &k;
    // Dual feasibility: -Λ x <= λ0.
    let dual_a = -&lambda;
    let dual_b = lambda0.clone();
    let mut blocks_a = vec![prim_a, dual_a];
    let mut blocks_b = vec![prim_b, dual_b];
    if let Some((nm, nw)) = consistency {
        // (I - S S⁺)(w_A + M x) = 0 as two inequalities, only where the residual map is nonzero.
        let keep: Vec<usize> = (0..na)
            .filter(|&i| nm.row(i).norm() > tol::RANK_REL || nw[i].abs() > tol::RANK_REL)
            .collect();
        let nm = select(&nm, &keep);
        let nw = select_vec(&nw, &keep);
        blocks_a.push(nm.clone());
        blocks_b.push(-&nw);
        blocks_a.push(-nm);
        blocks_b.push(nw);
    }
    let refs_a: Vec<&DMatrix<f64>> = blocks_a.iter().collect();
    let refs_b: Vec<&DVector<f64>> = blocks_b.iter().collect();
    let raw = Polytope::new(vstack(&refs_a, n), vcat(&refs_b));
    let (region, radius) = finish_region(&raw);
    let full_dim = radius > radius_tol;
    debug_assert_eq!(ku.shape(), (mn, n));

    Ok(CriticalRegion {
        active_set: a.clone(),
        law: KktSolution { ku, k, lambda, lambda0, active_set: a.clone() },
        region,
        radius,
        flags: RegionFlags {
            full_dim,
            licq,
            weakly_active: false,
            persistent_form: a.is_persistent_form(),
            persistent: false,
        },
    })
}

/// Normalizes rows, drops vanishing ones, and reduces to an irredundant system
/// when the set has an interior.
fn finish_region(raw: &Polytope) -> (Polytope, f64) {
    let norm = raw.normalized();
    let mut keep = Vec::new();
    let mut contradictory = false;
    for i in 0..norm.nrows() {
        if raw.a().row(i).norm() > tol::RANK_REL {
            keep.push(i);
        } else if raw.b()[i] < -tol::FEASIBILITY {
            contradictory = true;
        }
    }
    let p = norm.select_rows(&keep);
    if contradictory {
        return (p, f64::NEG_INFINITY);
    }
    let radius = match p.chebyshev_center() {
        Ok((_, r)) => r,
        Err(_) => f64::INFINITY,
    };
    if radius > 0.0 {
        if let Ok(reduced) = p.remove_redundant() {
            return (reduced, radius);
        }
    }
    (p, radius)
}

/// Convenience: evaluates the certificate and reports its margin, `None` if infeasible.
pub fn margin(res: &LpResult) -> Option<f64> {
    match res.status {
        LpStatus::Optimal => Some(res.optimum),
        LpStatus::Infeasible => None,
        // The margin is capped, so this only signals a malformed program.
        LpStatus::Unbounded => Some(f64::INFINITY),
    }
}
