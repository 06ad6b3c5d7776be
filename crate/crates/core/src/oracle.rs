//! Brute-force references: a pointwise QP solver, exhaustive active-set
//! classification and seeded sampling of the feasible parameter set.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bitset::ActiveSetTuple;
use crate::condense::CondensedQP;
use crate::enumerate::{classify, Verdict};
use crate::error::{Error, Result};
use crate::geom::Polytope;
use crate::linalg::vec_inf_norm;
use crate::tol::{self, Tolerances};

pub const MAX_EXHAUSTIVE_Q: usize = 12;
pub const MAX_REJECTIONS: usize = 1_000_000;
const MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub minimizer: DVector<f64>,
    /// Rows with `|G_i u - w_i - E_i x| <= tol::ACTIVITY`.
    pub active: ActiveSetTuple,
    pub objective: f64,
    /// Multipliers of all rows, zero off the final working set.
    pub multipliers: DVector<f64>,
    pub iterations: usize,
}

/// Primal active-set method for the condensed QP at a fixed parameter.
///
/// Starts from an LP-feasible input with an empty working set, takes
/// equality-constrained Newton steps with a ratio test, and drops the most
/// negative multiplier at stationary points. Ties go to the lowest row index.
pub fn solve_qp_at(qp: &CondensedQP, x: &DVector<f64>) -> Result<OracleResult> {
    let mut u = qp.feasible_input(x).ok_or(Error::InfeasiblePoint)?;
    let chol = qp.h.clone().cholesky().ok_or_else(|| Error::OracleFailure("H is not positive definite".into()))?;
    let rhs = &qp.w + &qp.e * x;
    let fx = qp.f.transpose() * x;
    let q = qp.q();
    let mut work: Vec<usize> = Vec::new();
    for it in 0..MAX_ITER {
        let g = &qp.h * &u + &fx;
        let (p, mu) = eqp_step(qp, &chol, &work, &g)?;
        let scale = 1.0 + vec_inf_norm(&u);
        if vec_inf_norm(&p) <= 1e-12 * scale {
            let mut drop: Option<(usize, f64)> = None;
            for (k, &m) in mu.iter().enumerate() {
                if m < -1e-10 && drop.is_none_or(|(_, best)| m < best) {
                    drop = Some((k, m));
                }
            }
            match drop {
                Some((k, _)) => {
                    work.remove(k);
                    continue;
                }
                None => {
                    let mut mult = DVector::zeros(q);
                    for (k, &i) in work.iter().enumerate() {
                        mult[i] = mu[k];
                    }
                    return finish(qp, x, u, mult, it);
                }
            }
        }
        let gp = &qp.g * &p;
        let mut alpha = 1.0;
        let mut block = None;
        for i in 0..q {
            if work.contains(&i) || gp[i] <= 1e-14 * scale {
                continue;
            }
            let slack = (rhs[i] - (qp.g.row(i) * &u)[0]).max(0.0);
            let ratio = slack / gp[i];
            if ratio < alpha {
                alpha = ratio;
                block = Some(i);
            }
        }
        u += &p * alpha;
        if let Some(i) = block {
            work.push(i);
        }
    }
    Err(Error::OracleFailure(format!("no convergence within {MAX_ITER} iterations")))
}

/// Minimizes `½p'Hp + g'p` subject to `G_W p = 0`; returns the step and multipliers.
fn eqp_step(
    qp: &CondensedQP,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    work: &[usize],
    g: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let hinv_g = chol.solve(g);
    if work.is_empty() {
        return Ok((-hinv_g, DVector::zeros(0)));
    }
    let gw = DMatrix::from_fn(work.len(), qp.h.nrows(), |i, j| qp.g[(work[i], j)]);
    let hinv_gwt = chol.solve(&gw.transpose());
    let k = &gw * &hinv_gwt;
    let kc = k.cholesky().ok_or_else(|| Error::OracleFailure("dependent working set".into()))?;
    let mu = -kc.solve(&(&gw * &hinv_g));
    let p = -(hinv_g + hinv_gwt * &mu);
    Ok((p, mu))
}

fn finish(qp: &CondensedQP, x: &DVector<f64>, u: DVector<f64>, mult: DVector<f64>, iterations: usize) -> Result<OracleResult> {
    let slack = qp.slack(x, &u);
    let rows = (0..qp.q()).filter(|&i| slack[i].abs() <= tol::ACTIVITY).map(|i| i + 1);
    let active = ActiveSetTuple::from_indices(rows, qp.layout)?;
    let stat = &qp.h * &u + qp.f.transpose() * x + qp.g.transpose() * &mult;
    if vec_inf_norm(&stat) > 1e-6 || slack.min() < -1e-6 {
        return Err(Error::OracleFailure("KKT residual too large".into()));
    }
    let objective = qp.objective(x, &u);
    Ok(OracleResult { minimizer: u, active, objective, multipliers: mult, iterations })
}

/// Classifies every subset of rows; returns the tuples with full-dimensional regions.
pub fn exhaustive_active_sets(qp: &CondensedQP, tol: &Tolerances) -> Result<BTreeSet<ActiveSetTuple>> {
    exhaustive_active_sets_upto(qp, tol, MAX_EXHAUSTIVE_Q)
}

pub fn exhaustive_active_sets_upto(
    qp: &CondensedQP,
    tol: &Tolerances,
    max_q: usize,
) -> Result<BTreeSet<ActiveSetTuple>> {
    let q = qp.q();
    if q > max_q || q >= 64 {
        return Err(Error::TooLarge(q));
    }
    let mut out = BTreeSet::new();
    for mask in 0u64..(1u64 << q) {
        let a = ActiveSetTuple::from_indices((0..q).filter(|i| mask >> i & 1 == 1).map(|i| i + 1), qp.layout)?;
        if let Verdict::Region(_) = classify(qp, &a, tol)? {
            out.insert(a);
        }
    }
    Ok(out)
}

/// The state constraints on `x(0)`: rows of the first stage that involve no input.
pub fn parameter_box(qp: &CondensedQP) -> Polytope {
    let w = qp.layout.stage_width();
    let rows: Vec<usize> = (0..w).filter(|&i| qp.g.row(i).iter().all(|v| *v == 0.0)).collect();
    let a = DMatrix::from_fn(rows.len(), qp.n, |i, j| -qp.e[(rows[i], j)]);
    let b = DVector::from_fn(rows.len(), |i, _| qp.w[rows[i]]);
    Polytope::new(a, b)
}

/// Seeded rejection sampling of parameters with a feasible input, proposed
/// uniformly from the bounding box of the state constraint set.
pub fn sample_feasible(qp: &CondensedQP, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    use rand::Rng;
    if count == 0 {
        return Ok(Vec::new());
    }
    let (lo, hi) = parameter_box(qp).bounding_box()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    while out.len() < count {
        let x = DVector::from_fn(qp.n, |i, _| rng.random_range(lo[i]..=hi[i]));
        if qp.is_feasible(&x) {
            out.push(x);
        } else {
            rejected += 1;
            if rejected >= MAX_REJECTIONS {
                return Err(Error::SamplingExhausted(rejected));
            }
        }
    }
    Ok(out)
}
