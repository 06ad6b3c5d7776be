use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{LinearProgram, LpStatus, Polytope};
use crate::linalg::symmetrize;
use crate::problem::{ProblemSpec, StageOrder};
use crate::riccati::UnconstrainedSolution;

/// Row bookkeeping of the stacked constraints: `horizon` stage blocks of
/// `qx + qu` rows each, followed by `qt` terminal rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StageLayout {
    pub horizon: usize,
    pub qx: usize,
    pub qu: usize,
    pub qt: usize,
}

impl StageLayout {
    pub fn new(horizon: usize, qx: usize, qu: usize, qt: usize) -> Self {
        Self { horizon, qx, qu, qt }
    }

    pub fn stage_width(&self) -> usize {
        self.qx + self.qu
    }

    /// Index of the first row of stage `k`; `k == horizon` gives the terminal block.
    pub fn row_origin(&self, k: usize) -> usize {
        k * self.stage_width()
    }

    pub fn q(&self) -> usize {
        self.horizon * self.stage_width() + self.qt
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self { horizon, ..*self }
    }
}

/// `min_u ½u'Hu + x'Fu + ½x'Yx` subject to `G u <= w + E x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedQP {
    pub horizon: usize,
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w: DVector<f64>,
    pub e: DMatrix<f64>,
    pub layout: StageLayout,
    pub n: usize,
    pub m: usize,
}

/// `(Φ_k, Γ_k)` with `x(k) = Φ_k x(0) + Γ_k u` for `k = 0..=horizon`.
pub fn prediction_matrices(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    horizon: usize,
) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Vec::with_capacity(horizon + 1);
    let mut phi = DMatrix::identity(n, n);
    let mut gamma = DMatrix::zeros(n, m * horizon);
    out.push((phi.clone(), gamma.clone()));
    for k in 0..horizon {
        phi = a * &phi;
        gamma = a * &gamma;
        gamma.view_mut((0, k * m), (n, m)).copy_from(b);
        out.push((phi.clone(), gamma.clone()));
    }
    out
}

pub fn condense(
    spec: &ProblemSpec,
    unc: &UnconstrainedSolution,
    t: &Polytope,
    horizon: usize,
) -> Result<CondensedQP> {
    let n = spec.n();
    let m = spec.m();
    if horizon == 0 {
        return Err(Error::InvalidProblem("horizon must be at least 1".into()));
    }
    if t.dim() != n || unc.p.shape() != (n, n) {
        return Err(Error::DimensionMismatch("terminal data does not match the state dimension".into()));
    }
    let layout = StageLayout::new(horizon, spec.qx(), spec.qu(), t.nrows());
    let mn = m * horizon;
    let pred = prediction_matrices(&spec.a, &spec.b, horizon);

    let mut h = DMatrix::zeros(mn, mn);
    let mut f = DMatrix::zeros(n, mn);
    let mut y = DMatrix::zeros(n, n);
    for (k, (phi, gamma)) in pred.iter().enumerate() {
        let wt = if k == horizon { &unc.p } else { &spec.q };
        h += gamma.transpose() * wt * gamma;
        f += phi.transpose() * wt * gamma;
        y += phi.transpose() * wt * phi;
        if k < horizon {
            let mut blk = h.view_mut((k * m, k * m), (m, m));
            blk += &spec.r;
        }
    }

    let q = layout.q();
    let mut g = DMatrix::zeros(q, mn);
    let mut w = DVector::zeros(q);
    let mut e = DMatrix::zeros(q, n);
    let (cx, dx) = (spec.x_set.a(), spec.x_set.b());
    let (cu, du) = (spec.u_set.a(), spec.u_set.b());
    for (k, (phi, gamma)) in pred.iter().enumerate().take(horizon) {
        let origin = layout.row_origin(k);
        let (xo, uo) = match spec.stage_order {
            StageOrder::StatesFirst => (origin, origin + layout.qx),
            StageOrder::InputsFirst => (origin + layout.qu, origin),
        };
        g.view_mut((xo, 0), (layout.qx, mn)).copy_from(&(cx * gamma));
        e.view_mut((xo, 0), (layout.qx, n)).copy_from(&(-cx * phi));
        w.rows_mut(xo, layout.qx).copy_from(dx);
        g.view_mut((uo, k * m), (layout.qu, m)).copy_from(cu);
        w.rows_mut(uo, layout.qu).copy_from(du);
    }
    let (phi, gamma) = &pred[horizon];
    let to = layout.row_origin(horizon);
    g.view_mut((to, 0), (layout.qt, mn)).copy_from(&(t.a() * gamma));
    e.view_mut((to, 0), (layout.qt, n)).copy_from(&(-t.a() * phi));
    w.rows_mut(to, layout.qt).copy_from(t.b());

    Ok(CondensedQP { horizon, h: symmetrize(&h), f, y: symmetrize(&y), g, w, e, layout, n, m })
}

impl CondensedQP {
    pub fn q(&self) -> usize {
        self.layout.q()
    }

    pub fn objective(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.h * u)) + x.dot(&(&self.f * u)) + 0.5 * x.dot(&(&self.y * x))
    }

    /// `w + E x - G u`, nonnegative at feasible points.
    pub fn slack(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.w + &self.e * x - &self.g * u
    }

    /// Unconstrained minimizer `-H⁻¹F'x`.
    pub fn unconstrained_minimizer(&self, x: &DVector<f64>) -> DVector<f64> {
        let chol = self.h.clone().cholesky().expect("H is positive definite");
        -chol.solve(&(self.f.transpose() * x))
    }

    /// Feasible set of the parameter as a polytope in `(x, u)` space.
    pub fn joint_polytope(&self) -> Polytope {
        let mut a = DMatrix::zeros(self.q(), self.n + self.h.nrows());
        a.view_mut((0, 0), (self.q(), self.n)).copy_from(&(-&self.e));
        a.view_mut((0, self.n), (self.q(), self.h.nrows())).copy_from(&self.g);
        Polytope::new(a, self.w.clone())
    }

    /// Some `u` with `G u <= w + E x`, if one exists.
    pub fn feasible_input(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let mn = self.h.nrows();
        let res = LinearProgram::new(
            DVector::zeros(mn),
            DMatrix::zeros(0, mn),
            DVector::zeros(0),
            self.g.clone(),
            &self.w + &self.e * x,
        )
        .solve();
        (res.status == LpStatus::Optimal).then_some(res.point)
    }

    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        self.feasible_input(x).is_some()
    }

    /// Predicted states `x(0..=N)` under the stacked input `u`.
    pub fn predict(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, x: &DVector<f64>, u: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut out = vec![x.clone()];
        for k in 0..self.horizon {
            let next = a * out.last().unwrap() + b * u.rows(k * self.m, self.m);
            out.push(next);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::solve_dare_default;
    use crate::terminal::build_terminal_set;
    use approx::assert_abs_diff_eq;

    fn setup(n: usize) -> (ProblemSpec, UnconstrainedSolution, Polytope, CondensedQP) {
        let spec = ProblemSpec::example1();
        let unc = solve_dare_default(&spec).unwrap();
        let t = build_terminal_set(&spec, &unc, 200).unwrap().t;
        let qp = condense(&spec, &unc, &t, n).unwrap();
        (spec, unc, t, qp)
    }

    #[test]
    fn horizon_one_hessian() {
        let (spec, unc, _, qp) = setup(1);
        let expect = &spec.r + spec.b.transpose() * &unc.p * &spec.b;
        assert_eq!(qp.h.shape(), (1, 1));
        assert_abs_diff_eq!(qp.h[(0, 0)], expect[(0, 0)], epsilon = 1e-12);
        assert_eq!(qp.q(), 10);
    }

    #[test]
    fn horizon_two_layout() {
        let (_, _, _, qp) = setup(2);
        assert_eq!(qp.q(), 16);
        assert_eq!(qp.layout.row_origin(1), 6);
        assert_eq!(qp.layout.row_origin(2), 12);
    }

    #[test]
    fn stage_zero_state_rows_are_parameter_only() {
        let (_, _, _, qp) = setup(2);
        for i in 2..6 {
            assert!(qp.g.row(i).iter().all(|&v| v == 0.0));
            assert!(qp.e.row(i).iter().any(|&v| v != 0.0));
        }
        for i in 0..2 {
            assert!(qp.e.row(i).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn condensed_cost_matches_rollout() {
        let (spec, unc, _, qp) = setup(3);
        let x = DVector::from_row_slice(&[1.5, -2.0]);
        let u = DVector::from_row_slice(&[0.3, -0.7, 0.2]);
        let xs = qp.predict(&spec.a, &spec.b, &x, &u);
        let mut direct = unc.terminal_cost(&xs[3]);
        for (k, xk) in xs.iter().take(3).enumerate() {
            direct += spec.stage_cost(xk, &u.rows(k, 1).into_owned());
        }
        assert_abs_diff_eq!(qp.objective(&x, &u), direct, epsilon = 1e-12);
        assert_eq!(qp.objective(&DVector::zeros(2), &DVector::zeros(3)), 0.0);
    }

    #[test]
    fn hessian_is_positive_definite() {
        for n in 1..5 {
            let (_, _, _, qp) = setup(n);
            assert!(qp.h.clone().cholesky().is_some());
        }
    }

    #[test]
    fn unconstrained_first_move_is_lqr_gain() {
        let (_, unc, _, qp) = setup(3);
        for x in [[0.5, -0.3], [1.0, 2.0], [-0.8, 0.1]] {
            let x = DVector::from_row_slice(&x);
            let u = qp.unconstrained_minimizer(&x);
            assert_abs_diff_eq!(u[0], (&unc.k * &x)[0], epsilon = 1e-10);
        }
    }

    #[test]
    fn states_first_order_moves_input_rows() {
        let (spec, unc, t, qp) = setup(1);
        let other = condense(&spec.clone().with_stage_order(StageOrder::StatesFirst), &unc, &t, 1).unwrap();
        assert_eq!(other.g.row(4), qp.g.row(0));
        assert_eq!(other.g.row(5), qp.g.row(1));
        assert_eq!(other.e.row(0), qp.e.row(2));
    }
}
