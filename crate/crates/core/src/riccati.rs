use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, symmetrize};
use crate::problem::ProblemSpec;

pub const DEFAULT_DARE_TOL: f64 = 1e-12;
pub const DEFAULT_DARE_MAX_ITER: usize = 100_000;

/// Infinite-horizon LQR data: cost matrix, gain and closed loop `A + B K`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnconstrainedSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub acl: DMatrix<f64>,
}

impl UnconstrainedSolution {
    /// `½ x'Px`.
    pub fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x))
    }

    pub fn spectral_radius(&self) -> f64 {
        self.acl.complex_eigenvalues().iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// One step of the Riccati map, also returning the gain at `p`.
fn riccati_step(spec: &ProblemSpec, p: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (a, b) = (&spec.a, &spec.b);
    let inner = symmetrize(&(&spec.r + b.transpose() * p * b));
    let chol = inner.cholesky().ok_or(Error::SingularInnerMatrix)?;
    let btpa = b.transpose() * p * a;
    let k = -chol.solve(&btpa);
    let next = a.transpose() * p * a - btpa.transpose() * chol.solve(&btpa) + &spec.q;
    Ok((symmetrize(&next), k))
}

/// `‖P − A'(P − PB(R+B'PB)⁻¹B'P)A − Q‖∞`.
pub fn dare_residual(spec: &ProblemSpec, p: &DMatrix<f64>) -> Result<f64> {
    let (next, _) = riccati_step(spec, p)?;
    Ok(inf_norm(&(p - next)))
}

/// Riccati recursion from `P_0 = Q` until successive iterates differ by at most `tol`.
pub fn solve_dare(spec: &ProblemSpec, tol: f64, max_iter: usize) -> Result<UnconstrainedSolution> {
    let mut p = spec.q.clone();
    for _ in 0..max_iter {
        let (next, _) = riccati_step(spec, &p)?;
        let step = inf_norm(&(&next - &p));
        p = next;
        if !step.is_finite() {
            break;
        }
        if step <= tol && dare_residual(spec, &p)? <= tol {
            let (_, k) = riccati_step(spec, &p)?;
            let acl = &spec.a + &spec.b * &k;
            return Ok(UnconstrainedSolution { p, k, acl });
        }
    }
    Err(Error::NoConvergence(max_iter))
}

pub fn solve_dare_default(spec: &ProblemSpec) -> Result<UnconstrainedSolution> {
    solve_dare(spec, DEFAULT_DARE_TOL, DEFAULT_DARE_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polytope;
    use approx::assert_abs_diff_eq;

    fn scalar(a: f64, b: f64, q: f64, r: f64) -> ProblemSpec {
        ProblemSpec::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, r),
            Polytope::from_box(&[-1.0], &[1.0]),
            Polytope::from_box(&[-1.0], &[1.0]),
        )
        .unwrap()
    }

    #[test]
    fn zero_dynamics_give_identity_cost() {
        let s = solve_dare_default(&scalar(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(s.p[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.k[(0, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn scalar_golden_ratio() {
        let s = solve_dare_default(&scalar(1.0, 1.0, 1.0, 1.0)).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(s.p[(0, 0)], phi, epsilon = 1e-10);
        assert_abs_diff_eq!(s.k[(0, 0)], -phi / (1.0 + phi), epsilon = 1e-10);
    }

    #[test]
    fn example_matches_reference_values() {
        let spec = ProblemSpec::example1();
        let s = solve_dare_default(&spec).unwrap();
        let p_ref = [1.024094918015807, 0.005458316332287138, 0.005458316332287138, 1.6271691618540833];
        for (got, want) in s.p.transpose().iter().zip(p_ref) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(s.k[(0, 0)], 0.48189836031614236, epsilon = 1e-10);
        assert_abs_diff_eq!(s.k[(0, 1)], 0.10916632664575374, epsilon = 1e-10);
        assert!(dare_residual(&spec, &s.p).unwrap() <= 1e-9);
        assert!(s.spectral_radius() < 1.0);
        assert_abs_diff_eq!(
            s.terminal_cost(&DVector::from_row_slice(&[1.0, 0.0])),
            0.5 * s.p[(0, 0)],
            epsilon = 1e-15
        );
    }

    #[test]
    fn iteration_cap_is_reported() {
        let spec = ProblemSpec::example1();
        assert!(matches!(solve_dare(&spec, 1e-12, 2), Err(Error::NoConvergence(2))));
    }
}
