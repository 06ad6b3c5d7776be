use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Polytope;
use crate::problem::ProblemSpec;
use crate::riccati::UnconstrainedSolution;
use crate::tol;

pub const DEFAULT_K_MAX: usize = 200;

/// Maximal positively invariant subset of `X_U` under the LQR closed loop.
#[derive(Clone, Debug, PartialEq)]
pub struct TerminalSet {
    pub t: Polytope,
    pub determined_at: usize,
    pub acl: DMatrix<f64>,
}

/// `{x in X : K x in U}`, irredundant.
pub fn build_xu(spec: &ProblemSpec, unc: &UnconstrainedSolution) -> Result<Polytope> {
    let ku = Polytope::new(spec.u_set.a() * &unc.k, spec.u_set.b().clone());
    spec.x_set.intersect(&ku).remove_redundant()
}

/// Gilbert–Tan iteration `Ω_{k+1} = Ω_k ∩ {x : Acl^{k+1} x in X_U}`.
///
/// Rows of the result are ordered by the step at which they entered, latest
/// step first; within a step they keep the order of `X_U`.
pub fn build_terminal_set(
    spec: &ProblemSpec,
    unc: &UnconstrainedSolution,
    k_max: usize,
) -> Result<TerminalSet> {
    let xu = build_xu(spec, unc)?;
    let n = spec.n();
    let mut omega = xu.clone();
    let mut power = DMatrix::<f64>::identity(n, n);
    // Row blocks by entry step, used to fix the output order.
    let mut blocks: Vec<Polytope> = vec![xu.clone()];
    for k in 0..k_max {
        power = &unc.acl * power;
        let step = xu.preimage(&power);
        let next = omega.intersect(&step);
        if next.poly_equal(&omega) {
            let mut stacked = blocks.pop().expect("at least one block");
            while let Some(b) = blocks.pop() {
                stacked = stacked.intersect(&b);
            }
            let t = stacked.remove_redundant()?;
            return Ok(TerminalSet { t, determined_at: k, acl: unc.acl.clone() });
        }
        blocks.push(step);
        omega = next.remove_redundant()?;
    }
    Err(Error::NotFinitelyDetermined(k_max))
}

impl TerminalSet {
    pub fn q_t(&self) -> usize {
        self.t.nrows()
    }

    /// LP certificate that `Acl (λT) ⊆ λT`, plus a sampled check that states
    /// strictly inside `λT` stay strictly inside.
    pub fn scaled_invariance_check(&self, lambda: f64, samples: usize, seed: u64) -> bool {
        let scaled = self.t.scaled(lambda);
        if !scaled.preimage(&self.acl).contains(&scaled) {
            return false;
        }
        self.sample_interior(&scaled, samples, seed).iter().all(|x| {
            let next = &self.acl * x;
            is_strictly_inside(&scaled, &next)
        })
    }

    /// Interior samples of `p`, at least `tol::INTERIOR_GUARD` away from its facets.
    pub fn sample_interior(&self, p: &Polytope, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        p.sample_interior(count, tol::INTERIOR_GUARD, &mut rng, 1_000_000).unwrap_or_default()
    }
}

fn is_strictly_inside(p: &Polytope, x: &DVector<f64>) -> bool {
    let on_origin = x.iter().all(|v| *v == 0.0);
    on_origin || p.max_violation(x) < 0.0
}
