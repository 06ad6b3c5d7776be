use nalgebra::DVector;
use sha2::{Digest, Sha256};

use crate::condense::{condense, CondensedQP, StageLayout};
use crate::error::Result;
use crate::problem::ProblemSpec;
use crate::riccati::{solve_dare_default, UnconstrainedSolution};
use crate::terminal::{build_terminal_set, TerminalSet, DEFAULT_K_MAX};

/// A validated problem together with its LQR solution and terminal set.
#[derive(Clone, Debug, PartialEq)]
pub struct Setup {
    pub spec: ProblemSpec,
    pub unc: UnconstrainedSolution,
    pub terminal: TerminalSet,
}

impl Setup {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let unc = solve_dare_default(&spec)?;
        let terminal = build_terminal_set(&spec, &unc, DEFAULT_K_MAX)?;
        Ok(Self { spec, unc, terminal })
    }

    pub fn example1() -> Self {
        Self::new(ProblemSpec::example1()).expect("example data is valid")
    }

    pub fn condense(&self, horizon: usize) -> Result<CondensedQP> {
        condense(&self.spec, &self.unc, &self.terminal.t, horizon)
    }

    pub fn layout(&self, horizon: usize) -> StageLayout {
        StageLayout::new(horizon, self.spec.qx(), self.spec.qu(), self.terminal.q_t())
    }

    /// SHA-256 of the serialized problem and terminal set.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.spec.to_json()).expect("problem serializes"));
        h.update(serde_json::to_vec(&self.terminal.t.to_json()).expect("polytope serializes"));
        hex::encode(h.finalize())
    }

    /// LQR feedback `K x`.
    pub fn lqr_input(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.unc.k * x
    }

    pub fn in_terminal_set(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.terminal.t.contains_point(x, tol)
    }
}
