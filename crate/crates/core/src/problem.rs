use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Polytope, PolytopeJson};
use crate::linalg::{matrix_from_rows, matrix_rows, rank, symmetrize};

/// Placement of the input rows relative to the state rows inside one stage block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    /// State rows `x(k) in X` first, then input rows `u(k) in U`.
    #[default]
    StatesFirst,
    /// Input rows first, then state rows.
    InputsFirst,
}

/// Linear system, quadratic weights and polytopic constraint sets.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x_set: Polytope,
    pub u_set: Polytope,
    pub stage_order: StageOrder,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    pub x: PolytopeJson,
    #[serde(rename = "U")]
    pub u: PolytopeJson,
    #[serde(default)]
    pub stage_order: StageOrder,
}

impl ProblemSpec {
    /// Validates and assembles a problem.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        x_set: Polytope,
        u_set: Polytope,
    ) -> Result<Self> {
        let spec = Self { a, b, q, r, x_set, u_set, stage_order: StageOrder::default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_stage_order(mut self, order: StageOrder) -> Self {
        self.stage_order = order;
        self
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn qx(&self) -> usize {
        self.x_set.nrows()
    }

    pub fn qu(&self) -> usize {
        self.u_set.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let dims = [
            ("A", self.a.shape(), (n, n)),
            ("B", self.b.shape(), (n, m)),
            ("Q", self.q.shape(), (n, n)),
            ("R", self.r.shape(), (m, m)),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        if n == 0 || m == 0 {
            return Err(Error::InvalidProblem("empty state or input dimension".into()));
        }
        if self.x_set.dim() != n || self.u_set.dim() != m {
            return Err(Error::DimensionMismatch("constraint sets do not match n, m".into()));
        }
        if self.a.iter().chain(self.b.iter()).chain(self.q.iter()).chain(self.r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite matrix entry".into()));
        }

        let mut ctrb = DMatrix::zeros(n, n * m);
        let mut blk = self.b.clone();
        for k in 0..n {
            ctrb.view_mut((0, k * m), (n, m)).copy_from(&blk);
            blk = &self.a * blk;
        }
        if rank(&ctrb, 1e-10) < n {
            return Err(Error::InvalidProblem("(A, B) is not controllable".into()));
        }

        let sym_tol = 1e-12 * (1.0 + crate::linalg::inf_norm(&self.q).max(crate::linalg::inf_norm(&self.r)));
        if crate::linalg::inf_norm(&(&self.q - self.q.transpose())) > sym_tol {
            return Err(Error::InvalidProblem("Q is not symmetric".into()));
        }
        if crate::linalg::inf_norm(&(&self.r - self.r.transpose())) > sym_tol {
            return Err(Error::InvalidProblem("R is not symmetric".into()));
        }
        let qmin = symmetrize(&self.q).symmetric_eigenvalues().min();
        if qmin < -1e-12 * (1.0 + crate::linalg::inf_norm(&self.q)) {
            return Err(Error::InvalidProblem("Q is not positive semidefinite".into()));
        }
        if symmetrize(&self.r).cholesky().is_none() {
            return Err(Error::InvalidProblem("R is not positive definite".into()));
        }

        for (name, set) in [("X", &self.x_set), ("U", &self.u_set)] {
            if set.b().iter().any(|&d| d <= 0.0) {
                return Err(Error::InvalidProblem(format!("{name} does not contain the origin strictly")));
            }
            match set.chebyshev_center() {
                Ok((_, r)) if r > 0.0 => {}
                _ => return Err(Error::InvalidProblem(format!("{name} is not a bounded polytope"))),
            }
        }
        Ok(())
    }

    pub fn from_json(j: &ProblemJson) -> Result<Self> {
        let a = matrix_from_rows(&j.a, 0)?;
        let b = matrix_from_rows(&j.b, 0)?;
        let n = a.nrows();
        let m = b.ncols();
        let spec = Self {
            q: matrix_from_rows(&j.q, n)?,
            r: matrix_from_rows(&j.r, m)?,
            x_set: Polytope::from_json(&j.x, n)?,
            u_set: Polytope::from_json(&j.u, m)?,
            a,
            b,
            stage_order: j.stage_order,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> ProblemJson {
        ProblemJson {
            a: matrix_rows(&self.a),
            b: matrix_rows(&self.b),
            q: matrix_rows(&self.q),
            r: matrix_rows(&self.r),
            x: self.x_set.to_json(),
            u: self.u_set.to_json(),
            stage_order: self.stage_order,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// `½ (x'Qx + u'Ru)`.
    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * (x.dot(&(&self.q * x)) + u.dot(&(&self.r * u)))
    }

    /// The worked two-state example: rotation-like dynamics, one input,
    /// `|x_i| <= 10` and `|u| <= 1`, with input rows placed first in each stage.
    pub fn example1() -> Self {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, -0.5]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let x_set = Polytope::from_box(&[-10.0, -10.0], &[10.0, 10.0]);
        let u_set = Polytope::from_box(&[-1.0], &[1.0]);
        Self::new(a, b, DMatrix::identity(2, 2), DMatrix::from_element(1, 1, 0.1), x_set, u_set)
            .expect("example data is valid")
            .with_stage_order(StageOrder::InputsFirst)
    }
}
