use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpStatus};
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_rows};
use crate::tol;

/// The set `{z : a z <= b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    irredundant: bool,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len(), "row count mismatch between C and d");
        Self { a, b, irredundant: false }
    }

    /// Axis-aligned box `lo <= z <= hi`, rows ordered `z_1 <= hi_1, -z_1 <= -lo_1, ...`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::new(a, b)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_irredundant(&self) -> bool {
        self.irredundant
    }

    /// Rows rescaled to unit Euclidean norm; zero rows are kept as they are.
    pub fn normalized(&self) -> Self {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for i in 0..a.nrows() {
            let nrm = a.row(i).norm();
            if nrm > 0.0 {
                a.row_mut(i).scale_mut(1.0 / nrm);
                b[i] /= nrm;
            }
        }
        Self { a, b, irredundant: self.irredundant }
    }

    /// Stacks the rows of `other` below the rows of `self`.
    pub fn intersect(&self, other: &Polytope) -> Self {
        assert_eq!(self.dim(), other.dim());
        let a = vstack(&self.a, &other.a);
        let b = DVector::from_iterator(
            self.b.len() + other.b.len(),
            self.b.iter().chain(other.b.iter()).copied(),
        );
        Self::new(a, b)
    }

    /// `{z : a z <= scale * b}`, which equals `scale * P` for `scale > 0`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self { a: self.a.clone(), b: &self.b * scale, irredundant: self.irredundant }
    }

    /// Preimage `{z : a (m z) <= b}` under the linear map `m`.
    pub fn preimage(&self, m: &DMatrix<f64>) -> Self {
        Self::new(&self.a * m, self.b.clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let a = DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.a[(rows[i], j)]);
        let b = DVector::from_fn(rows.len(), |i, _| self.b[rows[i]]);
        Self::new(a, b)
    }

    /// Largest signed violation over rows, measured in row-norm units.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.nrows() {
            let nrm = self.a.row(i).norm();
            let r = (self.a.row(i) * z)[0] - self.b[i];
            let v = if nrm > 0.0 { r / nrm } else { r };
            worst = worst.max(v);
        }
        worst
    }

    pub fn contains_point(&self, z: &DVector<f64>, tol: f64) -> bool {
        self.nrows() == 0 || self.max_violation(z) <= tol
    }

    /// Maximizes `c'z` over the polytope.
    pub fn maximize(&self, c: &DVector<f64>) -> super::LpResult {
        LinearProgram::new(
            c.clone(),
            DMatrix::zeros(0, self.dim()),
            DVector::zeros(0),
            self.a.clone(),
            self.b.clone(),
        )
        .solve()
    }

    pub fn is_empty(&self) -> bool {
        self.maximize(&DVector::zeros(self.dim())).status == LpStatus::Infeasible
    }

    /// Center and radius of the largest inscribed ball.
    ///
    /// The radius is positive iff the polytope is full-dimensional, zero for
    /// lower-dimensional sets and negative when the rows admit no point.
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        let n = self.dim();
        if self.nrows() == 0 {
            return Err(Error::Unbounded);
        }
        // An all-zero row with a negative bound empties the set outright.
        let mut kept = Vec::new();
        for i in 0..self.nrows() {
            if self.a.row(i).norm() == 0.0 {
                if self.b[i] < 0.0 {
                    return Ok((DVector::zeros(n), f64::NEG_INFINITY));
                }
            } else {
                kept.push(i);
            }
        }
        if kept.is_empty() {
            return Err(Error::Unbounded);
        }
        let mut a = DMatrix::zeros(kept.len(), n + 1);
        let mut b = DVector::zeros(kept.len());
        for (r, &i) in kept.iter().enumerate() {
            for j in 0..n {
                a[(r, j)] = self.a[(i, j)];
            }
            a[(r, n)] = self.a.row(i).norm();
            b[r] = self.b[i];
        }
        let mut c = DVector::zeros(n + 1);
        c[n] = 1.0;
        let res =
            LinearProgram::new(c, DMatrix::zeros(0, n + 1), DVector::zeros(0), a, b).solve();
        match res.status {
            LpStatus::Optimal => {
                Ok((res.point.rows(0, n).into_owned(), res.point[n]))
            }
            LpStatus::Unbounded => Err(Error::Unbounded),
            // Cannot happen: the radius is free, so some point is always feasible.
            LpStatus::Infeasible => Ok((DVector::zeros(n), f64::NEG_INFINITY)),
        }
    }

    pub fn is_full_dimensional(&self) -> bool {
        matches!(self.chebyshev_center(), Ok((_, r)) if r > tol::TIGHTNESS)
    }

    /// Drops every row that is implied by the others.
    ///
    /// Rows are tested in order; row `i` is redundant when maximizing its
    /// left-hand side subject to the surviving rows (and itself relaxed by one)
    /// stays within its bound.
    pub fn remove_redundant(&self) -> Result<Polytope> {
        if self.is_empty() {
            return Err(Error::EmptyPolytope);
        }
        let n = self.dim();
        let mut keep: Vec<usize> = (0..self.nrows()).collect();
        for i in 0..self.nrows() {
            let nrm = self.a.row(i).norm();
            if nrm == 0.0 {
                // Feasibility already established, so b_i >= 0 (up to tolerance).
                keep.retain(|&k| k != i);
                continue;
            }
            let others: Vec<usize> = keep.iter().copied().filter(|&k| k != i).collect();
            let mut a = DMatrix::zeros(others.len() + 1, n);
            let mut b = DVector::zeros(others.len() + 1);
            for (r, &k) in others.iter().enumerate() {
                a.set_row(r, &self.a.row(k));
                b[r] = self.b[k];
            }
            a.set_row(others.len(), &self.a.row(i));
            b[others.len()] = self.b[i] + nrm;
            let c = self.a.row(i).transpose();
            let res =
                LinearProgram::new(c, DMatrix::zeros(0, n), DVector::zeros(0), a, b).solve();
            if let Some(opt) = res.value() {
                if opt <= self.b[i] + tol::REDUNDANCY * nrm.max(1.0) {
                    keep.retain(|&k| k != i);
                }
            }
        }
        let mut out = self.select_rows(&keep);
        out.irredundant = true;
        Ok(out)
    }

    /// True iff `inner` is a subset of `self`.
    pub fn contains(&self, inner: &Polytope) -> bool {
        assert_eq!(self.dim(), inner.dim());
        for i in 0..self.nrows() {
            let nrm = self.a.row(i).norm();
            let res = inner.maximize(&self.a.row(i).transpose());
            match res.status {
                LpStatus::Infeasible => return true,
                LpStatus::Unbounded => return false,
                LpStatus::Optimal => {
                    if res.optimum - self.b[i] > tol::FEASIBILITY * nrm.max(1.0) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn poly_equal(&self, other: &Polytope) -> bool {
        self.contains(other) && other.contains(self)
    }

    /// Counterclockwise vertex cycle of a bounded, full-dimensional polygon.
    pub fn vertices2d(&self) -> Result<Vec<[f64; 2]>> {
        if self.dim() != 2 {
            return Err(Error::DimensionNot2D(self.dim()));
        }
        let p = if self.irredundant { self.clone() } else { self.remove_redundant()? };
        let p = p.normalized();
        let mut facets: Vec<(f64, usize)> = (0..p.nrows())
            .map(|i| (p.a[(i, 1)].atan2(p.a[(i, 0)]), i))
            .collect();
        facets.sort_by(|x, y| x.0.total_cmp(&y.0));
        let k = facets.len();
        if k < 3 {
            return Err(Error::Unbounded);
        }
        let mut verts = Vec::with_capacity(k);
        for j in 0..k {
            let (_, f) = facets[j];
            let (_, g) = facets[(j + 1) % k];
            let m = nalgebra::Matrix2::new(p.a[(f, 0)], p.a[(f, 1)], p.a[(g, 0)], p.a[(g, 1)]);
            let rhs = nalgebra::Vector2::new(p.b[f], p.b[g]);
            let v = m.lu().solve(&rhs).ok_or(Error::Unbounded)?;
            verts.push([v[0], v[1]]);
        }
        Ok(verts)
    }

    /// Axis-aligned bounding box of a bounded polytope.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let up = self.maximize(&e);
            let down = self.maximize(&(-e));
            match (up.status, down.status) {
                (LpStatus::Optimal, LpStatus::Optimal) => {
                    hi[i] = up.optimum;
                    lo[i] = -down.optimum;
                }
                (LpStatus::Infeasible, _) | (_, LpStatus::Infeasible) => return Err(Error::EmptyPolytope),
                _ => return Err(Error::Unbounded),
            }
        }
        Ok((lo, hi))
    }

    /// Rejection samples from the bounding box that keep distance `guard` from every facet.
    ///
    /// Returns fewer than `count` points only when `max_draws` proposals are exhausted.
    pub fn sample_interior<R: rand::Rng>(
        &self,
        count: usize,
        guard: f64,
        rng: &mut R,
        max_draws: usize,
    ) -> Result<Vec<DVector<f64>>> {
        let (lo, hi) = self.bounding_box()?;
        let norm = self.normalized();
        let mut out = Vec::with_capacity(count);
        let mut draws = 0;
        while out.len() < count && draws < max_draws {
            draws += 1;
            let x = DVector::from_fn(self.dim(), |i, _| {
                if hi[i] > lo[i] { rng.random_range(lo[i]..hi[i]) } else { lo[i] }
            });
            if norm.max_violation(&x) < -guard {
                out.push(x);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> PolytopeJson {
        PolytopeJson { c: matrix_rows(&self.a), d: self.b.iter().copied().collect() }
    }

    pub fn from_json(j: &PolytopeJson, dim: usize) -> Result<Self> {
        let a = matrix_from_rows(&j.c, dim)?;
        if a.nrows() != j.d.len() {
            return Err(Error::DimensionMismatch(format!(
                "halfspace system has {} rows but {} bounds",
                a.nrows(),
                j.d.len()
            )));
        }
        Ok(Self::new(a, DVector::from_vec(j.d.clone())))
    }
}

/// Serialized halfspace system `{z : C z <= d}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeJson {
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}
