//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems here have at most a few dozen rows and columns, so the solver keeps a
//! full tableau and never refactorizes. Pivoting is fully deterministic: the
//! entering column is the lowest-index improving column, and ratio ties go to
//! the lowest-index basic variable.

use nalgebra::{DMatrix, DVector};

use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective value; `-inf` when infeasible and `+inf` when unbounded.
    pub optimum: f64,
    /// Maximizer when optimal, empty otherwise.
    pub point: DVector<f64>,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Optimum when optimal, `None` otherwise.
    pub fn value(&self) -> Option<f64> {
        self.is_optimal().then_some(self.optimum)
    }
}

/// A linear program `max c'v  s.t.  A_eq v = b_eq,  A_in v <= b_in`.
///
/// Variables are free unless flagged non-negative.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub nonneg: Vec<bool>,
}

impl LinearProgram {
    pub fn new(
        c: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        b_in: DVector<f64>,
    ) -> Self {
        let n = c.len();
        assert_eq!(a_eq.ncols(), n, "equality block has wrong column count");
        assert_eq!(a_in.ncols(), n, "inequality block has wrong column count");
        assert_eq!(a_eq.nrows(), b_eq.len());
        assert_eq!(a_in.nrows(), b_in.len());
        Self { c, a_eq, b_eq, a_in, b_in, nonneg: vec![false; n] }
    }

    pub fn with_nonneg(mut self, nonneg: Vec<bool>) -> Self {
        assert_eq!(nonneg.len(), self.c.len());
        self.nonneg = nonneg;
        self
    }

    pub fn solve(&self) -> LpResult {
        Tableau::build(self).run(self)
    }
}

/// Maximizes `c'z` subject to `c_eq z = d_eq`, `c_in z <= d_in` over free `z`.
pub fn lp_solve(
    c: &DVector<f64>,
    c_eq: &DMatrix<f64>,
    d_eq: &DVector<f64>,
    c_in: &DMatrix<f64>,
    d_in: &DVector<f64>,
) -> LpResult {
    LinearProgram::new(c.clone(), c_eq.clone(), d_eq.clone(), c_in.clone(), d_in.clone()).solve()
}

/// Column layout of a user variable inside the tableau.
#[derive(Clone, Copy)]
enum VarCols {
    NonNeg(usize),
    Split(usize, usize),
}

struct Tableau {
    /// `rows + 2` rows by `cols + 1` columns; the last two rows hold the phase-2
    /// and phase-1 reduced costs, the last column the right-hand side.
    t: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    first_artificial: usize,
    vars: Vec<VarCols>,
    rhs_scale: f64,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width() + c]
    }

    fn build(lp: &LinearProgram) -> Self {
        let n = lp.c.len();
        let m_eq = lp.a_eq.nrows();
        let m_in = lp.a_in.nrows();
        let rows = m_eq + m_in;

        let mut vars = Vec::with_capacity(n);
        let mut next = 0;
        for &nn in &lp.nonneg {
            if nn {
                vars.push(VarCols::NonNeg(next));
                next += 1;
            } else {
                vars.push(VarCols::Split(next, next + 1));
                next += 2;
            }
        }
        let first_slack = next;
        let first_artificial = first_slack + m_in;

        // Every row whose slack cannot serve as the initial basic variable gets
        // an artificial column.
        let mut needs_art = vec![true; m_eq];
        needs_art.reserve(rows - m_eq);
        for i in 0..m_in {
            needs_art.push(lp.b_in[i] < 0.0);
        }
        let n_art = needs_art.iter().filter(|&&b| b).count();
        let cols = first_artificial + n_art;
        let width = cols + 1;

        let mut t = vec![0.0; (rows + 2) * width];
        let mut basis = vec![0; rows];
        let mut art = first_artificial;
        let mut rhs_scale: f64 = 1.0;

        for r in 0..rows {
            let (coeffs, rhs): (Vec<f64>, f64) = if r < m_eq {
                (lp.a_eq.row(r).iter().copied().collect(), lp.b_eq[r])
            } else {
                let i = r - m_eq;
                (lp.a_in.row(i).iter().copied().collect(), lp.b_in[i])
            };
            rhs_scale = rhs_scale.max(rhs.abs());
            let sign = if needs_art[r] && rhs < 0.0 { -1.0 } else { 1.0 };
            let row = &mut t[r * width..(r + 1) * width];
            for (j, v) in vars.iter().enumerate() {
                match *v {
                    VarCols::NonNeg(c) => row[c] = sign * coeffs[j],
                    VarCols::Split(p, q) => {
                        row[p] = sign * coeffs[j];
                        row[q] = -sign * coeffs[j];
                    }
                }
            }
            if r >= m_eq {
                row[first_slack + (r - m_eq)] = sign;
            }
            row[cols] = sign * rhs;
            if needs_art[r] {
                row[art] = 1.0;
                basis[r] = art;
                art += 1;
            } else {
                basis[r] = first_slack + (r - m_eq);
            }
        }

        // Phase-2 reduced costs: c on the user columns.
        let obj2 = rows;
        for (j, v) in vars.iter().enumerate() {
            match *v {
                VarCols::NonNeg(c) => t[obj2 * width + c] = lp.c[j],
                VarCols::Split(p, q) => {
                    t[obj2 * width + p] = lp.c[j];
                    t[obj2 * width + q] = -lp.c[j];
                }
            }
        }
        // Phase-1 reduced costs: maximize minus the sum of artificials, priced
        // out against the artificial basis.
        let obj1 = rows + 1;
        for c in first_artificial..cols {
            t[obj1 * width + c] = -1.0;
        }
        for r in 0..rows {
            if basis[r] >= first_artificial {
                for c in 0..width {
                    t[obj1 * width + c] += t[r * width + c];
                }
            }
        }

        Self { t, rows, cols, basis, first_artificial, vars, rhs_scale }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let p = self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] /= p;
        }
        self.t[pr * w + pc] = 1.0;
        for r in 0..self.rows + 2 {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                let v = self.t[pr * w + c];
                if v != 0.0 {
                    self.t[r * w + c] -= f * v;
                }
            }
            self.t[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs Bland-rule pivots on objective row `obj` over columns `< col_limit`.
    /// Returns `false` when the objective is unbounded.
    fn optimize(&mut self, obj: usize, col_limit: usize) -> bool {
        const MAX_PIVOTS: usize = 200_000;
        let w = self.width();
        for _ in 0..MAX_PIVOTS {
            let entering = (0..col_limit).find(|&c| self.t[obj * w + c] > 1e-11);
            let Some(pc) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.t[r * w + pc];
                if a > tol::PIVOT {
                    let ratio = self.t[r * w + self.cols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                            if ratio < bratio && !tie
                                || tie && self.basis[r] < self.basis[br]
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return false,
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
        panic!("simplex exceeded {MAX_PIVOTS} pivots despite Bland's rule");
    }

    fn run(mut self, lp: &LinearProgram) -> LpResult {
        let w = self.width();
        let obj1 = self.rows + 1;
        if self.cols > self.first_artificial {
            self.optimize(obj1, self.cols);
            let infeas = self.t[obj1 * w + self.cols];
            if infeas > tol::FEASIBILITY * self.rhs_scale {
                return LpResult {
                    status: LpStatus::Infeasible,
                    optimum: f64::NEG_INFINITY,
                    point: DVector::zeros(0),
                };
            }
            // Drive remaining (zero-valued) artificials out of the basis.
            for r in 0..self.rows {
                if self.basis[r] >= self.first_artificial {
                    let col = (0..self.first_artificial)
                        .find(|&c| self.at(r, c).abs() > 1e-9);
                    if let Some(c) = col {
                        self.pivot(r, c);
                    }
                }
            }
        }

        let obj2 = self.rows;
        if !self.optimize(obj2, self.first_artificial) {
            return LpResult {
                status: LpStatus::Unbounded,
                optimum: f64::INFINITY,
                point: DVector::zeros(0),
            };
        }

        let mut colval = vec![0.0; self.cols];
        for r in 0..self.rows {
            colval[self.basis[r]] = self.at(r, self.cols);
        }
        let point = DVector::from_iterator(
            self.vars.len(),
            self.vars.iter().map(|v| match *v {
                VarCols::NonNeg(c) => colval[c],
                VarCols::Split(p, q) => colval[p] - colval[q],
            }),
        );
        let optimum = lp.c.dot(&point);
        LpResult { status: LpStatus::Optimal, optimum, point }
    }
}
