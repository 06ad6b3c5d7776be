//! Open-loop and receding-horizon simulation over an atlas.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::atlas::Atlas;
use crate::error::{Error, Result};
use crate::linalg::vec_inf_norm;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `x(0..=K)`.
    pub states: Vec<DVector<f64>>,
    /// `u(0..K)`.
    pub inputs: Vec<DVector<f64>>,
    /// Tuple of the region that produced each input; `None` once LQR feedback takes over.
    pub tuples: Vec<Option<String>>,
    /// Stage costs over the `K` steps plus the terminal cost at `x(K)`.
    pub total_cost: f64,
}

impl Trajectory {
    fn new(x0: &DVector<f64>) -> Self {
        Self { states: vec![x0.clone()], inputs: Vec::new(), tuples: Vec::new(), total_cost: 0.0 }
    }

    fn push(&mut self, atlas: &Atlas, u: DVector<f64>, tuple: Option<String>) {
        let spec = &atlas.setup.spec;
        let x = self.states.last().unwrap();
        self.total_cost += spec.stage_cost(x, &u);
        let next = &spec.a * x + &spec.b * &u;
        self.states.push(next);
        self.inputs.push(u);
        self.tuples.push(tuple);
    }

    fn close(mut self, atlas: &Atlas) -> Self {
        self.total_cost += atlas.setup.unc.terminal_cost(self.states.last().unwrap());
        self
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    /// Columns `k, x_1..x_n, u_1..u_m, tuple`; the last row has no input.
    pub fn to_csv(&self) -> String {
        let n = self.states[0].len();
        let m = self.inputs.first().map_or(0, |u| u.len());
        let mut out = String::from("k");
        for i in 1..=n {
            write!(out, ",x_{i}").unwrap();
        }
        for i in 1..=m {
            write!(out, ",u_{i}").unwrap();
        }
        out.push_str(",tuple\n");
        for (k, x) in self.states.iter().enumerate() {
            write!(out, "{k}").unwrap();
            for v in x.iter() {
                write!(out, ",{v:e}").unwrap();
            }
            match self.inputs.get(k) {
                Some(u) => u.iter().for_each(|v| write!(out, ",{v:e}").unwrap()),
                None => (0..m).for_each(|_| out.push(',')),
            }
            let t = self.tuples.get(k).cloned().flatten().unwrap_or_default();
            writeln!(out, ",{t}").unwrap();
        }
        out
    }
}

/// Applies the stored stacked law for `N` steps and LQR feedback afterwards.
pub fn open_loop(atlas: &Atlas, x0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
    let r = atlas.locate(x0).ok_or_else(|| Error::OutsideDomain(x0.iter().copied().collect()))?;
    let u = r.law.input(x0);
    let m = atlas.qp.m;
    let tuple = r.active_set.to_string();
    let mut t = Trajectory::new(x0);
    for k in 0..steps {
        if k < atlas.horizon {
            t.push(atlas, u.rows(k * m, m).into_owned(), Some(tuple.clone()));
        } else {
            let x = t.states.last().unwrap();
            t.push(atlas, atlas.setup.lqr_input(x), None);
        }
    }
    Ok(t.close(atlas))
}

/// Applies the first move of the law located at each visited state.
pub fn mpc_closed_loop(atlas: &Atlas, x0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
    let mut t = Trajectory::new(x0);
    for k in 0..steps {
        let x = t.states.last().unwrap().clone();
        let r = atlas.locate(&x).ok_or(Error::OutsideDomainAt { step: k })?;
        let u = r.law.input(&x).rows(0, atlas.qp.m).into_owned();
        t.push(atlas, u, Some(r.active_set.to_string()));
    }
    Ok(t.close(atlas))
}

/// Largest state or input difference over the first `steps` steps.
pub fn compare_trajectories(a: &Trajectory, b: &Trajectory, steps: usize) -> f64 {
    let mut dev: f64 = 0.0;
    for k in 0..=steps.min(a.steps()).min(b.steps()) {
        dev = dev.max(vec_inf_norm(&(&a.states[k] - &b.states[k])));
        if k < steps && k < a.steps() && k < b.steps() {
            dev = dev.max(vec_inf_norm(&(&a.inputs[k] - &b.inputs[k])));
        }
    }
    dev
}
