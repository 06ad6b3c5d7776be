//! Dense linear programming and halfspace-polytope operations.

mod lp;
mod polytope;

pub use lp::{lp_solve, LinearProgram, LpResult, LpStatus};
pub use polytope::{Polytope, PolytopeJson};
