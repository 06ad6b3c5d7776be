//! Explicit solutions of the constrained linear-quadratic regulator.
//!
//! The condensed parametric QP is solved by enumerating optimal active sets,
//! encoded as stage-structured bit tuples. Atlases for longer horizons are
//! obtained by prefixing active sets of shorter ones, and regions whose
//! terminal constraints are all inactive carry over unchanged to every longer
//! horizon.

pub mod atlas;
pub mod bitset;
pub mod condense;
pub mod enumerate;
pub mod error;
pub mod export;
pub mod geom;
pub mod kkt;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod riccati;
pub mod setup;
pub mod sim;
pub mod terminal;
pub mod tol;
pub mod verify;

pub use atlas::{Atlas, PersistenceReport, PersistentRegionSet};
pub use bitset::{ActiveSetTuple, BackwardTuple};
pub use condense::{condense, CondensedQP, StageLayout};
pub use enumerate::{enumerate_extension, enumerate_tree, EnumerationReport, Method};
pub use error::{Error, Result};
pub use geom::{lp_solve, LpResult, LpStatus, Polytope};
pub use kkt::{CriticalRegion, KktSolution};
pub use problem::{ProblemSpec, StageOrder};
pub use setup::Setup;
pub use riccati::{solve_dare, UnconstrainedSolution};
pub use terminal::{build_terminal_set, build_xu, TerminalSet};
