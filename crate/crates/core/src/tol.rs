//! Numerical tolerances shared by every module.
//!
//! All classification decisions (feasible, redundant, tight, full-dimensional)
//! read their thresholds from here so that two modules never disagree about the
//! same point.

/// Constraint violation accepted when a point is declared feasible.
pub const FEASIBILITY: f64 = 1e-8;

/// Slack below which a row is considered redundant.
pub const REDUNDANCY: f64 = 1e-9;

/// Distance below which a point is considered to lie on a facet.
pub const TIGHTNESS: f64 = 1e-7;

/// LP margin separating full-dimensional certificates from degenerate ones.
pub const MARGIN: f64 = 1e-7;

/// Activity read-off tolerance used by the pointwise QP oracle.
pub const ACTIVITY: f64 = 1e-7;

/// Facet distance required before a sample counts as interior to its region.
pub const INTERIOR_GUARD: f64 = 1e-5;

/// Relative rank tolerance for the LICQ test.
pub const RANK_REL: f64 = 1e-9;

/// Pivot threshold inside the simplex tableau.
pub const PIVOT: f64 = 1e-10;

/// Run-time overrides for the thresholds that drive enumeration.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Certificate LP margin `ε`.
    pub margin: f64,
    /// Chebyshev radius above which a region is full-dimensional.
    pub tightness: f64,
    /// Point-in-polytope slack.
    pub feasibility: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { margin: MARGIN, tightness: TIGHTNESS, feasibility: FEASIBILITY }
    }
}
