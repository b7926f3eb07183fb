//! Shared numerical tolerances.

/// Slack allowed on marginal domination and entry nonnegativity.
pub const FEASIBILITY: f64 = 1e-9;
/// Slack allowed on total-mass equality constraints.
pub const MASS_EQ: f64 = 1e-8;
/// Relative slack for objective comparisons.
pub const OBJECTIVE_REL: f64 = 1e-6;
/// Row mass below which a plan row counts as empty.
pub const ROW_MASS: f64 = 1e-9;
