//! Norms, operators, and certified decompositions in Lipschitz free spaces
//! over finite pointed metric spaces.
//!
//! A finite metric space is normalized to diameter 1 and given a basepoint at
//! distance 1 from everything else. On top of that sit:
//!
//! * the Lipschitz dual: function norms, extension, bump and truncation
//!   constructions, and separated gluing with a certified bound,
//! * the free norm of a finitely supported moment vector, computed twice
//!   (transshipment primal and Lipschitz dual) through one deterministic
//!   simplex core, with the duality gap as a built-in oracle,
//! * ideals generated by a carrier set: the radius function, the restricted
//!   norm, weighted atom vectors, and quotient-style decompositions whose
//!   inequalities are rechecked from their definitions,
//! * weighted truncation operators with exact support bookkeeping,
//! * seeded instance generators and a verification suite that emits
//!   byte-stable JSON reports.

pub mod decompose;
pub mod free;
pub mod ideal;
pub mod instance;
pub mod lip;
pub mod metric;
pub mod operators;
pub mod verify;
pub mod solver;

pub use metric::{MetricError, PointSet, PointedMetricSpace};

/// Agreement tolerance for values computed along independent routes, such as
/// the primal and dual norm programs. The CLI exposes this as `--tolerance`.
pub const CROSS_CHECK_TOL: f64 = 1e-6;
