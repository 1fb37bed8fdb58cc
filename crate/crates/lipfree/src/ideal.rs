//! Ideals generated by a carrier set, their radius function, and the
//! restricted norm.
//!
//! A carrier A picks out the functions that vanish off A. Pairing only
//! against those gives a smaller norm on moment vectors, and point masses
//! see exactly the radius function: `rad(p)` is how far a closed ball
//! around p stays inside A, capped at the diameter. Atom vectors are
//! coefficient lists priced by `rad`; pushing them through to moment
//! vectors never increases the restricted norm.

use std::collections::BTreeMap;

use crate::free::MomentVector;
use crate::lip::LipFunction;
use crate::metric::{PointSet, PointedMetricSpace};
use crate::solver::{solve, Constraint, LinearProgram, SolverError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum IdealError {
    #[error("need 0 <= r < r_prime, got r = {r}, r_prime = {r_prime}")]
    BadRadii { r: f64, r_prime: f64 },
    #[error("ball({p}, {r_prime}) leaves the carrier at point {witness}")]
    BallEscapesCarrier { p: usize, r_prime: f64, witness: usize },
}

/// Radius of the largest closed ball around p contained in the carrier,
/// capped at 1. Points outside the carrier get 0; if no ball ever escapes
/// the cap applies.
pub fn rad(x: &PointedMetricSpace, a: &PointSet, p: usize) -> f64 {
    if !a.contains(p) {
        return 0.0;
    }
    x.points()
        .filter(|&q| !a.contains(q))
        .map(|q| x.dist(p, q))
        .fold(1.0, f64::min)
}

/// The radius function of one carrier, tabulated once. Everything that
/// prices atoms reads from here, so a carrier is never rescanned.
#[derive(Debug, Clone, PartialEq)]
pub struct RadTable {
    carrier: PointSet,
    values: Vec<f64>,
}

impl RadTable {
    pub fn new(x: &PointedMetricSpace, carrier: &PointSet) -> Self {
        assert!(
            carrier.iter().all(|p| p < x.n()),
            "carrier index out of range"
        );
        Self {
            carrier: carrier.clone(),
            values: x.points().map(|p| rad(x, carrier, p)).collect(),
        }
    }

    pub fn value(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn carrier(&self) -> &PointSet {
        &self.carrier
    }
}

/// Restricted norm: the dual program with values pinned to 0 off the
/// carrier. Returns the optimum and a maximizing function, which vanishes
/// off the carrier by construction.
pub fn ideal_norm(
    x: &PointedMetricSpace,
    a: &PointSet,
    v: &MomentVector,
) -> Result<(f64, LipFunction), SolverError> {
    assert!(a.iter().all(|p| p < x.n()), "carrier index out of range");
    let n = x.n();
    let mut lp = LinearProgram::new(n - 1);
    lp.bounds = (1..n)
        .map(|p| if a.contains(p) { (-1.0, 1.0) } else { (0.0, 0.0) })
        .collect();
    for (p, c) in v.entries() {
        lp.maximize[p - 1] = c;
    }
    for p in 1..n {
        for q in (p + 1)..n {
            let d = x.dist(p, q);
            let mut up = vec![0.0; n - 1];
            up[p - 1] = 1.0;
            up[q - 1] = -1.0;
            let down = up.iter().map(|c| -c).collect();
            lp.constraints.push(Constraint::le(up, d));
            lp.constraints.push(Constraint::le(down, d));
        }
    }
    let (value, point) = solve(&lp)?.expect_optimal("ideal norm")?;
    let mut values = vec![0.0; n];
    values[1..].copy_from_slice(&point);
    Ok((value, LipFunction::new(values)))
}

/// Atom coefficients priced by the radius function.
///
/// Canonical form: no entry at the basepoint, at radius-0 points, or with
/// an exactly zero coefficient. Dropped entries are invisible to every
/// function that vanishes off the carrier, so this loses nothing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomVector(BTreeMap<usize, f64>);

impl AtomVector {
    pub fn new<I: IntoIterator<Item = (usize, f64)>>(rad: &RadTable, entries: I) -> Self {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (p, c) in entries {
            assert!(c.is_finite(), "coefficients must be finite");
            *map.entry(p).or_insert(0.0) += c;
        }
        map.retain(|&p, &mut c| p != 0 && c != 0.0 && rad.value(p) > 0.0);
        Self(map)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn coeff(&self, p: usize) -> f64 {
        self.0.get(&p).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().map(|(&p, &c)| (p, c))
    }

    pub fn support(&self) -> PointSet {
        self.0.keys().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum of |a_p| rad(p)`, the natural price of the atoms.
    pub fn weighted_cost(&self, rad: &RadTable) -> f64 {
        self.entries().map(|(p, c)| c.abs() * rad.value(p)).sum()
    }

    /// Reads the atoms as a moment vector, coefficient by coefficient.
    /// The restricted norm of the result is at most [`Self::weighted_cost`].
    pub fn to_moments(&self) -> MomentVector {
        MomentVector::from_entries(self.entries())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, c) in self.entries() {
            worst = worst.max((c - other.coeff(p)).abs());
        }
        for (p, c) in other.entries() {
            worst = worst.max((c - self.coeff(p)).abs());
        }
        worst
    }
}

/// Smallest radius value over the closed ball of radius r around p, after
/// checking that the larger ball of radius r_prime stays inside the
/// carrier. The margin is then at least `r_prime - r` up to metric
/// validation slack: any point outside the carrier is farther than
/// r_prime from p, hence farther than `r_prime - r` from the small ball.
pub fn interior_rad_margin(
    x: &PointedMetricSpace,
    a: &PointSet,
    p: usize,
    r: f64,
    r_prime: f64,
) -> Result<f64, IdealError> {
    if !(0.0 <= r && r < r_prime) {
        return Err(IdealError::BadRadii { r, r_prime });
    }
    if let Some(witness) = x.ball(p, r_prime).iter().find(|&q| !a.contains(q)) {
        return Err(IdealError::BallEscapesCarrier { p, r_prime, witness });
    }
    Ok(x.ball(p, r)
        .iter()
        .map(|q| rad(x, a, q))
        .fold(1.0, f64::min))
}
