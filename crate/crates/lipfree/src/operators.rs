//! Weight operators: multiplication by a cutoff ramp adapted to a set.
//!
//! Given a nonempty set E and a width θ, the weight is 1 on the closed
//! θ/2-neighbourhood of E, 0 outside the open θ-neighbourhood, and ramps
//! linearly in between with slope 2/θ. Multiplying coefficients by the
//! weight keeps a moment vector supported near E and perturbs its norm by
//! a factor of at most 1 + 2/θ. The branchy evaluation below makes the
//! flat regions exact, so the support containments hold as set identities
//! rather than up to rounding.

use crate::free::MomentVector;
use crate::lip::LipFunction;
use crate::metric::{PointSet, PointedMetricSpace};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OperatorError {
    #[error("the weight needs a nonempty set")]
    EmptySet,
    #[error("the weight width must be a positive finite number, got {theta}")]
    BadTheta { theta: f64 },
    #[error("set index {p} is out of range")]
    IndexOutOfRange { p: usize },
}

/// One weight, tabulated at every point of the space.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    values: Vec<f64>,
    set: PointSet,
    theta: f64,
}

impl WeightProfile {
    pub fn new(x: &PointedMetricSpace, e: &PointSet, theta: f64) -> Result<Self, OperatorError> {
        if e.is_empty() {
            return Err(OperatorError::EmptySet);
        }
        if let Some(p) = e.iter().find(|&p| p >= x.n()) {
            return Err(OperatorError::IndexOutOfRange { p });
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(OperatorError::BadTheta { theta });
        }
        let values = x
            .points()
            .map(|p| {
                let t = x.dist_to_set(e, p);
                if t >= theta {
                    0.0
                } else if 2.0 * t <= theta {
                    1.0
                } else {
                    (2.0 - 2.0 * t / theta).clamp(0.0, 1.0)
                }
            })
            .collect();
        Ok(Self { values, set: e.clone(), theta })
    }

    pub fn value(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn set(&self) -> &PointSet {
        &self.set
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Slope bound for the ramp; the weight moves by at most this much
    /// per unit of distance.
    pub fn lip_bound(&self) -> f64 {
        2.0 / self.theta
    }

    /// Norm inflation bound for multiplication by this weight, on
    /// functions and on moment vectors alike.
    pub fn operator_bound(&self) -> f64 {
        1.0 + 2.0 / self.theta
    }

    /// Pointwise product with the weight. Keeps the basepoint value 0.
    pub fn apply_to_function(&self, f: &LipFunction) -> LipFunction {
        LipFunction::new(
            self.values
                .iter()
                .enumerate()
                .map(|(p, w)| w * f.value(p))
                .collect(),
        )
    }

    /// Coefficient-wise product with the weight. Entries where the weight
    /// is exactly 0 disappear from the support.
    pub fn apply_to_moments(&self, v: &MomentVector) -> MomentVector {
        MomentVector::from_entries(v.entries().map(|(p, c)| (p, c * self.values[p])))
    }
}

/// Whether multiplying by this weight returns the vector bit for bit.
pub fn is_fixed_point(v: &MomentVector, w: &WeightProfile) -> bool {
    w.apply_to_moments(v) == *v
}

/// Fixes a vector by the weight built on its own support: every supported
/// point is at distance 0 from the set, where the weight is exactly 1.
/// The zero vector has no support to build a weight on and is fixed by
/// every weight, so it short-circuits to true.
pub fn fixed_point_check(
    x: &PointedMetricSpace,
    v: &MomentVector,
    theta: f64,
) -> Result<bool, OperatorError> {
    if v.is_zero() {
        return Ok(true);
    }
    let w = WeightProfile::new(x, &v.support(), theta)?;
    Ok(is_fixed_point(v, &w))
}
