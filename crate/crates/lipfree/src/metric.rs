//! Finite pointed metric spaces of unit diameter.
//!
//! Every space in this crate is built by [`PointedMetricSpace::from_raw_matrix`]:
//! a raw finite metric is rescaled to diameter 1 and a fresh basepoint (index 0)
//! is adjoined at distance exactly 1 from every other point. Two consequences
//! are relied on everywhere else: a function vanishing at the basepoint has sup
//! norm bounded by its Lipschitz constant, and every unit point mass has norm 1.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Absolute tolerance for triangle-inequality validation after rescaling.
pub const TRIANGLE_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("matrix is empty")]
    Empty,
    #[error("row {row} has length {len}, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("entry ({i},{j}) is not finite")]
    NotFinite { i: usize, j: usize },
    #[error("diagonal entry ({i},{i}) is {value}, expected 0")]
    NonZeroDiagonal { i: usize, value: f64 },
    #[error("asymmetric entries at ({i},{j}): {a} vs {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("distance ({i},{j}) = {value} is not positive; distinct points must be separated")]
    NonPositive { i: usize, j: usize, value: f64 },
    #[error("triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k})")]
    TriangleViolation { i: usize, j: usize, k: usize },
}

/// A set of point indices. Ordered so that every iteration is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PointSet(BTreeSet<usize>);

impl PointSet {
    pub fn new() -> Self {
        Self(BTreeSet::new())
    }

    pub fn insert(&mut self, p: usize) {
        self.0.insert(p);
    }

    pub fn contains(&self, p: usize) -> bool {
        self.0.contains(&p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        PointSet(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        PointSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl FromIterator<usize> for PointSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// A finite metric space with basepoint 0, diameter 1, and d(0,p) = 1 for p != 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PointedMetricSpace {
    n: usize,
    dist: Vec<f64>,
}

impl PointedMetricSpace {
    /// Validates a raw metric, rescales it to diameter 1, and adjoins the
    /// basepoint. Raw point i becomes point i + 1.
    ///
    /// A single raw point is allowed (nothing to rescale); otherwise the raw
    /// matrix must be a genuine metric with positive diameter.
    pub fn from_raw_matrix(raw: &[Vec<f64>]) -> Result<Self, MetricError> {
        let m = raw.len();
        if m == 0 {
            return Err(MetricError::Empty);
        }
        for (i, row) in raw.iter().enumerate() {
            if row.len() != m {
                return Err(MetricError::NotSquare { row: i, len: row.len(), expected: m });
            }
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() {
                    return Err(MetricError::NotFinite { i, j });
                }
                if i == j && d != 0.0 {
                    return Err(MetricError::NonZeroDiagonal { i, value: d });
                }
            }
        }
        let mut diam: f64 = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (raw[i][j], raw[j][i]);
                if (a - b).abs() > TRIANGLE_TOL * a.abs().max(1.0) {
                    return Err(MetricError::Asymmetric { i, j, a, b });
                }
                if a <= 0.0 {
                    return Err(MetricError::NonPositive { i, j, value: a });
                }
                diam = diam.max(a);
            }
        }

        // diam > 0 whenever m >= 2, by positivity. m == 1 adjoins only the basepoint.
        let n = m + 1;
        let mut dist = vec![0.0; n * n];
        for p in 1..n {
            dist[p] = 1.0;
            dist[p * n] = 1.0;
        }
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    // The maximal pair divides to exactly 1.
                    dist[(i + 1) * n + (j + 1)] = raw[i.min(j)][i.max(j)] / diam;
                }
            }
        }
        let space = Self { n, dist };

        for i in 0..m {
            for k in (i + 1)..m {
                for j in 0..m {
                    if j == i || j == k {
                        continue;
                    }
                    let direct = space.dist(i + 1, k + 1);
                    let via = space.dist(i + 1, j + 1) + space.dist(j + 1, k + 1);
                    if direct > via + TRIANGLE_TOL {
                        return Err(MetricError::TriangleViolation { i, j, k });
                    }
                }
            }
        }
        Ok(space)
    }

    /// Number of points, basepoint included.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dist(&self, p: usize, q: usize) -> f64 {
        self.dist[p * self.n + q]
    }

    pub fn points(&self) -> impl Iterator<Item = usize> {
        0..self.n
    }

    /// The closed ball around p.
    pub fn ball(&self, p: usize, r: f64) -> PointSet {
        self.points().filter(|&x| self.dist(p, x) <= r).collect()
    }

    /// The closed r-neighborhood of a set: union of the balls around its points.
    pub fn ball_of_set(&self, e: &PointSet, r: f64) -> PointSet {
        self.points().filter(|&x| self.dist_to_set(e, x) <= r).collect()
    }

    /// min over e in E of d(e, x); +inf when E is empty.
    pub fn dist_to_set(&self, e: &PointSet, x: usize) -> f64 {
        e.iter().map(|p| self.dist(p, x)).fold(f64::INFINITY, f64::min)
    }

    /// Row-major copy of the full normalized matrix, used when echoing
    /// instances into reports.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|p| (0..self.n).map(|q| self.dist(p, q)).collect())
            .collect()
    }
}
