//! Deterministic random instances and the JSON instance format.
//!
//! Generators emit raw distance matrices — what a user would feed in —
//! not normalized ones; validation and scaling happen when the matrix is
//! turned into a space. Everything is driven by a seeded ChaCha stream,
//! so a (generator, size, seed) triple always reproduces the same matrix
//! bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InstanceError {
    #[error("an instance needs at least one point")]
    Empty,
    #[error("give exactly one of \"matrix\" or \"points\"")]
    MatrixOrPoints,
    #[error("\"metric\" only applies to \"points\"")]
    MetricWithoutPoints,
    #[error("point {i} has {len} coordinates, expected {expected}")]
    RaggedPoints { i: usize, len: usize, expected: usize },
    #[error("point {i} has a non-finite coordinate")]
    BadCoordinate { i: usize },
    #[error("points must be nonempty with at least one coordinate each")]
    NoCoordinates,
}

/// Families of random raw matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Independent uniform points in the unit cube, euclidean distances.
    UniformCube,
    /// Gaussian blobs around a few uniform centers, euclidean distances.
    Clustered,
    /// A few tight blobs with all cross-blob distances exactly 1, so the
    /// raw diameter is already 1 and normalization changes nothing.
    TwoScale,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 3] = [
        GeneratorKind::UniformCube,
        GeneratorKind::Clustered,
        GeneratorKind::TwoScale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::UniformCube => "uniform-cube",
            GeneratorKind::Clustered => "clustered",
            GeneratorKind::TwoScale => "two-scale",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown generator {s:?}; expected uniform-cube, clustered, or two-scale"))
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

fn min_pairwise(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min(euclid(a, b));
        }
    }
    best
}

fn matrix_from_points(points: &[Vec<f64>], dist: fn(&[f64], &[f64]) -> f64) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| points.iter().map(|b| dist(a, b)).collect())
        .collect()
}

/// Samples a raw distance matrix over `n` points. Resamples on point
/// collisions, so the matrix always validates as a metric; deterministic
/// in (kind, n, seed).
pub fn random_raw_matrix(
    kind: GeneratorKind,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, InstanceError> {
    if n == 0 {
        return Err(InstanceError::Empty);
    }
    if n == 1 {
        return Ok(vec![vec![0.0]]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        GeneratorKind::UniformCube => {
            let points = loop {
                let points: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
                if min_pairwise(&points) > 1e-9 {
                    break points;
                }
            };
            matrix_from_points(&points, euclid)
        }
        GeneratorKind::Clustered => {
            let k = (n / 4).max(1);
            let points = loop {
                let centers: Vec<Vec<f64>> =
                    (0..k).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
                let points: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        centers[i % k]
                            .iter()
                            .map(|c| c + 0.05 * standard_normal(&mut rng))
                            .collect()
                    })
                    .collect();
                if min_pairwise(&points) > 1e-9 {
                    break points;
                }
            };
            matrix_from_points(&points, euclid)
        }
        GeneratorKind::TwoScale => {
            let k = if n < 9 { 2 } else { 3 };
            let points = loop {
                let points: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..3).map(|_| rng.gen_range(0.0..0.2)).collect())
                    .collect();
                if min_pairwise(&points) > 1e-9 {
                    break points;
                }
            };
            // Cross-blob distances are written as the constant 1.0, not
            // computed, so the raw diameter is exactly 1: blob offsets
            // never pick up rounding noise. Intra-blob distances stay
            // below 0.2 * sqrt(3), well under 1, keeping the triangle
            // inequality trivial across blobs.
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i % k == j % k {
                                euclid(&points[i], &points[j])
                            } else {
                                1.0
                            }
                        })
                        .collect()
                })
                .collect()
        }
    })
}

/// Point metrics accepted in the JSON instance format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PointMetric {
    #[default]
    Euclidean,
    Linf,
}

/// The `instance` object of the JSON input format: either a raw distance
/// matrix, or a point cloud with a metric to compute one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InstanceInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<PointMetric>,
}

impl InstanceInput {
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Self {
        Self { matrix: Some(matrix), ..Self::default() }
    }

    /// Resolves to a raw matrix, computing distances for point clouds.
    pub fn raw_matrix(&self) -> Result<Vec<Vec<f64>>, InstanceError> {
        match (&self.matrix, &self.points) {
            (Some(_), Some(_)) | (None, None) => Err(InstanceError::MatrixOrPoints),
            (Some(m), None) => {
                if self.metric.is_some() {
                    return Err(InstanceError::MetricWithoutPoints);
                }
                Ok(m.clone())
            }
            (None, Some(points)) => {
                let first = points.first().ok_or(InstanceError::NoCoordinates)?;
                if first.is_empty() {
                    return Err(InstanceError::NoCoordinates);
                }
                for (i, p) in points.iter().enumerate() {
                    if p.len() != first.len() {
                        return Err(InstanceError::RaggedPoints {
                            i,
                            len: p.len(),
                            expected: first.len(),
                        });
                    }
                    if p.iter().any(|c| !c.is_finite()) {
                        return Err(InstanceError::BadCoordinate { i });
                    }
                }
                let dist = match self.metric.unwrap_or_default() {
                    PointMetric::Euclidean => euclid,
                    PointMetric::Linf => linf,
                };
                Ok(matrix_from_points(points, dist))
            }
        }
    }
}
