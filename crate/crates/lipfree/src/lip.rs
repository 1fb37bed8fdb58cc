//! Lipschitz functions vanishing at the basepoint.
//!
//! With the unit-diameter convention, `sup_norm(f) <= lip_norm(f)` for every
//! function here: the basepoint sits at distance 1 from every other point, so
//! each value is itself a difference quotient.

use std::collections::BTreeMap;

use crate::metric::{PointSet, PointedMetricSpace};

/// Values on every point of a space, pinned to 0 at the basepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LipFunction {
    values: Vec<f64>,
}

impl LipFunction {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "function needs at least the basepoint");
        assert!(values[0] == 0.0, "value at the basepoint must be 0");
        assert!(values.iter().all(|v| v.is_finite()), "values must be finite");
        Self { values }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn value(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.values.iter().map(|v| c * v).collect())
    }
}

/// Largest difference quotient over all pairs.
pub fn lip_norm(x: &PointedMetricSpace, f: &LipFunction) -> f64 {
    let mut best: f64 = 0.0;
    for p in 0..x.n() {
        for q in (p + 1)..x.n() {
            best = best.max((f.value(p) - f.value(q)).abs() / x.dist(p, q));
        }
    }
    best
}

/// Largest difference quotient over pairs inside `set` only.
pub fn lip_norm_on(x: &PointedMetricSpace, f: &LipFunction, set: &PointSet) -> f64 {
    let pts: Vec<usize> = set.iter().collect();
    let mut best: f64 = 0.0;
    for (i, &p) in pts.iter().enumerate() {
        for &q in &pts[i + 1..] {
            best = best.max((f.value(p) - f.value(q)).abs() / x.dist(p, q));
        }
    }
    best
}

pub fn sup_norm(f: &LipFunction) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Extends partial values to the whole space without increasing the
/// Lipschitz constant, via the inf-convolution `min_s(f(s) + L d(s, x))`.
/// Points already in the domain keep their values bit for bit.
///
/// The domain must contain the basepoint with value 0.
pub fn mcshane_extend(
    x: &PointedMetricSpace,
    partial: &BTreeMap<usize, f64>,
) -> LipFunction {
    assert!(
        partial.get(&0) == Some(&0.0),
        "partial values must pin the basepoint to 0"
    );
    assert!(partial.keys().all(|&p| p < x.n()), "point index out of range");
    let mut l: f64 = 0.0;
    for (&p, &vp) in partial {
        for (&q, &vq) in partial.range((p + 1)..) {
            l = l.max((vp - vq).abs() / x.dist(p, q));
        }
    }
    let values = (0..x.n())
        .map(|p| match partial.get(&p) {
            Some(&v) => v,
            None => partial
                .iter()
                .map(|(&s, &vs)| vs + l * x.dist(s, p))
                .fold(f64::INFINITY, f64::min),
        })
        .collect();
    LipFunction::new(values)
}

/// The 1-Lipschitz bump `max(0, h - d(p, x))` of height `h` at `p`.
///
/// Heights never exceed 1, so the bump vanishes at the basepoint.
pub fn tent_bump(x: &PointedMetricSpace, p: usize, h: f64) -> LipFunction {
    assert!(p != 0 && p < x.n(), "bump center must be a non-basepoint point");
    assert!((0.0..=1.0).contains(&h), "height must lie in [0, 1]");
    LipFunction::new((0..x.n()).map(|q| (h - x.dist(p, q)).max(0.0)).collect())
}

pub fn pointwise_max(f: &LipFunction, g: &LipFunction) -> LipFunction {
    assert_eq!(f.len(), g.len());
    LipFunction::new(f.values().iter().zip(g.values()).map(|(a, b)| a.max(*b)).collect())
}

pub fn pointwise_min(f: &LipFunction, g: &LipFunction) -> LipFunction {
    assert_eq!(f.len(), g.len());
    LipFunction::new(f.values().iter().zip(g.values()).map(|(a, b)| a.min(*b)).collect())
}

/// Clamps `f` between a nonpositive floor and a nonnegative ceiling:
/// `max(g_minus, min(g_plus, f))`. The result stays within the largest of
/// the three Lipschitz constants because max and min never increase them.
pub fn truncate_between(
    g_minus: &LipFunction,
    f: &LipFunction,
    g_plus: &LipFunction,
) -> LipFunction {
    assert!(
        g_minus.values().iter().all(|&v| v <= 0.0) && g_plus.values().iter().all(|&v| v >= 0.0),
        "floor must be nonpositive and ceiling nonnegative"
    );
    pointwise_max(g_minus, &pointwise_min(g_plus, f))
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GlueError {
    #[error("theta must be positive, got {0}")]
    BadTheta(f64),
    #[error("point {p} appears in two pieces")]
    Overlap { p: usize },
    #[error("point index {p} out of range")]
    OutOfRange { p: usize },
    #[error("piece {piece} assigns {value} to the basepoint")]
    BasepointValue { piece: usize, value: f64 },
    #[error("piece {piece} has {which} norm {norm} > 1")]
    PieceNormTooLarge { piece: usize, which: &'static str, norm: f64 },
    #[error("pieces too close: d({p},{q}) = {dist} < theta/2")]
    SeparationTooSmall { p: usize, q: usize, dist: f64 },
}

/// A function glued from separated pieces, with the certified bound on its
/// Lipschitz constant over `domain`.
#[derive(Debug, Clone)]
pub struct Glued {
    pub f: LipFunction,
    /// Union of the pieces plus the basepoint. The certificate is about
    /// pairs inside this set; uncovered points store 0 but may sit
    /// arbitrarily close to a piece.
    pub domain: PointSet,
    /// `max(1, 4 / theta)`.
    pub bound: f64,
}

/// Glues pieces with pairwise set distance at least `theta / 2`, each of
/// Lipschitz and sup norm at most 1, into one function that is 0 off the
/// pieces. Within a piece the slope is at most 1; across pieces the values
/// differ by at most 2 over a distance of at least `theta / 2`. Hence the
/// certified bound `max(1, 4 / theta)`, and it is attained by two opposite
/// constant pieces exactly `theta / 2` apart.
pub fn glue_separated(
    x: &PointedMetricSpace,
    pieces: &[BTreeMap<usize, f64>],
    theta: f64,
) -> Result<Glued, GlueError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(GlueError::BadTheta(theta));
    }
    let mut values = vec![0.0; x.n()];
    let mut domain = PointSet::new();
    domain.insert(0);
    for (i, piece) in pieces.iter().enumerate() {
        for (&p, &v) in piece {
            if p >= x.n() {
                return Err(GlueError::OutOfRange { p });
            }
            if p == 0 && v != 0.0 {
                return Err(GlueError::BasepointValue { piece: i, value: v });
            }
            if domain.contains(p) && p != 0 {
                return Err(GlueError::Overlap { p });
            }
            domain.insert(p);
            values[p] = v;
        }
        let set: PointSet = piece.keys().copied().collect();
        let f = LipFunction::new(values.clone());
        let lip = lip_norm_on(x, &f, &set);
        if lip > 1.0 {
            return Err(GlueError::PieceNormTooLarge { piece: i, which: "lip", norm: lip });
        }
        let sup = piece.values().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > 1.0 {
            return Err(GlueError::PieceNormTooLarge { piece: i, which: "sup", norm: sup });
        }
    }
    for (i, a) in pieces.iter().enumerate() {
        for b in pieces.iter().skip(i + 1) {
            for &p in a.keys() {
                for &q in b.keys() {
                    let d = x.dist(p, q);
                    if d < theta / 2.0 {
                        return Err(GlueError::SeparationTooSmall { p, q, dist: d });
                    }
                }
            }
        }
    }
    Ok(Glued {
        f: LipFunction::new(values),
        domain,
        bound: 1.0f64.max(4.0 / theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::tests::half_pair;
    use proptest::prelude::*;

    #[test]
    fn norms_on_a_small_space() {
        let x = half_pair();
        let f = LipFunction::new(vec![0.0, 1.0, 0.5, 0.0]);
        // Steepest pairs: (0,1) with slope 1, and (1,2) with 0.5/0.5.
        assert_eq!(lip_norm(&x, &f), 1.0);
        assert_eq!(sup_norm(&f), 1.0);
    }

    #[test]
    #[should_panic(expected = "basepoint")]
    fn rejects_unpinned_basepoint() {
        LipFunction::new(vec![0.5, 0.0]);
    }

    #[test]
    fn mcshane_matches_hand_computation() {
        let x = half_pair();
        let partial = BTreeMap::from([(0, 0.0), (1, 1.0)]);
        let f = mcshane_extend(&x, &partial);
        // L = 1; f(2) = min(d(0,2), 1 + d(1,2)) = min(1, 1.5), same at 3.
        assert_eq!(f.value(1), 1.0);
        assert_eq!(f.value(2), 1.0);
        assert_eq!(f.value(3), 1.0);
        assert!((lip_norm(&x, &f) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mcshane_is_idempotent() {
        let x = half_pair();
        let f = mcshane_extend(&x, &BTreeMap::from([(0, 0.0), (2, -0.75)]));
        let full: BTreeMap<usize, f64> =
            (0..x.n()).map(|p| (p, f.value(p))).collect();
        let again = mcshane_extend(&x, &full);
        assert_eq!(f, again);
    }

    #[test]
    fn single_point_domain_extends_to_zero() {
        let x = half_pair();
        let f = mcshane_extend(&x, &BTreeMap::from([(0, 0.0)]));
        assert_eq!(f, LipFunction::zero(x.n()));
    }

    #[test]
    fn tent_bump_values() {
        let x = half_pair();
        let f = tent_bump(&x, 1, 0.75);
        assert_eq!(f.value(0), 0.0);
        assert_eq!(f.value(1), 0.75);
        assert_eq!(f.value(2), 0.25);
        assert_eq!(f.value(3), 0.0);
        assert!(lip_norm(&x, &f) <= 1.0 + 1e-12);
    }

    #[test]
    fn truncation_stays_between_bounds() {
        let x = half_pair();
        let ceil = tent_bump(&x, 1, 0.5);
        let floor = tent_bump(&x, 2, 0.5).scale(-1.0);
        let f = LipFunction::new(vec![0.0, 0.9, -0.9, 0.4]);
        let t = truncate_between(&floor, &f, &ceil);
        for p in 0..x.n() {
            assert!(t.value(p) >= floor.value(p) && t.value(p) <= ceil.value(p));
        }
        let cap = lip_norm(&x, &floor).max(lip_norm(&x, &f)).max(lip_norm(&x, &ceil));
        assert!(lip_norm(&x, &t) <= cap + 1e-12);
    }

    #[test]
    fn glue_two_opposite_pieces_attains_bound() {
        // Normalized distances: d(1,2) = 0.5, both 1 away from point 3.
        let x = PointedMetricSpace::from_raw_matrix(&[
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 2.0],
            vec![2.0, 2.0, 0.0],
        ])
        .unwrap();
        let pieces = vec![
            BTreeMap::from([(1, 1.0)]),
            BTreeMap::from([(2, -1.0)]),
        ];
        let glued = glue_separated(&x, &pieces, 1.0).unwrap();
        assert_eq!(glued.bound, 4.0);
        let recomputed = lip_norm_on(&x, &glued.f, &glued.domain);
        assert!(recomputed <= glued.bound + 1e-9);
        assert!((recomputed - 4.0).abs() <= 1e-9, "bound should be attained");
        assert_eq!(glued.f.value(3), 0.0);
    }

    #[test]
    fn glue_rejects_close_pieces_with_witness() {
        let x = half_pair();
        let pieces = vec![
            BTreeMap::from([(1, 1.0)]),
            BTreeMap::from([(2, -1.0)]),
        ];
        // d(1,2) = 0.5 < 0.55.
        match glue_separated(&x, &pieces, 1.1) {
            Err(GlueError::SeparationTooSmall { p, q, dist }) => {
                assert_eq!((p, q), (1, 2));
                assert_eq!(dist, 0.5);
            }
            other => panic!("expected separation error, got {other:?}"),
        }
    }

    #[test]
    fn glue_rejects_oversized_piece() {
        let x = half_pair();
        let pieces = vec![BTreeMap::from([(1, 1.5)])];
        assert!(matches!(
            glue_separated(&x, &pieces, 0.5),
            Err(GlueError::PieceNormTooLarge { which: "sup", .. })
        ));
    }

    #[test]
    fn glue_single_piece_keeps_values() {
        let x = half_pair();
        let glued = glue_separated(&x, &[BTreeMap::from([(2, 0.3)])], 0.25).unwrap();
        assert_eq!(glued.f.value(2), 0.3);
        assert_eq!(glued.f.value(1), 0.0);
        assert!(lip_norm_on(&x, &glued.f, &glued.domain) <= glued.bound + 1e-9);
    }

    proptest! {
        #[test]
        fn sup_norm_below_lip_norm(raw in crate::metric::tests::raw_cloud(),
                                   fv in prop::collection::vec(-1.0f64..1.0, 6)) {
            let x = PointedMetricSpace::from_raw_matrix(&raw).unwrap();
            let mut w = vec![0.0];
            w.extend(fv.iter().take(x.n() - 1));
            while w.len() < x.n() { w.push(0.0); }
            let f = LipFunction::new(w);
            prop_assert!(sup_norm(&f) <= lip_norm(&x, &f) + 1e-12);
        }

        #[test]
        fn product_rule_bound(raw in crate::metric::tests::raw_cloud(),
                              fv in prop::collection::vec(-1.0f64..1.0, 6),
                              gv in prop::collection::vec(-1.0f64..1.0, 6)) {
            let x = PointedMetricSpace::from_raw_matrix(&raw).unwrap();
            let take = |v: &[f64]| {
                let mut w = vec![0.0];
                w.extend(v.iter().take(x.n() - 1));
                while w.len() < x.n() { w.push(0.0); }
                LipFunction::new(w)
            };
            let f = take(&fv);
            let g = take(&gv);
            let prod = LipFunction::new(
                f.values().iter().zip(g.values()).map(|(a, b)| a * b).collect(),
            );
            let bound = lip_norm(&x, &f) * sup_norm(&g) + sup_norm(&f) * lip_norm(&x, &g);
            prop_assert!(lip_norm(&x, &prod) <= bound + 1e-9);
        }

        #[test]
        fn lattice_operations_do_not_increase_norms(
            raw in crate::metric::tests::raw_cloud(),
            fv in prop::collection::vec(-1.0f64..1.0, 6),
            gv in prop::collection::vec(-1.0f64..1.0, 6),
        ) {
            let x = PointedMetricSpace::from_raw_matrix(&raw).unwrap();
            let take = |v: &[f64]| {
                let mut w = vec![0.0];
                w.extend(v.iter().take(x.n() - 1));
                while w.len() < x.n() { w.push(0.0); }
                LipFunction::new(w)
            };
            let f = take(&fv);
            let g = take(&gv);
            let cap = lip_norm(&x, &f).max(lip_norm(&x, &g)) + 1e-12;
            prop_assert!(lip_norm(&x, &pointwise_max(&f, &g)) <= cap);
            prop_assert!(lip_norm(&x, &pointwise_min(&f, &g)) <= cap);
        }

        #[test]
        fn mcshane_preserves_constant_and_values(
            raw in crate::metric::tests::raw_cloud(),
            vals in prop::collection::vec(-1.0f64..1.0, 3),
            mask in 1usize..7,
        ) {
            let x = PointedMetricSpace::from_raw_matrix(&raw).unwrap();
            let mut partial = BTreeMap::from([(0usize, 0.0f64)]);
            let mut vi = 0;
            for p in 1..x.n() {
                if mask & (1 << (p % 3)) != 0 && vi < vals.len() {
                    partial.insert(p, vals[vi]);
                    vi += 1;
                }
            }
            let mut l: f64 = 0.0;
            for (&p, &vp) in &partial {
                for (&q, &vq) in partial.range((p + 1)..) {
                    l = l.max((vp - vq).abs() / x.dist(p, q));
                }
            }
            let f = mcshane_extend(&x, &partial);
            for (&p, &v) in &partial {
                prop_assert_eq!(f.value(p), v);
            }
            prop_assert!(lip_norm(&x, &f) <= l + 1e-9);
        }
    }
}
