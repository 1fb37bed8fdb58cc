//! The free norm of finitely supported moment vectors.
//!
//! A moment vector assigns a real coefficient to each non-basepoint point.
//! Its norm is computed along two independent routes: a transshipment primal
//! (cheapest signed flow whose net divergence realizes the coefficients,
//! where the basepoint absorbs any imbalance for free) and a Lipschitz dual
//! (best pairing against a function of Lipschitz constant at most 1). Strong
//! duality makes the pair self-checking; callers treat a gap above
//! [`crate::CROSS_CHECK_TOL`] as a defect.

use std::collections::BTreeMap;

use crate::lip::LipFunction;
use crate::metric::{PointSet, PointedMetricSpace};
use crate::solver::{solve, Constraint, LinearProgram, SolverError};

/// A finite real combination of unit point masses away from the basepoint.
///
/// Canonical form: exact zeros and basepoint entries are never stored, so
/// equality is plain coefficient equality.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentVector(BTreeMap<usize, f64>);

impl MomentVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit mass at p.
    pub fn delta(p: usize) -> Self {
        assert!(p != 0, "the mass at the basepoint is the zero vector");
        Self(BTreeMap::from([(p, 1.0)]))
    }

    /// Sums duplicate entries, then drops the basepoint coordinate and any
    /// exact zeros.
    pub fn from_entries<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> Self {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (p, c) in entries {
            assert!(c.is_finite(), "coefficients must be finite");
            *map.entry(p).or_insert(0.0) += c;
        }
        map.retain(|&p, &mut c| p != 0 && c != 0.0);
        Self(map)
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

    pub fn scale(&self, c: f64) -> Self {
        Self::from_entries(self.entries().map(|(p, v)| (p, c * v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_entries(self.entries().chain(other.entries()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// The pairing `sum of v_p f(p)`.
    pub fn eval(&self, f: &LipFunction) -> f64 {
        self.entries().map(|(p, c)| c * f.value(p)).sum()
    }

    pub fn l1(&self) -> f64 {
        self.entries().map(|(_, c)| c.abs()).sum()
    }

    /// Largest absolute coefficient difference against `other`.
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

/// Signed flow amounts on ordered pairs of distinct points. The basepoint
/// may appear on either side. Zero flows are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransshipmentPlan(BTreeMap<(usize, usize), f64>);

impl TransshipmentPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I: IntoIterator<Item = (usize, usize, f64)>>(entries: I) -> Self {
        let mut plan = Self::new();
        for (p, q, b) in entries {
            plan.add_flow(p, q, b);
        }
        plan
    }

    /// Merges `amount` into the (p, q) flow, removing the entry if it
    /// cancels to exactly zero.
    pub fn add_flow(&mut self, p: usize, q: usize, amount: f64) {
        assert!(p != q, "flows connect distinct points");
        assert!(amount.is_finite());
        if amount == 0.0 {
            return;
        }
        let slot = self.0.entry((p, q)).or_insert(0.0);
        *slot += amount;
        if *slot == 0.0 {
            self.0.remove(&(p, q));
        }
    }

    pub fn flows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.0.iter().map(|(&(p, q), &b)| (p, q, b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Transport cost `sum of |b| d`.
    pub fn cost(&self, x: &PointedMetricSpace) -> f64 {
        self.flows().map(|(p, q, b)| b.abs() * x.dist(p, q)).sum()
    }

    /// Net divergence at each non-basepoint point: outflow minus inflow.
    pub fn moments(&self) -> MomentVector {
        MomentVector::from_entries(
            self.flows()
                .flat_map(|(p, q, b)| [(p, b), (q, -b)]),
        )
    }
}

/// Ordered pairs of distinct indices below n, in iteration order.
pub(crate) fn ordered_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
}

/// Free norm via the Lipschitz dual: maximize the pairing over functions
/// with every difference quotient at most 1. Returns the optimum and a
/// maximizing function.
pub fn dual_norm(
    x: &PointedMetricSpace,
    v: &MomentVector,
) -> Result<(f64, LipFunction), SolverError> {
    let n = x.n();
    let mut lp = LinearProgram::new(n - 1);
    // Distance to the basepoint caps each value at 1.
    lp.bounds = vec![(-1.0, 1.0); n - 1];
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
    let (value, point) = solve(&lp)?.expect_optimal("dual norm")?;
    let mut values = vec![0.0; n];
    values[1..].copy_from_slice(&point);
    Ok((value, LipFunction::new(values)))
}

/// Free norm via transshipment: cheapest nonnegative flow on ordered pairs
/// whose net divergence matches `v` away from the basepoint. Returns the
/// optimal cost and one optimal plan.
pub fn primal_norm(
    x: &PointedMetricSpace,
    v: &MomentVector,
) -> Result<(f64, TransshipmentPlan), SolverError> {
    let n = x.n();
    let pairs: Vec<(usize, usize)> = ordered_pairs(n).collect();
    let mut lp = LinearProgram::new(pairs.len());
    lp.bounds = vec![(0.0, f64::INFINITY); pairs.len()];
    for (j, &(p, q)) in pairs.iter().enumerate() {
        lp.maximize[j] = -x.dist(p, q);
    }
    for p in 1..n {
        let mut coeffs = vec![0.0; pairs.len()];
        for (j, &(a, b)) in pairs.iter().enumerate() {
            if a == p {
                coeffs[j] += 1.0;
            }
            if b == p {
                coeffs[j] -= 1.0;
            }
        }
        lp.constraints.push(Constraint::eq(coeffs, v.coeff(p)));
    }
    let (value, point) = solve(&lp)?.expect_optimal("primal norm")?;
    let plan = TransshipmentPlan::from_entries(
        pairs
            .iter()
            .zip(&point)
            .map(|(&(p, q), &b)| (p, q, b)),
    );
    Ok((-value, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::tests::half_pair;
    use proptest::prelude::*;

    #[test]
    fn point_masses_have_unit_norm() {
        let x = half_pair();
        for p in 1..x.n() {
            let (dual, witness) = dual_norm(&x, &MomentVector::delta(p)).unwrap();
            let (primal, plan) = primal_norm(&x, &MomentVector::delta(p)).unwrap();
            assert!((dual - 1.0).abs() <= 1e-9);
            assert!((primal - 1.0).abs() <= 1e-9);
            assert!(crate::lip::lip_norm(&x, &witness) <= 1.0 + 1e-9);
            assert!((plan.cost(&x) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn mass_difference_gives_distance() {
        let x = half_pair();
        let v = MomentVector::delta(1).sub(&MomentVector::delta(2));
        let (dual, _) = dual_norm(&x, &v).unwrap();
        let (primal, plan) = primal_norm(&x, &v).unwrap();
        assert!((dual - 0.5).abs() <= 1e-9);
        assert!((primal - 0.5).abs() <= 1e-9);
        assert!(plan.moments().max_abs_diff(&v) <= 1e-9);
    }

    #[test]
    fn zero_vector_has_zero_norm_and_empty_plan() {
        let x = half_pair();
        let (dual, _) = dual_norm(&x, &MomentVector::zero()).unwrap();
        let (primal, plan) = primal_norm(&x, &MomentVector::zero()).unwrap();
        assert_eq!(dual, 0.0);
        assert_eq!(primal, 0.0);
        assert!(plan.is_empty());
    }

    #[test]
    fn canonical_form_drops_zeros_and_basepoint() {
        let v = MomentVector::from_entries([(0, 5.0), (1, 1.0), (2, -1.0), (2, 1.0)]);
        assert_eq!(v, MomentVector::delta(1));
        assert_eq!(v.coeff(0), 0.0);
        assert_eq!(v.support().len(), 1);
    }

    #[test]
    fn eval_pairs_coefficients_with_values() {
        let x = half_pair();
        let v = MomentVector::from_entries([(1, 2.0), (3, -0.5)]);
        let f = crate::lip::tent_bump(&x, 1, 0.75);
        assert!((v.eval(&f) - 2.0 * 0.75).abs() <= 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        /// The master oracle: both formulations agree.
        #[test]
        fn primal_and_dual_agree(raw in crate::metric::tests::raw_cloud(),
                                 cs in prop::collection::vec(prop::option::of(-1.0f64..1.0), 6)) {
            let x = PointedMetricSpace::from_raw_matrix(&raw).unwrap();
            let v = MomentVector::from_entries(
                cs.iter()
                    .enumerate()
                    .filter_map(|(i, c)| c.map(|c| (1 + i % (x.n() - 1), c))),
            );
            let (dual, witness) = dual_norm(&x, &v).unwrap();
            let (primal, plan) = primal_norm(&x, &v).unwrap();
            prop_assert!((dual - primal).abs() <= crate::CROSS_CHECK_TOL);
            prop_assert!(plan.moments().max_abs_diff(&v) <= 1e-9);
            prop_assert!((v.eval(&witness) - dual).abs() <= 1e-9);
            prop_assert!(crate::lip::lip_norm(&x, &witness) <= 1.0 + 1e-9);
            // Unit masses make the l1 mass an upper bound.
            prop_assert!(dual <= v.l1() + 1e-9);
        }

        #[test]
        fn norm_axioms(raw in crate::metric::tests::raw_cloud(),
                       c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, scale in -2.0f64..2.0) {
            let x = PointedMetricSpace::from_raw_matrix(&raw).unwrap();
            let v = MomentVector::from_entries([(1, c1), (x.n() - 1, c2)]);
            let w = MomentVector::from_entries([(1, c2 * 0.5), (x.n() - 1, -c1)]);
            let norm = |u: &MomentVector| dual_norm(&x, u).unwrap().0;
            prop_assert!((norm(&v.scale(scale)) - scale.abs() * norm(&v)).abs() <= 1e-9);
            prop_assert!(norm(&v.add(&w)) <= norm(&v) + norm(&w) + 1e-9);
            if !v.is_zero() {
                prop_assert!(norm(&v) > 0.0);
            }
        }
    }
}
