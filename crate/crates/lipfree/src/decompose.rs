//! Certified decompositions of moment vectors relative to a carrier.
//!
//! The pipeline:
//!
//! 1. [`optimal_lift`] writes a vector as flows plus priced atoms at the
//!    exact cost of its restricted norm (one linear program; the match
//!    with the dual program is the headline cross-check).
//! 2. [`close_pairs_decompose`] splits the lift's flows into close pairs
//!    (kept as flows) and far pairs (converted to atoms), certifying
//!    total cost below `3/c` whenever the restricted norm is below 1.
//! 3. [`separated_rebalance`] cancels opposite-sign atoms that sit closer
//!    than the average of their radii, transferring mass along recorded
//!    flows; every step zeroes at least one atom exactly, so the greedy
//!    loop terminates and leaves all surviving opposite-sign pairs
//!    separated — a condition tested exactly, not approximately.
//! 4. [`mass_bound_check`] reads off the local mass bound `4/theta` that
//!    separated, cost-bounded atom families obey on interior balls.

use crate::free::{ordered_pairs, MomentVector, TransshipmentPlan};
use crate::ideal::{ideal_norm, AtomVector, RadTable};
use crate::metric::PointedMetricSpace;
use crate::solver::{solve, Constraint, LinearProgram, SolverError};

#[derive(Debug, thiserror::Error)]
pub enum DecomposeError {
    #[error("close-pair constant must be in (0, 1], got {c}")]
    BadConstant { c: f64 },
    #[error("restricted norm is {norm}, but the certificate needs it below 1")]
    NormTooLarge { norm: f64 },
    #[error("every point of the sampled ball must have positive radius, \
             but point {witness} in ball({p}, {r}) has radius 0")]
    ZeroRadiusInBall { p: usize, r: f64, witness: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// A vector realized as transport flows plus priced atoms, matching the
/// vector coefficient-for-coefficient at every positive-radius point.
#[derive(Debug, Clone)]
pub struct QuotientDecomposition {
    pub plan: TransshipmentPlan,
    pub atoms: AtomVector,
    pub cost: f64,
}

/// Cheapest realization of `v` as flows (priced by distance) plus atoms
/// (priced by radius), constrained only at positive-radius points —
/// mass parked at zero-radius points or the basepoint is free. The
/// optimal cost equals the restricted norm of `v`.
pub fn optimal_lift(
    x: &PointedMetricSpace,
    rad: &RadTable,
    v: &MomentVector,
) -> Result<QuotientDecomposition, SolverError> {
    let n = x.n();
    let pairs: Vec<(usize, usize)> = ordered_pairs(n).collect();
    let priced: Vec<usize> = (1..n).filter(|&p| rad.value(p) > 0.0).collect();
    let nflows = pairs.len();
    let nvars = nflows + 2 * priced.len();

    let mut lp = LinearProgram::new(nvars);
    lp.bounds = vec![(0.0, f64::INFINITY); nvars];
    for (k, &(p, q)) in pairs.iter().enumerate() {
        lp.maximize[k] = -x.dist(p, q);
    }
    for (i, &p) in priced.iter().enumerate() {
        lp.maximize[nflows + 2 * i] = -rad.value(p);
        lp.maximize[nflows + 2 * i + 1] = -rad.value(p);
    }
    for (i, &p) in priced.iter().enumerate() {
        let mut coeffs = vec![0.0; nvars];
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if a == p {
                coeffs[k] = 1.0;
            } else if b == p {
                coeffs[k] = -1.0;
            }
        }
        coeffs[nflows + 2 * i] = 1.0;
        coeffs[nflows + 2 * i + 1] = -1.0;
        lp.constraints.push(Constraint::eq(coeffs, v.coeff(p)));
    }

    let (value, point) = solve(&lp)?.expect_optimal("optimal lift")?;
    let plan = TransshipmentPlan::from_entries(
        pairs
            .iter()
            .enumerate()
            .filter(|&(k, _)| point[k] != 0.0)
            .map(|(k, &(p, q))| (p, q, point[k])),
    );
    let atoms = AtomVector::new(
        rad,
        priced
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, point[nflows + 2 * i] - point[nflows + 2 * i + 1])),
    );
    Ok(QuotientDecomposition { plan, atoms, cost: -value })
}

/// Radius below which a flow between p and q counts as close.
fn close_threshold(rad: &RadTable, p: usize, q: usize, c: f64) -> f64 {
    c * rad.value(p).min(rad.value(q))
}

/// The two sides of the far-pair bound: for any pair left out of the
/// close set (`d > c min(rad_p, rad_q)`), the radii sum is controlled by
/// the distance, `rad_p + rad_q <= 3 d / c`. Returned as (lhs, rhs) so
/// callers can record the comparison.
pub fn far_pair_inequality(
    x: &PointedMetricSpace,
    rad: &RadTable,
    p: usize,
    q: usize,
    c: f64,
) -> (f64, f64) {
    (
        rad.value(p) + rad.value(q),
        3.0 * x.dist(p, q) / c,
    )
}

/// A lift split into certified close flows and atoms.
#[derive(Debug, Clone)]
pub struct ClosePairDecomposition {
    /// Restricted norm of the input, which the certificate requires below 1.
    pub norm: f64,
    /// Flows kept: each runs between points closer than `c` times the
    /// smaller of their radii (hence both endpoints have positive radius).
    pub close_plan: TransshipmentPlan,
    /// Atoms: the lift's own atoms plus both endpoints of each far flow.
    pub atoms: AtomVector,
    pub c: f64,
    /// Close-flow transport cost plus atom cost; below `3/c`.
    pub cost: f64,
}

/// Decomposes a vector of restricted norm below 1 into close flows and
/// atoms with total cost below `3/c`.
///
/// Far flows are turned into a pair of atoms carrying the flow's mass at
/// its endpoints; the far-pair bound prices that conversion at no more
/// than `3/c` times the flow's own cost, and everything else is carried
/// over unchanged, so the total stays within `3/c` times the optimal
/// lift cost — which is the restricted norm, below 1.
pub fn close_pairs_decompose(
    x: &PointedMetricSpace,
    rad: &RadTable,
    v: &MomentVector,
    c: f64,
) -> Result<ClosePairDecomposition, DecomposeError> {
    if !(c.is_finite() && 0.0 < c && c <= 1.0) {
        return Err(DecomposeError::BadConstant { c });
    }
    let (norm, _) = ideal_norm(x, rad.carrier(), v)?;
    if norm >= 1.0 {
        return Err(DecomposeError::NormTooLarge { norm });
    }
    let lift = optimal_lift(x, rad, v)?;

    let mut close_plan = TransshipmentPlan::new();
    let mut atom_entries: Vec<(usize, f64)> = lift.atoms.entries().collect();
    for (p, q, b) in lift.plan.flows() {
        if x.dist(p, q) <= close_threshold(rad, p, q, c) {
            close_plan.add_flow(p, q, b);
        } else {
            atom_entries.push((p, b));
            atom_entries.push((q, -b));
        }
    }
    let atoms = AtomVector::new(rad, atom_entries);
    let cost = close_plan.cost(x) + atoms.weighted_cost(rad);
    Ok(ClosePairDecomposition { norm, close_plan, atoms, c, cost })
}

/// Result of the greedy cancellation pass.
#[derive(Debug, Clone)]
pub struct RebalanceOutcome {
    /// Surviving atoms: any two of opposite sign are at distance at least
    /// the average of their radii.
    pub atoms: AtomVector,
    /// Transfers performed; initial atoms = surviving atoms + plan, as
    /// moment vectors.
    pub plan: TransshipmentPlan,
    /// The same transfers in execution order, (positive atom, negative
    /// atom, amount). Replaying them over the initial atoms reproduces
    /// the surviving atoms bit for bit — see [`replay_transfers`].
    pub transfers: Vec<(usize, usize, f64)>,
    pub steps: usize,
    pub initial_cost: f64,
    /// Surviving atom cost plus transfer cost; never above the initial.
    pub final_cost: f64,
    /// Combined cost after each step, starting at the initial cost; each
    /// entry is at most its predecessor.
    pub cost_trace: Vec<f64>,
}

/// The opposite-sign pair violating separation that carries the most
/// mass, largest magnitude first, then the partner magnitude, then
/// smallest indices. None when the family is already separated.
fn worst_violating_pair(
    x: &PointedMetricSpace,
    rad: &RadTable,
    atoms: &std::collections::BTreeMap<usize, f64>,
) -> Option<(usize, usize)> {
    let mut best: Option<((f64, f64), (usize, usize))> = None;
    for (&p, &ap) in atoms {
        for (&q, &aq) in atoms.range((p + 1)..) {
            if ap * aq < 0.0 && x.dist(p, q) < (rad.value(p) + rad.value(q)) / 2.0 {
                let key = (ap.abs().max(aq.abs()), ap.abs().min(aq.abs()));
                if best.as_ref().is_none_or(|&(bk, _)| key > bk) {
                    best = Some((key, (p, q)));
                }
            }
        }
    }
    best.map(|(_, pair)| pair)
}

/// Greedy cancellation: while some opposite-sign pair of atoms sits
/// closer than the average of its radii, transfer the smaller magnitude
/// across, zeroing it exactly. Moving mass costs the distance and saves
/// both radii, so the total cost never increases; each step kills an
/// atom, so at most one step per atom runs.
pub fn separated_rebalance(
    x: &PointedMetricSpace,
    rad: &RadTable,
    atoms: &AtomVector,
) -> RebalanceOutcome {
    let initial_cost = atoms.weighted_cost(rad);
    let mut work: std::collections::BTreeMap<usize, f64> = atoms.entries().collect();
    let mut plan = TransshipmentPlan::new();
    let mut transfers = Vec::new();
    let mut cost_trace = vec![initial_cost];
    let cap = atoms.len();

    while let Some((p, q)) = worst_violating_pair(x, rad, &work) {
        assert!(transfers.len() < cap, "each step zeroes an atom, so steps are capped");
        let (pos, neg) = if work[&p] > 0.0 { (p, q) } else { (q, p) };
        let a_pos = work[&pos];
        let a_neg = work[&neg];
        let t = if a_pos <= -a_neg {
            *work.get_mut(&pos).unwrap() = 0.0;
            *work.get_mut(&neg).unwrap() = a_neg + a_pos;
            a_pos
        } else {
            *work.get_mut(&neg).unwrap() = 0.0;
            *work.get_mut(&pos).unwrap() = a_pos + a_neg;
            -a_neg
        };
        work.retain(|_, &mut a| a != 0.0);
        plan.add_flow(pos, neg, t);
        transfers.push((pos, neg, t));
        let combined: f64 = work.iter().map(|(&p, &a)| a.abs() * rad.value(p)).sum::<f64>()
            + plan.cost(x);
        cost_trace.push(combined);
    }

    let rebalanced = AtomVector::new(rad, work);
    let final_cost = rebalanced.weighted_cost(rad) + plan.cost(x);
    let steps = transfers.len();
    RebalanceOutcome { atoms: rebalanced, plan, transfers, steps, initial_cost, final_cost, cost_trace }
}

/// Replays an ordered transfer list over an atom family, reproducing the
/// arithmetic of [`separated_rebalance`] operation for operation. The
/// result matches the rebalance's surviving atoms exactly — same bits —
/// because every step either subtracts the transfer from the positive
/// atom and lands on the same rounded sum, or cancels an atom to zero
/// outright, and exact zeros are dropped on both sides.
pub fn replay_transfers(
    rad: &RadTable,
    atoms: &AtomVector,
    transfers: &[(usize, usize, f64)],
) -> AtomVector {
    let mut work: std::collections::BTreeMap<usize, f64> = atoms.entries().collect();
    for &(pos, neg, t) in transfers {
        let a = work.get(&pos).copied().unwrap_or(0.0) - t;
        let b = work.get(&neg).copied().unwrap_or(0.0) + t;
        if a == 0.0 {
            work.remove(&pos);
        } else {
            work.insert(pos, a);
        }
        if b == 0.0 {
            work.remove(&neg);
        } else {
            work.insert(neg, b);
        }
    }
    AtomVector::new(rad, work)
}

/// The opposite-sign pair with the least separation slack
/// `d - (rad_p + rad_q) / 2`, or None when no opposite signs remain.
/// After [`separated_rebalance`] the slack is nonnegative exactly — it is
/// the loop's exit condition, not a tolerance.
pub fn worst_sign_separation(
    x: &PointedMetricSpace,
    rad: &RadTable,
    atoms: &AtomVector,
) -> Option<(usize, usize, f64)> {
    let mut worst: Option<(usize, usize, f64)> = None;
    for (p, ap) in atoms.entries() {
        for (q, aq) in atoms.entries().filter(|&(q, _)| q > p) {
            if ap * aq < 0.0 {
                let slack = x.dist(p, q) - (rad.value(p) + rad.value(q)) / 2.0;
                if worst.is_none_or(|(_, _, w)| slack < w) {
                    worst = Some((p, q, slack));
                }
            }
        }
    }
    worst
}

/// Local mass bound read off a ball: the smallest radius over the ball,
/// the bound `4 / theta` it certifies, and the atom mass actually inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBound {
    pub theta: f64,
    pub bound: f64,
    pub mass: f64,
}

/// Computes the mass bound data on `ball(p, r)`. Errors if any ball point
/// has radius 0, naming the witness: the bound `4 / theta` is only
/// meaningful on balls held strictly inside the carrier. Sampling with
/// `r` below `rad(p)` always succeeds.
pub fn mass_bound_check(
    x: &PointedMetricSpace,
    rad: &RadTable,
    atoms: &AtomVector,
    p: usize,
    r: f64,
) -> Result<MassBound, DecomposeError> {
    let ball = x.ball(p, r);
    let mut theta = f64::INFINITY;
    for q in ball.iter() {
        if rad.value(q) == 0.0 {
            return Err(DecomposeError::ZeroRadiusInBall { p, r, witness: q });
        }
        theta = theta.min(rad.value(q));
    }
    let mass = atoms
        .entries()
        .filter(|&(q, _)| ball.contains(q))
        .map(|(_, a)| a.abs())
        .sum();
    Ok(MassBound { theta, bound: 4.0 / theta, mass })
}
