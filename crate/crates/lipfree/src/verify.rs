//! Randomized verification with structured, byte-stable reports.
//!
//! A verification run draws `trials` random scenarios on one space —
//! vectors, carriers, weight sets, widths — and evaluates every identity
//! and bound the library certifies, as named one-sided comparisons
//! `lhs <= rhs + tolerance`. Each check keeps only its worst observation
//! across trials, so a report stays small no matter how many trials run.
//! Reports serialize deterministically: rerunning with the same seed
//! yields identical bytes (wall-clock time is printed, never serialized).

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::{
    close_pairs_decompose, far_pair_inequality, mass_bound_check, optimal_lift,
    separated_rebalance, worst_sign_separation, DecomposeError,
};
use crate::free::{dual_norm, primal_norm, MomentVector};
use crate::ideal::{ideal_norm, interior_rad_margin, AtomVector, RadTable};
use crate::instance::{random_raw_matrix, GeneratorKind};
use crate::lip::{
    glue_separated, lip_norm, lip_norm_on, mcshane_extend, sup_norm, tent_bump,
    truncate_between, LipFunction,
};
use crate::metric::{PointSet, PointedMetricSpace};
use crate::operators::WeightProfile;
use crate::solver::SolverError;

pub const REPORT_SCHEMA: u32 = 1;

/// Trials per instance when the caller does not choose a count.
pub const DEFAULT_TRIALS: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("verification needs at least one trial")]
    NoTrials,
}

/// One named comparison, `lhs <= rhs + tolerance`, at its worst trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Stable label tying the check to the statement it exercises.
    pub anchor: String,
    /// The trial index where the comparison was tightest.
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

impl Summary {
    fn absorb(&mut self, other: &Summary) {
        self.total += other.total;
        self.passed += other.passed;
        self.failed += other.failed;
    }
}

/// Where the verified space came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub seed: u64,
    /// Raw point count, before the basepoint is adjoined.
    pub size: usize,
    pub generator: String,
    /// The normalized matrix actually verified, echoed for reproduction.
    pub matrix: Vec<Vec<f64>>,
}

impl InstanceDescriptor {
    pub fn new(seed: u64, size: usize, generator: &str, x: &PointedMetricSpace) -> Self {
        Self { seed, size, generator: generator.to_string(), matrix: x.matrix() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub instance: InstanceDescriptor,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
    /// Wall-clock time, reported on stderr only: serialized reports must
    /// not change between identical runs.
    #[serde(skip)]
    pub duration: Duration,
}

/// A batch of reports over several instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub reports: Vec<VerificationReport>,
    pub summary: Summary,
    #[serde(skip)]
    pub duration: Duration,
}

/// Keeps, per check name, the observation with the least slack.
struct Recorder {
    default_tol: f64,
    worst: BTreeMap<&'static str, (&'static str, usize, f64, f64, f64)>,
}

impl Recorder {
    fn new(default_tol: f64) -> Self {
        Self { default_tol, worst: BTreeMap::new() }
    }

    fn observe(&mut self, name: &'static str, anchor: &'static str, trial: usize, lhs: f64, rhs: f64) {
        self.observe_with(name, anchor, trial, lhs, rhs, self.default_tol);
    }

    fn observe_with(
        &mut self,
        name: &'static str,
        anchor: &'static str,
        trial: usize,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) {
        let gap = if lhs.is_finite() && rhs.is_finite() {
            lhs - rhs
        } else {
            f64::INFINITY
        };
        match self.worst.get(name) {
            Some(&(_, _, l, r, _)) if l - r >= gap => {}
            _ => {
                self.worst.insert(name, (anchor, trial, lhs, rhs, tol));
            }
        }
    }

    fn finish(self) -> (Vec<CheckRecord>, Summary) {
        let records: Vec<CheckRecord> = self
            .worst
            .into_iter()
            .map(|(name, (anchor, trial, lhs, rhs, tolerance))| CheckRecord {
                name: name.to_string(),
                anchor: anchor.to_string(),
                trial,
                lhs,
                rhs,
                tolerance,
                pass: lhs.is_finite() && rhs.is_finite() && lhs <= rhs + tolerance,
            })
            .collect();
        let passed = records.iter().filter(|r| r.pass).count();
        let summary = Summary { total: records.len(), passed, failed: records.len() - passed };
        (records, summary)
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> MomentVector {
    let k = rng.gen_range(1..=3.min(n - 1));
    MomentVector::from_entries(
        (0..k).map(|_| (rng.gen_range(1..n), rng.gen_range(-1.0..1.0))),
    )
}

fn random_carrier(rng: &mut ChaCha8Rng, n: usize) -> PointSet {
    loop {
        let set: PointSet = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if !set.is_empty() {
            return set;
        }
    }
}

/// Runs the full check inventory on one space.
pub fn verify(
    x: &PointedMetricSpace,
    instance: InstanceDescriptor,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<VerificationReport, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::NoTrials);
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = Recorder::new(tolerance);
    let n = x.n();

    for trial in 0..trials {
        let v = random_vector(&mut rng, n);
        let carrier = random_carrier(&mut rng, n);
        let theta = rng.gen_range(0.1..=2.0);
        let c = rng.gen_range(0.1..=1.0);
        let rad = RadTable::new(x, &carrier);

        // The transport program and its dual must meet; the returned
        // certificates must stand on their own.
        let (dual, witness) = dual_norm(x, &v)?;
        let (primal, plan) = primal_norm(x, &v)?;
        rec.observe("free-norm-duality-gap", "plumbing", trial, (dual - primal).abs(), 0.0);
        rec.observe_with(
            "free-norm-plan-reconstructs", "plumbing", trial,
            plan.moments().max_abs_diff(&v), 0.0, 1e-9,
        );
        rec.observe_with("dual-witness-is-lipschitz", "plumbing", trial, lip_norm(x, &witness), 1.0, 1e-9);
        rec.observe_with(
            "dual-witness-attains-value", "plumbing", trial,
            (v.eval(&witness) - dual).abs(), 0.0, 1e-9,
        );

        // Point masses see exactly the radius function; pairs see the
        // smaller of their distance and their radii sum.
        for _ in 0..2 {
            let p = rng.gen_range(1..n);
            let (value, _) = ideal_norm(x, &carrier, &MomentVector::delta(p))?;
            rec.observe("point-mass-restricted-norm", "prop:radInorm", trial, (value - rad.value(p)).abs(), 0.0);
        }
        for _ in 0..2 {
            let p = rng.gen_range(1..n);
            let q = rng.gen_range(1..n);
            if p == q {
                continue;
            }
            let pair = MomentVector::delta(p).sub(&MomentVector::delta(q));
            let (value, _) = ideal_norm(x, &carrier, &pair)?;
            let expect = x.dist(p, q).min(rad.value(p) + rad.value(q));
            rec.observe("pair-restricted-norm", "prop:radInorm", trial, (value - expect).abs(), 0.0);
        }

        // Balls held inside the carrier push the radius up everywhere on
        // a smaller concentric ball.
        if let Some(p) = carrier.iter().find(|&p| rad.value(p) > 0.0) {
            let r_prime = 0.95 * rad.value(p);
            let r = rng.gen_range(0.0..0.9) * r_prime;
            let margin = interior_rad_margin(x, &carrier, p, r, r_prime)
                .expect("sampling inside the radius keeps the ball in the carrier");
            rec.observe_with("interior-radius-margin", "prop:radIinf", trial, r_prime - r, margin, 1e-9);
        }

        // The cheapest flows-plus-atoms realization costs exactly the
        // restricted norm and matches the vector at priced points.
        let (inorm, _) = ideal_norm(x, &carrier, &v)?;
        let lift = optimal_lift(x, &rad, &v)?;
        rec.observe("lift-cost-matches-restricted-norm", "thm:quotient", trial, (lift.cost - inorm).abs(), 0.0);
        let realized = lift.plan.moments().add(&lift.atoms.to_moments());
        let worst_gap = x
            .points()
            .filter(|&p| p != 0 && rad.value(p) > 0.0)
            .map(|p| (realized.coeff(p) - v.coeff(p)).abs())
            .fold(0.0, f64::max);
        rec.observe_with("lift-reconstructs-on-carrier", "thm:quotient", trial, worst_gap, 0.0, 1e-9);
        let atoms_of_v = AtomVector::new(&rad, v.entries());
        let (embedded, _) = ideal_norm(x, &carrier, &atoms_of_v.to_moments())?;
        rec.observe("atom-embedding-contracts", "thm:quotient", trial, embedded, atoms_of_v.weighted_cost(&rad));

        // Vectors below norm 1 decompose into close flows and atoms at
        // certified cost; the far-pair conversion bound covers every
        // pair that partitioning can ever move.
        let atoms_for_rebalance = if inorm > 1e-9 {
            let scaled = v.scale((1.0 - 1e-6) / inorm);
            let d = match close_pairs_decompose(x, &rad, &scaled, c) {
                Ok(d) => d,
                Err(DecomposeError::Solver(e)) => return Err(e.into()),
                Err(e) => panic!("scaled input satisfies the contract: {e}"),
            };
            rec.observe("close-pair-cost-certificate", "lem:quotientclose", trial, d.cost, 3.0 / c);
            let close_worst = d
                .close_plan
                .flows()
                .map(|(p, q, _)| x.dist(p, q) - c * rad.value(p).min(rad.value(q)))
                .fold(f64::NEG_INFINITY, f64::max);
            if close_worst.is_finite() {
                rec.observe_with("close-flows-are-close", "lem:quotientclose", trial, close_worst, 0.0, 0.0);
            }
            d.atoms
        } else {
            AtomVector::new(&rad, v.entries())
        };
        for p in x.points() {
            for q in x.points().filter(|&q| q > p) {
                if x.dist(p, q) > c * rad.value(p).min(rad.value(q)) {
                    let (lhs, rhs) = far_pair_inequality(x, &rad, p, q, c);
                    rec.observe_with("far-pair-radius-bound", "eq:3c-1", trial, lhs, rhs, 1e-9);
                }
            }
        }

        // Weight ramps: slope within 2/theta, supports pinched exactly,
        // multiplication self-adjoint and norm-bounded.
        let e = random_carrier(&mut rng, n);
        let w = WeightProfile::new(x, &e, theta).expect("nonempty set, positive width");
        for p in x.points() {
            for q in x.points().filter(|&q| q > p) {
                rec.observe_with(
                    "weight-slope-bound", "def:T", trial,
                    (w.value(p) - w.value(q)).abs(), w.lip_bound() * x.dist(p, q), 1e-9,
                );
            }
        }
        let tv = w.apply_to_moments(&v);
        let kept = v.support().intersection(&x.ball_of_set(&e, theta));
        let near = x.ball_of_set(&e, theta / 2.0);
        let pinch_violations = tv.support().iter().filter(|&p| !kept.contains(p)).count()
            + v.sub(&tv).support().iter().filter(|&p| near.contains(p)).count();
        rec.observe_with("weight-support-pinch", "def:T", trial, pinch_violations as f64, 0.0, 0.0);
        let (tv_norm, _) = dual_norm(x, &tv)?;
        rec.observe("weight-norm-inflation", "prop:T", trial, tv_norm, w.operator_bound() * dual);
        rec.observe_with(
            "weight-adjointness", "prop:T", trial,
            (tv.eval(&witness) - v.eval(&w.apply_to_function(&witness))).abs(), 0.0, 1e-12,
        );
        if !v.is_zero() {
            let own = WeightProfile::new(x, &v.support(), theta).expect("support is nonempty");
            rec.observe_with(
                "support-weight-fixes-vector", "prop:Tconv", trial,
                own.apply_to_moments(&v).max_abs_diff(&v), 0.0, 0.0,
            );
        }

        // Background function calculus: the normalized shape of the
        // space, McShane extension, the product rule, truncation between
        // envelopes, and gluing separated pieces.
        let mut shape_worst: f64 = 0.0;
        let mut max_pair: f64 = 0.0;
        for p in x.points() {
            if p != 0 {
                shape_worst = shape_worst.max((x.dist(0, p) - 1.0).abs());
            }
            for q in x.points().filter(|&q| q > p) {
                max_pair = max_pair.max(x.dist(p, q));
            }
        }
        rec.observe_with(
            "metric-normalization-shape", "plumbing", trial,
            shape_worst.max((max_pair - 1.0).abs()), 0.0, 0.0,
        );

        let mut partial = std::collections::BTreeMap::from([(0usize, 0.0f64)]);
        for p in 1..n {
            if rng.gen_bool(0.5) {
                partial.insert(p, witness.value(p));
            }
        }
        let domain: PointSet = partial.keys().copied().collect();
        let extension = mcshane_extend(x, &partial);
        let agree = partial
            .iter()
            .map(|(&p, &v)| (extension.value(p) - v).abs())
            .fold(0.0, f64::max);
        rec.observe_with("mcshane-extension-agrees", "plumbing", trial, agree, 0.0, 0.0);
        rec.observe_with(
            "mcshane-extension-lipschitz", "plumbing", trial,
            lip_norm(x, &extension), lip_norm_on(x, &extension, &domain), 1e-9,
        );

        let bump = tent_bump(x, rng.gen_range(1..n), rng.gen_range(0.0..=1.0));
        let product = LipFunction::new(
            (0..n).map(|p| witness.value(p) * bump.value(p)).collect(),
        );
        rec.observe_with(
            "lipschitz-product-rule", "plumbing", trial,
            lip_norm(x, &product),
            lip_norm(x, &witness) * sup_norm(&bump) + sup_norm(&witness) * lip_norm(x, &bump),
            1e-9,
        );

        let floor = tent_bump(x, rng.gen_range(1..n), rng.gen_range(0.0..=1.0)).scale(-1.0);
        let ceiling = tent_bump(x, rng.gen_range(1..n), rng.gen_range(0.0..=1.0));
        let clamped = truncate_between(&floor, &witness, &ceiling);
        let envelope_breach = (0..n)
            .map(|p| {
                (floor.value(p) - clamped.value(p)).max(clamped.value(p) - ceiling.value(p))
            })
            .fold(0.0, f64::max);
        rec.observe_with("truncation-within-envelopes", "plumbing", trial, envelope_breach, 0.0, 0.0);
        rec.observe_with(
            "truncation-stays-lipschitz", "plumbing", trial,
            lip_norm(x, &clamped),
            lip_norm(x, &witness).max(lip_norm(x, &floor)).max(lip_norm(x, &ceiling)),
            1e-9,
        );

        if n >= 3 {
            let p = rng.gen_range(1..n);
            let q = loop {
                let q = rng.gen_range(1..n);
                if q != p {
                    break q;
                }
            };
            // Two single-point pieces at distance exactly theta/2: the
            // hardest legal configuration for the glue bound.
            let glue_theta = 2.0 * x.dist(p, q);
            let pieces = vec![
                std::collections::BTreeMap::from([(p, rng.gen_range(-1.0..=1.0))]),
                std::collections::BTreeMap::from([(q, rng.gen_range(-1.0..=1.0))]),
            ];
            let glued = glue_separated(x, &pieces, glue_theta)
                .expect("singleton pieces at distance theta/2 are a legal gluing");
            rec.observe_with(
                "glue-slope-bound", "thm:Schur", trial,
                lip_norm_on(x, &glued.f, &glued.domain), glued.bound, 1e-9,
            );
        }

        // Rebalancing terminates in at most one step per atom, never
        // raises the cost, reconstructs its input, and leaves surviving
        // opposite-sign atoms separated — exactly, not approximately.
        let out = separated_rebalance(x, &rad, &atoms_for_rebalance);
        rec.observe_with("rebalance-step-count", "lem:quotientfinite", trial, out.steps as f64, atoms_for_rebalance.len() as f64, 0.0);
        rec.observe_with("rebalance-cost-monotone", "lem:quotientseparated", trial, out.final_cost, out.initial_cost, 1e-9);
        let back = out.atoms.to_moments().add(&out.plan.moments());
        rec.observe_with(
            "rebalance-reconstructs", "lem:quotientseparated", trial,
            back.max_abs_diff(&atoms_for_rebalance.to_moments()), 0.0, 1e-12,
        );
        let slack = worst_sign_separation(x, &rad, &out.atoms).map_or(0.0, |(_, _, s)| s);
        rec.observe_with("rebalance-separation", "lem:quotientseparated", trial, -slack, 0.0, 0.0);

        // Interior balls control atom mass: mass times the smallest
        // radius in the ball never beats the atom cost, and cost below 1
        // yields the flat 4/theta bound.
        let atom_cost = out.atoms.weighted_cost(&rad);
        for (p, _) in out.atoms.entries().take(3) {
            let mb = mass_bound_check(x, &rad, &out.atoms, p, 0.9 * rad.value(p))
                .expect("atom support has positive radius");
            rec.observe_with("ball-mass-times-radius", "thm:Schur", trial, mb.mass * mb.theta, atom_cost, 1e-9);
            if atom_cost < 1.0 {
                rec.observe_with("ball-mass-bound", "thm:Schur", trial, mb.mass, mb.bound, 1e-9);
            }
        }
    }

    let (records, summary) = rec.finish();
    Ok(VerificationReport {
        schema: REPORT_SCHEMA,
        instance,
        records,
        summary,
        duration: start.elapsed(),
    })
}

/// The default battery: three generated instances of increasing size,
/// one per generator family.
pub const DEFAULT_SUITE: [(GeneratorKind, usize); 3] = [
    (GeneratorKind::UniformCube, 4),
    (GeneratorKind::Clustered, 8),
    (GeneratorKind::TwoScale, 12),
];

/// Verifies the default battery, deriving one seed per instance.
pub fn verify_default_suite(
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<SuiteReport, VerifyError> {
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut summary = Summary::default();
    for (i, (kind, size)) in DEFAULT_SUITE.into_iter().enumerate() {
        let instance_seed = seed.wrapping_add(i as u64);
        let raw = random_raw_matrix(kind, size, instance_seed).expect("suite sizes are positive");
        let x = PointedMetricSpace::from_raw_matrix(&raw).expect("generated matrices are metrics");
        let descriptor = InstanceDescriptor::new(instance_seed, size, kind.name(), &x);
        let report = verify(&x, descriptor, trials, instance_seed, tolerance)?;
        summary.absorb(&report.summary);
        reports.push(report);
    }
    Ok(SuiteReport { schema: REPORT_SCHEMA, reports, summary, duration: start.elapsed() })
}

/// Serializes any report deterministically: pretty JSON, trailing newline.
pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}
