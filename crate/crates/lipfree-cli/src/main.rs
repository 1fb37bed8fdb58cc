//! `lipfree`: norms, radius tables, lifts, certified decompositions,
//! weight operators, random instances, and property-verification reports
//! over finite pointed metric spaces.
//!
//! Input is a single JSON file (`--instance`) holding the instance and
//! whichever of `moments`, `carrier`, `atoms` the subcommand consumes.
//! Point indices refer to the normalized space: 0 is the adjoined
//! basepoint and raw point `k` becomes index `k + 1`. Results are JSON on
//! stdout, or in `--out`. Exit codes: 0 success, 1 a certified inequality
//! failed (the certificate is still emitted), 2 bad input, 3 solver
//! instability.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use lipfree::decompose::{
    close_pairs_decompose, far_pair_inequality, mass_bound_check, optimal_lift, replay_transfers,
    separated_rebalance, worst_sign_separation, DecomposeError,
};
use lipfree::free::{dual_norm, primal_norm, MomentVector, TransshipmentPlan};
use lipfree::ideal::{ideal_norm, AtomVector, RadTable};
use lipfree::instance::{random_raw_matrix, GeneratorKind, InstanceError, InstanceInput};
use lipfree::metric::{MetricError, PointSet, PointedMetricSpace};
use lipfree::operators::{OperatorError, WeightProfile};
use lipfree::solver::SolverError;
use lipfree::verify::{
    render_json, verify, verify_default_suite, CheckRecord, InstanceDescriptor, VerifyError,
    DEFAULT_TRIALS,
};

#[derive(Parser)]
#[command(
    name = "lipfree",
    version,
    about = "Norms, operators, and certified decompositions over finite pointed metric spaces"
)]
struct Cli {
    /// JSON input file with the instance and any moments/carrier/atoms
    /// the subcommand consumes.
    #[arg(long, global = true, value_name = "file.json")]
    instance: Option<PathBuf>,

    /// Seed for random generation and verification sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true, value_name = "file.json")]
    out: Option<PathBuf>,

    /// Comparison tolerance for floating-point cross-checks.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tolerance: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free norm of a moment vector: value, optimal transport plan, and
    /// a maximizing Lipschitz witness.
    Norm {
        /// Restrict to the ideal of functions vanishing off the carrier;
        /// the input file must then also hold a "carrier" array.
        #[arg(long)]
        ideal: bool,
    },
    /// Radius table of a carrier: distance needed to escape it, capped
    /// at 1, and zero off the carrier.
    Rad,
    /// Cheapest realization of a moment vector as transport flows plus
    /// radius-priced atoms, certified against the restricted norm.
    Lift,
    /// Split a vector of restricted norm below 1 into close flows and
    /// atoms with total cost below 3/c.
    Decompose {
        /// Close-pair constant in (0, 1]: flows survive only between
        /// points closer than c times the smaller endpoint radius.
        #[arg(long)]
        c: f64,
    },
    /// Cancel opposite-sign atoms until every pair is separated by the
    /// average of its radii, with a replayable transfer list.
    Rebalance,
    /// Check the ball mass bound: atom mass in ball(p, r) against
    /// 4 / (smallest radius over the ball).
    Masscheck {
        /// Ball center (index in the normalized space).
        #[arg(long)]
        p: usize,
        /// Ball radius.
        #[arg(long)]
        r: f64,
    },
    /// Apply the weight operator that scales moments down to a
    /// theta-neighborhood of a point set.
    Operator {
        /// Comma-separated point indices of the cutoff set.
        #[arg(long, value_delimiter = ',', required = true, value_name = "i,j,...")]
        set: Vec<usize>,
        /// Cutoff width; weights vanish beyond distance theta.
        #[arg(long)]
        theta: f64,
    },
    /// Generate a seeded random instance; its output feeds back into
    /// --instance unchanged.
    Random {
        /// Number of points before the basepoint is adjoined.
        #[arg(long)]
        n: usize,
        /// uniform-cube, clustered, or two-scale.
        #[arg(long, default_value = "uniform-cube")]
        generator: String,
    },
    /// Run the property-verification suite and emit a JSON report:
    /// the default three-instance battery, or --instance alone.
    Verify {
        /// Trials per instance.
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// A terminal failure: message for stderr plus the process exit code
/// (2 input error, 3 solver instability).
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure { code: 3, message: format!("solver: {e}") }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<OperatorError> for Failure {
    fn from(e: OperatorError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<DecomposeError> for Failure {
    fn from(e: DecomposeError) -> Self {
        match e {
            DecomposeError::Solver(s) => s.into(),
            other => Failure::input(other.to_string()),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Solver(s) => s.into(),
            other => Failure::input(other.to_string()),
        }
    }
}

/// The JSON input format. Unknown top-level fields are ignored so that
/// `random` output and annotated files load as instances directly.
#[derive(Debug, Default, Deserialize)]
struct CliInput {
    instance: Option<InstanceInput>,
    moments: Option<BTreeMap<String, f64>>,
    carrier: Option<Vec<usize>>,
    atoms: Option<BTreeMap<String, f64>>,
}

fn load_input(path: &Option<PathBuf>) -> Result<CliInput, Failure> {
    let Some(path) = path else {
        return Err(Failure::input("this subcommand needs --instance <file.json>"));
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Builds the normalized space; also returns the raw point count.
fn load_space(input: &CliInput) -> Result<(PointedMetricSpace, usize), Failure> {
    let inst = input
        .instance
        .as_ref()
        .ok_or_else(|| Failure::input("input file needs an \"instance\" object"))?;
    let raw = inst.raw_matrix()?;
    Ok((PointedMetricSpace::from_raw_matrix(&raw)?, raw.len()))
}

/// Parses a {"index": value} map, rejecting the basepoint (it carries no
/// mass), out-of-range indices, and non-finite values.
fn indexed_entries(
    map: &BTreeMap<String, f64>,
    what: &str,
    n: usize,
) -> Result<Vec<(usize, f64)>, Failure> {
    let mut entries = Vec::with_capacity(map.len());
    for (key, &value) in map {
        let p: usize = key
            .parse()
            .map_err(|_| Failure::input(format!("{what} key {key:?} is not a point index")))?;
        if p == 0 {
            return Err(Failure::input(format!(
                "{what} cannot load the basepoint (index 0): its point mass is the zero vector"
            )));
        }
        if p >= n {
            return Err(Failure::input(format!(
                "{what} index {p} is out of range; the normalized space has points 0..={}",
                n - 1
            )));
        }
        if !value.is_finite() {
            return Err(Failure::input(format!("{what} value at {p} is not finite")));
        }
        entries.push((p, value));
    }
    Ok(entries)
}

fn moments_field(input: &CliInput, n: usize) -> Result<MomentVector, Failure> {
    let map = input
        .moments
        .as_ref()
        .ok_or_else(|| Failure::input("input file needs a \"moments\" map"))?;
    Ok(MomentVector::from_entries(indexed_entries(map, "moments", n)?))
}

fn atoms_field(input: &CliInput, n: usize) -> Result<Vec<(usize, f64)>, Failure> {
    let map = input
        .atoms
        .as_ref()
        .ok_or_else(|| Failure::input("input file needs an \"atoms\" map"))?;
    indexed_entries(map, "atoms", n)
}

fn carrier_field(input: &CliInput, n: usize) -> Result<PointSet, Failure> {
    let indices = input
        .carrier
        .as_ref()
        .ok_or_else(|| Failure::input("input file needs a \"carrier\" array"))?;
    point_set(indices, "carrier", n, false)
}

fn point_set(indices: &[usize], what: &str, n: usize, allow_basepoint: bool) -> Result<PointSet, Failure> {
    let mut set = PointSet::new();
    for &p in indices {
        if p == 0 && !allow_basepoint {
            return Err(Failure::input(format!(
                "{what} lives in the non-basepoint points; index 0 is the adjoined basepoint"
            )));
        }
        if p >= n {
            return Err(Failure::input(format!(
                "{what} index {p} is out of range; the normalized space has points 0..={}",
                n - 1
            )));
        }
        set.insert(p);
    }
    if set.is_empty() {
        return Err(Failure::input(format!("{what} must name at least one point")));
    }
    Ok(set)
}

fn keyed<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> BTreeMap<String, f64> {
    entries.into_iter().map(|(p, a)| (p.to_string(), a)).collect()
}

fn set_list(set: &PointSet) -> Vec<usize> {
    set.iter().collect()
}

#[derive(Serialize)]
struct Flow {
    from: usize,
    to: usize,
    amount: f64,
}

fn flow_list(plan: &TransshipmentPlan) -> Vec<Flow> {
    plan.flows().map(|(from, to, amount)| Flow { from, to, amount }).collect()
}

/// One asserted inequality of a certificate: `ok` is `lhs <= rhs`, with
/// any tolerance already folded into `rhs`.
#[derive(Serialize)]
struct Inequality {
    name: &'static str,
    lhs: f64,
    rhs: f64,
    ok: bool,
}

fn check(name: &'static str, lhs: f64, rhs: f64) -> Inequality {
    Inequality { name, lhs, rhs, ok: lhs <= rhs }
}

/// The worst (largest) value of an iterator of violations, or 0 when
/// there is nothing to violate.
fn worst(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() { m } else { 0.0 }
}

#[derive(Serialize)]
struct Certificate<I: Serialize, O: Serialize> {
    inputs: I,
    outputs: O,
    asserted_inequalities: Vec<Inequality>,
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), Failure> {
    let text = render_json(value);
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Emits the certificate, then reports exit code 1 if any inequality
/// failed, naming the failures on stderr.
fn finish_certificate<I: Serialize, O: Serialize>(
    out: &Option<PathBuf>,
    cert: &Certificate<I, O>,
) -> Result<u8, Failure> {
    emit(out, cert)?;
    let failed: Vec<&str> =
        cert.asserted_inequalities.iter().filter(|i| !i.ok).map(|i| i.name).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("check failure: {}", failed.join(", "));
        Ok(1)
    }
}

#[derive(Serialize)]
struct NormOutput {
    value: f64,
    primal_cost: f64,
    dual_value: f64,
    duality_gap: f64,
    witness: Vec<f64>,
    plan: Vec<Flow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    atoms: Option<BTreeMap<String, f64>>,
}

fn cmd_norm(
    instance: &Option<PathBuf>,
    out: &Option<PathBuf>,
    tolerance: f64,
    ideal: bool,
) -> Result<u8, Failure> {
    let input = load_input(instance)?;
    let (x, _) = load_space(&input)?;
    let v = moments_field(&input, x.n())?;

    let output = if ideal {
        let a = carrier_field(&input, x.n())?;
        let (value, witness) = ideal_norm(&x, &a, &v)?;
        let rad = RadTable::new(&x, &a);
        let lift = optimal_lift(&x, &rad, &v)?;
        NormOutput {
            value,
            primal_cost: lift.cost,
            dual_value: value,
            duality_gap: (lift.cost - value).abs(),
            witness: witness.values().to_vec(),
            plan: flow_list(&lift.plan),
            carrier: Some(set_list(&a)),
            atoms: Some(keyed(lift.atoms.entries())),
        }
    } else {
        let (dual_value, witness) = dual_norm(&x, &v)?;
        let (primal_cost, plan) = primal_norm(&x, &v)?;
        NormOutput {
            value: dual_value,
            primal_cost,
            dual_value,
            duality_gap: (primal_cost - dual_value).abs(),
            witness: witness.values().to_vec(),
            plan: flow_list(&plan),
            carrier: None,
            atoms: None,
        }
    };
    emit(out, &output)?;
    if output.duality_gap <= tolerance {
        Ok(0)
    } else {
        eprintln!(
            "check failure: primal/dual gap {} exceeds tolerance {tolerance}",
            output.duality_gap
        );
        Ok(1)
    }
}

#[derive(Serialize)]
struct RadOutput {
    size: usize,
    carrier: Vec<usize>,
    rad: Vec<f64>,
}

fn cmd_rad(instance: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<u8, Failure> {
    let input = load_input(instance)?;
    let (x, _) = load_space(&input)?;
    let a = carrier_field(&input, x.n())?;
    let table = RadTable::new(&x, &a);
    let output = RadOutput {
        size: x.n(),
        carrier: set_list(&a),
        rad: x.points().map(|p| table.value(p)).collect(),
    };
    emit(out, &output)?;
    Ok(0)
}

#[derive(Serialize)]
struct MomentProblem {
    moments: BTreeMap<String, f64>,
    carrier: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
}

#[derive(Serialize)]
struct LiftOutputs {
    restricted_norm: f64,
    cost: f64,
    plan: Vec<Flow>,
    atoms: BTreeMap<String, f64>,
}

/// Largest coefficient drift, over positive-radius points, between `v`
/// and the moments realized by a plan plus atoms.
fn priced_drift(
    x: &PointedMetricSpace,
    rad: &RadTable,
    v: &MomentVector,
    plan: &TransshipmentPlan,
    atoms: &AtomVector,
) -> f64 {
    let realized = plan.moments().add(&atoms.to_moments());
    worst(
        (1..x.n())
            .filter(|&p| rad.value(p) > 0.0)
            .map(|p| (realized.coeff(p) - v.coeff(p)).abs()),
    )
}

fn cmd_lift(
    instance: &Option<PathBuf>,
    out: &Option<PathBuf>,
    tolerance: f64,
) -> Result<u8, Failure> {
    let input = load_input(instance)?;
    let (x, _) = load_space(&input)?;
    let v = moments_field(&input, x.n())?;
    let a = carrier_field(&input, x.n())?;
    let rad = RadTable::new(&x, &a);
    let (restricted_norm, _) = ideal_norm(&x, &a, &v)?;
    let lift = optimal_lift(&x, &rad, &v)?;

    let cert = Certificate {
        inputs: MomentProblem { moments: keyed(v.entries()), carrier: set_list(&a), c: None },
        outputs: LiftOutputs {
            restricted_norm,
            cost: lift.cost,
            plan: flow_list(&lift.plan),
            atoms: keyed(lift.atoms.entries()),
        },
        asserted_inequalities: vec![
            check(
                "lift-cost-matches-restricted-norm",
                (lift.cost - restricted_norm).abs(),
                tolerance,
            ),
            check(
                "lift-reconstructs-at-priced-points",
                priced_drift(&x, &rad, &v, &lift.plan, &lift.atoms),
                tolerance,
            ),
        ],
    };
    finish_certificate(out, &cert)
}

#[derive(Serialize)]
struct DecomposeOutputs {
    restricted_norm: f64,
    c: f64,
    cost: f64,
    close_plan: Vec<Flow>,
    atoms: BTreeMap<String, f64>,
}

fn cmd_decompose(
    instance: &Option<PathBuf>,
    out: &Option<PathBuf>,
    tolerance: f64,
    c: f64,
) -> Result<u8, Failure> {
    let input = load_input(instance)?;
    let (x, _) = load_space(&input)?;
    let v = moments_field(&input, x.n())?;
    let a = carrier_field(&input, x.n())?;
    let rad = RadTable::new(&x, &a);
    let dec = close_pairs_decompose(&x, &rad, &v, c)?;

    let close_worst = worst(
        dec.close_plan
            .flows()
            .map(|(p, q, _)| x.dist(p, q) - c * rad.value(p).min(rad.value(q))),
    );
    // Track the far pair with the least slack against 3d/c.
    let mut far = (0.0, tolerance);
    let mut far_gap = f64::NEG_INFINITY;
    for p in 1..x.n() {
        for q in (p + 1)..x.n() {
            if x.dist(p, q) > c * rad.value(p).min(rad.value(q)) {
                let (lhs, rhs) = far_pair_inequality(&x, &rad, p, q, c);
                if lhs - rhs > far_gap {
                    far_gap = lhs - rhs;
                    far = (lhs, rhs + tolerance);
                }
            }
        }
    }

    let cert = Certificate {
        inputs: MomentProblem { moments: keyed(v.entries()), carrier: set_list(&a), c: Some(c) },
        outputs: DecomposeOutputs {
            restricted_norm: dec.norm,
            c,
            cost: dec.cost,
            close_plan: flow_list(&dec.close_plan),
            atoms: keyed(dec.atoms.entries()),
        },
        asserted_inequalities: vec![
            check("restricted-norm-below-one", dec.norm, 1.0),
            check("cost-at-most-three-over-c", dec.cost, 3.0 / c + tolerance),
            check("close-flows-within-threshold", close_worst, 0.0),
            check("far-pair-radius-bound", far.0, far.1),
            check(
                "decomposition-reconstructs-at-priced-points",
                priced_drift(&x, &rad, &v, &dec.close_plan, &dec.atoms),
                tolerance,
            ),
        ],
    };
    finish_certificate(out, &cert)
}

#[derive(Serialize)]
struct AtomProblem {
    atoms: BTreeMap<String, f64>,
    carrier: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
}

#[derive(Serialize)]
struct RebalanceOutputs {
    initial_atoms: BTreeMap<String, f64>,
    atoms: BTreeMap<String, f64>,
    transfers: Vec<Flow>,
    steps: usize,
    initial_cost: f64,
    final_cost: f64,
    cost_trace: Vec<f64>,
}

/// Negated separation slack of the worst opposite-sign pair: at most 0
/// exactly when the family is separated.
fn separation_violation(
    x: &PointedMetricSpace,
    rad: &RadTable,
    atoms: &AtomVector,
) -> f64 {
    worst_sign_separation(x, rad, atoms).map_or(0.0, |(_, _, slack)| -slack)
}

fn cmd_rebalance(instance: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<u8, Failure> {
    let input = load_input(instance)?;
    let (x, _) = load_space(&input)?;
    let entries = atoms_field(&input, x.n())?;
    let a = carrier_field(&input, x.n())?;
    let rad = RadTable::new(&x, &a);
    let atoms = AtomVector::new(&rad, entries);

    let outcome = separated_rebalance(&x, &rad, &atoms);
    let replay_drift =
        replay_transfers(&rad, &atoms, &outcome.transfers).max_abs_diff(&outcome.atoms);
    let moment_drift = atoms
        .to_moments()
        .max_abs_diff(&outcome.atoms.to_moments().add(&outcome.plan.moments()));
    let step_worst = worst(outcome.cost_trace.windows(2).map(|w| w[1] - w[0]));

    let cert = Certificate {
        inputs: AtomProblem {
            atoms: keyed(atoms.entries()),
            carrier: set_list(&a),
            p: None,
            r: None,
        },
        outputs: RebalanceOutputs {
            initial_atoms: keyed(atoms.entries()),
            atoms: keyed(outcome.atoms.entries()),
            transfers: outcome
                .transfers
                .iter()
                .map(|&(from, to, amount)| Flow { from, to, amount })
                .collect(),
            steps: outcome.steps,
            initial_cost: outcome.initial_cost,
            final_cost: outcome.final_cost,
            cost_trace: outcome.cost_trace.clone(),
        },
        asserted_inequalities: vec![
            check("steps-at-most-initial-atoms", outcome.steps as f64, atoms.len() as f64),
            check("stepwise-cost-never-increases", step_worst, 1e-9),
            check("transfers-replay-bitwise", replay_drift, 0.0),
            check("moments-reconstruct", moment_drift, 1e-12),
            check(
                "final-atoms-are-separated",
                separation_violation(&x, &rad, &outcome.atoms),
                0.0,
            ),
        ],
    };
    finish_certificate(out, &cert)
}

#[derive(Serialize)]
struct MasscheckOutputs {
    theta: f64,
    bound: f64,
    mass: f64,
    cost: f64,
    ball: Vec<usize>,
}

fn cmd_masscheck(
    instance: &Option<PathBuf>,
    out: &Option<PathBuf>,
    tolerance: f64,
    p: usize,
    r: f64,
) -> Result<u8, Failure> {
    let input = load_input(instance)?;
    let (x, _) = load_space(&input)?;
    let entries = atoms_field(&input, x.n())?;
    let a = carrier_field(&input, x.n())?;
    if p >= x.n() {
        return Err(Failure::input(format!(
            "--p {p} is out of range; the normalized space has points 0..={}",
            x.n() - 1
        )));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(Failure::input(format!("--r must be a finite nonnegative radius, got {r}")));
    }
    let rad = RadTable::new(&x, &a);
    let atoms = AtomVector::new(&rad, entries);
    let mb = mass_bound_check(&x, &rad, &atoms, p, r)?;
    let cost = atoms.weighted_cost(&rad);

    let cert = Certificate {
        inputs: AtomProblem {
            atoms: keyed(atoms.entries()),
            carrier: set_list(&a),
            p: Some(p),
            r: Some(r),
        },
        outputs: MasscheckOutputs {
            theta: mb.theta,
            bound: mb.bound,
            mass: mb.mass,
            cost,
            ball: set_list(&x.ball(p, r)),
        },
        asserted_inequalities: vec![
            check("atoms-are-separated", separation_violation(&x, &rad, &atoms), 0.0),
            check("combined-cost-below-one", cost, 1.0),
            check("ball-mass-times-radius-below-cost", mb.mass * mb.theta, cost + tolerance),
            check("ball-mass-at-most-four-over-theta", mb.mass, mb.bound + tolerance),
        ],
    };
    finish_certificate(out, &cert)
}

#[derive(Serialize)]
struct OperatorInputs {
    moments: BTreeMap<String, f64>,
    set: Vec<usize>,
    theta: f64,
}

#[derive(Serialize)]
struct OperatorOutputs {
    theta: f64,
    set: Vec<usize>,
    lip_bound: f64,
    operator_bound: f64,
    weights: Vec<f64>,
    moments: BTreeMap<String, f64>,
    residual: BTreeMap<String, f64>,
}

fn cmd_operator(
    instance: &Option<PathBuf>,
    out: &Option<PathBuf>,
    tolerance: f64,
    set: &[usize],
    theta: f64,
) -> Result<u8, Failure> {
    let input = load_input(instance)?;
    let (x, _) = load_space(&input)?;
    let v = moments_field(&input, x.n())?;
    let e = point_set(set, "--set", x.n(), true)?;
    let w = WeightProfile::new(&x, &e, theta)?;

    let tv = w.apply_to_moments(&v);
    let residual = v.sub(&tv);
    let near = x.ball_of_set(&e, w.theta());
    let core = x.ball_of_set(&e, w.theta() / 2.0);
    let pinch_violations = tv
        .entries()
        .filter(|&(p, _)| v.coeff(p) == 0.0 || !near.contains(p))
        .count()
        + residual.entries().filter(|&(p, _)| core.contains(p)).count();
    let (norm_tv, _) = primal_norm(&x, &tv)?;
    let (norm_v, _) = primal_norm(&x, &v)?;

    let cert = Certificate {
        inputs: OperatorInputs { moments: keyed(v.entries()), set: set.to_vec(), theta },
        outputs: OperatorOutputs {
            theta: w.theta(),
            set: set_list(&e),
            lip_bound: w.lip_bound(),
            operator_bound: w.operator_bound(),
            weights: x.points().map(|p| w.value(p)).collect(),
            moments: keyed(tv.entries()),
            residual: keyed(residual.entries()),
        },
        asserted_inequalities: vec![
            check("scaled-supports-pinch-exactly", pinch_violations as f64, 0.0),
            check(
                "norm-inflation-at-most-bound",
                norm_tv,
                w.operator_bound() * norm_v + tolerance,
            ),
        ],
    };
    finish_certificate(out, &cert)
}

#[derive(Serialize)]
struct RandomOutput {
    generator: String,
    seed: u64,
    size: usize,
    instance: InstanceInput,
    normalized_matrix: Vec<Vec<f64>>,
}

fn cmd_random(
    out: &Option<PathBuf>,
    seed: u64,
    n: usize,
    generator: &str,
) -> Result<u8, Failure> {
    let kind: GeneratorKind = generator.parse().map_err(Failure::input)?;
    let raw = random_raw_matrix(kind, n, seed)?;
    let x = PointedMetricSpace::from_raw_matrix(&raw)?;
    let output = RandomOutput {
        generator: kind.name().to_string(),
        seed,
        size: n,
        instance: InstanceInput::from_matrix(raw),
        normalized_matrix: x.matrix(),
    };
    emit(out, &output)?;
    Ok(0)
}

fn cmd_verify(
    instance: &Option<PathBuf>,
    out: &Option<PathBuf>,
    seed: u64,
    tolerance: f64,
    trials: Option<usize>,
) -> Result<u8, Failure> {
    let trials = trials.unwrap_or(DEFAULT_TRIALS);
    let (failed, failing) = if instance.is_some() {
        let input = load_input(instance)?;
        let (x, size) = load_space(&input)?;
        let descriptor = InstanceDescriptor::new(seed, size, "file", &x);
        let report = verify(&x, descriptor, trials, seed, tolerance)?;
        eprintln!(
            "{} checks, {} failed, {:.2?}",
            report.summary.total, report.summary.failed, report.duration
        );
        emit(out, &report)?;
        (report.summary.failed, failing_names(report.records.iter()))
    } else {
        let suite = verify_default_suite(trials, seed, tolerance)?;
        eprintln!(
            "{} checks over {} instances, {} failed, {:.2?}",
            suite.summary.total,
            suite.reports.len(),
            suite.summary.failed,
            suite.duration
        );
        emit(out, &suite)?;
        (
            suite.summary.failed,
            failing_names(suite.reports.iter().flat_map(|rep| rep.records.iter())),
        )
    };
    if failed == 0 {
        Ok(0)
    } else {
        eprintln!("check failure: {}", failing.join(", "));
        Ok(1)
    }
}

fn failing_names<'a>(records: impl Iterator<Item = &'a CheckRecord>) -> Vec<String> {
    let mut names: Vec<String> =
        records.filter(|r| !r.pass).map(|r| r.name.clone()).collect();
    names.sort();
    names.dedup();
    names
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let Cli { instance, seed, out, tolerance, command } = cli;
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(Failure::input(format!(
            "--tolerance must be a finite nonnegative number, got {tolerance}"
        )));
    }
    match command {
        Command::Norm { ideal } => cmd_norm(&instance, &out, tolerance, ideal),
        Command::Rad => cmd_rad(&instance, &out),
        Command::Lift => cmd_lift(&instance, &out, tolerance),
        Command::Decompose { c } => cmd_decompose(&instance, &out, tolerance, c),
        Command::Rebalance => cmd_rebalance(&instance, &out),
        Command::Masscheck { p, r } => cmd_masscheck(&instance, &out, tolerance, p, r),
        Command::Operator { set, theta } => {
            cmd_operator(&instance, &out, tolerance, &set, theta)
        }
        Command::Random { n, generator } => cmd_random(&out, seed, n, &generator),
        Command::Verify { trials } => cmd_verify(&instance, &out, seed, tolerance, trials),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_grammar_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn indexed_entries_parse_and_validate() {
        let map: BTreeMap<String, f64> =
            [("1".to_string(), 0.5), ("3".to_string(), -2.0)].into_iter().collect();
        let entries = indexed_entries(&map, "moments", 4).unwrap();
        assert_eq!(entries, vec![(1, 0.5), (3, -2.0)]);

        let bad_key: BTreeMap<String, f64> = [("x".to_string(), 1.0)].into_iter().collect();
        assert!(indexed_entries(&bad_key, "moments", 4).is_err());

        let basepoint: BTreeMap<String, f64> = [("0".to_string(), 1.0)].into_iter().collect();
        assert!(indexed_entries(&basepoint, "moments", 4).is_err());

        let out_of_range: BTreeMap<String, f64> = [("4".to_string(), 1.0)].into_iter().collect();
        assert!(indexed_entries(&out_of_range, "moments", 4).is_err());

        let infinite: BTreeMap<String, f64> =
            [("1".to_string(), f64::INFINITY)].into_iter().collect();
        assert!(indexed_entries(&infinite, "moments", 4).is_err());
    }

    #[test]
    fn carrier_rejects_the_basepoint_but_operator_sets_accept_it() {
        assert!(point_set(&[0, 1], "carrier", 4, false).is_err());
        let set = point_set(&[0, 1], "--set", 4, true).unwrap();
        assert!(set.contains(0) && set.contains(1));
        assert!(point_set(&[], "carrier", 4, false).is_err());
        assert!(point_set(&[9], "carrier", 4, false).is_err());
    }

    #[test]
    fn checks_compare_with_the_tolerance_already_folded_in() {
        assert!(check("a", 1.0, 1.0).ok);
        assert!(!check("a", 1.0 + 1e-12, 1.0).ok);
        assert!(!check("a", f64::NAN, 1.0).ok);
        assert!(worst(std::iter::empty()) == 0.0);
        assert!(worst([-3.0, -1.0].into_iter()) == -1.0);
    }
}
